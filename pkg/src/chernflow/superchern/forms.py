"""Bigraded operator-valued forms and superconnection curvature.

Forms carry a noncommutative degree k (raised by the polarization
differential) and a base degree l (raised by the exterior derivative along
chart coordinates).  Only strictly increasing axis tuples are stored;
evaluation on permuted tuples picks up the permutation sign.  The exterior
derivative is spectral along periodic axes and a fourth-order finite
difference along interval axes.

Sign conventions: the polarization differential acts on a bidegree (k, l)
form as (-1)^l (eps X + X eps) for odd k and (-1)^l (eps X - X eps) for even
k, which makes it square to zero and anticommute with d.  The wedge product
carries the Koszul sign (-1)^(l1 k2) for moving base-form factors past
noncommutative degree.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ..opcore import TruncOp


@dataclass(frozen=True)
class ChartAxis:
    name: str
    samples: np.ndarray
    periodic: bool = False

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1 or len(s) < 5:
            raise ValueError("axis needs a 1-D grid with at least 5 samples")
        steps = np.diff(s)
        if np.max(np.abs(steps - steps[0])) > 1e-12 * max(abs(steps[0]), 1e-300):
            raise ValueError("axis grid must be uniform")
        object.__setattr__(self, "samples", s)

    @property
    def step(self) -> float:
        return float(self.samples[1] - self.samples[0])


@dataclass(frozen=True)
class Chart:
    name: str
    axes: tuple[ChartAxis, ...]

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(ax.samples) for ax in self.axes)

    @property
    def ndim(self) -> int:
        return len(self.axes)


def _axis_derivative(values: np.ndarray, axis_index: int, axis: ChartAxis) -> np.ndarray:
    """Derivative of grid data along one chart axis.

    Spectral for periodic axes; a fourth-order five-point stencil (one-sided
    at the edges) for interval axes, exact on polynomials of degree <= 4.
    """
    v = np.moveaxis(values, axis_index, 0)
    n = v.shape[0]
    if axis.periodic:
        k = np.fft.fftfreq(n, d=1.0 / n)
        if n % 2 == 0:
            k[n // 2] = 0.0
        length = axis.step * n
        scale = 2.0 * np.pi / length
        shape = (n,) + (1,) * (v.ndim - 1)
        out = np.fft.ifft(
            np.fft.fft(v, axis=0) * (1j * k * scale).reshape(shape), axis=0
        )
    else:
        h = axis.step
        out = np.empty_like(v)
        if n < 5:
            raise ValueError("interval axis too short for the stencil")
        out[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * h)
        # one-sided fourth-order stencils at the boundary
        c0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12 * h)
        c1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / (12 * h)
        out[0] = np.tensordot(c0, v[:5], axes=(0, 0))
        out[1] = np.tensordot(c1, v[:5], axes=(0, 0))
        out[-1] = -np.tensordot(c0, v[-5:][::-1], axes=(0, 0))
        out[-2] = -np.tensordot(c1, v[-5:][::-1], axes=(0, 0))
    return np.moveaxis(out, 0, axis_index)


class BigradedForm:
    """Operator-valued form of bidegree (delta_degree, base_degree).

    ``comps`` maps strictly increasing axis-index tuples to arrays of shape
    chart.shape + (S, S).  Missing tuples are zero.
    """

    __slots__ = ("chart", "delta_degree", "base_degree", "op_dim", "comps")

    def __init__(self, chart: Chart, delta_degree: int, base_degree: int,
                 comps: dict, op_dim: int):
        if delta_degree < 0 or base_degree < 0:
            raise ValueError("degrees must be nonnegative")
        clean = {}
        for axes, arr in comps.items():
            axes = tuple(int(a) for a in axes)
            if len(axes) != base_degree or list(axes) != sorted(set(axes)):
                raise ValueError("component keys must be increasing tuples of length l")
            if any(a < 0 or a >= chart.ndim for a in axes):
                raise ValueError("axis index out of range")
            a = np.asarray(arr, dtype=complex)
            if a.shape != chart.shape + (op_dim, op_dim):
                raise ValueError(
                    f"component shape {a.shape} != {chart.shape + (op_dim, op_dim)}"
                )
            clean[axes] = a
        object.__setattr__(self, "chart", chart)
        object.__setattr__(self, "delta_degree", int(delta_degree))
        object.__setattr__(self, "base_degree", int(base_degree))
        object.__setattr__(self, "op_dim", int(op_dim))
        object.__setattr__(self, "comps", clean)

    def __setattr__(self, name, value):
        raise AttributeError("BigradedForm is immutable")

    @classmethod
    def zero(cls, chart: Chart, k: int, l: int, op_dim: int) -> "BigradedForm":
        return cls(chart, k, l, {}, op_dim)

    def component(self, axes: tuple[int, ...]) -> np.ndarray:
        """Component on an arbitrary axis tuple, with the permutation sign."""
        order = tuple(sorted(axes))
        if len(set(axes)) != len(axes):
            return np.zeros(self.chart.shape + (self.op_dim, self.op_dim), complex)
        sign = _permutation_sign(axes)
        base = self.comps.get(order)
        if base is None:
            return np.zeros(self.chart.shape + (self.op_dim, self.op_dim), complex)
        return sign * base

    def _check(self, other: "BigradedForm") -> None:
        if (
            self.chart is not other.chart and self.chart != other.chart
        ) or self.op_dim != other.op_dim:
            raise ValueError("forms live on different charts")

    def __add__(self, other: "BigradedForm") -> "BigradedForm":
        self._check(other)
        if (self.delta_degree, self.base_degree) != (
            other.delta_degree,
            other.base_degree,
        ):
            raise ValueError("can only add forms of equal bidegree")
        out = dict(self.comps)
        for axes, arr in other.comps.items():
            out[axes] = out[axes] + arr if axes in out else arr
        return BigradedForm(
            self.chart, self.delta_degree, self.base_degree, out, self.op_dim
        )

    def __sub__(self, other: "BigradedForm") -> "BigradedForm":
        return self + (-1.0) * other

    def __mul__(self, scalar) -> "BigradedForm":
        return BigradedForm(
            self.chart,
            self.delta_degree,
            self.base_degree,
            {k: v * complex(scalar) for k, v in self.comps.items()},
            self.op_dim,
        )

    __rmul__ = __mul__

    def max_abs(self) -> float:
        if not self.comps:
            return 0.0
        return max(float(np.max(np.abs(v))) for v in self.comps.values())


def _permutation_sign(axes) -> int:
    sign = 1
    axes = list(axes)
    for i in range(len(axes)):
        for j in range(i + 1, len(axes)):
            if axes[i] > axes[j]:
                sign = -sign
    return sign


def _merge_sign(left: tuple[int, ...], right: tuple[int, ...]) -> int:
    """Shuffle sign of concatenating two increasing tuples into sorted order."""
    inv = 0
    for a in left:
        inv += sum(1 for b in right if b < a)
    return -1 if inv % 2 else 1


def _eps_matrix(eps) -> np.ndarray:
    return eps.matrix if isinstance(eps, TruncOp) else np.asarray(eps, dtype=complex)


def delta_apply(form: BigradedForm, eps) -> BigradedForm:
    """Polarization differential: parity rule in k, dressed by (-1)^l."""
    e = _eps_matrix(eps)
    sign = -1.0 if form.base_degree % 2 else 1.0
    odd = form.delta_degree % 2 == 1
    out = {}
    for axes, arr in form.comps.items():
        left = np.einsum("ij,...jk->...ik", e, arr)
        right = np.einsum("...ij,jk->...ik", arr, e)
        out[axes] = sign * (left + right) if odd else sign * (left - right)
    return BigradedForm(form.chart, form.delta_degree + 1, form.base_degree, out,
                        form.op_dim)


def d_apply(form: BigradedForm) -> BigradedForm:
    """Exterior derivative along the chart coordinates."""
    chart = form.chart
    out: dict = {}
    for axes, arr in form.comps.items():
        for a in range(chart.ndim):
            if a in axes:
                continue
            d_arr = _axis_derivative(arr, a, chart.axes[a])
            pos = sum(1 for x in axes if x < a)
            sign = -1.0 if pos % 2 else 1.0
            key = tuple(sorted(axes + (a,)))
            term = sign * d_arr
            out[key] = out[key] + term if key in out else term
    return BigradedForm(form.chart, form.delta_degree, form.base_degree + 1, out,
                        form.op_dim)


def wedge(f1: BigradedForm, f2: BigradedForm) -> BigradedForm:
    """Graded product; bidegrees add, with the Koszul sign (-1)^(l1 k2)."""
    f1._check(f2)
    koszul = -1.0 if (f1.base_degree * f2.delta_degree) % 2 else 1.0
    out: dict = {}
    for ax1, a1 in f1.comps.items():
        for ax2, a2 in f2.comps.items():
            if set(ax1) & set(ax2):
                continue
            key = tuple(sorted(ax1 + ax2))
            sign = koszul * _merge_sign(ax1, ax2)
            term = sign * np.einsum("...ij,...jk->...ik", a1, a2)
            out[key] = out[key] + term if key in out else term
    return BigradedForm(
        f1.chart,
        f1.delta_degree + f2.delta_degree,
        f1.base_degree + f2.base_degree,
        out,
        f1.op_dim,
    )


def random_form(chart: Chart, k: int, l: int, op_dim: int, seed: int) -> BigradedForm:
    rng = np.random.default_rng(seed)
    comps = {}
    for axes in combinations(range(chart.ndim), l):
        shape = chart.shape + (op_dim, op_dim)
        comps[axes] = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    return BigradedForm(chart, k, l, comps, op_dim)


def random_band_limited_form(
    chart: Chart, k: int, l: int, op_dim: int, seed: int, band: int = 3
) -> BigradedForm:
    """Random form whose grid dependence is band-limited along every axis."""
    rng = np.random.default_rng(seed)
    comps = {}
    for axes in combinations(range(chart.ndim), l):
        arr = np.zeros(chart.shape + (op_dim, op_dim), dtype=complex)
        base = rng.normal(size=(2 * band + 1,) * chart.ndim + (op_dim, op_dim)) \
            + 1j * rng.normal(size=(2 * band + 1,) * chart.ndim + (op_dim, op_dim))
        mesh = np.meshgrid(
            *[ax.samples for ax in chart.axes], indexing="ij"
        )
        lengths = [
            ax.step * len(ax.samples) if ax.periodic else
            (ax.samples[-1] - ax.samples[0])
            for ax in chart.axes
        ]
        for idx in np.ndindex(*(2 * band + 1,) * chart.ndim):
            wavenum = [i - band for i in idx]
            phase = np.zeros(chart.shape)
            for axd, (kk, xs, ll) in enumerate(zip(wavenum, mesh, lengths)):
                phase = phase + 2.0 * np.pi * kk * xs / ll
            arr += np.exp(1j * phase)[..., None, None] * base[idx]
        comps[axes] = arr / (2 * band + 1) ** chart.ndim
    return BigradedForm(chart, k, l, comps, op_dim)


# -- superconnection curvature -------------------------------------------------


@dataclass(frozen=True)
class SuperConn:
    """Local superconnection data on one chart.

    ``b`` is the odd operator-valued 0-form (noncommutative degree one) and
    ``theta`` the operator-valued base 1-form; ``eps`` the polarization.
    """

    chart: Chart
    eps: np.ndarray
    b: BigradedForm
    theta: BigradedForm

    def __post_init__(self):
        if self.b.base_degree != 0 or self.b.delta_degree != 1:
            raise ValueError("b must have bidegree (1, 0)")
        if self.theta.base_degree != 1 or self.theta.delta_degree != 0:
            raise ValueError("theta must have bidegree (0, 1)")

    @classmethod
    def build(cls, chart: Chart, eps, b_values: np.ndarray,
              theta_values: dict) -> "SuperConn":
        e = _eps_matrix(eps)
        s = e.shape[0]
        b = BigradedForm(chart, 1, 0, {(): b_values}, s)
        theta = BigradedForm(chart, 0, 1, {(int(a),): v for a, v in theta_values.items()}, s)
        return cls(chart=chart, eps=e, b=b, theta=theta)


def supercurvature(conn: SuperConn) -> tuple[BigradedForm, BigradedForm, BigradedForm]:
    """Graded curvature components of delta + B + (d + theta).

    Returns (F20, F11, F02) with

        F20 = eps B + B eps + B^2
        F11 = [eps, theta] + dB + [B, theta]
        F02 = d theta + theta^2.
    """
    chart, e = conn.chart, conn.eps
    s = conn.b.op_dim
    b_arr = conn.b.comps.get((), np.zeros(chart.shape + (s, s), complex))

    eb = np.einsum("ij,...jk->...ik", e, b_arr)
    be = np.einsum("...ij,jk->...ik", b_arr, e)
    bb = np.einsum("...ij,...jk->...ik", b_arr, b_arr)
    f20 = BigradedForm(chart, 2, 0, {(): eb + be + bb}, s)

    f11_comps = {}
    db = d_apply(conn.b)
    for a in range(chart.ndim):
        th = conn.theta.comps.get((a,))
        term = db.comps.get((a,), np.zeros(chart.shape + (s, s), complex)).copy()
        if th is not None:
            term += np.einsum("ij,...jk->...ik", e, th) - np.einsum(
                "...ij,jk->...ik", th, e
            )
            term += np.einsum("...ij,...jk->...ik", b_arr, th) - np.einsum(
                "...ij,...jk->...ik", th, b_arr
            )
        f11_comps[(a,)] = term
    f11 = BigradedForm(chart, 1, 1, f11_comps, s)

    dth = d_apply(conn.theta)
    thth = wedge(conn.theta, conn.theta)
    f02 = dth + thth
    return f20, f11, f02


# -- transgression forms -------------------------------------------------------

_GL_NODES = 16


def _gauss_legendre_01(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def chern_simons(aform: BigradedForm, n: int, nodes: int = _GL_NODES) -> dict:
    """Transgression form of degree 2n - 1 of an operator-valued 1-form.

    Computes n * integral_0^1 tr(A F_t^(n-1)) dt with F_t = t dA + t^2 A^2 by
    Gauss-Legendre quadrature in t; n = 1 returns the plain trace of A.  The
    result maps increasing axis tuples of length 2n - 1 to scalar grid data.
    """
    if n < 1:
        raise ValueError("transgression degree must be >= 1")
    if aform.base_degree != 1:
        raise ValueError("expected an operator-valued 1-form")
    chart = aform.chart
    if n == 1:
        return {
            axes: np.trace(arr, axis1=-2, axis2=-1)
            for axes, arr in aform.comps.items()
        }
    da = d_apply(aform)
    aa = wedge(aform, aform)
    ts, ws = _gauss_legendre_01(nodes)
    out: dict = {}
    for t, w in zip(ts, ws):
        ft = float(t) * da + float(t * t) * aa
        power = ft
        for _ in range(n - 2):
            power = wedge(power, ft)
        integrand = wedge(aform, power)
        for axes, arr in integrand.comps.items():
            tr = np.trace(arr, axis1=-2, axis2=-1)
            out[axes] = out.get(axes, 0.0) + n * w * tr
    return out
