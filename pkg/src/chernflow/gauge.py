"""Gauge fields and group-valued maps on the circle.

Fields are anti-hermitian matrix-valued functions sampled on a uniform
power-of-two grid; group maps are pointwise-unitary sample arrays.  Both
carry their Fourier data through the grid transform in :mod:`.opcore`, so
band-limited data round-trips exactly and multiplication operators can be
built directly from either object.

The derivative of band-limited data is taken spectrally.  The base point is
the grid sample at phi = 0; "based" maps equal the identity there.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .opcore import fourier_coefficients, grid_samples

ANTIHERM_TOL = 1e-12
UNITARY_TOL = 1e-12

_ALGEBRA_DIM = {"u1": 1, "su2": 2}
_GROUP_DIM = {"U1": 1, "SU2": 2}
_GROUP_OF = {"u1": "U1", "su2": "SU2"}
_ALGEBRA_OF = {"U1": "u1", "SU2": "su2"}

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


class GroupMismatch(ValueError):
    """Operands carry incompatible gauge groups or grids."""


class ConnectionSolveError(RuntimeError):
    """The based Laplace solve did not reach the required residual."""


def circle_grid(n: int) -> np.ndarray:
    """Uniform sample points 2*pi*j/n."""
    return 2.0 * np.pi * np.arange(n) / n


def _check_grid(n: int) -> None:
    if n < 4 or (n & (n - 1)) != 0:
        raise ValueError("grid size must be a power of two (>= 4)")


def circle_derivative(samples: np.ndarray) -> np.ndarray:
    """Spectral derivative of uniformly sampled periodic data."""
    n = samples.shape[0]
    k = np.fft.fftfreq(n, d=1.0 / n)
    k[n // 2] = 0.0  # Nyquist mode carries no usable derivative
    shape = (n,) + (1,) * (samples.ndim - 1)
    return np.fft.ifft(np.fft.fft(samples, axis=0) * (1j * k).reshape(shape), axis=0)


def _as_matrix_samples(samples, d: int) -> np.ndarray:
    arr = np.asarray(samples, dtype=complex)
    if arr.ndim == 1:
        arr = arr[:, None, None]
    if arr.ndim != 3 or arr.shape[1:] != (d, d):
        raise ValueError(f"samples must have shape (n, {d}, {d})")
    return arr


def _algebra_project(samples: np.ndarray, algebra: str) -> np.ndarray:
    """Remove roundoff off the algebra: anti-hermitize (and detrace for su2).

    Used by algebra-preserving operations whose spectral derivatives leave
    1e-14-scale hermitian noise on otherwise exact results.
    """
    out = 0.5 * (samples - np.conj(np.transpose(samples, (0, 2, 1))))
    if algebra == "su2":
        tr = np.trace(out, axis1=1, axis2=2) / 2.0
        out = out - tr[:, None, None] * np.eye(2)
    return out


class GaugeField:
    """Lie-algebra valued function on the circle (a connection coefficient).

    ``algebra`` is ``"u1"`` or ``"su2"``; values are anti-hermitian (and
    traceless for su2) at every sample within 1e-12.
    """

    __slots__ = ("algebra", "samples")

    def __init__(self, algebra: str, samples):
        if algebra not in _ALGEBRA_DIM:
            raise ValueError(f"unknown algebra {algebra!r}")
        d = _ALGEBRA_DIM[algebra]
        arr = _as_matrix_samples(samples, d)
        _check_grid(arr.shape[0])
        herm = np.max(np.abs(arr + np.conj(np.transpose(arr, (0, 2, 1)))))
        if herm > ANTIHERM_TOL * max(1.0, float(np.max(np.abs(arr)))):
            raise ValueError("gauge field values must be anti-hermitian")
        if algebra == "su2":
            tr = np.max(np.abs(np.trace(arr, axis1=1, axis2=2)))
            if tr > ANTIHERM_TOL * max(1.0, float(np.max(np.abs(arr)))):
                raise ValueError("su2 values must be traceless")
        arr.setflags(write=False)
        object.__setattr__(self, "algebra", algebra)
        object.__setattr__(self, "samples", arr)

    def __setattr__(self, name, value):
        raise AttributeError("GaugeField is immutable")

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, algebra: str, grid: int) -> "GaugeField":
        d = _ALGEBRA_DIM[algebra]
        return cls(algebra, np.zeros((grid, d, d), dtype=complex))

    @classmethod
    def constant(cls, algebra: str, value, grid: int) -> "GaugeField":
        d = _ALGEBRA_DIM[algebra]
        v = np.asarray(value, dtype=complex).reshape(d, d)
        return cls(algebra, np.broadcast_to(v, (grid, d, d)).copy())

    @classmethod
    def from_fourier(cls, algebra: str, fhat, grid: int) -> "GaugeField":
        return cls(algebra, grid_samples(fhat, grid))

    @classmethod
    def random(
        cls, algebra: str, band: int, seed: int, grid: int, amplitude: float = 1.0
    ) -> "GaugeField":
        """Band-limited random field with the anti-hermitian symmetry."""
        rng = np.random.default_rng(seed)
        d = _ALGEBRA_DIM[algebra]
        fhat = np.zeros((2 * band + 1, d, d), dtype=complex)
        if algebra == "u1":
            fhat[band, 0, 0] = 1j * rng.normal()
            for k in range(1, band + 1):
                c = rng.normal() + 1j * rng.normal()
                fhat[band + k, 0, 0] = c
                fhat[band - k, 0, 0] = -np.conj(c)
        else:
            coeff = rng.normal(size=3)
            fhat[band] = 1j * np.einsum("a,aij->ij", coeff, PAULI)
            for k in range(1, band + 1):
                c = rng.normal(size=3) + 1j * rng.normal(size=3)
                m = np.einsum("a,aij->ij", c, PAULI)
                fhat[band + k] = 1j * m
                fhat[band - k] = 1j * m.conj().T
        return cls.from_fourier(algebra, fhat * amplitude, grid)

    # -- properties ---------------------------------------------------------

    @property
    def grid(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return _ALGEBRA_DIM[self.algebra]

    def fourier_coefficients(self, band: int | None = None) -> np.ndarray:
        return fourier_coefficients(self.samples, band)

    def derivative(self) -> np.ndarray:
        return circle_derivative(self.samples)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.samples))) if self.samples.size else 0.0

    # -- arithmetic ---------------------------------------------------------

    def _check(self, other: "GaugeField") -> None:
        if self.algebra != other.algebra or self.grid != other.grid:
            raise GroupMismatch("gauge fields live on different algebras or grids")

    def __add__(self, other: "GaugeField") -> "GaugeField":
        self._check(other)
        return GaugeField(self.algebra, self.samples + other.samples)

    def __sub__(self, other: "GaugeField") -> "GaugeField":
        self._check(other)
        return GaugeField(self.algebra, self.samples - other.samples)

    def __mul__(self, scalar) -> "GaugeField":
        return GaugeField(self.algebra, self.samples * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "GaugeField":
        return GaugeField(self.algebra, -self.samples)

    # -- serialization ------------------------------------------------------

    def to_json(self) -> str:
        flat = self.samples.ravel()
        return json.dumps(
            {
                "algebra": self.algebra,
                "grid_size": self.grid,
                "samples": [[float(z.real), float(z.imag)] for z in flat],
            }
        )

    @classmethod
    def from_json(cls, payload: str) -> "GaugeField":
        obj = json.loads(payload)
        d = _ALGEBRA_DIM[obj["algebra"]]
        n = int(obj["grid_size"])
        flat = np.array([complex(re, im) for re, im in obj["samples"]])
        return cls(obj["algebra"], flat.reshape(n, d, d))


def _pointwise_exp(samples: np.ndarray) -> np.ndarray:
    """exp of anti-hermitian samples; closed form for 1x1 and 2x2 fibers."""
    d = samples.shape[1]
    if d == 1:
        return np.exp(samples)
    # X = i b I + i v . sigma with b, v real
    b = np.real(np.trace(samples, axis1=1, axis2=2) / 2j)
    v = np.real(
        np.einsum("nij,aji->na", samples, PAULI) / 2j
    )  # components of v
    a = np.linalg.norm(v, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(a[:, None] > 0, v / np.where(a[:, None] > 0, a[:, None], 1.0), 0.0)
    nsig = np.einsum("na,aij->nij", unit, PAULI)
    eye = np.eye(d)
    out = (
        np.cos(a)[:, None, None] * eye
        + 1j * np.sin(a)[:, None, None] * nsig
    )
    return np.exp(1j * b)[:, None, None] * out


class GroupMap:
    """Group-valued function on the circle, sampled on a uniform grid.

    Unitary at every sample within 1e-12; ``based`` maps equal the identity
    at the phi = 0 sample.
    """

    __slots__ = ("group", "samples")

    def __init__(self, group: str, samples):
        if group not in _GROUP_DIM:
            raise ValueError(f"unknown group {group!r}")
        d = _GROUP_DIM[group]
        arr = _as_matrix_samples(samples, d)
        _check_grid(arr.shape[0])
        uerr = np.max(
            np.abs(
                np.einsum("nij,nkj->nik", arr, arr.conj()) - np.eye(d)
            )
        )
        if uerr > UNITARY_TOL * 10:
            raise ValueError("group map samples must be unitary")
        if group == "SU2":
            det = arr[:, 0, 0] * arr[:, 1, 1] - arr[:, 0, 1] * arr[:, 1, 0]
            if np.max(np.abs(det - 1.0)) > 1e-10:
                raise ValueError("SU2 samples must have unit determinant")
        arr.setflags(write=False)
        object.__setattr__(self, "group", group)
        object.__setattr__(self, "samples", arr)

    def __setattr__(self, name, value):
        raise AttributeError("GroupMap is immutable")

    # -- constructors -------------------------------------------------------

    @classmethod
    def identity(cls, group: str, grid: int) -> "GroupMap":
        d = _GROUP_DIM[group]
        return cls(group, np.broadcast_to(np.eye(d), (grid, d, d)).copy())

    @classmethod
    def exponential(cls, field: GaugeField) -> "GroupMap":
        """Pointwise exponential of an algebra-valued function."""
        return cls(_GROUP_OF[field.algebra], _pointwise_exp(field.samples))

    @classmethod
    def winding(cls, n: int, grid: int) -> "GroupMap":
        """The based U(1) map e^(i n phi)."""
        return cls("U1", np.exp(1j * n * circle_grid(grid))[:, None, None])

    # -- properties ---------------------------------------------------------

    @property
    def grid(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return _GROUP_DIM[self.group]

    @property
    def based(self) -> bool:
        return float(np.max(np.abs(self.samples[0] - np.eye(self.dim)))) <= 1e-10

    def band(self, rel_tol: float = 1e-10) -> int:
        fhat = self.fourier_coefficients()
        mags = np.max(np.abs(fhat), axis=(1, 2))
        scale = float(mags.max())
        half = fhat.shape[0] // 2
        live = np.nonzero(mags > rel_tol * scale)[0]
        return int(np.max(np.abs(live - half))) if live.size else 0

    def fourier_coefficients(self, band: int | None = None) -> np.ndarray:
        return fourier_coefficients(self.samples, band)

    # -- group operations ---------------------------------------------------

    def _check(self, other: "GroupMap") -> None:
        if self.group != other.group or self.grid != other.grid:
            raise GroupMismatch("group maps live on different groups or grids")

    def compose(self, other: "GroupMap") -> "GroupMap":
        """Pointwise product self * other (function-space composition)."""
        self._check(other)
        return GroupMap(self.group, np.einsum("nij,njk->nik", self.samples, other.samples))

    def inverse(self) -> "GroupMap":
        return GroupMap(self.group, np.conj(np.transpose(self.samples, (0, 2, 1))))

    def derivative(self) -> np.ndarray:
        return circle_derivative(self.samples)

    def maurer_cartan(self) -> GaugeField:
        """h^-1 h' as a gauge field."""
        hp = self.derivative()
        mc = np.einsum("nij,njk->nik", self.inverse().samples, hp)
        return GaugeField(
            _ALGEBRA_OF[self.group],
            _algebra_project(mc, _ALGEBRA_OF[self.group]),
        )

    # -- serialization ------------------------------------------------------

    def to_json(self) -> str:
        flat = self.samples.ravel()
        return json.dumps(
            {
                "group": self.group,
                "grid_size": self.grid,
                "samples": [[float(z.real), float(z.imag)] for z in flat],
            }
        )

    @classmethod
    def from_json(cls, payload: str) -> "GroupMap":
        obj = json.loads(payload)
        d = _GROUP_DIM[obj["group"]]
        n = int(obj["grid_size"])
        flat = np.array([complex(re, im) for re, im in obj["samples"]])
        return cls(obj["group"], flat.reshape(n, d, d))


# -- gauge action and the divergence solver -----------------------------------


def gauge_action(a: GaugeField, h: GroupMap) -> GaugeField:
    """Right action A^h = h^-1 A h + h^-1 h'."""
    if _GROUP_OF[a.algebra] != h.group or a.grid != h.grid:
        raise GroupMismatch("field and group map are incompatible")
    hinv = h.inverse().samples
    conj = np.einsum("nij,njk,nkl->nil", hinv, a.samples, h.samples)
    mc = np.einsum("nij,njk->nik", hinv, h.derivative())
    return GaugeField(a.algebra, _algebra_project(conj + mc, a.algebra))


def covariant_derivative(a: GaugeField, x: GaugeField) -> GaugeField:
    """D^A X = X' + [A, X] on the grid."""
    if a.algebra != x.algebra or a.grid != x.grid:
        raise GroupMismatch("field and argument are incompatible")
    comm = np.einsum("nij,njk->nik", a.samples, x.samples) - np.einsum(
        "nij,njk->nik", x.samples, a.samples
    )
    return GaugeField(
        a.algebra, _algebra_project(circle_derivative(x.samples) + comm, a.algebra)
    )


def _algebra_basis(algebra: str) -> np.ndarray:
    if algebra == "u1":
        return np.array([[[1j]]])
    return 1j * PAULI


def _field_to_vec(x: GaugeField) -> np.ndarray:
    basis = _algebra_basis(x.algebra)
    # real coefficients against the basis i*sigma (or i for u1)
    coeff = np.real(
        np.einsum("nij,aji->na", x.samples, basis.conj()) / float(
            np.einsum("aij,aji->a", basis, basis.conj())[0].real
        )
    )
    return coeff.T.ravel()


def _vec_to_field(vec: np.ndarray, algebra: str, grid: int) -> GaugeField:
    basis = _algebra_basis(algebra)
    coeff = vec.reshape(len(basis), grid).T
    return GaugeField(algebra, np.einsum("na,aij->nij", coeff, basis))


def _laplacian_matrix(a: GaugeField) -> tuple[np.ndarray, int, int]:
    """Real matrix of (D^A)^2 in the algebra-coefficient coordinates."""
    algebra, grid = a.algebra, a.grid
    n_basis = len(_algebra_basis(algebra))
    dim = n_basis * grid
    cols = np.empty((dim, dim))
    for j in range(dim):
        e = np.zeros(dim)
        e[j] = 1.0
        x = _vec_to_field(e, algebra, grid)
        cols[:, j] = _field_to_vec(
            covariant_derivative(a, covariant_derivative(a, x))
        )
    return cols, n_basis, dim


def _nyquist_rows(n_basis: int, grid: int) -> np.ndarray:
    """Rows pinning the Nyquist coefficient of each algebra component to zero.

    The spectral derivative cannot represent the Nyquist mode, which leaves
    a spurious kernel in the discrete Laplacian (exactly so in the abelian
    case); these rows remove it from the least-squares solution without
    biasing band-limited data.
    """
    rows = np.zeros((n_basis, n_basis * grid))
    alt = np.cos(np.pi * np.arange(grid)) / grid  # (-1)^j / n
    for a in range(n_basis):
        rows[a, a * grid : (a + 1) * grid] = alt
    return rows


def as_connection_theta(
    a: GaugeField, b: GaugeField, tol: float = 1e-8
) -> GaugeField:
    """Connection form of the divergence-based horizontal split.

    Solves Delta_A X = D^A B on based functions (X vanishing at phi = 0) by a
    least-squares solve with the basepoint coordinates eliminated, and
    returns X.  Tautological on vertical directions (B = D^A X0 recovers X0)
    and zero on divergence-free B; for tangent vectors outside the span of
    those two families the based equation can be unsolvable, which surfaces
    as the residual error below.
    """
    if a.algebra != b.algebra or a.grid != b.grid:
        raise GroupMismatch("field and tangent vector are incompatible")
    algebra, grid = a.algebra, a.grid
    cols, n_basis, dim = _laplacian_matrix(a)
    rhs = _field_to_vec(covariant_derivative(a, b))
    based = np.ones(dim, dtype=bool)
    based[np.arange(n_basis) * grid] = False  # coordinates pinned to zero at phi=0
    nyq = _nyquist_rows(n_basis, grid)
    system = np.vstack([cols[:, based], nyq[:, based]])
    target = np.concatenate([rhs, np.zeros(n_basis)])
    sol, *_ = np.linalg.lstsq(system, target, rcond=None)
    full = np.zeros(dim)
    full[based] = sol
    resid = float(np.linalg.norm(cols[:, based] @ sol - rhs))
    if resid > tol * max(1.0, float(np.linalg.norm(rhs))):
        raise ConnectionSolveError("connection solve failed")
    return _vec_to_field(full, algebra, grid)


def horizontal_projection(a: GaugeField, b: GaugeField) -> GaugeField:
    """Divergence-free part of b: subtracts D^A Y with Delta_A Y = div_A b.

    The auxiliary solve runs over all (not necessarily based) functions; the
    minimum-norm least-squares solution exists because div_A of anything is
    orthogonal to the covariantly constant kernel fields.
    """
    if a.algebra != b.algebra or a.grid != b.grid:
        raise GroupMismatch("field and tangent vector are incompatible")
    cols, n_basis, _ = _laplacian_matrix(a)
    rhs = _field_to_vec(covariant_derivative(a, b))
    nyq = _nyquist_rows(n_basis, a.grid)
    system = np.vstack([cols, nyq])
    target = np.concatenate([rhs, np.zeros(n_basis)])
    sol, *_ = np.linalg.lstsq(system, target, rcond=None)
    y = _vec_to_field(sol, a.algebra, a.grid)
    return b - covariant_derivative(a, y)


# -- two-chart abelian moduli model -------------------------------------------


@dataclass(frozen=True)
class U1ModuliModel:
    """Constant-connection sections over a two-chart cover of the holonomy circle.

    Chart ``alpha`` covers holonomy parameters (-0.55, 0.55) and ``beta``
    covers (0.45, winding + 0.55); the wrap identifies c with c + winding
    through the based map e^(i winding phi).  A nonzero ``tilt`` bends each
    section off the horizontal family so that the pulled-back connection
    form and the base-point derivative terms are non-trivial.
    """

    winding: int = 1
    tilt: float = 0.0
    grid: int = 64

    ALPHA = ("alpha", -0.55, 0.55)
    BETA_LO = 0.45

    @property
    def charts(self) -> dict:
        return {
            "alpha": (-0.55, 0.55),
            "beta": (self.BETA_LO, self.winding + 0.55),
        }

    def _tilt_profile(self, chart: str) -> np.ndarray:
        phi = circle_grid(self.grid)
        if chart == "alpha":
            return 1j * (np.cos(phi) - 1.0)
        return 1j * np.sin(phi)

    def field(self, c: float) -> GaugeField:
        """The constant connection with holonomy e^(2 pi i c)."""
        return GaugeField.constant("u1", 1j * c, self.grid)

    def holonomy(self, c: float) -> complex:
        return complex(np.exp(2j * np.pi * c))

    def section(self, chart: str, c: float) -> GaugeField:
        lo, hi = self.charts[chart]
        if not (lo < c < hi):
            raise ValueError(f"{c} outside chart {chart}")
        xi = self._tilt_profile(chart)
        dxi = circle_derivative(xi)
        vals = 1j * c + c * self.tilt * dxi
        return GaugeField("u1", vals[:, None, None])

    def section_derivative(self, chart: str, c: float) -> GaugeField:
        xi = self._tilt_profile(chart)
        dxi = circle_derivative(xi)
        vals = 1j * np.ones(self.grid) + self.tilt * dxi
        return GaugeField("u1", vals[:, None, None])

    def overlap_to_beta(self, c_alpha: float) -> float:
        """Beta coordinate of an alpha point lying in an overlap."""
        if 0.45 < c_alpha < 0.55:
            return c_alpha
        if -0.55 < c_alpha < -0.45:
            return c_alpha + self.winding
        raise ValueError(f"{c_alpha} is not in a chart overlap")

    def transition(self, c_alpha: float) -> GroupMap:
        """Based transition g with section_beta = (section_alpha)^g."""
        c_beta = self.overlap_to_beta(c_alpha)
        phi = circle_grid(self.grid)
        chi = c_beta * self.tilt * self._tilt_profile("beta") - (
            c_alpha * self.tilt * self._tilt_profile("alpha")
        )
        wind = 0 if c_beta == c_alpha else self.winding
        vals = np.exp(1j * wind * phi + chi)
        return GroupMap("U1", vals[:, None, None])


def u1_moduli_model(winding: int = 1, tilt: float = 0.0, grid: int = 64) -> U1ModuliModel:
    return U1ModuliModel(winding=winding, tilt=tilt, grid=grid)


# -- loop families on the two-sphere ------------------------------------------


@dataclass(frozen=True)
class LoopFamily:
    """Family of based SU(2) loops parametrized by a unit vector.

    ``standard``: g(n)(phi) = exp(i f(phi) n.sigma) with f(0) = 0 and
    f(2 pi) = 2 pi n, closing the loop.  ``odd_path``: the same profile on
    [0, pi] reaching f(pi) = n pi (n odd, so the value -1 is reached for
    every direction), continued on [pi, 2 pi] by a fixed path from -1 to +1.
    """

    n: int
    variant: str = "standard"
    profile: Callable | None = None
    profile_derivative: Callable | None = None

    def __post_init__(self):
        if self.variant not in ("standard", "odd_path"):
            raise ValueError(f"unknown loop variant {self.variant!r}")
        if self.variant == "odd_path" and self.n % 2 == 0:
            raise ValueError("odd_path requires an odd winding parameter")
        f = self.f
        if abs(float(f(np.array([0.0]))[0])) > 1e-12:
            raise ValueError("profile must vanish at phi = 0")
        if self.variant == "standard":
            end = float(f(np.array([2.0 * np.pi]))[0])
            if abs(end - 2.0 * np.pi * self.n) > 1e-12:
                raise ValueError("profile must reach 2 pi n at phi = 2 pi")
        else:
            end = float(f(np.array([np.pi]))[0])
            if abs(end - np.pi * self.n) > 1e-12:
                raise ValueError("odd_path profile must reach n pi at phi = pi")

    @property
    def f(self) -> Callable:
        if self.profile is not None:
            return self.profile
        return lambda phi: self.n * np.asarray(phi, dtype=float)

    @property
    def fprime(self) -> Callable:
        if self.profile is not None:
            if self.profile_derivative is None:
                raise ValueError("custom profiles need an explicit derivative")
            return self.profile_derivative
        return lambda phi: self.n * np.ones_like(np.asarray(phi, dtype=float))

    # fixed return path for the odd variant: exp(i (2 pi - phi) sigma_3)
    @staticmethod
    def return_path(phis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Samples h(phi) and h'(phi) of the -1 -> +1 connector on [pi, 2 pi]."""
        v = 2.0 * np.pi - np.asarray(phis, dtype=float)
        h = (
            np.cos(v)[:, None, None] * np.eye(2)
            + 1j * np.sin(v)[:, None, None] * PAULI[2]
        )
        hp = (
            np.sin(v)[:, None, None] * np.eye(2)
            - 1j * np.cos(v)[:, None, None] * PAULI[2]
        )
        return h, hp


def unit_vector(theta, psi) -> np.ndarray:
    """Point on the two-sphere in spherical coordinates (broadcasting)."""
    theta = np.asarray(theta, dtype=float)
    psi = np.asarray(psi, dtype=float)
    return np.stack(
        [np.sin(theta) * np.cos(psi), np.sin(theta) * np.sin(psi), np.cos(theta)],
        axis=-1,
    )


def loop_su2(fam: LoopFamily, nhat, grid: int = 256) -> GroupMap:
    """Sample the loop g(nhat) on a phi grid as an SU(2) group map."""
    nhat = np.asarray(nhat, dtype=float)
    if abs(float(np.linalg.norm(nhat)) - 1.0) > 1e-12:
        raise ValueError("direction vector must have unit length")
    phis = circle_grid(grid)
    nsig = np.einsum("a,aij->ij", nhat, PAULI)
    if fam.variant == "standard":
        fv = np.asarray(fam.f(phis), dtype=float)
        vals = (
            np.cos(fv)[:, None, None] * np.eye(2)
            + 1j * np.sin(fv)[:, None, None] * nsig
        )
    else:
        vals = np.empty((grid, 2, 2), dtype=complex)
        first = phis <= np.pi + 1e-15
        fv = np.asarray(fam.f(phis[first]), dtype=float)
        vals[first] = (
            np.cos(fv)[:, None, None] * np.eye(2)
            + 1j * np.sin(fv)[:, None, None] * nsig
        )
        h, _ = LoopFamily.return_path(phis[~first])
        vals[~first] = h
    return GroupMap("SU2", vals)
