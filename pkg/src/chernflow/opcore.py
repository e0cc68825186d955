"""Dense operator algebra on finite Fourier-mode truncations of L2(S^1, C^d).

A truncation keeps the modes |k| <= N of vector-valued functions on the
circle and represents every operator as a dense complex matrix in the fixed
basis order (modes ascending, internal index fastest).  Two mode conventions
are supported:

* ``"half"``: k in Z + 1/2, modes +-1/2, ..., +-(N - 1/2).  The mode-value
  diagonal operator is invertible.
* ``"integer"``: k in Z, modes -N..N, with sign(0) = +1.  The mode-value
  operator has a d-dimensional kernel at k = 0.

Everything is immutable after construction; all reductions (traces, norms)
run in the fixed basis order so results are reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

HERMITIAN_TOL = 1e-10
UNITARY_TOL = 1e-10
KERNEL_SV_THRESHOLD = 1e-6
KERNEL_SV_GAP = 1e3


class ContextMismatch(ValueError):
    """Operands live on different truncations."""


class BandTooWide(ValueError):
    """Symbol band exceeds what the truncation can represent."""


class IllConditionedIndex(ArithmeticError):
    """Singular values near the kernel threshold; index count unreliable."""


@dataclass(frozen=True)
class TruncationContext:
    """Finite Fourier truncation of L2(S^1, C^d).

    Parameters
    ----------
    cutoff : int
        Mode cutoff N (modes kept have |k| <= N).
    internal_dim : int
        Fiber dimension d.
    convention : str
        ``"half"`` for half-integer modes (invertible mode operator) or
        ``"integer"`` for integer modes with sign(0) = +1.
    graded : bool
        Whether a chirality grading may be installed (requires even d).
    """

    cutoff: int
    internal_dim: int = 1
    convention: str = "half"
    graded: bool = False

    def __post_init__(self):
        if self.cutoff < 1:
            raise ValueError("cutoff must be a positive integer")
        if self.internal_dim < 1:
            raise ValueError("internal_dim must be a positive integer")
        if self.convention not in ("half", "integer"):
            raise ValueError(f"unknown mode convention {self.convention!r}")
        if self.graded and self.internal_dim % 2:
            raise ValueError("graded context requires even internal_dim")

    @property
    def modes(self) -> np.ndarray:
        """Mode values in ascending order."""
        n = self.cutoff
        if self.convention == "half":
            return np.arange(-n + 0.5, n + 0.5, 1.0)
        return np.arange(-n, n + 1, 1.0)

    @property
    def size(self) -> int:
        return len(self.modes) * self.internal_dim

    @property
    def basis_modes(self) -> np.ndarray:
        """Mode value of each basis vector (internal index fastest)."""
        return np.repeat(self.modes, self.internal_dim)

    def mode_signs(self) -> np.ndarray:
        """Polarization signs per basis vector; sign(0) = +1."""
        m = self.basis_modes
        return np.where(m >= 0, 1.0, -1.0)

    def window_mask(self, window: float) -> np.ndarray:
        """Boolean mask of basis vectors with |mode| <= window."""
        return np.abs(self.basis_modes) <= window + 1e-12


class TruncOp:
    """Dense operator on a :class:`TruncationContext`.

    Thin immutable wrapper around a square complex matrix; arithmetic checks
    that both operands share one context.  Hermiticity/unitarity flags are
    certified lazily against a 1e-10 operator-norm residual and cached.
    """

    __slots__ = ("context", "_m", "_flags")

    def __init__(self, context: TruncationContext, matrix):
        m = np.array(matrix, dtype=complex)
        if m.shape != (context.size, context.size):
            raise ValueError(
                f"matrix shape {m.shape} does not match context size {context.size}"
            )
        m.setflags(write=False)
        object.__setattr__(self, "context", context)
        object.__setattr__(self, "_m", m)
        object.__setattr__(self, "_flags", {})

    def __setattr__(self, name, value):
        raise AttributeError("TruncOp is immutable")

    @property
    def matrix(self) -> np.ndarray:
        return self._m

    # -- arithmetic ---------------------------------------------------------

    def _check(self, other: "TruncOp") -> None:
        if self.context != other.context:
            raise ContextMismatch("operands belong to different truncation contexts")

    def __add__(self, other):
        self._check(other)
        return TruncOp(self.context, self._m + other._m)

    def __sub__(self, other):
        self._check(other)
        return TruncOp(self.context, self._m - other._m)

    def __neg__(self):
        return TruncOp(self.context, -self._m)

    def __mul__(self, scalar):
        return TruncOp(self.context, self._m * complex(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return TruncOp(self.context, self._m / complex(scalar))

    def __matmul__(self, other):
        self._check(other)
        return TruncOp(self.context, self._m @ other._m)

    @property
    def H(self) -> "TruncOp":
        return TruncOp(self.context, self._m.conj().T)

    def inv(self) -> "TruncOp":
        return TruncOp(self.context, np.linalg.inv(self._m))

    # -- certified flags ----------------------------------------------------

    def _residual(self, kind: str) -> float:
        if kind == "hermitian":
            return op_norm_matrix(self._m - self._m.conj().T)
        if kind == "anti_hermitian":
            return op_norm_matrix(self._m + self._m.conj().T)
        if kind == "unitary":
            return op_norm_matrix(
                self._m @ self._m.conj().T - np.eye(self.context.size)
            )
        raise KeyError(kind)

    def flag_residual(self, kind: str) -> float:
        if kind not in self._flags:
            self._flags[kind] = self._residual(kind)
        return self._flags[kind]

    @property
    def is_hermitian(self) -> bool:
        return self.flag_residual("hermitian") <= HERMITIAN_TOL

    @property
    def is_anti_hermitian(self) -> bool:
        return self.flag_residual("anti_hermitian") <= HERMITIAN_TOL

    @property
    def is_unitary(self) -> bool:
        return self.flag_residual("unitary") <= UNITARY_TOL

    def __repr__(self):
        c = self.context
        return f"TruncOp(N={c.cutoff}, d={c.internal_dim}, {c.convention})"


# -- elementwise reductions and norms ---------------------------------------


def op_norm_matrix(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, 2)) if m.size else 0.0


def op_norm(x: TruncOp) -> float:
    """Spectral norm."""
    return op_norm_matrix(x.matrix)


def frobenius_norm(x: TruncOp) -> float:
    return float(np.linalg.norm(x.matrix))


def trace(x: TruncOp) -> complex:
    """Plain trace in the fixed basis order."""
    return complex(np.trace(x.matrix))


def schatten_norm(x: TruncOp, p: float) -> float:
    """(sum sigma_i^p)^(1/p) over the singular values sigma_i.

    Requires p >= 1.
    """
    if p < 1:
        raise ValueError("Schatten norm requires p >= 1")
    s = np.linalg.svd(x.matrix, compute_uv=False)
    if p == 1:
        return float(np.sum(s))
    if p == 2:
        return float(np.sqrt(np.sum(s * s)))
    return float(np.sum(s**p) ** (1.0 / p))


def commutator(x: TruncOp, y: TruncOp) -> TruncOp:
    return x @ y - y @ x


def anticommutator(x: TruncOp, y: TruncOp) -> TruncOp:
    return x @ y + y @ x


def window_trace(x: TruncOp, window: float) -> complex:
    """Trace over the interior basis vectors with |mode| <= window."""
    mask = x.context.window_mask(window)
    return complex(np.sum(np.diag(x.matrix)[mask]))


def windowed_matrix(x: TruncOp, window: float) -> np.ndarray:
    """Sub-matrix on the interior window (rows and columns)."""
    mask = x.context.window_mask(window)
    return x.matrix[np.ix_(mask, mask)]


def windowed_op_norm(x: TruncOp, window: float) -> float:
    return op_norm_matrix(windowed_matrix(x, window))


# -- constructors ------------------------------------------------------------


def make_polarization(ctx: TruncationContext) -> TruncOp:
    """Diagonal +-1 sign operator over the modes (sign(0) = +1).

    Satisfies eps^2 = 1 and eps* = eps exactly.
    """
    return TruncOp(ctx, np.diag(ctx.mode_signs().astype(complex)))


def make_dirac(ctx: TruncationContext) -> TruncOp:
    """Diagonal mode-value operator (times identity on the fiber).

    With the polarization from :func:`make_polarization` it satisfies
    eps * D0 = D0 * eps = |D0| entrywise.  Invertible iff the context uses
    the half-integer convention; use :func:`dirac_is_invertible` to query.
    """
    return TruncOp(ctx, np.diag(ctx.basis_modes.astype(complex)))


def dirac_is_invertible(ctx: TruncationContext) -> bool:
    return ctx.convention == "half"


def make_grading(ctx: TruncationContext) -> TruncOp:
    """Chirality involution acting on the fiber index (+1/-1 alternating).

    Requires a graded context (even internal dimension).  Commutes with the
    mode-sign polarization exactly.
    """
    if not ctx.graded:
        raise ValueError("context is not graded")
    pattern = np.array([1.0, -1.0] * (ctx.internal_dim // 2))
    diag = np.tile(pattern, len(ctx.modes))
    return TruncOp(ctx, np.diag(diag.astype(complex)))


def grading_blocks(x: TruncOp, gamma: TruncOp) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal blocks (X++, X--) of x with respect to the grading gamma."""
    d = np.real(np.diag(gamma.matrix))
    pos = d > 0
    neg = ~pos
    m = x.matrix
    return m[np.ix_(pos, pos)], m[np.ix_(neg, neg)]


def _coerce_fourier(f, d: int) -> np.ndarray:
    """Normalize Fourier data to an array of shape (2b+1, d, d), k = -b..b."""
    if hasattr(f, "fourier_coefficients"):
        f = f.fourier_coefficients()
    if isinstance(f, dict):
        band = max(abs(int(k)) for k in f) if f else 0
        out = np.zeros((2 * band + 1, d, d), dtype=complex)
        for k, v in f.items():
            out[int(k) + band] += np.asarray(v, dtype=complex).reshape(d, d) \
                if np.ndim(v) else np.eye(d) * complex(v)
        return out
    arr = np.asarray(f, dtype=complex)
    if arr.ndim == 1:
        if d != 1:
            arr = arr[:, None, None] * np.eye(d)
        else:
            arr = arr[:, None, None]
    if arr.ndim != 3 or arr.shape[1:] != (d, d) or arr.shape[0] % 2 == 0:
        raise ValueError("Fourier data must have shape (2b+1, d, d)")
    return arr


def mult_op(f, ctx: TruncationContext) -> TruncOp:
    """Multiplication operator of a band-limited matrix-valued symbol.

    ``f`` may be an array of Fourier coefficients with shape (2b+1, d, d)
    indexed k = -b..b, a dict {k: value}, or any object exposing
    ``fourier_coefficients()`` (grid functions, group maps, gauge fields).
    The matrix is block Toeplitz: T[(m,a),(n,c)] = fhat(m-n)[a,c].
    """
    d = ctx.internal_dim
    fhat = _coerce_fourier(f, d)
    band = fhat.shape[0] // 2
    # trim numerically-zero outer coefficients before the band check
    mags = np.max(np.abs(fhat), axis=(1, 2))
    scale = float(np.max(mags)) if mags.size else 0.0
    keep = np.nonzero(mags > 1e-14 * max(scale, 1e-300))[0]
    if keep.size:
        lo, hi = keep[0], keep[-1]
        eff = max(abs(int(lo) - band), abs(int(hi) - band))
    else:
        eff = 0
    if eff > 2 * ctx.cutoff:
        raise BandTooWide("band too wide for context")
    modes = ctx.modes
    n_modes = len(modes)
    steps = np.arange(n_modes)
    diff = steps[:, None] - steps[None, :]  # integer mode differences
    sel = np.abs(diff) <= band
    out = np.zeros((n_modes, n_modes, d, d), dtype=complex)
    out[sel] = fhat[diff[sel] + band]
    out = out.transpose(0, 2, 1, 3).reshape(ctx.size, ctx.size)
    return TruncOp(ctx, out)


def matrix_exp(x: TruncOp) -> TruncOp:
    """Matrix exponential (scaling-and-squaring Pade).

    Anti-hermitian input yields a unitary result within 1e-10.
    """
    if not np.all(np.isfinite(x.matrix)):
        raise ValueError("matrix exponential of non-finite entries")
    return TruncOp(x.context, scipy.linalg.expm(x.matrix))


def approx_sign(d_op: TruncOp) -> TruncOp:
    """Smooth approximate sign: eigenvalue t maps to t / (|t| + exp(-t^2)).

    Requires a hermitian operand; the kernel maps to 0 instead of an
    arbitrary sign choice.
    """
    if not d_op.is_hermitian:
        raise ValueError("approximate sign requires a hermitian operator")
    w, v = np.linalg.eigh(d_op.matrix)
    f = w / (np.abs(w) + np.exp(-(w**2)))
    m = (v * f) @ v.conj().T
    return TruncOp(d_op.context, 0.5 * (m + m.conj().T))


def conditional_supertrace(x: TruncOp, eps: TruncOp, gamma: TruncOp) -> complex:
    """Symmetrized graded trace 0.5 * tr(Gamma X + eps Gamma X eps).

    Requires a graded context and commuting involutions eps, gamma.  Whenever
    [eps, x] = 0 this equals the plain graded trace tr(Gamma X).
    """
    if not x.context.graded:
        raise ValueError("conditional supertrace requires a graded context")
    if op_norm(commutator(eps, gamma)) > 1e-12:
        raise ValueError("polarization and grading must commute")
    ge = eps.matrix @ gamma.matrix
    term1 = np.trace(gamma.matrix @ x.matrix)
    term2 = np.trace(ge @ x.matrix @ eps.matrix)
    return complex(0.5 * (term1 + term2))


# -- Fredholm index -----------------------------------------------------------


def operator_band(x: TruncOp, rel_tol: float = 1e-12) -> int:
    """Largest |mode difference| carrying a non-negligible entry."""
    m = np.abs(x.matrix)
    scale = float(m.max()) if m.size else 0.0
    if scale == 0.0:
        return 0
    bm = x.context.basis_modes
    diff = np.abs(bm[:, None] - bm[None, :])
    sig = m > rel_tol * scale
    return int(round(float(diff[sig].max()))) if sig.any() else 0


def fredholm_index(g: TruncOp, eps: TruncOp, window: int) -> int:
    """Index of the positive-mode block a = P+ g P+ of a unitary symbol.

    Counts kernel and cokernel dimensions from singular values below 1e-6,
    keeping only singular vectors whose mass concentrates on the interior
    window; defect vectors created by the cutoff boundary live at the top
    modes and are discarded.  Exact for band-limited unitary g once
    window + band <= N.  Raises :class:`IllConditionedIndex` when singular
    values crowd the threshold (gap factor < 1e3).
    """
    ctx = g.context
    band = operator_band(g)
    if window > ctx.cutoff - band:
        raise ValueError("window too large: window + band must not exceed the cutoff")
    # unitarity of the symbol shows as interior-window unitarity of the
    # truncation; the cutoff boundary rows are defective by construction
    interior = ctx.cutoff - band
    gg = g.H @ g
    eye = TruncOp(ctx, np.eye(ctx.size))
    if windowed_op_norm(gg - eye, interior) > UNITARY_TOL:
        raise ValueError("Fredholm index requires a unitary symbol")
    signs = ctx.mode_signs()
    pos = signs > 0
    a = g.matrix[np.ix_(pos, pos)]
    u, s, vh = np.linalg.svd(a)
    counted = s < KERNEL_SV_THRESHOLD
    rest = s[~counted]
    if counted.any() and rest.size:
        top_counted = float(s[counted].max())
        if top_counted > 0 and float(rest.min()) / top_counted < KERNEL_SV_GAP:
            if float(rest.min()) < KERNEL_SV_THRESHOLD * KERNEL_SV_GAP:
                raise IllConditionedIndex(
                    "singular values too close to the kernel threshold"
                )
    elif rest.size and float(rest.min()) < KERNEL_SV_THRESHOLD * KERNEL_SV_GAP:
        raise IllConditionedIndex("singular values too close to the kernel threshold")
    pos_modes = np.abs(ctx.basis_modes[pos])
    in_window = pos_modes <= window + 1e-12
    ker = coker = 0
    for i in np.nonzero(counted)[0]:
        v = vh[i].conj()
        if float(np.sum(np.abs(v[in_window]) ** 2)) >= 0.5:
            ker += 1
        uvec = u[:, i]
        if float(np.sum(np.abs(uvec[in_window]) ** 2)) >= 0.5:
            coker += 1
    return ker - coker


# -- corner decay diagnostics -------------------------------------------------


@dataclass(frozen=True)
class DecayProfile:
    """Off-sign corner decay of an operator, binned dyadically.

    ``block_norms[i]`` is the sup norm of the corner entries (mode signs
    disagree) whose smaller |mode| falls in [radii[i], 2*radii[i]).  The
    fitted slope is the log-log least-squares exponent over the non-empty
    bins; ``None`` when fewer than two bins carry mass.
    """

    radii: tuple[int, ...]
    block_norms: tuple[float, ...]
    fitted_slope: float | None


def corner_profile(x: TruncOp, eps: TruncOp, r_min: int = 4) -> DecayProfile:
    """Dyadic sup-norm profile of the polarization-corner of ``x``.

    Bins run over r = r_min, 2 r_min, ... up to N/4.  Requires N >= 32 so the
    fit has at least two octaves of range.
    """
    ctx = x.context
    if ctx.cutoff < 32:
        raise ValueError("insufficient range for slope fit (need cutoff >= 32)")
    signs = ctx.mode_signs()
    absm = np.abs(ctx.basis_modes)
    corner = signs[:, None] * signs[None, :] < 0
    min_abs = np.minimum(absm[:, None], absm[None, :])
    mags = np.abs(x.matrix)
    radii = []
    norms = []
    r = r_min
    while r <= ctx.cutoff // 4:
        sel = corner & (min_abs >= r) & (min_abs < 2 * r)
        radii.append(r)
        norms.append(float(mags[sel].max()) if sel.any() else 0.0)
        r *= 2
    live = [(np.log(rr), np.log(nn)) for rr, nn in zip(radii, norms) if nn > 0.0]
    if len(live) >= 2:
        lx = np.array([p[0] for p in live])
        ly = np.array([p[1] for p in live])
        slope = float(np.polyfit(lx, ly, 1)[0])
    else:
        slope = None
    return DecayProfile(tuple(radii), tuple(norms), slope)


# -- grid ingestion -----------------------------------------------------------


def fourier_coefficients(samples, band: int | None = None) -> np.ndarray:
    """Centered Fourier coefficients of equally spaced samples on [0, 2pi).

    ``samples`` has shape (n,) or (n, d, d) with n a power of two.  Returns
    coefficients of shape (2b+1, d, d) for k = -b..b with b = n//2 - 1 by
    default; the round trip through :func:`grid_samples` is exact for
    band-limited data.
    """
    arr = np.asarray(samples, dtype=complex)
    n = arr.shape[0]
    if n < 2 or (n & (n - 1)) != 0:
        raise ValueError("sample count must be a power of two")
    if arr.ndim == 1:
        arr = arr[:, None, None]
    coeffs = np.fft.fft(arr, axis=0) / n
    bmax = n // 2 - 1
    if band is None:
        band = bmax
    if band > bmax:
        raise ValueError("requested band exceeds the sample resolution")
    out = np.empty((2 * band + 1, arr.shape[1], arr.shape[2]), dtype=complex)
    for k in range(-band, band + 1):
        out[k + band] = coeffs[k % n]
    return out


def grid_samples(fhat, n: int) -> np.ndarray:
    """Evaluate centered Fourier coefficients on the n-point uniform grid."""
    fhat = np.asarray(fhat, dtype=complex)
    if fhat.ndim == 1:
        fhat = fhat[:, None, None]
    band = fhat.shape[0] // 2
    if n < 2 * band + 2:
        raise ValueError("grid too coarse for the requested band")
    spec = np.zeros((n,) + fhat.shape[1:], dtype=complex)
    for k in range(-band, band + 1):
        spec[k % n] = fhat[k + band]
    return np.fft.ifft(spec, axis=0) * n


def rough_symbol(band: int, s: float, seed: int, d: int = 1) -> np.ndarray:
    """Real scalar symbol with coefficients (1+|k|)^(-s) and random phases.

    Returns centered Fourier data of shape (2*band+1, d, d) embedding the
    scalar on the fiber diagonal; the hermitian symmetry fhat(-k) =
    conj(fhat(k)) makes the multiplication operator hermitian.
    """
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=band)
    out = np.zeros((2 * band + 1, d, d), dtype=complex)
    eye = np.eye(d)
    out[band] = 1.0 * eye
    for k in range(1, band + 1):
        c = (1.0 + k) ** (-s) * np.exp(1j * phases[k - 1])
        out[band + k] = c * eye
        out[band - k] = np.conj(c) * eye
    return out
