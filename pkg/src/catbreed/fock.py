"""Truncated Fock-basis state algebra.

States live on ``span{|0>, ..., |N_cut>}``. Quadrature wavefunctions use
internal units (vacuum x-variance 1/2): ``phi_0(x) = pi**-0.25 * exp(-x**2/2)``.

The quadrature at angle ``theta`` is ``x cos(theta) + p sin(theta)`` and its
eigenstates have amplitudes ``<x_theta|n> = exp(-i n theta) phi_n(x)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Union

import numpy as np
from scipy import optimize

from . import phasespace
from .errors import DegenerateWindowError, DomainError, TruncationError, ValidationError
from .units import Units, to_internal

DEFAULT_CUTOFF = 20

#: Squeezing convention used by :func:`make_squeezed_cat`.  ``s`` rescales the
#: x-quadrature wavefunction as ``psi(x) -> sqrt(s) * psi(s * x)``, i.e. the
#: x standard deviation shrinks by ``1/s``.  This is the reading under which
#: the heralded two-photon state has 99% overlap with the alpha=1.63, s=1.52 cat.
SQUEEZE_CONVENTION = "x-stddev/s: psi(x) -> sqrt(s)*psi(s*x)"

# amplitudes below this (squared) are considered unpopulated when sizing outputs
_POPULATION_TOL = 1e-16


def _frozen(arr, dtype=complex):
    arr = np.array(arr, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class FockVector:
    """Pure state amplitudes ``c_n``, ``n = 0..cutoff``."""

    amplitudes: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        amps = np.atleast_1d(np.asarray(self.amplitudes))
        if amps.ndim != 1:
            raise DomainError("FockVector amplitudes must be one-dimensional")
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @classmethod
    def basis(cls, n: int, cutoff: int = DEFAULT_CUTOFF) -> "FockVector":
        if not 0 <= n <= cutoff:
            raise TruncationError(f"|{n}> does not fit below cutoff {cutoff}")
        amps = np.zeros(cutoff + 1, dtype=complex)
        amps[n] = 1.0
        return cls(amps)

    @property
    def cutoff(self) -> int:
        return self.amplitudes.size - 1

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "FockVector":
        nrm = self.norm()
        if nrm == 0:
            raise DomainError("cannot normalize the zero vector")
        return FockVector(self.amplitudes / nrm, dict(self.meta))

    def resize(self, cutoff: int, tol: float = 1e-12) -> "FockVector":
        return FockVector(_resize_vector(self.amplitudes, cutoff, tol), dict(self.meta))

    def populated(self) -> int:
        """Highest photon number carrying non-negligible weight."""
        idx = np.nonzero(np.abs(self.amplitudes) ** 2 > _POPULATION_TOL)[0]
        return int(idx[-1]) if idx.size else 0

    def to_density(self) -> "DensityMatrix":
        c = self.amplitudes
        return DensityMatrix(np.outer(c, c.conj()), dict(self.meta))


@dataclass(frozen=True)
class DensityMatrix:
    """Mixed state on the truncated Fock space."""

    entries: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        ent = np.asarray(self.entries)
        if ent.ndim != 2 or ent.shape[0] != ent.shape[1]:
            raise DomainError("density matrix must be square")
        object.__setattr__(self, "entries", _frozen(ent))

    @property
    def cutoff(self) -> int:
        return self.entries.shape[0] - 1

    def trace(self) -> float:
        return float(np.real(np.trace(self.entries)))

    def validate(self, herm_tol: float = 1e-10, trace_tol: float = 1e-10, eig_tol: float = 1e-9) -> "DensityMatrix":
        rho = self.entries
        if np.max(np.abs(rho - rho.conj().T), initial=0.0) > herm_tol:
            raise ValidationError("density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > trace_tol:
            raise ValidationError(f"density matrix trace {np.trace(rho).real!r} differs from 1")
        if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0] < -eig_tol:
            raise ValidationError("density matrix has a negative eigenvalue")
        return self

    def normalized(self) -> "DensityMatrix":
        rho = 0.5 * (self.entries + self.entries.conj().T)
        tr = np.trace(rho).real
        if tr <= 0:
            raise DomainError("density matrix has non-positive trace")
        return DensityMatrix(rho / tr, dict(self.meta))

    def resize(self, cutoff: int, tol: float = 1e-12) -> "DensityMatrix":
        d = self.entries.shape[0]
        new = cutoff + 1
        if new >= d:
            out = np.zeros((new, new), dtype=complex)
            out[:d, :d] = self.entries
            return DensityMatrix(out, dict(self.meta))
        dropped = np.real(np.trace(self.entries)) - np.real(np.trace(self.entries[:new, :new]))
        if dropped > tol:
            raise TruncationError(f"truncating to cutoff {cutoff} drops weight {dropped:.3g}")
        return DensityMatrix(self.entries[:new, :new], dict(self.meta))

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.entries)).copy()

    def components(self, tol: float = 1e-15) -> list[tuple[float, np.ndarray]]:
        """Eigen-decomposition into ``(weight, amplitude vector)`` pairs above ``tol``."""
        vals, vecs = np.linalg.eigh(0.5 * (self.entries + self.entries.conj().T))
        keep = vals > tol * max(vals.max(), 1e-300)
        return [(float(vals[k]), vecs[:, k]) for k in np.nonzero(keep)[0][::-1]]

    def populated(self) -> int:
        idx = np.nonzero(self.populations() > _POPULATION_TOL)[0]
        return int(idx[-1]) if idx.size else 0


State = Union[FockVector, DensityMatrix]


def as_density(state: State) -> DensityMatrix:
    return state.to_density() if isinstance(state, FockVector) else state


def _resize_vector(amps, cutoff, tol=1e-12):
    amps = np.asarray(amps)
    if cutoff + 1 >= amps.size:
        out = np.zeros(cutoff + 1, dtype=complex)
        out[: amps.size] = amps
        return out
    dropped = float(np.sum(np.abs(amps[cutoff + 1 :]) ** 2))
    if dropped > tol:
        raise TruncationError(f"truncating to cutoff {cutoff} drops weight {dropped:.3g}")
    return amps[: cutoff + 1].copy()


# ---------------------------------------------------------------------------
# wavefunctions


def hermite_functions(nmax: int, x) -> np.ndarray:
    """``phi_0..phi_nmax`` at ``x``, shape ``(nmax + 1,) + x.shape``."""
    if nmax < 0:
        raise DomainError("photon number must be non-negative")
    x = np.asarray(x, dtype=float)
    out = np.empty((nmax + 1,) + x.shape)
    out[0] = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    if nmax >= 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for n in range(2, nmax + 1):
        out[n] = np.sqrt(2.0 / n) * x * out[n - 1] - np.sqrt((n - 1) / n) * out[n - 2]
    return out


def hermite_wavefunction(n: int, x):
    r"""Number-state wavefunction :math:`\varphi_n(x)` in internal units.

    Computed with the normalized three-term recurrence, so no factorials or
    Hermite polynomial values are ever formed explicitly.

    Args:
        n: photon number, ``n >= 0``.
        x: quadrature value(s).

    Returns:
        float or array of the same shape as ``x``.
    """
    if int(n) != n or n < 0:
        raise DomainError(f"photon number must be a non-negative integer, got {n!r}")
    val = hermite_functions(int(n), x)[int(n)]
    return float(val) if np.ndim(val) == 0 else val


def quadrature_amplitudes(cutoff: int, x, theta: float = 0.0) -> np.ndarray:
    """``<x_theta|n>`` conjugated for contraction: ``phi_n(x) exp(-i n theta)``."""
    theta = float(theta) % (2 * np.pi)
    phases = np.exp(-1j * theta * np.arange(cutoff + 1))
    phi = hermite_functions(cutoff, x)
    return phi * phases.reshape((-1,) + (1,) * np.ndim(x))


# ---------------------------------------------------------------------------
# squeezed cats


@dataclass(frozen=True)
class SqueezedCatSpec:
    alpha: float
    s: float
    parity: str = "even"

    def __post_init__(self):
        if self.s <= 0:
            raise DomainError("squeeze factor s must be positive")
        if self.parity not in ("even", "odd"):
            raise DomainError("parity must be 'even' or 'odd'")


REFERENCE_CAT = SqueezedCatSpec(1.63, 1.52, "even")


def _cat_wavefunction(alpha, s, parity, x):
    sign = 1.0 if parity == "even" else -1.0
    y = s * x
    shift = np.sqrt(2.0) * alpha
    psi = np.pi ** -0.25 * (np.exp(-0.5 * (y - shift) ** 2) + sign * np.exp(-0.5 * (y + shift) ** 2))
    return np.sqrt(s) * psi


def make_squeezed_cat(spec: SqueezedCatSpec, cutoff: int = DEFAULT_CUTOFF) -> FockVector:
    """Fock expansion of the x-squeezed cat ``S(s)(|alpha> +/- |-alpha>)``.

    The amplitudes are overlaps of the analytic x-space wavefunction with the
    number-state wavefunctions, evaluated by the trapezoid rule on a grid wide
    enough for both lobes (spectrally accurate for these integrands).
    Amplitudes of the wrong parity are set to zero exactly.
    """
    if cutoff < 10:
        raise DomainError("cutoff must be at least 10")
    alpha, s = float(spec.alpha), float(spec.s)
    if spec.parity == "odd" and alpha == 0:
        raise DomainError("odd cat with zero amplitude is the zero vector")
    half = np.sqrt(2.0) * abs(alpha) / s + 12.0 / min(s, 1.0) + np.sqrt(2 * cutoff + 1) + 4
    x = np.linspace(-half, half, int(np.ceil(2 * half / 0.01)) | 1)
    dx = x[1] - x[0]
    psi = _cat_wavefunction(alpha, s, spec.parity, x)
    psi = psi / np.sqrt(np.sum(psi * psi) * dx)
    amps = hermite_functions(cutoff, x) @ psi * dx
    wrong = 1 if spec.parity == "even" else 0
    amps[wrong::2] = 0.0
    captured = float(np.sum(amps**2))
    if captured < 1 - 1e-6:
        raise TruncationError(
            f"cutoff {cutoff} holds only {captured:.8f} of the cat norm (alpha={alpha}, s={s})"
        )
    meta = {
        "kind": "squeezed_cat",
        "alpha": alpha,
        "s": s,
        "parity": spec.parity,
        "squeeze_convention": SQUEEZE_CONVENTION,
        "captured_norm": captured,
    }
    return FockVector(amps / np.sqrt(captured), meta)


# ---------------------------------------------------------------------------
# fidelity, loss


def _psd_sqrt(mat):
    vals, vecs = np.linalg.eigh(0.5 * (mat + mat.conj().T))
    return (vecs * np.sqrt(np.clip(vals, 0, None))) @ vecs.conj().T


def _matched(a: State, b: State):
    ra, rb = as_density(a), as_density(b)
    cut = max(ra.cutoff, rb.cutoff)
    return ra.resize(cut), rb.resize(cut)


def fidelity(a: State, b: State, tol: float = 1e-8) -> float:
    r"""Uhlmann fidelity :math:`\left(\mathrm{Tr}\sqrt{\sqrt{\rho_1}\rho_2\sqrt{\rho_1}}\right)^2`.

    States of different cutoff are zero-padded to the larger one. Pure inputs
    short-circuit to overlaps.
    """
    if isinstance(a, FockVector) and isinstance(b, FockVector):
        cut = max(a.cutoff, b.cutoff)
        ca, cb = a.resize(cut).amplitudes, b.resize(cut).amplitudes
        return float(min(1.0, abs(np.vdot(ca, cb)) ** 2 / (np.vdot(ca, ca).real * np.vdot(cb, cb).real)))
    if isinstance(a, FockVector) or isinstance(b, FockVector):
        vec, mix = (a, b) if isinstance(a, FockVector) else (b, a)
        cut = max(vec.cutoff, mix.cutoff)
        c = vec.resize(cut).normalize().amplitudes
        rho = mix.resize(cut)
        rho.validate(herm_tol=tol, trace_tol=tol, eig_tol=tol)
        return float(np.clip(np.real(c.conj() @ rho.entries @ c), 0.0, 1.0))
    ra, rb = _matched(a, b)
    ra.validate(herm_tol=tol, trace_tol=tol, eig_tol=tol)
    rb.validate(herm_tol=tol, trace_tol=tol, eig_tol=tol)
    # nuclear norm of sqrt(a) sqrt(b): its singular values carry rounding error
    # of order eps, where square roots of eigenvalues of sqrt(a) b sqrt(a)
    # would turn eps-sized null-space noise into sqrt(eps)
    svals = np.linalg.svd(_psd_sqrt(ra.entries) @ _psd_sqrt(rb.entries), compute_uv=False)
    return float(np.clip(np.sum(svals) ** 2, 0.0, 1.0))


@lru_cache(maxsize=64)
def _loss_kraus(dim: int, eta: float) -> np.ndarray:
    """Kraus operators ``K_k`` (stacked) of the pure-loss channel."""
    ks = np.zeros((dim, dim, dim))
    for k in range(dim):
        for n in range(k, dim):
            ks[k, n - k, n] = math.sqrt(math.comb(n, k) * eta ** (n - k) * (1 - eta) ** k)
    ks.flags.writeable = False
    return ks


def _check_eta(eta):
    eta = float(eta)
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"transmission eta must lie in [0, 1], got {eta}")
    return eta


def loss_kraus(dim: int, eta: float) -> np.ndarray:
    return _loss_kraus(dim, _check_eta(eta))


def apply_loss(rho: State, eta: float) -> DensityMatrix:
    """Pure-loss (beamsplitter with vacuum) channel of transmission ``eta``."""
    eta = _check_eta(eta)
    rho = as_density(rho)
    if eta == 1.0:
        return rho
    ks = _loss_kraus(rho.entries.shape[0], eta)
    out = np.einsum("kij,jl,kml->im", ks, rho.entries, ks)
    return DensityMatrix(out, dict(rho.meta))


def apply_loss_adjoint(op: np.ndarray, eta: float) -> np.ndarray:
    """Heisenberg-picture loss map, ``Tr(L(rho) A) = Tr(rho L^dag(A))``."""
    eta = _check_eta(eta)
    if eta == 1.0:
        return op
    ks = _loss_kraus(op.shape[0], eta)
    return np.einsum("kji,jl,klm->im", ks, op, ks)


# ---------------------------------------------------------------------------
# two-mode algebra


@dataclass(frozen=True)
class TwoModeState:
    """Pure two-mode amplitudes ``c[n, m]`` over ``|n>_0 |m>_1``."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes)
        if amps.ndim != 2:
            raise DomainError("two-mode amplitudes must be a matrix")
        object.__setattr__(self, "amplitudes", _frozen(amps))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def cutoffs(self) -> tuple[int, int]:
        n, m = self.amplitudes.shape
        return n - 1, m - 1


@lru_cache(maxsize=512)
def _bs_block(total: int, transmittance: float) -> np.ndarray:
    """Beamsplitter action on the ``total``-photon subspace.

    ``U[k, n]`` maps input ``|n, total-n>`` to output ``|k, total-k>`` under
    ``a^dag -> t A^dag + r B^dag`` and ``b^dag -> r A^dag - t B^dag``.
    """
    t = math.sqrt(transmittance)
    r = math.sqrt(1.0 - transmittance)
    u = np.zeros((total + 1, total + 1))
    for n in range(total + 1):
        m = total - n
        norm_in = math.sqrt(math.factorial(n) * math.factorial(m))
        for i in range(n + 1):
            ci = math.comb(n, i) * t**i * r ** (n - i)
            for j in range(m + 1):
                cj = math.comb(m, j) * r**j * (-t) ** (m - j)
                k = i + j
                u[k, n] += ci * cj * math.sqrt(math.factorial(k) * math.factorial(total - k)) / norm_in
    u.flags.writeable = False
    return u


def beamsplitter_2mode(a: FockVector, b: FockVector, transmittance: float = 0.5, cutoff: int | None = None) -> TwoModeState:
    """Mix two pure single-mode states on a beamsplitter.

    The sign convention sends ``|1>|1>`` to ``(|2,0> - |0,2>)/sqrt(2)`` at
    ``transmittance = 1/2`` (the output quadratures are ``(x_a +/- x_b)/sqrt(2)``).

    Args:
        a, b: input states of ports 0 and 1.
        transmittance: intensity transmittance in ``(0, 1)``.
        cutoff: per-mode output cutoff; default holds every populated
            combination without truncation.
    """
    if not 0.0 < transmittance < 1.0:
        raise DomainError("transmittance must lie strictly between 0 and 1")
    ca = a.amplitudes[: a.populated() + 1]
    cb = b.amplitudes[: b.populated() + 1]
    return _beamsplit_arrays(ca, cb, float(transmittance), cutoff)


def _beamsplit_arrays(ca, cb, transmittance, cutoff=None):
    na, nb = ca.size - 1, cb.size - 1
    nmax = na + nb
    out = np.zeros((nmax + 1, nmax + 1), dtype=complex)
    inp = np.outer(ca, cb)
    for total in range(nmax + 1):
        lo, hi = max(0, total - nb), min(na, total)
        vec = np.zeros(total + 1, dtype=complex)
        for n in range(lo, hi + 1):
            vec[n] = inp[n, total - n]
        if not np.any(vec):
            continue
        res = _bs_block(total, transmittance) @ vec
        k = np.arange(total + 1)
        out[k, total - k] = res
    if cutoff is not None and cutoff < nmax:
        kept = out[: cutoff + 1, : cutoff + 1]
        dropped = np.sum(np.abs(out) ** 2) - np.sum(np.abs(kept) ** 2)
        if dropped > 1e-12:
            raise TruncationError(f"cutoff {cutoff} truncates beamsplitter output weight {dropped:.3g}")
        out = kept
    elif cutoff is not None and cutoff > nmax:
        big = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
        big[: nmax + 1, : nmax + 1] = out
        out = big
    return TwoModeState(out)


def homodyne_project(state: TwoModeState, x_value: float, theta: float = 0.0) -> FockVector:
    """Contract mode 0 with the quadrature eigenstate ``<x_theta|``.

    The returned mode-1 vector is unnormalized; its squared norm is the
    probability density of obtaining ``x_value`` on mode 0.
    """
    x_value = float(x_value)
    if not np.isfinite(x_value):
        raise DomainError("x_value must be finite")
    amps = state.amplitudes
    weights = quadrature_amplitudes(amps.shape[0] - 1, x_value, theta)
    return FockVector(weights @ amps)


# ---------------------------------------------------------------------------
# breeding


class BreedResult(NamedTuple):
    rho: DensityMatrix
    acceptance: float


def _window_rule(window: float, shape: str, nodes: int):
    """Quadrature nodes and weights of the acceptance window (internal units)."""
    if shape == "hard":
        u, w = np.polynomial.legendre.leggauss(nodes)
        return window * u, window * w
    if shape == "gaussian":
        # weight exp(-x^2 / (2 window^2)) over the real line
        u, w = np.polynomial.hermite.hermgauss(nodes)
        return np.sqrt(2.0) * window * u, np.sqrt(2.0) * window * w
    raise DomainError(f"unknown window shape {shape!r}")


def _components(state: State):
    if isinstance(state, FockVector):
        c = state.amplitudes[: state.populated() + 1]
        return [(1.0, c / np.linalg.norm(c))]
    out = []
    for weight, vec in state.components():
        top = np.nonzero(np.abs(vec) ** 2 > _POPULATION_TOL)[0]
        out.append((weight, vec[: (int(top[-1]) + 1 if top.size else 1)]))
    return out


def breed_fock(
    a: State,
    b: State,
    window: float,
    units: Units = "homodyne",
    shape: str = "hard",
    herald_efficiency: float = 1.0,
    cutoff: int | None = None,
    nodes: int = 64,
) -> BreedResult:
    """Herald mode 1 on a quadrature window of mode 0 after a 50:50 beamsplitter.

    The conditional state ``∫ K(x) |psi(x)><psi(x)| dx`` is integrated with a
    ``nodes``-point Gauss rule: Legendre for the hard window ``|x| <= window``,
    Hermite for the Gaussian kernel ``exp(-x^2 / (2 window^2))``. Mixed inputs
    are decomposed into eigenvectors and bred pairwise.

    Args:
        a, b: input states (pure or mixed).
        window: half-width (hard) or standard deviation (gaussian) of the
            acceptance window, in ``units``.
        units: ``"homodyne"`` (vacuum variance 1) or ``"internal"``.
        shape: ``"hard"`` or ``"gaussian"``.
        herald_efficiency: transmission of a pure-loss channel on mode 0
            in front of an ideal quadrature projection.
        cutoff: output cutoff; default is large enough to hold every
            populated level (at least :data:`DEFAULT_CUTOFF`).

    Returns:
        :class:`BreedResult` with the normalized output state and the
        acceptance probability (for the Gaussian shape, the kernel-weighted
        success probability).
    """
    window_int = float(to_internal(window, units))
    if not window_int > 0:
        raise DomainError("window must be positive")
    eta0 = _check_eta(herald_efficiency)
    xs, ws = _window_rule(window_int, shape, nodes)
    comps_a, comps_b = _components(a), _components(b)
    nmax = max(ca.size for _, ca in comps_a) + max(cb.size for _, cb in comps_b) - 2
    dim = nmax + 1
    acc = np.zeros((dim, dim), dtype=complex)
    phi = hermite_functions(nmax, xs)  # (dim, nodes)
    ks = _loss_kraus(dim, eta0) if eta0 < 1.0 else None
    for pa, ca in comps_a:
        for pb, cb in comps_b:
            two = _beamsplit_arrays(ca, cb, 0.5, cutoff=nmax).amplitudes
            branches = [two] if ks is None else [k @ two for k in ks]
            for br in branches:
                proj = phi.T @ br  # (nodes, dim): mode-1 vectors psi(x_k)
                acc += pa * pb * np.einsum("k,ki,kj->ij", ws, proj, proj.conj())
    p_acc = float(np.real(np.trace(acc)))
    if p_acc < 1e-12:
        raise DegenerateWindowError(f"acceptance probability {p_acc:.3g} is below 1e-12")
    out_cut = max(DEFAULT_CUTOFF, nmax) if cutoff is None else cutoff
    rho = DensityMatrix(acc / p_acc, {"kind": "bred", "window_internal": window_int, "shape": shape})
    return BreedResult(rho.resize(out_cut), p_acc)


def breed_fock_pure(a: FockVector, b: FockVector, x_value: float = 0.0, cutoff: int | None = None) -> FockVector:
    """Zero-width limit of :func:`breed_fock`: project mode 0 on ``x_value``."""
    two = beamsplitter_2mode(a, b)
    out = homodyne_project(two, x_value).normalize()
    cut = max(DEFAULT_CUTOFF, out.cutoff) if cutoff is None else cutoff
    return out.resize(cut)


def eq1_state(cutoff: int = DEFAULT_CUTOFF) -> FockVector:
    """Analytic heralded state ``(|0> + sqrt(2)|2>)/sqrt(3)``."""
    amps = np.zeros(cutoff + 1, dtype=complex)
    amps[0] = 1 / np.sqrt(3.0)
    amps[2] = np.sqrt(2.0 / 3.0)
    return FockVector(amps)


# ---------------------------------------------------------------------------
# phase space and cat fitting


def wigner_of_state(rho: State, grid=None) -> phasespace.WignerGrid:
    """Wigner function of ``rho`` on ``grid`` (a :class:`~catbreed.phasespace.GridAxis`
    or a pair of them; default ±6 with 601 points per axis)."""
    rho = as_density(rho)
    if grid is None:
        x_axis = p_axis = phasespace.DEFAULT_AXIS
    elif isinstance(grid, phasespace.GridAxis):
        x_axis = p_axis = grid
    else:
        x_axis, p_axis = grid
    out = phasespace.wigner_grid_of_density(rho.entries, x_axis, p_axis)
    phasespace.check_coverage(out, expected=rho.trace())
    return out


class CatFit(NamedTuple):
    alpha: float
    s: float
    fidelity: float


def _cat_fidelity(rho: DensityMatrix, alpha, s, parity, cutoff):
    cat = make_squeezed_cat(SqueezedCatSpec(abs(alpha), s, parity), cutoff).amplitudes
    return float(np.real(cat.conj() @ rho.entries @ cat))


def best_fit_cat(
    rho: State,
    alpha_range=(0.0, 3.5),
    s_range=(0.8, 2.5),
    parity: str = "even",
    grid_points: int = 36,
) -> CatFit:
    """Squeezed cat of maximal fidelity with ``rho``: coarse grid, then Nelder-Mead.

    Warns when the optimum sits on the boundary of the search box.
    """
    rho = as_density(rho)
    cutoff = max(rho.cutoff, 10)
    rho = rho.resize(cutoff)
    alphas = np.linspace(*alpha_range, grid_points)
    ss = np.linspace(*s_range, grid_points)
    best = (-1.0, 0.0, 1.0)
    for al in alphas:
        for s in ss:
            try:
                f = _cat_fidelity(rho, al, s, parity, cutoff)
            except (TruncationError, DomainError):
                continue
            if f > best[0]:
                best = (f, al, s)

    def neg(v):
        al, s = v
        if not (alpha_range[0] <= al <= alpha_range[1] and s_range[0] <= s <= s_range[1]):
            return 2.0
        try:
            return -_cat_fidelity(rho, al, s, parity, cutoff)
        except (TruncationError, DomainError):
            return 2.0

    res = optimize.minimize(
        neg, x0=[best[1], best[2]], method="Nelder-Mead",
        options={"xatol": 1e-7, "fatol": 1e-12, "maxiter": 2000},
    )
    al, s = (float(v) for v in res.x)
    fid = -float(res.fun)
    if fid < best[0]:
        fid, al, s = best
    da = (alpha_range[1] - alpha_range[0]) / (grid_points - 1)
    ds = (s_range[1] - s_range[0]) / (grid_points - 1)
    on_edge = (
        (al - alpha_range[0] < 0.5 * da and alpha_range[0] > 0)
        or alpha_range[1] - al < 0.5 * da
        or s - s_range[0] < 0.5 * ds
        or s_range[1] - s < 0.5 * ds
    )
    if on_edge:
        warnings.warn(f"best-fit cat (alpha={al:.3f}, s={s:.3f}) lies on the search boundary", RuntimeWarning, stacklevel=2)
    return CatFit(abs(al), s, fid)
