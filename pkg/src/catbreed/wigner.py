"""Analytic phase-space model of imperfect heralded photons and their breeding.

A single imperfect photon has the radially symmetric Wigner function

.. math::

    W_1(x, p) = \\frac{e^{-(x^2+p^2)/\\sigma^2}}{\\pi\\sigma^2}
                \\left[1 - \\delta + \\delta\\frac{x^2+p^2}{\\sigma^2}\\right]

and every state derived from it by beamsplitters, Gaussian conditioning and
loss stays of the form polynomial x Gaussian, represented exactly by
:class:`GaussPolyWigner`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import phasespace
from .errors import AccuracyError, DegreeOverflowError, DomainError
from .gausspoly import GaussPoly
from .units import Units, to_internal

DEFAULT_MAX_DEGREE = 16


@dataclass(frozen=True)
class PhotonSourceParams:
    """Heralded-photon source: parametric gain ``g``, excess-noise gain ``h``,
    path transmission ``eta_path`` and modal purity ``xi``."""

    g: float
    h: float = 1.0
    eta_path: float = 1.0
    xi: float = 1.0

    def __post_init__(self):
        if min(self.g, self.h) <= 0:
            raise DomainError("gains g and h must be positive")
        if not 0 < self.eta_path <= 1 or not 0 < self.xi <= 1:
            raise DomainError("eta_path and xi must lie in (0, 1]")


@dataclass(frozen=True)
class SinglePhotonModel:
    sigma: float
    delta: float

    def __post_init__(self):
        if not self.sigma >= 1.0 - 1e-12:
            raise DomainError(f"sigma must be >= 1, got {self.sigma}")
        if not -1e-12 <= self.delta <= 2.0 + 1e-12:
            raise DomainError(f"delta must lie in [0, 2], got {self.delta}")

    @property
    def negative_at_origin(self) -> bool:
        return self.delta > 1.0

    def with_loss(self, eta: float) -> "SinglePhotonModel":
        """Model after a pure-loss channel of transmission ``eta`` (closed form)."""
        s2 = 1.0 + eta * (self.sigma**2 - 1.0)
        return SinglePhotonModel(math.sqrt(s2), eta * self.delta * self.sigma**2 / s2)

    def corrected_for_loss(self, eta: float) -> "SinglePhotonModel":
        """Inverse of :meth:`with_loss`; fails if no physical pre-loss photon exists."""
        if not 0 < eta <= 1:
            raise DomainError("eta must lie in (0, 1]")
        s2 = 1.0 + (self.sigma**2 - 1.0) / eta
        return SinglePhotonModel(math.sqrt(s2), self.delta * self.sigma**2 / (eta * s2))


IDEAL_PHOTON = SinglePhotonModel(1.0, 2.0)
MEASURED_PHOTON = SinglePhotonModel(1.02, 1.17)


def imperfect_photon_params(p: PhotonSourceParams) -> SinglePhotonModel:
    """Width ``sigma`` and quality ``delta`` of the heralded photon from its source.

    ``sigma**2 = 2 eta (h g - 1) + 1`` and
    ``delta = 2 xi eta h**2 g (g - 1) / (sigma**2 (h g - 1))``.
    """
    hg1 = p.h * p.g - 1.0
    if hg1 <= 0:
        raise DomainError(f"h*g must exceed 1 (got h*g - 1 = {hg1:.3g}); the delta formula is singular")
    s2 = 2.0 * p.eta_path * hg1 + 1.0
    delta = 2.0 * p.xi * p.eta_path * p.h**2 * p.g * (p.g - 1.0) / (s2 * hg1)
    return SinglePhotonModel(math.sqrt(s2), delta)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussPolyWigner:
    """Single-mode Wigner function ``P(x, p) exp(-(x, p) M (x, p)^T)``."""

    poly: GaussPoly
    max_degree: int = DEFAULT_MAX_DEGREE
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.poly.nvars != 2:
            raise DomainError("a single-mode Wigner function has two variables")
        if np.any(np.linalg.eigvalsh(self.poly.precision) <= 0):
            raise DomainError("Gaussian width matrix must be positive definite")
        if self.poly.degree > self.max_degree:
            raise DegreeOverflowError(
                f"polynomial degree {self.poly.degree} exceeds the cap {self.max_degree}"
            )

    @property
    def width_matrix(self) -> np.ndarray:
        return self.poly.precision

    @property
    def coefficients(self) -> np.ndarray:
        return self.poly.coeffs

    @property
    def degree(self) -> int:
        return self.poly.degree

    def __call__(self, x, p):
        return self.poly(x, p)

    def integral(self) -> float:
        return self.poly.total_integral()

    def normalized(self) -> "GaussPolyWigner":
        return GaussPolyWigner(self.poly * (1.0 / self.integral()), self.max_degree, dict(self.meta))

    def on_grid(self, x_axis=phasespace.DEFAULT_AXIS, p_axis=None) -> phasespace.WignerGrid:
        return phasespace.WignerGrid.from_function(self, x_axis, p_axis)

    def to_density(self, cutoff: int = 20, step: float = 0.08):
        """Fock density matrix with ``rho[m, n] = 2 pi ∫ W conj(W_{|m><n|})``.

        Trapezoid rule on a grid covering the Gaussian envelope; the integrand
        is analytic and decays like a Gaussian, so the rule is spectrally
        accurate.
        """
        from .fock import DensityMatrix

        lam = np.linalg.eigvalsh(self.poly.precision)
        # |W_{|m><n|}| <= 1/pi, so only the support of W itself matters
        half = (math.sqrt(self.degree / 2.0 + 1.0) + 6.5) / math.sqrt(lam.min())
        n = int(math.ceil(2 * half / step)) | 1
        axis = np.linspace(-half, half, n)
        h = axis[1] - axis[0]
        X, P = np.meshgrid(axis, axis, indexing="ij")
        rho = phasespace.density_from_wigner_samples(self(X, P), X, P, h * h, cutoff + 1)
        return DensityMatrix(rho, {"kind": "from_wigner"})


def vacuum_wigner() -> GaussPolyWigner:
    return imperfect_photon_wigner(SinglePhotonModel(1.0, 0.0))


def imperfect_photon_wigner(m: SinglePhotonModel, max_degree: int = DEFAULT_MAX_DEGREE) -> GaussPolyWigner:
    s2 = m.sigma**2
    c = np.zeros((3, 3))
    c[0, 0] = (1.0 - m.delta) / (math.pi * s2)
    c[2, 0] = c[0, 2] = m.delta / (math.pi * s2 * s2)
    return GaussPolyWigner(GaussPoly(np.eye(2) / s2, c), max_degree, {"kind": "photon", "sigma": m.sigma, "delta": m.delta})


# ---------------------------------------------------------------------------
# joint homodyne statistics


def joint_prob_closed(x0, x1, theta, m: SinglePhotonModel):
    """Closed-form joint density of the two homodyne outputs at relative phase ``theta``.

    Both inputs are the photon ``m``; internal units; vectorized over the
    arguments.
    """
    x0, x1, theta = (np.asarray(v, dtype=float) for v in (x0, x1, theta))
    s2, d = m.sigma**2, m.delta
    c2 = np.cos(theta) ** 2
    r = x0 * x0 + x1 * x1
    bracket = (
        d * d * r * r
        + r * s2 * d * (2 * d * c2 + 4 - 4 * d)
        - 4 * d * d * x0 * x0 * x1 * x1 * c2
        + s2 * s2 * (4 - 4 * d + d * d * (2 - c2))
    )
    out = np.exp(-r / s2) / (4 * math.pi * s2**3) * bracket
    return float(out) if out.ndim == 0 else out


def _eq6_integrand(wa, wb, x0, x1, theta, p0, p1):
    c, s = math.cos(theta), math.sin(theta)
    X = x1 * c - p1 * s
    P = p1 * c + x1 * s
    r2 = math.sqrt(2.0)
    return wa((x0 + X) / r2, (p0 + P) / r2) * wb((x0 - X) / r2, (p0 - P) / r2)


def joint_prob_numeric(x0, x1, theta, w: GaussPolyWigner, wb: GaussPolyWigner | None = None, nodes: int = 48):
    """Brute-force joint density: tensor Gauss-Hermite quadrature over ``(p0, p1)``.

    Only pointwise evaluations of the Wigner functions are used. The rule is
    run at ``nodes`` and ``nodes + 16`` points; disagreement raises
    :class:`AccuracyError` carrying the achieved bound.
    """
    wb = w if wb is None else wb
    lam = min(np.linalg.eigvalsh(w.width_matrix).min(), np.linalg.eigvalsh(wb.width_matrix).min())
    scale = 1.0 / math.sqrt(lam)

    flat = [np.ravel(v) for v in np.broadcast_arrays(np.asarray(x0, float), np.asarray(x1, float), np.asarray(theta, float))]

    def rule(n):
        t, wt = np.polynomial.hermite.hermgauss(n)
        p = t * scale
        weight = wt * np.exp(t * t) * scale
        P0, P1 = np.meshgrid(p, p, indexing="ij")
        W2 = np.outer(weight, weight)
        vals = np.array(
            [np.sum(W2 * _eq6_integrand(w, wb, a, b, th, P0, P1)) for a, b, th in zip(*flat)]
        )
        return vals

    shape = np.broadcast(np.asarray(x0), np.asarray(x1), np.asarray(theta)).shape
    lo = rule(nodes)
    hi = rule(nodes + 16)
    err = np.max(np.abs(hi - lo)) if lo.size else 0.0
    if err > 1e-10 + 1e-8 * np.max(np.abs(hi), initial=0.0):
        raise AccuracyError(f"brute-force joint-density quadrature did not converge (difference {err:.3g})", achieved=err)
    hi = hi.reshape(shape)
    return float(hi) if hi.ndim == 0 else hi


def _two_mode_joint(wa: GaussPolyWigner, wb: GaussPolyWigner) -> GaussPoly:
    """Output Wigner function over ``(x0, p0, x1, p1)`` after the 50:50 beamsplitter."""
    r = 1.0 / math.sqrt(2.0)
    ta = np.array([[r, 0, r, 0], [0, r, 0, r]])
    tb = np.array([[r, 0, -r, 0], [0, r, 0, -r]])
    return wa.poly.substitute(ta) * wb.poly.substitute(tb)


def joint_distribution(wa: GaussPolyWigner, wb: GaussPolyWigner, theta: float) -> GaussPoly:
    """Exact joint density ``P(x0, x1)`` of the two homodyne outputs.

    Mode 1 is measured along ``x cos(theta) + p sin(theta)``.
    """
    joint = _two_mode_joint(wa, wb)
    c, s = math.cos(theta), math.sin(theta)
    # new variables (x0, p0, q1, r1): x1 = q c - r s, p1 = q s + r c
    T = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, c, -s], [0, 0, s, c]])
    return joint.substitute(T).integrate([1, 3])


def breed_wigner(
    wa: GaussPolyWigner,
    wb: GaussPolyWigner,
    window: float,
    units: Units = "homodyne",
    max_degree: int | None = None,
) -> GaussPolyWigner:
    """Gaussian-conditioned breeding, exactly.

    Integrates the beamsplitter output Wigner function times
    ``exp(-x0**2 / (2 window**2))`` over the conditioned mode ``(x0, p0)`` and
    renormalizes. The kernel-weighted success probability is stored as
    ``meta["acceptance"]``.
    """
    win = float(to_internal(window, units))
    if not win > 0:
        raise DomainError("window must be positive")
    cap = max(wa.max_degree, wb.max_degree) if max_degree is None else max_degree
    if wa.degree + wb.degree > cap:
        raise DegreeOverflowError(f"bred polynomial degree {wa.degree + wb.degree} would exceed the cap {cap}")
    joint = _two_mode_joint(wa, wb)
    kernel = np.zeros((4, 4))
    kernel[0, 0] = 1.0 / (2.0 * win * win)
    out = joint.with_gaussian(kernel).integrate([0, 1])
    acceptance = out.total_integral()
    gen = max(wa.meta.get("generation", 0), wb.meta.get("generation", 0)) + 1
    return GaussPolyWigner(
        out * (1.0 / acceptance),
        cap,
        {"kind": "bred", "window_internal": win, "acceptance": acceptance, "generation": gen},
    )


def loss_channel_wigner(w: GaussPolyWigner, eta: float) -> GaussPolyWigner:
    """Pure-loss channel: ``v_out = sqrt(eta) v + sqrt(1 - eta) v_vac``."""
    eta = float(eta)
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"eta must lie in [0, 1], got {eta}")
    if eta == 1.0:
        return w
    if eta == 0.0:
        return vacuum_wigner()
    se = math.sqrt(eta)
    I = np.eye(2)
    if eta < 0.5:
        # variables (x, p, u, v): kernel exp(-|out - sqrt(eta) in|^2 / (1-eta)) / (pi (1-eta))
        kernel = np.block([[I, -se * I], [-se * I, eta * I]]) / (1.0 - eta)
        inner = w.poly.embed(4, [2, 3])
        out = inner.with_gaussian(kernel) * (1.0 / (math.pi * (1.0 - eta)))
    else:
        # the kernel above degenerates as eta -> 1; integrate the vacuum variable
        # (z_x, z_p) instead: in = (out - sqrt(1 - eta) z) / sqrt(eta)
        T = np.hstack([I, -math.sqrt(1.0 - eta) * I]) / se
        vac = np.diag([0.0, 0.0, 1.0, 1.0])
        out = w.poly.substitute(T).with_gaussian(vac) * (1.0 / (math.pi * eta))
    res = out.integrate([2, 3])
    return GaussPolyWigner(res, w.max_degree, {**w.meta, "loss_eta": eta})


def marginal(w: GaussPolyWigner, theta: float) -> GaussPoly:
    """Exact density of the quadrature ``x cos(theta) + p sin(theta)``."""
    c, s = math.cos(theta), math.sin(theta)
    return w.poly.substitute(np.array([[c, -s], [s, c]])).integrate([1])


# ---------------------------------------------------------------------------


def _evaluator(w):
    from .fock import DensityMatrix, FockVector, as_density

    if isinstance(w, GaussPolyWigner):
        return w
    if isinstance(w, (DensityMatrix, FockVector)):
        rho = as_density(w).entries
        return lambda x, p: phasespace.wigner_values(rho, x, p)
    if callable(w):
        return w
    raise DomainError(f"cannot evaluate a Wigner function from {type(w).__name__}")


def negativity_point(w, half_width: float = 6.0, step: float = 0.02):
    """Global minimum ``(value, x, p)`` of a Wigner function over a square box.

    Grid scan followed by bounded local refinement from the best grid point.
    A :class:`~catbreed.phasespace.WignerGrid` is scanned as given.
    """
    if isinstance(w, phasespace.WignerGrid):
        return w.minimum()
    func = _evaluator(w)
    axis = np.linspace(-half_width, half_width, int(round(2 * half_width / step)) + 1)
    X, P = np.meshgrid(axis, axis, indexing="ij")
    vals = np.asarray(func(X, P))
    i, j = np.unravel_index(np.argmin(vals), vals.shape)
    best = (float(vals[i, j]), float(axis[i]), float(axis[j]))
    res = optimize.minimize(
        lambda v: float(func(v[0], v[1])),
        x0=[best[1], best[2]],
        method="L-BFGS-B",
        bounds=[(-half_width, half_width)] * 2,
    )
    if res.fun < best[0]:
        best = (float(res.fun), float(res.x[0]), float(res.x[1]))
    return best


def negativity(w, half_width: float = 6.0, step: float = 0.02) -> float:
    """Global minimum of the Wigner function (negative values witness non-classicality)."""
    return negativity_point(w, half_width, step)[0]
