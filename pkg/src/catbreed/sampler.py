"""Synthetic joint homodyne data, conditioning, histograms and model fits.

All quadratures are drawn in internal units. Randomness is organized in
fixed-size chunks, each with its own ``SeedSequence`` child keyed by
``(phase index, chunk index)``; chunks may be processed by any number of
workers and are concatenated in index order, so a sample set depends only on
its seed and parameters.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

import numpy as np
from scipy import optimize

from .errors import DomainError, EnvelopeError
from .units import Units, check_units, to_internal
from .wigner import SinglePhotonModel, imperfect_photon_wigner, joint_distribution, joint_prob_closed

CHUNK_SIZE = 4096
ENVELOPE_VARIANCE_FACTOR = 1.2


class SampleRecord(NamedTuple):
    x0: float
    x1: float
    theta: float
    accepted: bool


@dataclass(frozen=True)
class SampleSet:
    """Tagged homodyne pairs ``(x0, x1)`` with nominal relative phase ``theta`` (radians)."""

    x0: np.ndarray
    x1: np.ndarray
    theta: np.ndarray
    accepted: np.ndarray
    units: str = "internal"
    seed: int | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        check_units(self.units)
        arrays = {}
        for name, dtype in (("x0", float), ("x1", float), ("theta", float), ("accepted", bool)):
            arr = np.array(getattr(self, name), dtype=dtype).ravel()
            arr.flags.writeable = False
            arrays[name] = arr
        n = arrays["x0"].size
        if any(a.size != n for a in arrays.values()):
            raise DomainError("sample columns must have equal length")
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.x0.size

    def __iter__(self) -> Iterator[SampleRecord]:
        for a, b, t, ok in zip(self.x0, self.x1, self.theta, self.accepted):
            yield SampleRecord(float(a), float(b), float(t), bool(ok))

    def phases(self) -> np.ndarray:
        return np.unique(self.theta)

    def counts_per_phase(self) -> dict[float, int]:
        vals, counts = np.unique(self.theta, return_counts=True)
        return {float(v): int(c) for v, c in zip(vals, counts)}

    def select(self, mask) -> "SampleSet":
        mask = np.asarray(mask)
        return SampleSet(self.x0[mask], self.x1[mask], self.theta[mask], self.accepted[mask],
                         self.units, self.seed, dict(self.provenance))

    def at_phase(self, theta: float) -> "SampleSet":
        return self.select(np.isclose(self.theta, theta, rtol=0, atol=1e-12))

    def to_internal(self) -> "SampleSet":
        if self.units == "internal":
            return self
        f = to_internal(1.0, self.units)
        return SampleSet(self.x0 * f, self.x1 * f, self.theta, self.accepted, "internal", self.seed, dict(self.provenance))

    @staticmethod
    def concatenate(sets: Sequence["SampleSet"]) -> "SampleSet":
        if not sets:
            raise DomainError("nothing to concatenate")
        units = {s.units for s in sets}
        if len(units) != 1:
            raise DomainError("cannot concatenate sample sets with different units")
        prov = dict(sets[0].provenance)
        return SampleSet(
            np.concatenate([s.x0 for s in sets]),
            np.concatenate([s.x1 for s in sets]),
            np.concatenate([s.theta for s in sets]),
            np.concatenate([s.accepted for s in sets]),
            units.pop(),
            sets[0].seed,
            prov,
        )


# ---------------------------------------------------------------------------
# rejection sampling of the joint density


def envelope_constant(m: SinglePhotonModel) -> float:
    """Bound on ``P(x0, x1; theta) / g(x0, x1)`` valid for every ``theta``.

    ``g`` is the isotropic Gaussian proposal of variance
    ``1.2 * sigma**2 / 2`` per axis. With ``u = x0**2 + x1**2`` the bracket
    of the closed form is bounded by ``a u**2 + b u + c`` (dropping its
    non-positive cross term and maximizing the others over ``cos**2``), and
    the ratio's maximum over ``u`` follows from a quadratic.
    """
    s2, d = m.sigma**2, m.delta
    a = d * d
    b = s2 * d * max(abs(4 - 4 * d), abs(2 * d + 4 - 4 * d))
    c = s2 * s2 * max(abs(4 - 4 * d + 2 * d * d), abs(4 - 4 * d + d * d))
    v = ENVELOPE_VARIANCE_FACTOR * s2 / 2.0
    k = 1.0 / (1.0 / s2 - 1.0 / (2.0 * v))  # residual Gaussian scale exp(-u/k)
    prefactor = 2.0 * math.pi * v / (4.0 * math.pi * s2**3)
    cands = [0.0]
    qa, qb, qc = a, b - 2 * a * k, c - b * k
    if qa > 0:
        disc = qb * qb - 4 * qa * qc
        if disc >= 0:
            cands += [(-qb + sq) / (2 * qa) for sq in (math.sqrt(disc), -math.sqrt(disc))]
    elif qb != 0:
        cands.append(-qc / qb)
    best = max(math.exp(-u / k) * (a * u * u + b * u + c) for u in cands if u >= 0)
    # the bound is attained exactly for some models (e.g. delta = 0 at the
    # origin); a relative margin absorbs the rounding of the density itself
    return prefactor * best * (1.0 + 1e-9)


def _jitter(rng, size, jitter_deg, model):
    if jitter_deg <= 0:
        return np.zeros(size)
    j = math.radians(jitter_deg)
    if model == "uniform":
        return rng.uniform(-j, j, size)
    if model == "gaussian":
        return rng.normal(0.0, j / math.sqrt(3.0), size)
    raise DomainError(f"unknown jitter model {model!r}")


def _sample_chunk(m, theta, n, seed_seq, bound, jitter_deg, jitter_model):
    rng = np.random.default_rng(seed_seq)
    sd = math.sqrt(ENVELOPE_VARIANCE_FACTOR * m.sigma**2 / 2.0)
    v = sd * sd
    xs0, xs1 = [], []
    have = 0
    proposals = 0
    while have < n:
        batch = max(256, int(1.3 * (n - have) * bound))
        x0 = rng.normal(0.0, sd, batch)
        x1 = rng.normal(0.0, sd, batch)
        th = theta + _jitter(rng, batch, jitter_deg, jitter_model)
        u = rng.random(batch)
        g = np.exp(-(x0 * x0 + x1 * x1) / (2 * v)) / (2 * math.pi * v)
        ratio = joint_prob_closed(x0, x1, th, m) / (bound * g)
        if np.any(ratio > 1.0):
            raise EnvelopeError(f"rejection envelope violated (max ratio {ratio.max():.6f})")
        ok = u < ratio
        need = n - have
        hits = np.nonzero(ok)[0]
        if hits.size >= need:
            # proposals after the last needed acceptance are discarded unused
            cut = int(hits[need - 1]) + 1
            ok = ok[:cut]
            x0, x1 = x0[:cut], x1[:cut]
        xs0.append(x0[ok])
        xs1.append(x1[ok])
        have += int(ok.sum())
        proposals += ok.size
    return np.concatenate(xs0), np.concatenate(xs1), proposals


def _chunked(n, chunk_size):
    sizes = [chunk_size] * (n // chunk_size)
    if n % chunk_size:
        sizes.append(n % chunk_size)
    return sizes


def sample_joint(
    m: SinglePhotonModel,
    theta: float,
    n: int,
    seed: int,
    phase_jitter_deg: float = 0.0,
    jitter_model: str = "uniform",
    workers: int = 1,
    phase_index: int = 0,
    chunk_size: int = CHUNK_SIZE,
) -> SampleSet:
    """Draw ``n`` i.i.d. pairs from the closed-form joint density at phase ``theta``.

    Args:
        m: photon model of both inputs.
        theta: nominal relative phase in radians (stored on every record).
        n: number of samples.
        seed: integer seed.
        phase_jitter_deg: spread of the true phase around ``theta``; 0 (the
            default) disables jitter. ``"uniform"`` draws from
            ``[-j, j]``, ``"gaussian"`` from a normal of std ``j/sqrt(3)``.
        workers: threads used for chunks; does not change the output.
        phase_index: extra key separating streams of several phases.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    if phase_jitter_deg < 0:
        raise DomainError("phase jitter must be non-negative")
    bound = envelope_constant(m)
    sizes = _chunked(int(n), chunk_size)
    seqs = [np.random.SeedSequence(seed, spawn_key=(phase_index, k)) for k in range(len(sizes))]
    args = [(m, float(theta), sz, sq, bound, phase_jitter_deg, jitter_model) for sz, sq in zip(sizes, seqs)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: _sample_chunk(*a), args))
    else:
        parts = [_sample_chunk(*a) for a in args]
    x0 = np.concatenate([p[0] for p in parts])
    x1 = np.concatenate([p[1] for p in parts])
    proposals = sum(p[2] for p in parts)
    prov = {
        "model": "joint-closed-form",
        "sigma": m.sigma,
        "delta": m.delta,
        "phase_jitter_deg": phase_jitter_deg,
        "jitter_model": jitter_model,
        "envelope_constant": bound,
        "acceptance_rate": n / proposals,
    }
    return SampleSet(x0, x1, np.full(x0.size, float(theta)), np.zeros(x0.size, bool), "internal", seed, prov)


def sample_phases(
    m: SinglePhotonModel,
    thetas_deg: Sequence[float],
    n_per_phase: int,
    seed: int,
    phase_jitter_deg: float = 0.0,
    jitter_model: str = "uniform",
    workers: int = 1,
) -> SampleSet:
    """:func:`sample_joint` at several phases (degrees), one independent stream per phase."""
    sets = [
        sample_joint(m, math.radians(t), n_per_phase, seed, phase_jitter_deg, jitter_model, workers, phase_index=i)
        for i, t in enumerate(thetas_deg)
    ]
    out = SampleSet.concatenate(sets)
    prov = dict(sets[0].provenance)
    prov["phases_deg"] = [float(t) for t in thetas_deg]
    prov["acceptance_rate"] = float(np.mean([s.provenance["acceptance_rate"] for s in sets]))
    return SampleSet(out.x0, out.x1, out.theta, out.accepted, out.units, seed, prov)


def sample_until_conditioned(
    m: SinglePhotonModel,
    thetas_deg: Sequence[float],
    n_conditioned: int,
    window: float,
    seed: int,
    units: Units = "homodyne",
    phase_jitter_deg: float = 0.0,
    jitter_model: str = "uniform",
    max_raw: int = 10_000_000,
) -> SampleSet:
    """Raw records per phase, drawn until ``n_conditioned`` of them pass ``|x0| <= window``.

    Whole chunks are generated in index order and the raw stream is cut right
    after the ``n_conditioned``-th accepted record, so the result is a
    deterministic prefix of the infinite per-phase stream.
    """
    if n_conditioned < 1:
        raise DomainError("n_conditioned must be at least 1")
    win = float(to_internal(window, units))
    bound = envelope_constant(m)
    sets = []
    for i, t in enumerate(thetas_deg):
        th = math.radians(t)
        xs0, xs1 = [], []
        got = raw = 0
        k = 0
        while got < n_conditioned:
            if raw >= max_raw:
                raise DomainError(f"fewer than {n_conditioned} conditioned records in {max_raw} raw draws")
            seq = np.random.SeedSequence(seed, spawn_key=(i, k))
            a, b, _ = _sample_chunk(m, th, CHUNK_SIZE, seq, bound, phase_jitter_deg, jitter_model)
            xs0.append(a)
            xs1.append(b)
            got += int(np.sum(np.abs(a) <= win))
            raw += a.size
            k += 1
        x0 = np.concatenate(xs0)
        x1 = np.concatenate(xs1)
        last = np.nonzero(np.abs(x0) <= win)[0][n_conditioned - 1]
        x0, x1 = x0[: last + 1], x1[: last + 1]
        sets.append(SampleSet(x0, x1, np.full(x0.size, th), np.zeros(x0.size, bool), "internal", seed))
    out = SampleSet.concatenate(sets)
    prov = {
        "model": "joint-closed-form",
        "sigma": m.sigma,
        "delta": m.delta,
        "phases_deg": [float(t) for t in thetas_deg],
        "n_conditioned_target": int(n_conditioned),
        "window_internal": win,
        "phase_jitter_deg": phase_jitter_deg,
        "jitter_model": jitter_model,
        "envelope_constant": bound,
    }
    return SampleSet(out.x0, out.x1, out.theta, out.accepted, "internal", seed, prov)


def sample_photon_vacuum(m: SinglePhotonModel, n: int, seed: int, theta: float = math.pi) -> SampleSet:
    """Joint data with photon ``m`` in port 0 and vacuum in port 1.

    At ``theta`` = 0 or pi only x-quadratures enter, so the pair is built
    exactly from independent input quadratures: the photon's x-marginal is
    the mixture ``(1 - delta/2) N(0, sigma^2/2) + (delta/2) q`` with
    ``q(x) ∝ x^2 exp(-x^2/sigma^2)``.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    sign = round(math.cos(theta))
    if not math.isclose(abs(math.cos(theta)), 1.0, abs_tol=1e-12):
        raise DomainError("photon+vacuum runs are defined at theta = 0 or pi")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    s = m.sigma
    gauss = rng.normal(0.0, s / math.sqrt(2.0), n)
    radial = np.sqrt(rng.gamma(1.5, s * s, n)) * rng.choice([-1.0, 1.0], n)
    pick = rng.random(n) < m.delta / 2.0
    xa = np.where(pick, radial, gauss)
    xb = rng.normal(0.0, 1.0 / math.sqrt(2.0), n)
    x0 = (xa + xb) / math.sqrt(2.0)
    x1 = sign * (xa - xb) / math.sqrt(2.0)
    prov = {"model": "photon+vacuum", "sigma": m.sigma, "delta": m.delta}
    return SampleSet(x0, x1, np.full(n, float(theta)), np.zeros(n, bool), "internal", seed, prov)


# ---------------------------------------------------------------------------
# conditioning


@dataclass(frozen=True)
class ConditionResult:
    accepted: SampleSet
    annotated: SampleSet
    fraction: float
    stderr: float
    window_internal: float

    @property
    def empty(self) -> bool:
        return len(self.accepted) == 0

    @property
    def status(self) -> str:
        return "empty" if self.empty else "ok"


def condition(s: SampleSet, window: float, units: Units = "homodyne") -> ConditionResult:
    """Keep records with ``|x0| <= window``; report the fraction and its binomial error."""
    if not window > 0:
        raise DomainError("window must be positive")
    win = float(to_internal(window, units))
    si = s.to_internal()
    ok = np.abs(si.x0) <= win
    n = len(si)
    frac = float(ok.mean()) if n else 0.0
    err = math.sqrt(frac * (1 - frac) / n) if n else 0.0
    prov = dict(si.provenance)
    prov["window_internal"] = win
    annotated = SampleSet(si.x0, si.x1, si.theta, ok, si.units, si.seed, prov)
    return ConditionResult(annotated.select(ok), annotated, frac, err, win)


def x0_marginal(m: SinglePhotonModel):
    """Exact density of ``x0`` (phase independent) as a one-variable GaussPoly."""
    w = imperfect_photon_wigner(m)
    return joint_distribution(w, w, math.pi / 2).integrate([1])


def analytic_acceptance(m: SinglePhotonModel, window: float, units: Units = "homodyne") -> float:
    """Probability that ``|x0| <= window`` under the joint model."""
    win = float(to_internal(window, units))
    marg = x0_marginal(m)
    u, w = np.polynomial.legendre.leggauss(64)
    return float(np.sum(win * w * marg(win * u)))


# ---------------------------------------------------------------------------
# histograms


@dataclass(frozen=True)
class Histogram2D:
    edges_x0: np.ndarray
    edges_x1: np.ndarray
    counts: np.ndarray
    total: int
    overflow: int

    @property
    def binned(self) -> int:
        return int(self.counts.sum())


def _edges(bins, rng):
    if np.isscalar(bins):
        if int(bins) < 2:
            raise DomainError("need at least 2 bins")
        lo, hi = rng
        return np.linspace(lo, hi, int(bins) + 1)
    e = np.asarray(bins, dtype=float)
    if e.size < 3 or np.any(np.diff(e) <= 0):
        raise DomainError("bin edges must be strictly increasing with at least 2 bins")
    return e


def histogram2d(s: SampleSet, bins=61, range=((-4.0, 4.0), (-4.0, 4.0))) -> Histogram2D:
    """2D histogram of ``(x0, x1)``; samples outside the edges go to an overflow tally.

    ``bins`` is an int (shared by both axes) or a pair of ints/edge arrays.
    """
    if isinstance(bins, (tuple, list)) and len(bins) == 2:
        bx, by = bins
    else:
        bx = by = bins
    ex = _edges(bx, range[0])
    ey = _edges(by, range[1])
    counts, _, _ = np.histogram2d(s.x0, s.x1, bins=[ex, ey])
    counts = counts.astype(np.int64)
    inside = (s.x0 >= ex[0]) & (s.x0 <= ex[-1]) & (s.x1 >= ey[0]) & (s.x1 <= ey[-1])
    return Histogram2D(ex, ey, counts, len(s), int((~inside).sum()))


# ---------------------------------------------------------------------------
# fitting


class FitResult(NamedTuple):
    sigma: float
    delta: float
    log_likelihood: float
    se_sigma: float
    se_delta: float
    on_boundary: bool
    converged: bool


SIGMA_RANGE = (1.0, 1.5)
DELTA_RANGE = (0.0, 2.0)


def log_likelihood(s: SampleSet, sigma: float, delta: float) -> float:
    si = s.to_internal()
    p = joint_prob_closed(si.x0, si.x1, si.theta, SinglePhotonModel(sigma, delta))
    return float(np.sum(np.log(np.maximum(p, 1e-300))))


def _hessian(f, x, h):
    x = np.asarray(x, float)
    n = x.size
    H = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            ei = np.zeros(n)
            ej = np.zeros(n)
            ei[i] = h[i]
            ej[j] = h[j]
            val = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4 * h[i] * h[j])
            H[i, j] = H[j, i] = val
    return H


def fit_sigma_delta(s: SampleSet, grid=(26, 41)) -> FitResult:
    """Maximum-likelihood ``(sigma, delta)`` of the closed-form joint density.

    A coarse grid over ``sigma in [1, 1.5]``, ``delta in [0, 2]`` (ties go to
    the smaller ``delta``) seeds a bounded quasi-Newton refinement. Standard
    errors come from the inverse observed information (finite-difference
    Hessian of the log-likelihood).
    """
    if len(s) == 0:
        raise DomainError("cannot fit an empty sample set")
    si = s.to_internal()
    sig_grid = np.linspace(*SIGMA_RANGE, grid[0])
    del_grid = np.linspace(*DELTA_RANGE, grid[1])
    best = (-np.inf, None, None)
    for d in del_grid:
        for sg in sig_grid:
            ll = log_likelihood(si, sg, d)
            if ll > best[0]:
                best = (ll, sg, d)

    def nll(v):
        return -log_likelihood(si, v[0], v[1])

    res = optimize.minimize(nll, x0=[best[1], best[2]], method="L-BFGS-B",
                            bounds=[SIGMA_RANGE, DELTA_RANGE], options={"ftol": 1e-14, "gtol": 1e-8})
    sg, d = float(res.x[0]), float(res.x[1])
    ll = -float(res.fun)
    if ll < best[0]:
        ll, sg, d = best
    on_boundary = bool(
        np.isclose(sg, SIGMA_RANGE[0], atol=1e-4) or np.isclose(sg, SIGMA_RANGE[1], atol=1e-4)
        or np.isclose(d, DELTA_RANGE[0], atol=1e-4) or np.isclose(d, DELTA_RANGE[1], atol=1e-4)
    )
    # one-sided interior stencil near the boundary keeps SigmaPhotonModel valid
    h = np.array([1e-4, 1e-4])
    centre = np.array([
        min(max(sg, SIGMA_RANGE[0] + 2 * h[0]), SIGMA_RANGE[1] - 2 * h[0]),
        min(max(d, DELTA_RANGE[0] + 2 * h[1]), DELTA_RANGE[1] - 2 * h[1]),
    ])
    H = _hessian(nll, centre, h)
    try:
        cov = np.linalg.inv(H)
        se = np.sqrt(np.clip(np.diag(cov), 0, None))
    except np.linalg.LinAlgError:
        se = np.array([np.nan, np.nan])
    return FitResult(sg, d, ll, float(se[0]), float(se[1]), on_boundary, bool(res.success))


class QuickDelta(NamedTuple):
    delta: float
    sigma: float
    in_model: bool
    n: int


def estimate_delta_quick(s: SampleSet) -> QuickDelta:
    """Moment estimate of ``(sigma, delta)`` from a photon+vacuum run.

    ``x' = (x0 - x1)/sqrt(2)`` undoes the beamsplitter at relative phase
    180 degrees. For the photon's quadrature marginal
    ``E[x^2] = v (1 + delta)`` and ``E[x^4] = 3 v^2 (1 + 2 delta)`` with
    ``v = sigma^2/2``, so ``R = E[x^4] / (3 E[x^2]^2)`` fixes
    ``delta = ((1 - R) + sqrt(1 - R)) / R``.
    """
    si = s.to_internal()
    if len(si) == 0:
        raise DomainError("empty sample set")
    xp = (si.x0 - si.x1) / math.sqrt(2.0)
    m2 = float(np.mean(xp**2))
    m4 = float(np.mean(xp**4))
    R = m4 / (3.0 * m2 * m2)
    in_model = True
    if R >= 1.0:
        delta = 0.0
        in_model = R <= 1.0
    else:
        delta = ((1.0 - R) + math.sqrt(1.0 - R)) / R
        if delta > 2.0:
            in_model = False
    sigma = math.sqrt(2.0 * m2 / (1.0 + delta))
    return QuickDelta(delta, sigma, in_model, len(si))
