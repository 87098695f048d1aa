"""Binned homodyne tomography with an efficiency-aware measurement model.

Each phase contributes a set of bin operators
``Pi_k = L^dag( ∫_bin |x_theta><x_theta| dx )``, where ``L^dag`` is the
Heisenberg-picture pure-loss map at the detection efficiency. The density
matrix is found by the expectation-maximization iteration
``rho <- R rho R / Tr(...)`` with ``R = sum f_k / p_k Pi_k / N``, started
from the maximally mixed state.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import AccuracyError, DomainError, TruncationError
from .fock import (
    DensityMatrix,
    SqueezedCatSpec,
    apply_loss,
    apply_loss_adjoint,
    as_density,
    fidelity,
    hermite_functions,
    make_squeezed_cat,
)
from .sampler import SampleSet
from .wigner import negativity_point

_BIN_NODES = 12
_TAIL_LENGTH = 10.0
SYMMETRIES = ("none", "real", "parity", "real+parity")


@dataclass(frozen=True)
class TomographyConfig:
    """Settings of the measurement model and of the MLE iteration.

    ``x_max`` and ``bin_width`` are internal units; phases are degrees.
    ``symmetry`` restricts the estimate to real (``"real"``), parity
    block-diagonal (``"parity"``) or both (``"real+parity"``) density
    matrices; heralded states from phase-insensitive inputs with a window
    symmetric about ``x0 = 0`` have both properties.
    """

    eta_det: float = 0.77
    cutoff: int = 20
    bin_width: float = 0.1
    x_max: float = 5.0
    phases_deg: tuple = (90.0, 120.0, 150.0, 180.0)
    max_iterations: int = 20000
    tolerance: float = 1e-9
    probability_floor: float = 1e-12
    symmetry: str = "none"

    def __post_init__(self):
        if not 0.0 < self.eta_det <= 1.0:
            raise DomainError("eta_det must lie in (0, 1]")
        if not self.tolerance > 0:
            raise DomainError("tolerance must be positive")
        if self.cutoff < 1:
            raise DomainError("cutoff must be at least 1")
        if not (self.bin_width > 0 and self.x_max > 0):
            raise DomainError("bin width and range must be positive")
        if self.symmetry not in SYMMETRIES:
            raise DomainError(f"symmetry must be one of {SYMMETRIES}")
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be at least 1")
        object.__setattr__(self, "phases_deg", tuple(float(t) for t in self.phases_deg))

    @property
    def edges(self) -> np.ndarray:
        """Inner bin edges; two overflow bins extend them to ``±inf``."""
        nbins = int(round(2 * self.x_max / self.bin_width))
        return np.linspace(-self.x_max, self.x_max, nbins + 1)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["phases_deg"] = list(self.phases_deg)
        return d


@dataclass(frozen=True)
class POVMSet:
    """Bin operators ``ops[phase, bin]`` (each ``dim x dim``) with bin edges.

    Bin 0 is ``(-inf, edges[0])`` and the last bin is ``(edges[-1], inf)``.
    """

    ops: np.ndarray
    edges: np.ndarray
    phases: np.ndarray
    eta_det: float

    @property
    def dim(self) -> int:
        return self.ops.shape[-1]

    @property
    def n_bins(self) -> int:
        return self.ops.shape[1]

    def probabilities(self, rho) -> np.ndarray:
        """Predicted bin probabilities ``Tr(rho Pi)``, shape ``(phases, bins)``."""
        r = rho if isinstance(rho, np.ndarray) else as_density(rho).entries
        if r.shape[0] != self.dim:
            raise DomainError(f"state dimension {r.shape[0]} differs from POVM dimension {self.dim}")
        return np.real(np.einsum("pkij,ji->pk", self.ops, r))

    def completeness_error(self) -> float:
        eye = np.eye(self.dim)
        return float(np.max(np.abs(self.ops.sum(axis=1) - eye)))

    def phase_index(self, theta: float) -> int:
        d = np.abs(np.angle(np.exp(1j * (self.phases - theta))))
        i = int(np.argmin(d))
        if d[i] > 1e-9:
            raise DomainError(f"phase {math.degrees(theta):.6g} deg is not in the POVM set")
        return i

    def bin_counts(self, samples: SampleSet) -> np.ndarray:
        """Histogram the mode-1 quadrature ``x1`` per phase into the POVM bins."""
        s = samples.to_internal()
        counts = np.zeros((len(self.phases), self.n_bins), dtype=np.int64)
        for th in np.unique(s.theta):
            i = self.phase_index(float(th))
            x = s.x1[s.theta == th]
            idx = np.searchsorted(self.edges, x, side="right")
            counts[i] += np.bincount(idx, minlength=self.n_bins)
        return counts


def _interval_moments(lo: float, hi: float, dim: int, nodes: int, panel: float = 0.5) -> np.ndarray:
    """``∫_lo^hi phi_m phi_n dx`` for ``m, n < dim``.

    Gauss-Legendre with ``nodes`` points on each of ``ceil((hi - lo) / panel)``
    equal panels, so wide bins are integrated as accurately as narrow ones.
    """
    u, w = np.polynomial.legendre.leggauss(nodes)
    cuts = np.linspace(lo, hi, max(1, math.ceil((hi - lo) / panel)) + 1)
    half = 0.5 * np.diff(cuts)
    x = (half[:, None] * u[None, :] + 0.5 * (cuts[:-1] + cuts[1:])[:, None]).ravel()
    wt = (half[:, None] * w[None, :]).ravel()
    phi = hermite_functions(dim - 1, x)
    return (phi * wt) @ phi.T


def build_homodyne_povm(cfg: TomographyConfig) -> POVMSet:
    """Efficiency-folded bin operators at every configured phase.

    Raises:
        DomainError: if the bins do not cover at least ``±5``.
        TruncationError: if the operators of a phase fail to sum to the
            identity within ``1e-8``.
    """
    if cfg.x_max < 5.0 - 1e-12:
        raise DomainError("homodyne bins must cover at least ±5 internal units")
    dim = cfg.cutoff + 1
    edges = cfg.edges
    # the tails are integrated far enough out that the Hermite functions of
    # the truncated space have vanished
    tail = max(_TAIL_LENGTH, 2.0 * math.sqrt(2.0 * dim + 1.0))
    bounds = [(-cfg.x_max - tail, edges[0])]
    bounds += [(edges[k], edges[k + 1]) for k in range(edges.size - 1)]
    bounds += [(edges[-1], cfg.x_max + tail)]
    real_ops = np.stack([
        _interval_moments(lo, hi, dim, _BIN_NODES)
        for k, (lo, hi) in enumerate(bounds)
    ])
    real_ops = np.stack([apply_loss_adjoint(op, cfg.eta_det) for op in real_ops])
    phases = np.radians(np.asarray(cfg.phases_deg))
    n = np.arange(dim)
    ops = np.empty((phases.size,) + real_ops.shape, dtype=complex)
    for i, th in enumerate(phases):
        # <m|x_theta><x_theta|n> = exp(i (m - n) theta) phi_m phi_n; the loss
        # map commutes with phase rotations, so the phase factor comes after.
        rot = np.exp(1j * th * (n[:, None] - n[None, :]))
        ops[i] = real_ops * rot
    povm = POVMSet(ops, edges, phases, cfg.eta_det)
    err = povm.completeness_error()
    if err > 1e-8:
        raise TruncationError(f"bin operators miss completeness by {err:.3g}; enlarge the range or cutoff")
    return povm


@dataclass
class TomographyResult:
    rho: DensityMatrix
    log_likelihood: float
    iterations: int
    converged: bool
    negativity: float
    negativity_location: tuple
    fidelity: float | None
    target: SqueezedCatSpec | None
    config: TomographyConfig
    counts: np.ndarray
    ll_trace: list = field(default_factory=list)
    flags: dict = field(default_factory=dict)
    error_bars: dict | None = None

    def to_dict(self) -> dict:
        r = self.rho.entries
        return {
            "rho": [[[float(v.real), float(v.imag)] for v in row] for row in r],
            "log_likelihood": self.log_likelihood,
            "iterations": self.iterations,
            "converged": self.converged,
            "negativity": self.negativity,
            "negativity_location": list(self.negativity_location),
            "fidelity": self.fidelity,
            "target": None if self.target is None else asdict(self.target),
            "config": self.config.to_dict(),
            "counts": self.counts.tolist(),
            "ll_trace": list(self.ll_trace),
            "flags": dict(self.flags),
            "error_bars": self.error_bars,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "TomographyResult":
        rho = np.array([[complex(a, b) for a, b in row] for row in d["rho"]])
        cfg = TomographyConfig(**{**d["config"], "phases_deg": tuple(d["config"]["phases_deg"])})
        tgt = None if d["target"] is None else SqueezedCatSpec(**d["target"])
        return cls(
            DensityMatrix(rho), d["log_likelihood"], d["iterations"], d["converged"], d["negativity"],
            tuple(d["negativity_location"]), d["fidelity"], tgt, cfg, np.asarray(d["counts"], dtype=np.int64),
            list(d["ll_trace"]), dict(d["flags"]), d["error_bars"],
        )

    @classmethod
    def from_json(cls, text: str) -> "TomographyResult":
        return cls.from_dict(json.loads(text))


def _hermitize(r):
    r = 0.5 * (r + r.conj().T)
    return r / np.trace(r).real


def _symmetry_projector(symmetry: str, dim: int):
    """Map projecting Hermitian operators onto the requested symmetry class."""
    parity = (-1.0) ** np.arange(dim)
    same = np.equal.outer(parity, parity)

    def project(op):
        if "real" in symmetry:
            op = op.real.astype(complex)
        if "parity" in symmetry:
            op = np.where(same, op, 0.0)
        return op

    return project


def mle_iterate(counts: np.ndarray, povm: POVMSet, cfg: TomographyConfig, callback=None):
    """Run the RρR iteration on binned counts; returns ``(rho, ll, iterations, converged, trace, flags)``.

    When a full step would lower the likelihood (it is not guaranteed to
    ascend), the diluted step ``(I + eps R) rho (I + eps R)`` is used with
    ``eps`` halved until the likelihood does not decrease; the iteration
    stops if no such step exists above ``eps = 1e-12``.

    With ``cfg.symmetry`` other than ``"none"`` the iterates are confined to
    real and/or parity-block-diagonal matrices by projecting ``R``; for data
    from a state with that symmetry this is the same as maximizing the
    likelihood of the mirror-symmetrized counts.

    ``callback(iteration, rho, log_likelihood)`` is called after every
    accepted step.
    """
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        raise DomainError("no counts to reconstruct from")
    dim = povm.dim
    flat_ops = povm.ops.reshape(-1, dim * dim)
    # Tr(rho Pi) = sum_ij Pi_ij rho_ji
    flat_t = povm.ops.transpose(0, 1, 3, 2).reshape(-1, dim * dim)
    f = counts.ravel()
    used = f > 0
    floor = cfg.probability_floor
    project = _symmetry_projector(cfg.symmetry, dim)

    def probs_of(r):
        return np.real(flat_t @ r.ravel())

    def loglik(p):
        return float(np.sum(f[used] * np.log(np.maximum(p[used], floor))))

    rho = np.eye(dim, dtype=complex) / dim
    probs = probs_of(rho)
    ll = loglik(probs)
    trace = [ll]
    flags = {"floored_bins": 0, "diluted_steps": 0, "symmetry": cfg.symmetry}
    eye = np.eye(dim)
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        n_floored = int(np.sum((probs < floor) & used))
        flags["floored_bins"] = max(flags["floored_bins"], n_floored)
        ratio = np.where(used, f / np.maximum(probs, floor), 0.0) / total
        R = project((ratio @ flat_ops).reshape(dim, dim))
        new = project(_hermitize(R @ rho @ R))
        new_probs = probs_of(new)
        new_ll = loglik(new_probs)
        if new_ll < ll:
            eps = 1.0
            while eps > 1e-12:
                eps *= 0.5
                A = eye + eps * R
                cand = project(_hermitize(A @ rho @ A))
                cand_probs = probs_of(cand)
                cand_ll = loglik(cand_probs)
                if cand_ll >= ll:
                    new, new_probs, new_ll = cand, cand_probs, cand_ll
                    flags["diluted_steps"] += 1
                    break
            else:
                converged = True
                it -= 1
                break
        if new_ll < ll:
            raise AccuracyError("log-likelihood decreased during MLE", achieved=new_ll - ll)
        delta = new_ll - ll
        rho, probs, ll = new, new_probs, new_ll
        trace.append(ll)
        if callback is not None:
            callback(it, rho, ll)
        if delta < cfg.tolerance:
            converged = True
            break
    return rho, ll, it, converged, trace, flags


def _state_summary(rho: DensityMatrix, target: SqueezedCatSpec | None, fast: bool = False):
    step = 0.05 if fast else 0.02
    neg = negativity_point(rho, half_width=4.0 if fast else 6.0, step=step)
    fid = None
    if target is not None:
        fid = fidelity(rho, make_squeezed_cat(target, rho.cutoff))
    return neg, fid


def mle_reconstruct(
    samples: SampleSet,
    povm: POVMSet,
    cfg: TomographyConfig,
    target: SqueezedCatSpec | None = None,
) -> TomographyResult:
    """Maximum-likelihood density matrix of conditioned mode-1 samples.

    Args:
        samples: conditioned records; each phase must be present in ``povm``.
        povm: measurement model from :func:`build_homodyne_povm`.
        cfg: iteration settings.
        target: optional cat used to report a fidelity.

    Returns:
        TomographyResult with the estimate, its negativity and fidelity.
    """
    if len(samples) == 0:
        raise DomainError("cannot reconstruct from an empty sample set")
    counts = povm.bin_counts(samples)
    return reconstruct_from_counts(counts, povm, cfg, target)


def reconstruct_from_counts(counts, povm: POVMSet, cfg: TomographyConfig, target=None, fast_summary=False) -> TomographyResult:
    rho, ll, it, conv, trace, flags = mle_iterate(counts, povm, cfg)
    dm = DensityMatrix(rho, {"kind": "mle", "eta_det": cfg.eta_det}).validate()
    neg, fid = _state_summary(dm, target, fast_summary)
    return TomographyResult(dm, ll, it, conv, neg[0], (neg[1], neg[2]), fid, target, cfg,
                            np.asarray(counts, dtype=np.int64), trace, flags)


class MCStats(NamedTuple):
    negativity_mean: float
    negativity_std: float
    negativity_uncorrected_mean: float
    negativity_uncorrected_std: float
    fidelity_mean: float | None
    fidelity_std: float | None
    replicas: int
    excluded: int
    negativities: tuple


def _replica(args):
    k, seq, probs, sizes, povm, cfg, target = args
    rng = np.random.default_rng(seq)
    counts = np.stack([rng.multinomial(n, p / p.sum()) for n, p in zip(sizes, probs)])
    res = reconstruct_from_counts(counts, povm, cfg, target, fast_summary=True)
    if not res.converged:
        return k, None
    unc = _uncorrected_negativity(res.rho, cfg.eta_det, fast=True)
    return k, (res.negativity, unc, res.fidelity)


def mc_error_bars(
    result: TomographyResult,
    povm: POVMSet,
    cfg: TomographyConfig | None = None,
    replicas: int = 50,
    seed: int = 0,
    workers: int = 1,
    scale: float = 1.0,
) -> MCStats:
    """Spread of negativity and fidelity over datasets simulated from ``result.rho``.

    Each replica draws multinomial bin counts of the original per-phase sizes
    (times ``scale``) from the estimate's predicted probabilities and is
    reconstructed again. Replica ``k`` uses the child ``k`` of
    ``SeedSequence(seed)``; replicas that do not converge are excluded and
    counted.
    """
    if replicas < 10:
        raise DomainError("at least 10 replicas are required")
    cfg = result.config if cfg is None else cfg
    probs = np.clip(povm.probabilities(result.rho), 0.0, None)
    sizes = np.round(result.counts.sum(axis=1) * scale).astype(np.int64)
    seqs = np.random.SeedSequence(seed).spawn(replicas)
    args = [(k, seqs[k], probs, sizes, povm, cfg, result.target) for k in range(replicas)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_replica, args))
    else:
        out = [_replica(a) for a in args]
    out.sort(key=lambda t: t[0])
    good = [v for _, v in out if v is not None]
    if not good:
        raise AccuracyError("no Monte-Carlo replica converged", achieved=0.0)
    neg = np.array([g[0] for g in good])
    unc = np.array([g[1] for g in good])
    fids = [g[2] for g in good]
    has_f = fids[0] is not None
    fa = np.array(fids, dtype=float) if has_f else None
    return MCStats(
        float(neg.mean()), float(neg.std(ddof=1)), float(unc.mean()), float(unc.std(ddof=1)),
        float(fa.mean()) if has_f else None, float(fa.std(ddof=1)) if has_f else None,
        len(good), replicas - len(good), tuple(float(v) for v in neg),
    )


def _uncorrected_negativity(rho, eta, fast=False):
    lossy = apply_loss(rho, eta)
    return negativity_point(lossy, half_width=4.0 if fast else 6.0, step=0.05 if fast else 0.02)[0]


class NegFidSummary(NamedTuple):
    negativity: float
    location: tuple
    fidelity: float
    correction: str
    eta_det: float


def negativity_and_fidelity_report(
    rho,
    target: SqueezedCatSpec,
    correction: str = "efficiency",
    eta_det: float = 0.77,
) -> NegFidSummary:
    """Negativity and cat fidelity of a reconstruction.

    ``correction="efficiency"`` treats ``rho`` as the loss-corrected estimate
    (the measurement model already contains the detector efficiency);
    ``correction="none"`` first applies the loss map at ``eta_det`` so the
    numbers describe the state as it reached the detectors.
    """
    rho = as_density(rho)
    if correction == "none":
        rho = apply_loss(rho, eta_det)
    elif correction != "efficiency":
        raise DomainError(f"unknown correction {correction!r}")
    val, x, p = negativity_point(rho)
    fid = fidelity(rho, make_squeezed_cat(target, rho.cutoff))
    return NegFidSummary(val, (x, p), fid, correction, eta_det)


def both_corrections(rho, target: SqueezedCatSpec, eta_det: float = 0.77) -> dict[str, NegFidSummary]:
    return {c: negativity_and_fidelity_report(rho, target, c, eta_det) for c in ("efficiency", "none")}
