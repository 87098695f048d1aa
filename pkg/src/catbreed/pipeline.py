"""End-to-end experiments: configuration, commands and the reproduction report.

Each ``cmd_*`` function does the work of one CLI subcommand, writes its files
under ``RunConfig.outdir`` and returns a dict summary. Outputs are pure
functions of the configuration (no timestamps, no host data), so repeating a
command with the same configuration reproduces every file byte for byte.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import io
from .errors import CatBreedError, DegreeOverflowError, DomainError
from .fock import (
    DensityMatrix,
    FockVector,
    SqueezedCatSpec,
    apply_loss,
    best_fit_cat,
    breed_fock,
    eq1_state,
    fidelity,
    make_squeezed_cat,
)
from .phasespace import GridAxis, WignerGrid, wigner_grid_of_density
from .sampler import (
    analytic_acceptance,
    condition,
    estimate_delta_quick,
    fit_sigma_delta,
    histogram2d,
    sample_phases,
    sample_photon_vacuum,
    sample_until_conditioned,
)
from .tomography import TomographyConfig, build_homodyne_povm, mc_error_bars, mle_reconstruct
from .units import from_internal, to_internal
from .wigner import (
    IDEAL_PHOTON,
    PhotonSourceParams,
    SinglePhotonModel,
    breed_wigner,
    imperfect_photon_params,
    imperfect_photon_wigner,
    joint_prob_closed,
    negativity,
    negativity_point,
)

ANCHORS = {
    "eq1_cat_fidelity": 0.99,
    "selection_fraction": 0.15,
    "cat_fidelity": 0.61,
    "model_vs_reconstruction": 0.94,
    "negativity_corrected": -0.08,
    "negativity_uncorrected": -0.024,
    "negativity_error": 0.01,
}


# where files go and how many threads produce them do not change their content
RUNTIME_KEYS = ("outdir", "input", "workers")


@dataclass(frozen=True)
class RunConfig:
    """Every knob of a run; the config-file keys are the field names.

    Quadrature lengths (``window``) are in ``units``; phases in degrees.
    """

    units: str = "homodyne"
    sigma: float = 1.02
    delta: float = 1.17
    window: float = 0.2
    phases_deg: tuple = (90.0, 120.0, 150.0, 180.0)
    fit_samples_per_phase: int = 15000
    conditioned_per_phase: int = 2000
    quick_delta_samples: int = 15000
    seed: int = 20240601
    workers: int = 1
    cutoff: int = 20
    eta_det: float = 0.77
    bin_width: float = 0.1
    x_max: float = 5.0
    max_iterations: int = 20000
    tolerance: float = 1e-9
    symmetry: str = "real+parity"
    replicas: int = 50
    phase_jitter_deg: float = 0.0
    jitter_model: str = "uniform"
    target_alpha: float = 1.63
    target_s: float = 1.52
    grid_half_width: float = 6.0
    grid_size: int = 121
    generations: int = 3
    route: str = "both"
    ideal: bool = False
    g: float = 1.03
    h: float = 1.0
    eta: float = 1.0
    xi: float = 1.0
    input: str = ""
    outdir: str = ""

    def __post_init__(self):
        object.__setattr__(self, "phases_deg", tuple(float(t) for t in self.phases_deg))
        if self.units not in ("homodyne", "internal"):
            raise DomainError("units must be 'homodyne' or 'internal'")
        if self.route not in ("fock", "wigner", "both"):
            raise DomainError("route must be fock, wigner or both")
        if self.workers < 1:
            raise DomainError("workers must be at least 1")

    @property
    def model(self) -> SinglePhotonModel:
        return SinglePhotonModel(self.sigma, self.delta)

    @property
    def target(self) -> SqueezedCatSpec:
        return SqueezedCatSpec(self.target_alpha, self.target_s, "even")

    @property
    def window_internal(self) -> float:
        return float(to_internal(self.window, self.units))

    def tomography(self) -> TomographyConfig:
        return TomographyConfig(
            eta_det=self.eta_det, cutoff=self.cutoff, bin_width=self.bin_width, x_max=self.x_max,
            phases_deg=self.phases_deg, max_iterations=self.max_iterations, tolerance=self.tolerance,
            symmetry=self.symmetry,
        )

    def out(self, *parts) -> Path:
        base = Path(self.outdir) if self.outdir else io.default_outdir()
        return base.joinpath(*parts)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["phases_deg"] = list(self.phases_deg)
        for key in RUNTIME_KEYS:
            d.pop(key)
        return d

    def with_(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    # -- key = value config files ------------------------------------------

    def to_text(self, runtime: bool = True) -> str:
        """``key = value`` text; ``runtime=False`` leaves out the keys of :data:`RUNTIME_KEYS`."""
        lines = ["# catbreed config"]
        for f in dataclasses.fields(self):
            if not runtime and f.name in RUNTIME_KEYS:
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(x) for x in v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def coerce(cls, key: str, text: str):
        fields = {f.name: f for f in dataclasses.fields(cls)}
        if key not in fields:
            raise DomainError(f"unknown configuration key {key!r}")
        default = fields[key].default
        text = text.strip()
        try:
            if isinstance(default, tuple):
                return tuple(float(t) for t in text.replace(" ", "").split(",") if t)
            if isinstance(default, bool):
                return text.lower() in ("1", "true", "yes", "on")
            if isinstance(default, int):
                return int(text)
            if isinstance(default, float):
                return float(text)
        except ValueError as exc:
            raise DomainError(f"bad value for {key}: {text!r}") from exc
        return text

    @classmethod
    def parse_text(cls, text: str) -> dict:
        """Parse ``key = value`` lines (``#`` starts a comment) into field values."""
        out = {}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DomainError(f"config line {n}: expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = cls.coerce(key.replace("-", "_"), val)
        return out

    @classmethod
    def from_file(cls, path, **overrides) -> "RunConfig":
        vals = cls.parse_text(io._read(path))
        vals.update(overrides)
        return cls(**vals)


def _meta(cfg: RunConfig, command: str, **extra) -> dict:
    return {"command": command, "config": cfg.to_dict(), **extra}


def _axis(cfg: RunConfig) -> GridAxis:
    return GridAxis.symmetric(cfg.grid_half_width, cfg.grid_size)


def _write_wigner(cfg, name, rho_or_func, command, **extra):
    axis = _axis(cfg)
    if isinstance(rho_or_func, (DensityMatrix, FockVector)):
        rho = rho_or_func if isinstance(rho_or_func, DensityMatrix) else rho_or_func.to_density()
        grid = wigner_grid_of_density(rho.entries, axis)
    else:
        grid = WignerGrid.from_function(rho_or_func, axis)
    meta = _meta(cfg, command, **extra)
    io.write_wigner_grid(cfg.out(name + ".txt"), grid, meta)
    io.write_pgm(cfg.out(name + ".pgm"), grid.values, f"catbreed {name} meta {io.json.dumps(io._jsonable(meta), sort_keys=True)}")
    return grid


# ---------------------------------------------------------------------------
# single commands


def cmd_photon_model(g: float, h: float = 1.0, eta: float = 1.0, xi: float = 1.0) -> dict:
    m = imperfect_photon_params(PhotonSourceParams(g, h, eta, xi))
    return {"g": g, "h": h, "eta": eta, "xi": xi, "sigma": m.sigma, "sigma2": m.sigma**2, "delta": m.delta,
            "negative_at_origin": m.negative_at_origin}


def joint_density_grid(m: SinglePhotonModel, theta_deg: float, half_width: float, size: int, units: str = "homodyne"):
    """Joint density on a square grid in ``units``; returns ``(axis points, values, integral)``."""
    axis = np.linspace(-half_width, half_width, size)
    xi = to_internal(axis, units)
    X0, X1 = np.meshgrid(xi, xi, indexing="ij")
    jac = float(to_internal(1.0, units)) ** 2  # density per unit area in ``units``
    vals = joint_prob_closed(X0, X1, math.radians(theta_deg), m) * jac
    integral = float(np.trapezoid(np.trapezoid(vals, axis, axis=1), axis))
    return axis, vals, integral


def acceptance_both_readings(m: SinglePhotonModel, window: float) -> dict:
    """Analytic selection fraction with the same window value read in either unit system."""
    return {u: analytic_acceptance(m, window, u) for u in ("homodyne", "internal")}


def cmd_joint_grid(cfg: RunConfig, thetas_deg=None) -> dict:
    thetas = cfg.phases_deg if thetas_deg is None else tuple(float(t) for t in thetas_deg)
    half = float(from_internal(cfg.grid_half_width, cfg.units))
    out = {}
    for t in thetas:
        axis, vals, integral = joint_density_grid(cfg.model, t, half, cfg.grid_size, cfg.units)
        path = cfg.out(f"joint_theta{t:05.1f}.txt")
        io.write_table(path, "joint-density", {"x0": [axis[0], axis[-1], axis.size], "x1": [axis[0], axis[-1], axis.size]},
                       vals, _meta(cfg, "joint-grid", theta_deg=t, integral=integral))
        out[t] = {"path": str(path), "integral": integral}
    return out


def cmd_sample(cfg: RunConfig, n_per_phase: int | None = None, name: str = "samples.txt") -> dict:
    n = cfg.fit_samples_per_phase if n_per_phase is None else n_per_phase
    s = sample_phases(cfg.model, cfg.phases_deg, n, cfg.seed, cfg.phase_jitter_deg, cfg.jitter_model, cfg.workers)
    path = io.write_samples(cfg.out(name), s, cfg.units, _meta(cfg, "sample", n_per_phase=n))
    return {"path": str(path), "n": len(s), "acceptance_rate": s.provenance["acceptance_rate"]}


def cmd_condition(cfg: RunConfig, samples_path, name: str = "conditioned.txt") -> dict:
    s = io.read_samples(samples_path)
    c = condition(s, cfg.window, cfg.units)
    io.write_samples(cfg.out(name), c.accepted, cfg.units, _meta(cfg, "condition", source=str(samples_path)))
    res = {"fraction": c.fraction, "stderr": c.stderr, "status": c.status, "n_accepted": len(c.accepted),
           "per_phase": {str(k): v for k, v in c.accepted.counts_per_phase().items()},
           "analytic": acceptance_both_readings(cfg.model, cfg.window)}
    io.write_json(cfg.out(name.rsplit(".", 1)[0] + "_summary.json"), {**res, "meta": _meta(cfg, "condition")})
    return res


def cmd_fit(cfg: RunConfig, samples_path) -> dict:
    s = io.read_samples(samples_path)
    f = fit_sigma_delta(s)
    res = f._asdict()
    io.write_json(cfg.out("fit.json"), {**res, "meta": _meta(cfg, "fit", source=str(samples_path))})
    return res


def cmd_breed(cfg: RunConfig) -> dict:
    """Breed two photons of the configured model by the Fock and/or Wigner route."""
    m = cfg.model
    target = make_squeezed_cat(cfg.target, cfg.cutoff)
    res = {}
    w = imperfect_photon_wigner(m)
    rho_in = w.to_density(cfg.cutoff)
    if cfg.route in ("fock", "both"):
        br = breed_fock(rho_in, rho_in, cfg.window, cfg.units)
        io.write_state(cfg.out("bred_fock.json"), br.rho, _meta(cfg, "breed", route="fock", shape="hard"))
        _write_wigner(cfg, "wigner_bred_fock", br.rho, "breed", route="fock")
        res["fock"] = {"acceptance": br.acceptance, "fidelity_cat": fidelity(br.rho, target), "negativity": negativity(br.rho)}
    if cfg.route in ("wigner", "both"):
        bw = breed_wigner(w, w, cfg.window, cfg.units)
        rho_w = bw.to_density(cfg.cutoff)
        io.write_state(cfg.out("bred_wigner.json"), rho_w, _meta(cfg, "breed", route="wigner", shape="gaussian"))
        _write_wigner(cfg, "wigner_bred_gaussian", bw, "breed", route="wigner")
        res["wigner"] = {"fidelity_cat": fidelity(rho_w, target), "negativity": negativity(bw), "degree": bw.degree}
        gauss_fock = breed_fock(rho_in, rho_in, cfg.window, cfg.units, shape="gaussian").rho
        res["wigner"]["fidelity_vs_fock_gaussian"] = fidelity(rho_w, gauss_fock)
    io.write_json(cfg.out("breed.json"), {**res, "meta": _meta(cfg, "breed")})
    return res


def cmd_tomo(cfg: RunConfig, conditioned_path, replicas: int | None = None) -> dict:
    s = io.read_samples(conditioned_path)
    tcfg = cfg.tomography()
    povm = build_homodyne_povm(tcfg)
    r = mle_reconstruct(s, povm, tcfg, cfg.target)
    reps = cfg.replicas if replicas is None else replicas
    if reps:
        st = mc_error_bars(r, povm, tcfg, reps, cfg.seed, cfg.workers)
        r.error_bars = st._asdict()
    unc = negativity_point(apply_loss(r.rho, cfg.eta_det))
    res = r.to_dict()
    res["negativity_uncorrected"] = unc[0]
    res["meta"] = _meta(cfg, "tomo", source=str(conditioned_path))
    io.write_json(cfg.out("tomography.json"), res)
    _write_wigner(cfg, "wigner_reconstruction", r.rho, "tomo")
    return {"negativity": r.negativity, "negativity_uncorrected": unc[0], "fidelity": r.fidelity,
            "iterations": r.iterations, "converged": r.converged, "error_bars": r.error_bars}


def cmd_iterate(cfg: RunConfig, generations: int | None = None, ideal: bool = False) -> list[dict]:
    """Feed each generation's output into the next breeding round.

    The Fock route uses the hard window; the Wigner route the Gaussian
    kernel of the same width and stops at the polynomial degree cap.
    """
    gens = cfg.generations if generations is None else generations
    if gens < 1:
        raise DomainError("generations must be at least 1")
    m = IDEAL_PHOTON if ideal else cfg.model
    w = imperfect_photon_wigner(m)
    rho = w.to_density(cfg.cutoff) if not ideal else FockVector.basis(1, cfg.cutoff).to_density()
    rows = []
    wig_ok = cfg.route in ("wigner", "both")
    for g in range(1, gens + 1):
        row = {"generation": g}
        if cfg.route in ("fock", "both"):
            rho = breed_fock(rho, rho, cfg.window, cfg.units).rho
            fit = best_fit_cat(rho)
            row.update(fock_alpha=fit.alpha, fock_s=fit.s, fock_fit_fidelity=fit.fidelity,
                       fock_negativity=negativity(rho), fock_max_photon=rho.populated())
        if wig_ok:
            try:
                w = breed_wigner(w, w, cfg.window, cfg.units)
                dens = w.to_density(max(cfg.cutoff, 2 ** (g + 1) + 10))
                fit = best_fit_cat(dens)
                row.update(wigner_alpha=fit.alpha, wigner_s=fit.s, wigner_fit_fidelity=fit.fidelity,
                           wigner_negativity=negativity(w), wigner_degree=w.degree)
            except DegreeOverflowError as exc:
                row["wigner_stopped"] = str(exc)
                wig_ok = False
        rows.append(row)
    io.write_json(cfg.out("iterate.json"), {"rows": rows, "meta": _meta(cfg, "iterate", generations=gens, ideal=ideal)})
    header = ["generation", "fock_alpha", "fock_s", "fock_fit_fidelity", "fock_negativity",
              "wigner_alpha", "wigner_s", "wigner_fit_fidelity", "wigner_negativity"]
    lines = ["# catbreed growth-table", "# meta " + io.json.dumps(io._jsonable(_meta(cfg, "iterate", ideal=ideal)), sort_keys=True),
             " ".join(header)]
    for row in rows:
        lines.append(" ".join(_fmt(row.get(k)) for k in header))
    io._write(cfg.out("iterate.txt"), "\n".join(lines) + "\n")
    return rows


def _fmt(v):
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


# ---------------------------------------------------------------------------
# the full pipeline


@dataclass
class ReportRow:
    quantity: str
    anchor: str
    computed: str
    note: str
    check: str = ""


@dataclass
class PipelineReport:
    rows: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    values: dict = field(default_factory=dict)

    def add(self, quantity, anchor, computed, note, check=""):
        self.rows.append(ReportRow(quantity, anchor, computed, note, check))

    def render(self) -> str:
        cols = ["quantity", "anchor", "computed", "note"]
        table = [cols] + [[r.quantity, r.anchor, r.computed, r.note] for r in self.rows]
        widths = [max(len(row[i]) for row in table) for i in range(4)]
        out = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in table]
        out.insert(1, "  ".join("-" * w for w in widths))
        if self.checks:
            out += ["", "checks:"]
            out += [f"  [{'PASS' if ok else 'FAIL'}] {name}: {detail}" for name, ok, detail in self.checks]
        return "\n".join(out) + "\n"


class StageError(CatBreedError):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.exit_code = getattr(cause, "exit_code", 1)


def _stage(name: str, fn: Callable, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except CatBreedError as exc:
        raise StageError(name, exc) from exc


def generating_state(cfg: RunConfig) -> DensityMatrix:
    """Loss-corrected heralded state that the synthetic data are drawn from.

    The configured ``(sigma, delta)`` describe photons as recorded by lossy
    homodyne detectors. Undoing the detection loss gives the photons that
    actually meet on the beamsplitter; breeding them with the heralding
    detector's loss in front of the window gives the state whose
    loss-degraded version the mode-1 data sample.
    """
    if cfg.eta_det < 1:
        mc = cfg.model.corrected_for_loss(cfg.eta_det)
    else:
        mc = cfg.model
    rc = imperfect_photon_wigner(mc).to_density(cfg.cutoff)
    return breed_fock(rc, rc, cfg.window, cfg.units, herald_efficiency=cfg.eta_det).rho.resize(cfg.cutoff)


def cmd_pipeline(cfg: RunConfig, progress: Callable[[str], None] | None = None) -> PipelineReport:
    say = progress or (lambda _msg: None)
    rep = PipelineReport()
    m = cfg.model
    target_spec = cfg.target
    target = make_squeezed_cat(target_spec, cfg.cutoff)
    meta = _meta(cfg, "pipeline")
    io._write(cfg.out("config.txt"), cfg.to_text(runtime=False))

    # -- model --------------------------------------------------------------
    say("model")
    eq1 = eq1_state(cfg.cutoff)
    f_eq1 = fidelity(eq1, make_squeezed_cat(SqueezedCatSpec(1.63, 1.52), cfg.cutoff))
    rep.add("ideal heralded state vs cat(1.63,1.52)", "0.99", f"{f_eq1:.4f}", "analytic")
    rep.values["eq1_cat_fidelity"] = f_eq1
    rep.checks.append(("cat fidelity anchor >= 0.985", f_eq1 >= 0.985, f"{f_eq1:.5f}"))
    w = imperfect_photon_wigner(m)
    rep.add("photon model W(0,0)", "-", f"{float(w(0.0, 0.0)):.5f}", f"sigma={m.sigma}, delta={m.delta}")

    # -- breed (both routes) ------------------------------------------------
    say("breed")
    rho_in = _stage("breed", w.to_density, cfg.cutoff)
    bf = _stage("breed", breed_fock, rho_in, rho_in, cfg.window, cfg.units)
    bw = _stage("breed", breed_wigner, w, w, cfg.window, cfg.units)
    rho_w = bw.to_density(cfg.cutoff)
    f_model_cat = fidelity(rho_w, target)
    rep.add("model state (gaussian window) vs cat", "-", f"{f_model_cat:.4f}", "analytic, measured-photon model")
    rep.add("model state (hard window) vs cat", "-", f"{fidelity(bf.rho, target):.4f}", "analytic, measured-photon model")
    rep.add("model negativity (gaussian / hard)", "-", f"{negativity(bw):.5f} / {negativity(bf.rho):.5f}", "analytic")
    io.write_state(cfg.out("state_model_hard.json"), bf.rho, meta)
    io.write_state(cfg.out("state_model_gaussian.json"), rho_w, meta)
    _write_wigner(cfg, "wigner_model_gaussian", bw, "pipeline")

    # -- acceptance fraction --------------------------------------------------
    readings = acceptance_both_readings(m, cfg.window)
    acc_h, acc_i = readings["homodyne"], readings["internal"]
    rep.values.update(acceptance_homodyne_reading=acc_h, acceptance_internal_reading=acc_i)
    rep.add("selection fraction (window in homodyne units)", "0.15", f"{acc_h:.4f}", f"analytic, window {cfg.window}")
    rep.add("selection fraction (window in internal units)", "0.15", f"{acc_i:.4f}", f"analytic, window {cfg.window}")
    rep.checks.append(("selection fraction in [0.10, 0.20] under a unit reading",
                       any(0.10 <= a <= 0.20 for a in (acc_h, acc_i)), f"{acc_h:.4f} / {acc_i:.4f}"))

    # -- sample, fit ------------------------------------------------------------
    say("sample")
    fit_set = _stage("sample", sample_phases, m, cfg.phases_deg, cfg.fit_samples_per_phase, cfg.seed,
                     cfg.phase_jitter_deg, cfg.jitter_model, cfg.workers)
    io.write_samples(cfg.out("samples_fit.txt"), fit_set, cfg.units, meta)
    for t in cfg.phases_deg:
        h = histogram2d(fit_set.at_phase(math.radians(t)))
        io.write_histogram(cfg.out(f"hist_theta{t:05.1f}.txt"), h, {**meta, "theta_deg": t})
    say("fit")
    fit = _stage("fit", fit_sigma_delta, fit_set)
    rep.add("fitted sigma", f"{m.sigma}", f"{fit.sigma:.4f} +- {fit.se_sigma:.4f}", "sampled, MLE on joint data")
    rep.add("fitted delta", f"{m.delta}", f"{fit.delta:.4f} +- {fit.se_delta:.4f}", "sampled, MLE on joint data")
    ok_fit = abs(fit.sigma - m.sigma) <= 2 * fit.se_sigma and abs(fit.delta - m.delta) <= 2 * fit.se_delta
    rep.checks.append(("fit recovers (sigma, delta) within 2 SE", ok_fit,
                       f"sigma {fit.sigma:.4f}+-{fit.se_sigma:.4f}, delta {fit.delta:.4f}+-{fit.se_delta:.4f}"))
    pv = sample_photon_vacuum(m, cfg.quick_delta_samples, cfg.seed + 1)
    q = estimate_delta_quick(pv)
    rep.add("quick delta (photon+vacuum run)", f"{m.delta}", f"{q.delta:.4f}", f"sampled, n={q.n}")
    rep.checks.append(("quick delta within 0.1", abs(q.delta - m.delta) <= 0.1, f"{q.delta:.4f}"))

    # -- condition -------------------------------------------------------------
    say("condition")
    raw = _stage("condition", sample_until_conditioned, m, cfg.phases_deg, cfg.conditioned_per_phase, cfg.window,
                 cfg.seed + 2, cfg.units, cfg.phase_jitter_deg, cfg.jitter_model)
    cond = condition(raw, cfg.window, cfg.units)
    io.write_samples(cfg.out("samples_conditioned.txt"), cond.accepted, cfg.units, meta)
    rep.add("selection fraction (Monte Carlo)", "0.15", f"{cond.fraction:.4f} +- {cond.stderr:.4f}",
            f"sampled, {len(raw)} raw records")

    # -- tomography --------------------------------------------------------------
    say("tomography")
    tcfg = cfg.tomography()
    povm = build_homodyne_povm(tcfg)
    tr = _stage("tomography", mle_reconstruct, cond.accepted, povm, tcfg, target_spec)
    gen = generating_state(cfg)
    f_gen = fidelity(tr.rho, gen)
    rep.values.update(fidelity_generating=f_gen, fidelity_cat=tr.fidelity, negativity_corrected=tr.negativity)
    rep.add("reconstruction vs generating state", "-", f"{f_gen:.4f}", f"self-consistency, {tr.iterations} iterations")
    rep.checks.append(("tomography fidelity with generating state >= 0.95", f_gen >= 0.95, f"{f_gen:.4f}"))
    mono = bool(np.all(np.diff(tr.ll_trace) >= 0))
    rep.values["loglik_nondecreasing"] = mono
    rep.checks.append(("MLE log-likelihood nondecreasing", mono, f"{len(tr.ll_trace) - 1} steps"))
    rep.add("fidelity with cat(1.63,1.52)", "0.61", f"{tr.fidelity:.4f}", "model-based")
    rep.checks.append(("cat fidelity in [0.55, 0.80]", 0.55 <= tr.fidelity <= 0.80, f"{tr.fidelity:.4f}"))
    unc = negativity_point(apply_loss(tr.rho, cfg.eta_det))[0]
    rep.values["negativity_uncorrected"] = unc
    f94 = fidelity(apply_loss(tr.rho, cfg.eta_det), rho_w)
    rep.values["fidelity_model_vs_reconstruction"] = f94
    rep.add("uncorrected reconstruction vs analytic model", "0.94", f"{f94:.4f}", "model-based (context)")
    best = best_fit_cat(tr.rho)
    rep.add("best-fit cat of reconstruction (alpha, s, F)", "-",
            f"({best.alpha:.3f}, {best.s:.3f}, {best.fidelity:.3f})", "model-based")
    io.write_state(cfg.out("state_generating.json"), gen, meta)
    _write_wigner(cfg, "wigner_reconstruction", tr.rho, "pipeline")

    say("error bars")
    st = _stage("error bars", mc_error_bars, tr, povm, tcfg, cfg.replicas, cfg.seed + 3, cfg.workers)
    tr.error_bars = st._asdict()
    rep.values.update(negativity_std=st.negativity_std, negativity_uncorrected_std=st.negativity_uncorrected_std)
    rep.add("negativity, efficiency-corrected", "-0.08 +- 0.01", f"{tr.negativity:.4f} +- {st.negativity_std:.4f}", "model-based")
    rep.add("negativity, uncorrected", "-0.024 +- 0.01", f"{unc:.4f} +- {st.negativity_uncorrected_std:.4f}", "model-based")
    if st.fidelity_std is not None:
        rep.add("fidelity error bar", "0.01", f"{st.fidelity_std:.4f}", f"model-based, {st.replicas} replicas")
    rep.checks.append(("corrected negativity < 0", tr.negativity < 0, f"{tr.negativity:.5f}"))
    rep.checks.append(("uncorrected negativity < 0 and smaller in magnitude",
                       unc < 0 and abs(unc) < abs(tr.negativity), f"{unc:.5f}"))
    rep.checks.append(("negativity MC std in [0.003, 0.03]", 0.003 <= st.negativity_std <= 0.03,
                       f"{st.negativity_std:.5f} ({st.replicas} replicas, {st.excluded} excluded)"))
    res = tr.to_dict()
    res["negativity_uncorrected"] = unc
    res["meta"] = meta
    io.write_json(cfg.out("tomography.json"), res)

    report = {"rows": [dataclasses.asdict(r) for r in rep.rows],
              "checks": [{"name": n, "pass": ok, "detail": d} for n, ok, d in rep.checks],
              "values": rep.values, "anchors": ANCHORS, "meta": meta}
    io.write_json(cfg.out("report.json"), report)
    io._write(cfg.out("report.txt"), io._header("report", meta) + rep.render())
    return rep


def render_report(path) -> str:
    """Re-render ``report.json`` (written by the pipeline) as a table."""
    d = io.read_json(path)
    rep = PipelineReport([ReportRow(**r) for r in d["rows"]],
                         [(c["name"], c["pass"], c["detail"]) for c in d["checks"]], d["values"])
    return rep.render()
