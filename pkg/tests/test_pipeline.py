from __future__ import annotations

import json

import pytest

from catbreed import io, pipeline
from catbreed.cli import run
from catbreed.pipeline import RunConfig, StageError, cmd_iterate, cmd_pipeline, generating_state, render_report
from catbreed.fock import FockVector, fidelity
from catbreed.wigner import MEASURED_PHOTON, negativity

SMALL = dict(fit_samples_per_phase=1500, conditioned_per_phase=300, quick_delta_samples=3000, replicas=10,
             grid_size=61)


@pytest.fixture(scope="module")
def small_runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("pipeline")
    a = RunConfig(**SMALL, outdir=str(base / "a"))
    rep_a = cmd_pipeline(a)
    # the second run is configured only from the first run's echoed config
    echoed = RunConfig.parse_text((base / "a" / "config.txt").read_text())
    b = RunConfig(**echoed, workers=3, outdir=str(base / "b"))
    rep_b = cmd_pipeline(b)
    return base, rep_a, rep_b


def _files(d):
    return sorted(p.relative_to(d) for p in d.rglob("*") if p.is_file())


def test_rerun_from_echoed_config_is_byte_identical(small_runs):
    base, _, _ = small_runs
    names = _files(base / "a")
    assert names == _files(base / "b")
    assert len(names) >= 15
    for n in names:
        assert (base / "a" / n).read_bytes() == (base / "b" / n).read_bytes(), n


def test_every_output_carries_a_header(small_runs):
    base, _, _ = small_runs
    for n in _files(base / "a"):
        data = (base / "a" / n).read_bytes()
        if n.suffix == ".txt":
            assert data.startswith(b"# catbreed "), n
        elif n.suffix == ".json":
            assert "meta" in json.loads(data), n
        elif n.suffix == ".pgm":
            assert b" meta {" in data.split(b"\n", 2)[1], n
        else:
            pytest.fail(f"unexpected output {n}")


def test_report_table_and_checks(small_runs):
    base, rep, _ = small_runs
    meta, lines = io._parse_header((base / "a" / "report.txt").read_text(), "report")
    text = "".join(line + "\n" for line in lines)
    assert meta["config"]["seed"] == RunConfig().seed
    assert text == rep.render()
    assert render_report(base / "a" / "report.json") == text
    assert "checks:" in text and "[PASS]" in text
    for anchor in ("0.99", "0.15", "0.61", "0.94", "-0.08 +- 0.01", "-0.024 +- 0.01"):
        assert anchor in text
    assert "model-based" in text
    assert rep.values["eq1_cat_fidelity"] == pytest.approx(0.9902, abs=1e-4)


def test_report_command(small_runs, capsys):
    base, rep, _ = small_runs
    assert run(["report", "--input", str(base / "a" / "report.json")]) == 0
    assert capsys.readouterr().out == rep.render()


def test_seed_changes_only_sampled_numbers(small_runs, tmp_path):
    _, rep, _ = small_runs
    other = cmd_pipeline(RunConfig(**SMALL, seed=7, outdir=str(tmp_path)))
    for key in ("eq1_cat_fidelity", "acceptance_homodyne_reading", "acceptance_internal_reading"):
        assert other.values[key] == rep.values[key]
    assert other.values["negativity_corrected"] != rep.values["negativity_corrected"]
    # statistically compatible: well inside the Monte-Carlo spread
    spread = 4 * max(rep.values["negativity_std"], other.values["negativity_std"])
    assert abs(other.values["negativity_corrected"] - rep.values["negativity_corrected"]) < spread


def test_stage_failure_names_the_stage_and_keeps_partial_outputs(tmp_path):
    cfg = RunConfig(**{**SMALL, "max_iterations": 2}, outdir=str(tmp_path))
    with pytest.raises(StageError) as info:
        cmd_pipeline(cfg)
    assert info.value.stage == "error bars"
    assert info.value.exit_code == 4
    assert (tmp_path / "samples_conditioned.txt").exists()
    assert (tmp_path / "config.txt").exists()


def test_generating_state():
    cfg = RunConfig()
    rho = generating_state(cfg)
    assert rho.cutoff == 20
    assert negativity(rho) < 0
    # with perfect detectors the measured photons are the true photons
    ideal = generating_state(cfg.with_(eta_det=1.0))
    from catbreed.fock import breed_fock
    from catbreed.wigner import imperfect_photon_wigner

    r_in = imperfect_photon_wigner(MEASURED_PHOTON).to_density(20)
    ref = breed_fock(r_in, r_in, 0.2).rho
    assert fidelity(ideal, ref) == pytest.approx(1.0, abs=1e-8)


def test_iterate_ideal_both_routes(tmp_path):
    rows = cmd_iterate(RunConfig(outdir=str(tmp_path), route="both"), generations=2, ideal=True)
    g1, g2 = rows
    assert g1["fock_alpha"] == pytest.approx(1.63, abs=0.02)
    assert g2["fock_alpha"] > g1["fock_alpha"]
    assert g2["wigner_alpha"] > g1["wigner_alpha"]
    assert g2["fock_fit_fidelity"] >= 0.95
    assert g1["wigner_degree"] == 4 and g2["wigner_degree"] == 8
    assert (tmp_path / "iterate.txt").read_text().startswith("# catbreed growth-table")


def test_iterate_stops_wigner_route_at_degree_cap(tmp_path, monkeypatch):
    real = pipeline.imperfect_photon_wigner
    monkeypatch.setattr(pipeline, "imperfect_photon_wigner", lambda m: real(m, max_degree=4))
    rows = cmd_iterate(RunConfig(outdir=str(tmp_path), route="both"), generations=2, ideal=True)
    assert "wigner_alpha" in rows[0]
    assert "wigner_stopped" in rows[1]
    assert "fock_alpha" in rows[1]


def test_iterate_model_photons(tmp_path):
    rows = cmd_iterate(RunConfig(outdir=str(tmp_path), route="fock"), generations=2)
    assert all(0 < r["fock_fit_fidelity"] <= 1 for r in rows)
    with pytest.raises(Exception):
        cmd_iterate(RunConfig(outdir=str(tmp_path)), generations=0)


def test_config_echo_excludes_runtime_keys():
    cfg = RunConfig(outdir="/somewhere", workers=4, input="x")
    text = cfg.to_text(runtime=False)
    assert "outdir" not in text and "workers" not in text and "input" not in text
    assert "outdir = /somewhere" in cfg.to_text()
    assert "workers" not in cfg.to_dict()


def test_joint_grid_units(tmp_path):
    res = pipeline.cmd_joint_grid(RunConfig(outdir=str(tmp_path), units="internal", grid_size=101), [90.0])
    assert res[90.0]["integral"] == pytest.approx(1.0, abs=1e-3)
    meta, _ = io.read_table(tmp_path / "joint_theta090.0.txt", "joint-density")
    assert meta["axes"]["x0"] == [-6.0, 6.0, 101]


def test_ideal_photon_model_line():
    assert fidelity(pipeline.eq1_state(20), FockVector.basis(0, 20)) == pytest.approx(1 / 3)
