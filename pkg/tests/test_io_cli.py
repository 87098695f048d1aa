from __future__ import annotations

import json
import math

import numpy as np
import pytest

from catbreed import io
from catbreed.cli import build_parser, config_from_args, run
from catbreed.errors import CatBreedError, DomainError, OutputError
from catbreed.fock import REFERENCE_CAT, DensityMatrix, apply_loss, make_squeezed_cat
from catbreed.phasespace import GridAxis, WignerGrid
from catbreed.pipeline import RunConfig
from catbreed.sampler import histogram2d, sample_phases
from catbreed.wigner import MEASURED_PHOTON, imperfect_photon_wigner


# -- file formats ------------------------------------------------------------------


def test_state_round_trip(tmp_path):
    cat = make_squeezed_cat(REFERENCE_CAT, 20)
    back = io.read_state(io.write_state(tmp_path / "cat.json", cat, {"cutoff": 20}))
    np.testing.assert_array_equal(back.amplitudes, cat.amplitudes)
    assert back.meta["squeeze_convention"] == cat.meta["squeeze_convention"]
    rho = apply_loss(cat, 0.77)
    rho = DensityMatrix(rho.entries * np.exp(0.3j * np.subtract.outer(np.arange(21), np.arange(21))))
    back = io.read_state(io.write_state(tmp_path / "rho.json", rho))
    np.testing.assert_array_equal(back.entries, rho.entries)
    with pytest.raises(DomainError):
        io.state_from_dict({"kind": "tensor"})


def test_state_file_layout(tmp_path):
    d = json.loads((io.write_state(tmp_path / "s.json", DensityMatrix(np.diag([0.25, 0.75])))).read_text())
    assert d["kind"] == "density_matrix"
    assert d["entries"][1][1] == [0.75, 0.0]


def test_wigner_grid_round_trip_is_bit_exact(tmp_path):
    grid = imperfect_photon_wigner(MEASURED_PHOTON).on_grid(GridAxis.symmetric(6.0, 61))
    path = io.write_wigner_grid(tmp_path / "w.txt", grid, {"origin": "test"})
    back = io.read_wigner_grid(path)
    assert back.values.tobytes() == grid.values.tobytes()
    assert back.x_axis == grid.x_axis and back.p_axis == grid.p_axis
    text = path.read_text().splitlines()
    assert text[0] == "# catbreed wigner-grid"
    assert json.loads(text[1][len("# meta "):])["origin"] == "test"


def test_samples_round_trip(tmp_path):
    s = sample_phases(MEASURED_PHOTON, (90.0, 180.0), 200, seed=4)
    for units in ("homodyne", "internal"):
        back = io.read_samples(io.write_samples(tmp_path / f"s_{units}.txt", s, units))
        np.testing.assert_allclose(back.x0, s.x0, rtol=1e-15)
        np.testing.assert_allclose(back.theta, s.theta, rtol=1e-15)
        assert back.seed == 4
        assert back.provenance["sigma"] == MEASURED_PHOTON.sigma
    empty = s.select(np.zeros(len(s), bool))
    assert len(io.read_samples(io.write_samples(tmp_path / "e.txt", empty))) == 0


def test_samples_file_is_in_declared_units(tmp_path):
    s = sample_phases(MEASURED_PHOTON, (90.0,), 5, seed=1)
    lines = io.write_samples(tmp_path / "h.txt", s, "homodyne").read_text().splitlines()
    rows = [ln.split() for ln in lines if not ln.startswith("#")]
    assert float(rows[0][0]) == pytest.approx(s.x0[0] * math.sqrt(2), rel=1e-15)
    assert float(rows[0][2]) == pytest.approx(90.0)


def test_histogram_and_table_round_trip(tmp_path):
    s = sample_phases(MEASURED_PHOTON, (90.0,), 3000, seed=2)
    h = histogram2d(s, bins=21)
    back = io.read_histogram(io.write_histogram(tmp_path / "h.txt", h))
    np.testing.assert_array_equal(back.counts, h.counts)
    np.testing.assert_array_equal(back.edges_x0, h.edges_x0)
    assert (back.total, back.overflow) == (h.total, h.overflow)
    vals = np.random.default_rng(0).normal(size=(3, 4))
    meta, arr = io.read_table(io.write_table(tmp_path / "t.txt", "thing", {"a": [0, 1, 3]}, vals), "thing")
    assert arr.tobytes() == vals.tobytes()
    with pytest.raises(DomainError):
        io.read_table(tmp_path / "t.txt", "other")


def test_pgm_preview(tmp_path):
    grid = WignerGrid.from_function(imperfect_photon_wigner(MEASURED_PHOTON), GridAxis.symmetric(3.0, 31))
    data = io.write_pgm(tmp_path / "w.pgm", grid.values, "line one\nline two").read_bytes()
    assert data.startswith(b"P5\n# line one line two\n31 31\n255\n")
    assert len(data.split(b"255\n", 1)[1]) == 31 * 31


def test_unwritable_and_unreadable_paths(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OutputError) as info:
        io.write_json(blocker / "sub" / "a.json", {})
    assert str(blocker) in str(info.value)
    assert isinstance(info.value, OSError) and isinstance(info.value, CatBreedError)
    with pytest.raises(OutputError):
        io.read_json(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(DomainError):
        io.read_json(tmp_path / "bad.json")


def test_default_outdir(monkeypatch, tmp_path):
    monkeypatch.delenv("CATBREED_OUTDIR", raising=False)
    assert str(io.default_outdir()) == "catbreed-out"
    monkeypatch.setenv("CATBREED_OUTDIR", str(tmp_path))
    assert io.default_outdir() == tmp_path


# -- configuration ----------------------------------------------------------------------


def test_config_text_round_trip():
    cfg = RunConfig(window=0.3, phases_deg=(0.0, 45.0), ideal=True, route="fock", seed=7)
    back = RunConfig(**RunConfig.parse_text(cfg.to_text()))
    assert back == cfg


def test_config_parse_errors():
    with pytest.raises(DomainError):
        RunConfig.parse_text("windo = 0.2")
    with pytest.raises(DomainError):
        RunConfig.parse_text("window 0.2")
    with pytest.raises(DomainError):
        RunConfig.parse_text("seed = many")
    with pytest.raises(DomainError):
        RunConfig(units="volts")
    assert RunConfig.parse_text("# comment\n\nwindow = 0.25  # trailing\n") == {"window": 0.25}


def test_every_field_has_a_flag():
    import dataclasses

    parser = build_parser()
    ns = parser.parse_args(["sample", "--phases-deg", "0,90", "--ideal", "--seed", "3", "--jitter-model", "gaussian"])
    cfg = config_from_args(ns)
    assert cfg.phases_deg == (0.0, 90.0) and cfg.ideal is True and cfg.seed == 3 and cfg.jitter_model == "gaussian"
    ns = parser.parse_args(["sample", "--ideal", "false"])
    assert config_from_args(ns).ideal is False
    sub = parser._subparsers._group_actions[0].choices["sample"]
    dests = {a.dest for a in sub._actions}
    assert {f.name for f in dataclasses.fields(RunConfig)} <= dests


def test_precedence_defaults_file_flags(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("window = 0.3\nsigma = 1.05\n")
    parser = build_parser()
    cfg = config_from_args(parser.parse_args(["sample", "--config", str(conf), "--window", "0.25"]))
    assert cfg.window == 0.25  # flag beats file
    assert cfg.sigma == 1.05  # file beats default
    assert cfg.delta == 1.17  # default


# -- command line -------------------------------------------------------------------------


def test_photon_model_command(capsys):
    assert run(["photon-model", "--g", "1.03"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["sigma2"] == pytest.approx(1.06)
    assert out["delta"] == pytest.approx(1.94340, abs=1e-5)
    assert run(["photon-model", "--g", "1.01"]) == 0


def test_exit_codes(capsys, tmp_path):
    assert run(["photon-model", "--g", "1.0"]) == 3
    assert "singular" in capsys.readouterr().err
    with pytest.raises(SystemExit) as info:
        run(["no-such-command"])
    assert info.value.code == 2
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert run(["joint-grid", "--outdir", str(blocker / "out"), "--grid-size", "11"]) == 5
    assert str(blocker) in capsys.readouterr().err
    assert run(["fit", "--input", str(tmp_path / "absent.txt")]) == 5


def test_accuracy_failure_exit_code(tmp_path, capsys):
    out = str(tmp_path)
    assert run(["sample", "--outdir", out, "--fit-samples-per-phase", "400"]) == 0
    assert run(["condition", "--outdir", out, "--input", f"{out}/samples.txt"]) == 0
    # two MLE iterations never meet the tolerance: every Monte-Carlo replica is rejected
    code = run(["tomo", "--outdir", out, "--input", f"{out}/conditioned.txt", "--max-iterations", "2",
                "--replicas", "10", "--cutoff", "14"])
    assert code == 4


def test_joint_grid_command(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("CATBREED_OUTDIR", str(tmp_path))
    assert run(["joint-grid", "--phases-deg", "0,90,120,150,180", "--grid-size", "121"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert len(summary) == 5
    for t in ("0.0", "90.0", "120.0", "150.0", "180.0"):
        assert summary[t]["integral"] == pytest.approx(1.0, abs=1e-3)
    meta, vals = io.read_table(tmp_path / "joint_theta090.0.txt", "joint-density")
    assert meta["config"]["sigma"] == 1.02 and meta["theta_deg"] == 90.0
    assert vals.shape == (121, 121)


def test_command_chain(tmp_path, capsys):
    out = str(tmp_path)
    common = ["--outdir", out, "--seed", "5"]
    assert run(["sample", *common, "--fit-samples-per-phase", "3000"]) == 0
    assert run(["fit", *common, "--input", f"{out}/samples.txt"]) == 0
    assert run(["condition", *common, "--input", f"{out}/samples.txt"]) == 0
    assert run(["tomo", *common, "--input", f"{out}/conditioned.txt", "--replicas", "0"]) == 0
    capsys.readouterr()
    fit = io.read_json(tmp_path / "fit.json")
    assert abs(fit["delta"] - 1.17) < 4 * fit["se_delta"]
    cond = io.read_json(tmp_path / "conditioned_summary.json")
    assert cond["fraction"] == pytest.approx(cond["analytic"]["homodyne"], abs=4 * cond["stderr"])
    tomo = io.read_json(tmp_path / "tomography.json")
    assert tomo["converged"] and tomo["meta"]["command"] == "tomo"
    assert (tmp_path / "wigner_reconstruction.pgm").exists()


def test_breed_and_iterate_commands(tmp_path, capsys):
    out = str(tmp_path)
    assert run(["breed", "--outdir", out, "--grid-size", "41"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["wigner"]["fidelity_vs_fock_gaussian"] > 0.9999
    assert res["fock"]["negativity"] < 0
    assert run(["iterate", "--outdir", out, "--ideal", "--generations", "2", "--route", "fock"]) == 0
    table = capsys.readouterr().out
    assert "growth-table" in table
    rows = io.read_json(tmp_path / "iterate.json")["rows"]
    assert rows[1]["fock_alpha"] > rows[0]["fock_alpha"]


def test_report_requires_a_report(tmp_path):
    assert run(["report", "--input", str(tmp_path / "report.json")]) == 5


def test_sample_command_is_byte_deterministic(tmp_path):
    paths = []
    for k, workers in enumerate((1, 3)):
        d = tmp_path / f"run{k}"
        assert run(["sample", "--outdir", str(d), "--fit-samples-per-phase", "9000", "--workers", str(workers)]) == 0
        paths.append(d / "samples.txt")
    assert paths[0].read_bytes() == paths[1].read_bytes()
