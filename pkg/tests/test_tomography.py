from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import special

from catbreed import tomography
from catbreed.errors import AccuracyError, DomainError, TruncationError
from catbreed.fock import (
    REFERENCE_CAT,
    DensityMatrix,
    FockVector,
    apply_loss,
    breed_fock,
    eq1_state,
    fidelity,
    make_squeezed_cat,
)
from catbreed.sampler import SampleSet
from catbreed.tomography import (
    TomographyConfig,
    TomographyResult,
    both_corrections,
    build_homodyne_povm,
    mc_error_bars,
    mle_iterate,
    mle_reconstruct,
    negativity_and_fidelity_report,
    reconstruct_from_counts,
)


def _counts(povm, rho, n_per_phase, seed):
    rng = np.random.default_rng(seed)
    probs = np.clip(povm.probabilities(rho), 0, None)
    return np.stack([rng.multinomial(n_per_phase, p / p.sum()) for p in probs])


@pytest.fixture(scope="module")
def povm_ideal():
    return build_homodyne_povm(TomographyConfig(eta_det=1.0))


@pytest.fixture(scope="module")
def povm_lossy():
    return build_homodyne_povm(TomographyConfig())


# -- measurement model ------------------------------------------------------------


def test_completeness_and_positivity(povm_lossy):
    assert povm_lossy.completeness_error() < 1e-8
    assert povm_lossy.ops.shape == (4, 102, 21, 21)
    lam = np.linalg.eigvalsh(povm_lossy.ops.reshape(-1, 21, 21))
    assert lam.min() > -1e-12


def test_single_inner_bin_reconstitutes_identity():
    povm = build_homodyne_povm(TomographyConfig(eta_det=1.0, bin_width=10.0, cutoff=10))
    assert povm.n_bins == 3
    np.testing.assert_allclose(povm.ops.sum(axis=1), np.broadcast_to(np.eye(11), (4, 11, 11)), atol=1e-12)


def test_vacuum_bin_masses(povm_ideal):
    p = povm_ideal.probabilities(FockVector.basis(0, 20))
    cdf = 0.5 * (1 + special.erf(povm_ideal.edges))  # x-variance 1/2
    expected = np.diff(np.concatenate([[0.0], cdf, [1.0]]))
    for row in p:
        np.testing.assert_allclose(row, expected, atol=1e-12)


def test_lossy_single_photon_is_mixture(povm_ideal, povm_lossy):
    one, vac = FockVector.basis(1, 20), FockVector.basis(0, 20)
    lossy = povm_lossy.probabilities(one)
    mix = 0.77 * povm_ideal.probabilities(one) + 0.23 * povm_ideal.probabilities(vac)
    np.testing.assert_allclose(lossy, mix, atol=1e-12)


def test_loss_on_measurement_equals_loss_on_state(povm_ideal, povm_lossy, rng):
    from conftest import random_density

    rho = random_density(rng, 21)
    np.testing.assert_allclose(
        povm_lossy.probabilities(rho), povm_ideal.probabilities(apply_loss(DensityMatrix(rho), 0.77)), atol=1e-12
    )


def test_probabilities_sum_to_one(povm_lossy):
    p = povm_lossy.probabilities(eq1_state())
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-10)


def test_povm_errors(monkeypatch):
    with pytest.raises(DomainError):
        build_homodyne_povm(TomographyConfig(x_max=4.0))
    monkeypatch.setattr(tomography, "_BIN_NODES", 1)
    with pytest.raises(TruncationError):
        build_homodyne_povm(TomographyConfig(cutoff=12))


def test_config_validation():
    for bad in ({"eta_det": 0.0}, {"tolerance": 0.0}, {"symmetry": "chiral"}, {"cutoff": 0}, {"max_iterations": 0}):
        with pytest.raises(DomainError):
            TomographyConfig(**bad)
    assert TomographyConfig().max_iterations == 20000


def test_bin_counts(povm_ideal):
    s = SampleSet([0, 0, 0], [-9.0, 0.05, 9.0], np.radians([90, 90, 180]), [True] * 3)
    c = povm_ideal.bin_counts(s)
    assert c.sum() == 3
    assert c[0, 0] == 1 and c[3, -1] == 1
    assert c[0, np.searchsorted(povm_ideal.edges, 0.05, side="right")] == 1
    with pytest.raises(DomainError):
        povm_ideal.bin_counts(SampleSet([0], [0], [0.3], [True]))


def test_dimension_mismatch(povm_ideal):
    with pytest.raises(DomainError):
        povm_ideal.probabilities(FockVector.basis(0, 5))


# -- maximum likelihood --------------------------------------------------------------


def test_reconstruct_heralded_state(povm_ideal):
    cfg = TomographyConfig(eta_det=1.0)
    truth = eq1_state()
    res = reconstruct_from_counts(_counts(povm_ideal, truth, 2000, 1), povm_ideal, cfg)
    assert res.converged and res.iterations <= cfg.max_iterations
    assert fidelity(res.rho, truth) >= 0.95


def test_reconstruct_vacuum(povm_ideal):
    """At 4 x 2000 counts single seeds scatter around 0.99; the seed average clears it."""
    cfg = TomographyConfig(eta_det=1.0)
    vac = FockVector.basis(0, 20)
    fs = [fidelity(reconstruct_from_counts(_counts(povm_ideal, vac, 2000, seed), povm_ideal, cfg).rho, vac)
          for seed in range(10)]
    assert np.mean(fs) >= 0.99
    assert min(fs) >= 0.98


def test_every_iterate_is_valid_and_likelihood_ascends():
    cfg = TomographyConfig(eta_det=0.77, cutoff=10, max_iterations=400)
    povm = build_homodyne_povm(cfg)
    counts = _counts(povm, eq1_state(10), 2000, 3)
    seen = []

    def cb(it, rho, ll):
        lam = np.linalg.eigvalsh(rho)
        seen.append((it, lam.min(), np.trace(rho).real, np.max(np.abs(rho - rho.conj().T)), ll))

    rho, ll, it, conv, trace, flags = mle_iterate(counts, povm, cfg, cb)
    assert len(seen) == it
    assert all(s[1] >= -1e-9 for s in seen)
    assert all(abs(s[2] - 1) < 1e-12 for s in seen)
    assert all(s[3] < 1e-14 for s in seen)
    assert np.all(np.diff(trace) >= 0)
    assert trace[-1] == ll


def test_symmetry_constraints_hold():
    cfg = TomographyConfig(eta_det=1.0, cutoff=10, symmetry="real+parity")
    povm = build_homodyne_povm(cfg)
    res = reconstruct_from_counts(_counts(povm, eq1_state(10), 2000, 4), povm, cfg)
    r = res.rho.entries
    assert np.max(np.abs(r.imag)) == 0
    assert np.max(np.abs(r[::2, 1::2])) == 0
    assert res.flags["symmetry"] == "real+parity"


def test_symmetry_constraint_costs_likelihood_only():
    cfg = TomographyConfig(eta_det=1.0, cutoff=14, symmetry="real", tolerance=1e-12)
    povm = build_homodyne_povm(cfg)
    counts = _counts(povm, make_squeezed_cat(REFERENCE_CAT, 14), 3000, 5)
    constrained = reconstruct_from_counts(counts, povm, cfg)
    free = reconstruct_from_counts(counts, povm, TomographyConfig(eta_det=1.0, cutoff=14, tolerance=1e-12))
    assert np.max(np.abs(constrained.rho.entries.imag)) == 0
    assert constrained.log_likelihood <= free.log_likelihood + 1e-6


def test_floor_flag():
    cfg = TomographyConfig(eta_det=1.0, cutoff=2, probability_floor=1e-3, max_iterations=50)
    povm = build_homodyne_povm(cfg)
    counts = np.zeros((4, povm.n_bins), dtype=np.int64)
    counts[:, povm.n_bins // 2] = 100
    counts[:, -1] = 1  # x > 5 is essentially impossible for two photons
    _, _, _, _, _, flags = mle_iterate(counts, povm, cfg)
    assert flags["floored_bins"] >= 1


def test_empty_counts_rejected(povm_ideal):
    with pytest.raises(DomainError):
        mle_iterate(np.zeros((4, povm_ideal.n_bins)), povm_ideal, TomographyConfig())


def test_fidelity_grows_with_sample_count():
    cfg = TomographyConfig(eta_det=1.0, cutoff=10)
    povm = build_homodyne_povm(cfg)
    truth = eq1_state(10)
    means, ses = [], []
    for n in (500, 2000, 8000, 32000):
        fs = [fidelity(reconstruct_from_counts(_counts(povm, truth, n, 10 * n + k), povm, cfg).rho, truth) for k in range(5)]
        means.append(np.mean(fs))
        ses.append(np.std(fs, ddof=1) / math.sqrt(len(fs)))
    # monotone within the seed-to-seed noise of neighbouring means
    for i in range(3):
        assert means[i + 1] - means[i] > -2 * math.hypot(ses[i], ses[i + 1])
    assert means[-1] > means[1] > means[0]


def test_efficiency_aware_reconstruction_undoes_loss():
    truth = breed_fock(FockVector.basis(1), FockVector.basis(1), 0.2).rho.resize(14)
    lossy = TomographyConfig(eta_det=0.77, cutoff=14, symmetry="real+parity")
    naive = TomographyConfig(eta_det=1.0, cutoff=14, symmetry="real+parity")
    p_lossy, p_naive = build_homodyne_povm(lossy), build_homodyne_povm(naive)
    gaps = []
    for seed in range(3):
        counts = _counts(p_lossy, truth, 4000, 50 + seed)  # data of the loss-degraded truth
        f_lossy = fidelity(reconstruct_from_counts(counts, p_lossy, lossy).rho, truth)
        f_naive = fidelity(reconstruct_from_counts(counts, p_naive, naive).rho, truth)
        gaps.append(f_lossy - f_naive)
    assert min(gaps) > 0


def test_mle_reconstruct_from_samples():
    cfg = TomographyConfig(eta_det=1.0, cutoff=14, phases_deg=(0.0, 90.0))
    povm = build_homodyne_povm(cfg)
    rng = np.random.default_rng(0)
    x = rng.normal(0, math.sqrt(0.5), 4000)
    s = SampleSet(np.zeros(4000), x, np.repeat(np.radians([0.0, 90.0]), 2000), np.ones(4000, bool))
    res = mle_reconstruct(s, povm, cfg, target=REFERENCE_CAT)
    assert fidelity(res.rho, FockVector.basis(0, 14)) > 0.99
    assert res.fidelity == pytest.approx(fidelity(res.rho, make_squeezed_cat(REFERENCE_CAT, 14)))
    assert res.counts.sum() == 4000


def test_result_json_round_trip():
    cfg = TomographyConfig(eta_det=1.0, cutoff=14, max_iterations=30)
    povm = build_homodyne_povm(cfg)
    res = reconstruct_from_counts(_counts(povm, FockVector.basis(1, 14), 500, 6), povm, cfg, target=REFERENCE_CAT)
    back = TomographyResult.from_json(res.to_json())
    np.testing.assert_array_equal(back.rho.entries, res.rho.entries)
    assert back.config == res.config
    assert back.target == res.target
    assert back.ll_trace == res.ll_trace
    np.testing.assert_array_equal(back.counts, res.counts)


# -- Monte-Carlo error bars ---------------------------------------------------------------


@pytest.fixture(scope="module")
def small_problem():
    cfg = TomographyConfig(eta_det=1.0, cutoff=14)
    povm = build_homodyne_povm(cfg)
    truth = eq1_state(14)
    res = reconstruct_from_counts(_counts(povm, truth, 2000, 7), povm, cfg, target=REFERENCE_CAT)
    return cfg, povm, res


def test_mc_is_deterministic_across_workers(small_problem):
    cfg, povm, res = small_problem
    a = mc_error_bars(res, povm, replicas=10, seed=3)
    b = mc_error_bars(res, povm, replicas=10, seed=3, workers=3)
    assert a == b
    c = mc_error_bars(res, povm, replicas=10, seed=4)
    assert c.negativities != a.negativities


def test_mc_std_scales_with_inverse_sqrt_size(small_problem):
    cfg, povm, res = small_problem
    base = mc_error_bars(res, povm, replicas=24, seed=1)
    big = mc_error_bars(res, povm, replicas=24, seed=2, scale=10.0)
    assert base.excluded == 0 and big.excluded == 0
    ratio = base.negativity_std / big.negativity_std
    assert 0.6 * math.sqrt(10) < ratio < 1.5 * math.sqrt(10)


def test_mc_requires_ten_replicas(small_problem):
    _, povm, res = small_problem
    with pytest.raises(DomainError):
        mc_error_bars(res, povm, replicas=9)


def test_mc_counts_non_converged_replicas(small_problem):
    cfg, povm, res = small_problem
    stingy = TomographyConfig(eta_det=1.0, cutoff=14, max_iterations=3)
    # three iterations never satisfy the tolerance: every replica is excluded
    with pytest.raises(AccuracyError, match="converged"):
        mc_error_bars(res, povm, cfg=stingy, replicas=10, seed=0)


# -- negativity / fidelity report ------------------------------------------------------------


def test_report_vacuum_overlap_with_cat():
    rep = negativity_and_fidelity_report(FockVector.basis(0, 20), REFERENCE_CAT)
    c0 = make_squeezed_cat(REFERENCE_CAT, 20).amplitudes[0]
    assert rep.fidelity == pytest.approx(abs(c0) ** 2, abs=1e-8)
    assert rep.fidelity == pytest.approx(0.367, abs=0.005)


def test_report_uncorrected_is_less_negative():
    rho = breed_fock(FockVector.basis(1), FockVector.basis(1), 0.2).rho
    both = both_corrections(rho, REFERENCE_CAT, 0.77)
    assert both["efficiency"].negativity < 0
    assert both["none"].negativity < 0
    assert abs(both["none"].negativity) < abs(both["efficiency"].negativity)
    with pytest.raises(DomainError):
        negativity_and_fidelity_report(rho, REFERENCE_CAT, correction="partial")
