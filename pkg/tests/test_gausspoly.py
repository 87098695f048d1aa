from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from catbreed.errors import DomainError
from catbreed.gausspoly import GaussPoly


def _random_poly(rng, nvars, deg):
    shape = (deg + 1,) * nvars
    c = rng.normal(size=shape)
    idx = np.indices(shape).sum(axis=0)
    c[idx > deg] = 0
    a = rng.normal(size=(nvars, nvars))
    prec = a @ a.T + 0.5 * np.eye(nvars)
    return GaussPoly(prec, c)


def test_gaussian_integral():
    g = GaussPoly.gaussian(np.eye(2))
    assert g.total_integral() == pytest.approx(math.pi, rel=1e-14)
    g1 = GaussPoly.gaussian([[2.0]], scale=3.0)
    assert g1.total_integral() == pytest.approx(3 * math.sqrt(math.pi / 2), rel=1e-14)


def test_moment_integral_matches_quadrature():
    c = np.zeros((5, 1))
    c[4, 0] = 1.0
    g = GaussPoly([[0.7]], c[:, 0])
    ref, _ = integrate.quad(lambda x: x**4 * math.exp(-0.7 * x * x), -np.inf, np.inf)
    assert g.total_integral() == pytest.approx(ref, rel=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_partial_integration_matches_quadrature(seed):
    rng = np.random.default_rng(seed)
    g = _random_poly(rng, 2, 4)
    y = float(rng.normal())
    ref, _ = integrate.quad(lambda z: g(z, y), -np.inf, np.inf, epsabs=1e-13)
    got = g.integrate([0])(y)
    assert got == pytest.approx(ref, rel=1e-8, abs=1e-11)


@given(st.integers(0, 2**32 - 1))
def test_product_is_pointwise(seed):
    rng = np.random.default_rng(seed)
    a, b = _random_poly(rng, 2, 3), _random_poly(rng, 2, 2)
    pts = rng.normal(size=(2, 7))
    np.testing.assert_allclose((a * b)(*pts), a(*pts) * b(*pts), rtol=1e-10, atol=1e-14)


@given(st.integers(0, 2**32 - 1))
def test_substitution_is_composition(seed):
    rng = np.random.default_rng(seed)
    g = _random_poly(rng, 2, 4)
    T = rng.normal(size=(2, 3))
    h = g.substitute(T)
    u = rng.normal(size=(3, 5))
    v = T @ u
    np.testing.assert_allclose(h(*u), g(*v), rtol=1e-9, atol=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_rotation_preserves_integral(seed):
    rng = np.random.default_rng(seed)
    g = _random_poly(rng, 2, 6)
    t = rng.uniform(0, 2 * math.pi)
    R = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    assert g.substitute(R).total_integral() == pytest.approx(g.total_integral(), rel=1e-10, abs=1e-12)


def test_integrating_one_at_a_time_equals_all_at_once(rng):
    g = _random_poly(rng, 3, 4)
    step = g.integrate([2]).integrate([1]).integrate([0])
    assert float(step.coeffs) == pytest.approx(g.total_integral(), rel=1e-10)


def test_sum_requires_matching_gaussians():
    a = GaussPoly.gaussian(np.eye(2))
    b = GaussPoly.gaussian(2 * np.eye(2))
    with pytest.raises(DomainError):
        a + b
    s = a + a
    assert s.total_integral() == pytest.approx(2 * math.pi)


def test_non_integrable_direction_rejected():
    g = GaussPoly(np.diag([1.0, 0.0]), np.ones((1, 1)))
    with pytest.raises(DomainError):
        g.integrate([1])


def test_shape_validation():
    with pytest.raises(DomainError):
        GaussPoly(np.eye(2), np.ones(3))


def test_degree_and_monomials():
    c = np.zeros((3, 3))
    c[2, 0] = 1.0
    c[1, 1] = -2.0
    g = GaussPoly(np.eye(2), c)
    assert g.degree == 2
    assert dict(g.monomials()) == {(1, 1): -2.0, (2, 0): 1.0}


def test_embed_ignores_extra_variables():
    g = GaussPoly.gaussian([[1.0]])
    e = g.embed(3, [1])
    assert e(5.0, 0.3, -2.0) == pytest.approx(math.exp(-0.09))
