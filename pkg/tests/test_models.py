import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixglm.models import (
    custom_model,
    h_function,
    make_model,
    mixed_linear_regression,
    mixed_phase_retrieval,
)
from mixglm.numerics import DomainError, integrate_y
from oracles import moment_by_g_quadrature


def _gauss(y, g, s):
    return math.exp(-0.5 * ((y - g) / s) ** 2) / (math.sqrt(2 * math.pi) * s)


@pytest.mark.parametrize("sigma", [0.3, 1.0])
@pytest.mark.parametrize("make", [mixed_linear_regression, mixed_phase_retrieval])
@pytest.mark.parametrize("k", [0, 2])
def test_moment_integrals_are_one(make, sigma, k):
    m = make(sigma)
    val = integrate_y(lambda y: m.moment_m(k, y), m.truncated_support(), breakpoints=m.breakpoints())
    assert abs(val - 1) < 1e-8


@pytest.mark.parametrize("y", [-3.0, -0.7, 0.0, 0.4, 1.5, 4.0])
@pytest.mark.parametrize("k", [0, 1, 2])
def test_mlr_moments_match_g_quadrature(y, k):
    s = 0.8
    want = moment_by_g_quadrature(lambda yy, g: _gauss(yy, g, s), k, y)
    assert math.isclose(mixed_linear_regression(s).moment_m(k, y), want, rel_tol=1e-9, abs_tol=1e-14)


@pytest.mark.parametrize("y", [-1.2, -0.3, 0.0, 0.2, 1.0, 3.0])
@pytest.mark.parametrize("k", [0, 1, 2])
def test_pr_moments_match_g_quadrature(y, k):
    s = 0.5
    want = moment_by_g_quadrature(lambda yy, g: _gauss(yy, abs(g), s), k, y)
    assert math.isclose(mixed_phase_retrieval(s).moment_m(k, y), want, rel_tol=1e-9, abs_tol=1e-14)


def test_pr_delta_is_continuous_across_branch_switch():
    m = mixed_phase_retrieval(0.3)
    y = np.array([-1e-9, 0.0, 1e-9])
    d = m.ratio_delta(y)
    assert np.ptp(d) < 1e-7


def test_pr_tail_ratios_stay_finite():
    m = mixed_phase_retrieval(0.2)
    y = np.array([-8.0, -3.0, 20.0, 60.0])
    m0, r1, r2 = m.moment_table(y)
    assert np.all(np.isfinite(r2)) and np.all(r2 >= 0)
    assert np.all(r1 == 0)


def test_noiseless_pr_moments():
    m = mixed_phase_retrieval(0.0)
    assert m.support == (0.0, math.inf)
    assert math.isclose(m.moment_m(0, 1.3), 2 * math.exp(-0.5 * 1.69) / math.sqrt(2 * math.pi))
    assert math.isclose(m.ratio_delta(1.3), 1.69)
    with pytest.raises(DomainError):
        m.ratio_delta(-0.5)


def test_noiseless_densities_are_degenerate():
    with pytest.raises(DomainError):
        mixed_linear_regression(0.0).cond_density(0.1, 0.2)


def test_moment_order_is_checked():
    with pytest.raises(ValueError):
        mixed_linear_regression(0.5).moment_m(3, 0.0)


def test_sampling():
    rng = np.random.default_rng(0)
    g = rng.standard_normal(20000)
    y = mixed_phase_retrieval(0.0).sample_y(g, rng)
    assert np.array_equal(y, np.abs(g))
    y = mixed_linear_regression(0.5).sample_y(g, np.random.default_rng(1))
    assert abs(np.var(y - g) - 0.25) < 0.01


def test_custom_model_falls_back_to_quadrature():
    s = 0.6
    cm = custom_model(density=lambda y, g: np.exp(-0.5 * ((y - g) / s) ** 2) / (math.sqrt(2 * math.pi) * s),
                      y_scale=math.sqrt(1 + s * s))
    ref = mixed_linear_regression(s)
    y = np.linspace(-4, 4, 9)
    assert np.allclose(cm.ratio_delta(y), ref.ratio_delta(y), rtol=1e-9)
    assert np.allclose(cm.ratio_m1(y), ref.ratio_m1(y), atol=1e-10)


def test_model_equality_keys_caches():
    assert mixed_linear_regression(0.5) == mixed_linear_regression(0.5)
    assert hash(mixed_phase_retrieval(0.1)) == hash(mixed_phase_retrieval(0.1))
    assert mixed_linear_regression(0.5) != mixed_phase_retrieval(0.5)


def test_factory_validation():
    assert make_model("PR", 0.2).kind == "pr"
    with pytest.raises(ValueError):
        make_model("logistic")
    with pytest.raises(ValueError):
        mixed_linear_regression(-1.0)


def test_h_at_zero():
    assert abs(h_function(0.0) - 1.22564) < 1e-4


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=0.0, max_value=5.0))
def test_h_is_decreasing(s):
    assert h_function(s + 0.1) < h_function(s)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=0.05, max_value=2.0), st.floats(min_value=-6, max_value=6))
def test_mlr_delta_closed_form(sigma, y):
    c = 1 + sigma ** 2
    assert math.isclose(mixed_linear_regression(sigma).ratio_delta(y), (y * y + sigma ** 2 * c) / c ** 2, rel_tol=1e-12)
