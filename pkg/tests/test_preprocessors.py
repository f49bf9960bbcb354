import math

import numpy as np
import pytest

from mixglm.models import mixed_linear_regression, mixed_phase_retrieval
from mixglm.preprocessors import (
    IneffectiveLinearError,
    baseline_lal,
    baseline_ycs,
    custom_preprocessor,
    make_preprocessor,
    optimal_linear,
    optimal_spectral,
    validate_preprocessor,
)


def test_ycs_values():
    T = baseline_ycs()
    assert np.array_equal(T(np.array([-4.0, -1.0, 0.5, 3.0])), [10.0, 1.0, 0.25, 9.0])
    assert (T.sup_on_support, T.inf_on_support) == (10.0, 0.0)


def test_lal_values_and_zero():
    T = baseline_lal()
    assert T(0.0) == -10.0
    assert math.isclose(T(2.0), 0.75)
    assert T(0.1) == -10.0
    assert (T.sup_on_support, T.inf_on_support) == (1.0, -10.0)


def test_optimal_spectral_noiseless_mlr():
    a = 0.6
    T1 = optimal_spectral(mixed_linear_regression(0.0), a, 1)
    T2 = optimal_spectral(mixed_linear_regression(0.0), a, 2)
    y = np.linspace(-3, 3, 13)
    assert np.allclose(T1(y), 1 - 1 / (a * y * y + 1 - a), rtol=1e-14)
    assert np.allclose(T2(y), 1 - 1 / ((1 - a) * y * y + a), rtol=1e-14)
    assert T1.sup_on_support == 1.0
    assert math.isclose(T1.inf_on_support, 1 - 1 / (1 - a), rel_tol=1e-12)


def test_optimal_spectral_rejects_alpha():
    with pytest.raises(ValueError):
        optimal_spectral(mixed_linear_regression(0.0), 0.4)
    with pytest.raises(ValueError):
        optimal_spectral(mixed_linear_regression(0.0), 0.6, 3)


def test_optimal_linear_mlr_is_scaled_identity():
    L = optimal_linear(mixed_linear_regression(1.0))
    assert math.isclose(L(3.0), 1.5)


@pytest.mark.parametrize("sigma", [0.0, 0.5])
def test_optimal_linear_pr_is_ineffective(sigma):
    with pytest.raises(IneffectiveLinearError):
        optimal_linear(mixed_phase_retrieval(sigma))


def test_scaled_map():
    T = baseline_ycs().scaled(2.0)
    assert T(1.5) == 4.5 and T.sup_on_support == 20.0
    with pytest.raises(ValueError):
        baseline_ycs().scaled(-1.0)


def test_custom_preprocessor_range_check():
    m = mixed_linear_regression(0.0)
    ok = custom_preprocessor(lambda y: np.tanh(y * y), 1.0, 0.0, model=m)
    assert ok.name == "custom"
    with pytest.raises(ValueError, match="declared sup"):
        custom_preprocessor(lambda y: y * y, 1.0, 0.0, model=m)
    with pytest.raises(ValueError, match="vanishes"):
        validate_preprocessor(custom_preprocessor(lambda y: 0 * y, 1.0, 0.0), m)
    with pytest.raises(ValueError, match="0 < sup"):
        validate_preprocessor(custom_preprocessor(lambda y: -np.abs(y), 0.0, -20.0), m)


def test_make_preprocessor_keys():
    m = mixed_linear_regression(0.0)
    assert make_preprocessor("opt2", m, 0.7).name == "opt2"
    assert make_preprocessor("LAL", m, 0.7).name == "lal"
    with pytest.raises(ValueError):
        make_preprocessor("nope", m, 0.7)
