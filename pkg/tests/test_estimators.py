import math

import numpy as np
import pytest
from sklearn.base import clone

from mixglm.estimators import (
    CombinedEstimator,
    LinearEstimator,
    SpectralEstimator,
    calibrate_signs,
    combined_estimate,
    estimate_all,
    generate_dataset,
    linear_estimate,
    overlap,
    spectral_estimate,
    spectral_matrix,
)
from mixglm.models import mixed_linear_regression, mixed_phase_retrieval
from mixglm.preprocessors import baseline_ycs, optimal_linear, optimal_spectral
from mixglm.theory import theory_report


@pytest.fixture(scope="module")
def ds():
    return generate_dataset(400, 6.0, 0.6, mixed_linear_regression(0.0), seed=3)


def test_dataset_shapes_and_determinism(ds):
    assert ds.A.shape == (2400, 400) and ds.y.shape == (2400,)
    assert math.isclose(np.linalg.norm(ds.x1_star), 1.0) and math.isclose(np.linalg.norm(ds.x2_star), 1.0)
    again = generate_dataset(400, 6.0, 0.6, mixed_linear_regression(0.0), seed=3)
    assert np.array_equal(ds.A, again.A) and np.array_equal(ds.y, again.y)
    assert abs(ds.eta.mean() - 0.6) < 0.05
    assert not ds.A.flags.writeable


def test_noiseless_labels_reproduce_y(ds):
    g = np.where(ds.eta, ds.A @ ds.x1_star, ds.A @ ds.x2_star)
    assert np.allclose(ds.y, g)


def test_dataset_validation():
    m = mixed_linear_regression(0.0)
    with pytest.raises(ValueError):
        generate_dataset(1, 2.0, 0.6, m, 0)
    with pytest.raises(ValueError):
        generate_dataset(10, 2.0, 0.4, m, 0)
    with pytest.raises(ValueError):
        generate_dataset(10, -1.0, 0.6, m, 0)


def test_linear_estimate_formula(ds):
    L = optimal_linear(mixed_linear_regression(0.0))
    want = sum(ds.A[i] * L(ds.y[i]) for i in range(ds.n)) / ds.n
    assert np.allclose(linear_estimate(ds, L), want, atol=1e-12)


def test_spectral_matches_full_eigh(ds):
    T = optimal_spectral(mixed_linear_regression(0.0), 0.6)
    res = spectral_estimate(ds, T)
    D = ds.A.T @ np.diag(T(ds.y)) @ ds.A / ds.n
    vals, vecs = np.linalg.eigh(D)
    assert np.allclose([res.lam1, res.lam2, res.lam3], vals[::-1][:3], atol=1e-10)
    assert abs(abs(res.v1 @ vecs[:, -1]) - 1) < 1e-8
    assert abs(abs(res.v2 @ vecs[:, -2]) - 1) < 1e-8


def test_spectral_matrix_is_symmetric():
    rng = np.random.default_rng(0)
    D = spectral_matrix(rng.standard_normal((30, 5)), rng.standard_normal(30))
    assert np.array_equal(D, D.T)


def test_sign_calibration():
    v = np.array([1.0, -2.0])
    assert calibrate_signs(v, np.array([-1.0, 0.0])) == -1
    assert calibrate_signs(v, np.array([1.0, 0.0]), predicted_corr=-0.3) == -1
    assert calibrate_signs(-v, np.array([1.0, 0.0]), predicted_corr=-0.3) == 1


def test_overlap_is_scale_free():
    x = np.array([3.0, 4.0])
    assert math.isclose(overlap(-2 * x, x), 1.0)
    assert overlap(np.zeros(2), x) == 0.0


def test_combined_estimate_normalises_inputs():
    a, b = np.array([2.0, 0.0]), np.array([0.0, 0.5])
    out = combined_estimate(a, b, (0.0, 1.0, 1.0))
    assert np.allclose(out, [math.sqrt(2), math.sqrt(2)])


def test_overlaps_track_theory(ds):
    m = mixed_linear_regression(0.0)
    L, T = optimal_linear(m), optimal_spectral(m, 0.6)
    rep = theory_report(m, 0.6, 6.0, T, L)
    res = estimate_all(ds, L, T, coeffs=((rep.nu_1, rep.xi_1, rep.zeta_c_1), None))
    assert abs(res.overlaps["spec_1"] - rep.rho_spec_1) < 0.08
    assert abs(res.overlaps["lin_1"] - rep.rho_lin_1) < 0.08
    assert res.overlaps["comb_1"] > res.overlaps["spec_1"]
    assert math.isnan(res.overlaps["comb_2"])


def test_estimate_all_without_linear():
    pr = mixed_phase_retrieval(0.0)
    d = generate_dataset(100, 5.0, 0.7, pr, 1)
    res = estimate_all(d, None, baseline_ycs())
    assert res.overlaps["lin_1"] == 0.0


def test_sklearn_wrappers(ds):
    A, y = np.asarray(ds.A), np.asarray(ds.y)
    lin = LinearEstimator().fit(A, y)
    assert np.allclose(lin.coef_, linear_estimate(ds, optimal_linear(mixed_linear_regression(0.0))))
    assert lin.predict(A[:3]).shape == (3,)
    sp = SpectralEstimator(preproc="opt1").fit(A, y)
    assert sp.components_.shape == (2, 400) and sp.eigenvalues_.shape == (3,)
    assert sp.transform(A[:4]).shape == (4, 2)
    comb = CombinedEstimator().fit(A, y)
    assert overlap(comb.coef_, ds.x1_star) > overlap(sp.components_[0], ds.x1_star)


def test_sklearn_protocol():
    est = SpectralEstimator(sigma=0.3, alpha=0.7)
    assert est.get_params()["alpha"] == 0.7
    c = clone(est).set_params(preproc="ycs")
    assert c.preproc == "ycs" and est.preproc == "opt1"
    with pytest.raises(Exception):
        LinearEstimator().predict(np.ones((2, 2)))
    with pytest.raises(ValueError):
        LinearEstimator().fit(np.ones((3, 1)), np.ones(3))
