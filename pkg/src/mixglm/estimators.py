"""Finite-dimensional simulation of the mixed GLM and its estimators.

The functional API (``generate_dataset``, ``linear_estimate``,
``spectral_estimate``, ...) is what the experiments use. The classes at
the bottom wrap it in scikit-learn's estimator protocol so the estimators
can be fitted directly on a design matrix and observation vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import eigh
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted, check_X_y

from .models import LinkModel, make_model
from .numerics import DEFAULT_SPEC, NumericalError, QuadratureSpec
from .preprocessors import Preprocessor, make_preprocessor
from .theory import ComboCoefficients, theory_report

__all__ = [
    "Dataset",
    "SpectralResult",
    "EstimationResult",
    "generate_dataset",
    "linear_estimate",
    "spectral_matrix",
    "spectral_estimate",
    "calibrate_signs",
    "combined_estimate",
    "overlap",
    "estimate_all",
    "LinearEstimator",
    "SpectralEstimator",
    "CombinedEstimator",
]


@dataclass(frozen=True, eq=False)
class Dataset:
    """One draw of (A, y) with its latent labels and signals."""

    A: np.ndarray
    y: np.ndarray
    eta: np.ndarray
    x1_star: np.ndarray
    x2_star: np.ndarray
    alpha: float
    delta: float
    seed: int
    model_name: str = ""

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.A.shape[1]

    @property
    def delta_realized(self) -> float:
        return self.n / self.d


def _unit_sphere(rng: np.random.Generator, d: int) -> np.ndarray:
    x = rng.standard_normal(d)
    return x / np.linalg.norm(x)


def generate_dataset(d: int, delta: float, alpha: float, model: LinkModel, seed: int) -> Dataset:
    """Sample a dataset with n = round(delta * d) observations."""
    if d < 2:
        raise ValueError("d must be at least 2")
    if not delta > 0:
        raise ValueError("delta must be positive")
    if not 0.5 < alpha < 1:
        raise ValueError("alpha must lie in (1/2, 1)")
    n = int(round(delta * d))
    if n < 2:
        raise ValueError(f"n = round(delta*d) = {n} is below 2")
    rng = np.random.default_rng(seed)
    x1 = _unit_sphere(rng, d)
    x2 = _unit_sphere(rng, d)
    eta = rng.random(n) < alpha
    A = rng.standard_normal((n, d))
    g = np.where(eta, A @ x1, A @ x2)
    y = np.asarray(model.sample_y(g, rng), dtype=float)
    for arr in (A, y, eta, x1, x2):
        arr.setflags(write=False)
    return Dataset(A, y, eta, x1, x2, float(alpha), float(delta), int(seed), model.name)


def linear_estimate(ds: Dataset, L: Preprocessor) -> np.ndarray:
    """(1/n) A^T L(y)."""
    return ds.A.T @ np.asarray(L(ds.y), dtype=float) / ds.n


@dataclass(frozen=True, eq=False)
class SpectralResult:
    v1: np.ndarray
    v2: np.ndarray
    lam1: float
    lam2: float
    lam3: float


def spectral_matrix(A: np.ndarray, t: np.ndarray) -> np.ndarray:
    """D = (1/n) A^T diag(t) A, symmetrised."""
    D = (A.T * t) @ A / A.shape[0]
    return 0.5 * (D + D.T)


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > 1e-12)
    if nz.size and v[nz[0]] < 0:
        return -v
    return v


def spectral_estimate(ds: Dataset, T: Preprocessor) -> SpectralResult:
    """Top two unit eigenvectors and top three eigenvalues of D."""
    D = spectral_matrix(ds.A, np.asarray(T(ds.y), dtype=float))
    d = D.shape[0]
    k = min(3, d)
    try:
        vals, vecs = eigh(D, subset_by_index=[d - k, d - 1])
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    vals = vals[::-1]
    vecs = vecs[:, ::-1]
    lam = list(vals) + [math.nan] * (3 - k)
    v1 = _canonical_sign(vecs[:, 0])
    v2 = _canonical_sign(vecs[:, 1])
    return SpectralResult(v1, v2, float(lam[0]), float(lam[1]), float(lam[2]))


def calibrate_signs(v: np.ndarray, reference: np.ndarray, predicted_corr: Optional[float] = None) -> int:
    """Sign s in {-1, +1} to apply to ``v``.

    With ``predicted_corr`` unset, ``reference`` is the true signal and the
    sign of <v, x*> is returned. Otherwise ``reference`` is the linear
    estimate and the sign of <v, x_lin> is matched to the sign of the
    predicted correlation between the two estimators.
    """
    c = float(np.dot(v, reference))
    if predicted_corr is None:
        return 1 if c >= 0 else -1
    want = 1 if predicted_corr >= 0 else -1
    have = 1 if c >= 0 else -1
    return want * have


def _to_sqrt_d(v: np.ndarray) -> np.ndarray:
    nrm = np.linalg.norm(v)
    if nrm == 0:
        return np.zeros_like(v)
    return v * (math.sqrt(v.size) / nrm)


def combined_estimate(x_lin: np.ndarray, x_spec: np.ndarray, coeffs) -> np.ndarray:
    """(xi x_lin + zeta_c x_spec) / (1 - nu^2) on sqrt(d)-normalised inputs.

    ``coeffs`` is a ``ComboCoefficients`` or a ``(nu, xi, zeta_c)`` triple.
    """
    nu, xi, zc = coeffs[0], coeffs[1], coeffs[2]
    return (xi * _to_sqrt_d(x_lin) + zc * _to_sqrt_d(x_spec)) / (1.0 - nu * nu)


def overlap(v: np.ndarray, x: np.ndarray) -> float:
    """|<v, x>| / (|v| |x|), zero if either vector vanishes."""
    nv, nx = np.linalg.norm(v), np.linalg.norm(x)
    if nv == 0 or nx == 0:
        return 0.0
    return float(abs(np.dot(v, x)) / (nv * nx))


@dataclass
class EstimationResult:
    """Linear, spectral and combined estimates for both signals.

    ``v1`` is the top eigenvector of D built from ``T1`` and ``v2`` the second
    eigenvector of D built from ``T2`` (the same matrix when ``T2`` is None).
    ``lam1..lam3`` are the top eigenvalues of the ``T1`` matrix.
    """

    x_lin: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    lam1: float
    lam2: float
    lam3: float
    x_comb_1: Optional[np.ndarray]
    x_comb_2: Optional[np.ndarray]
    overlaps: dict = field(default_factory=dict)
    signs: tuple = (1, 1)


def estimate_all(
    ds: Dataset,
    L: Optional[Preprocessor],
    T1: Preprocessor,
    T2: Optional[Preprocessor] = None,
    coeffs: tuple = (None, None),
) -> EstimationResult:
    """Run every estimator on one dataset and measure overlaps with the truth.

    Spectral signs are calibrated against the true signals, which is what the
    asymptotic correlations assume.
    """
    x_lin = linear_estimate(ds, L) if L is not None else np.zeros(ds.d)
    s1 = spectral_estimate(ds, T1)
    s2 = spectral_estimate(ds, T2) if T2 is not None else s1
    v1 = s1.v1 * calibrate_signs(s1.v1, ds.x1_star)
    v2 = s2.v2 * calibrate_signs(s2.v2, ds.x2_star)
    signs = (calibrate_signs(s1.v1, ds.x1_star), calibrate_signs(s2.v2, ds.x2_star))
    combs = []
    for v, c in zip((v1, v2), coeffs):
        combs.append(combined_estimate(x_lin, v, c) if c is not None else None)
    ov = {
        "lin_1": overlap(x_lin, ds.x1_star),
        "lin_2": overlap(x_lin, ds.x2_star),
        "spec_1": overlap(v1, ds.x1_star),
        "spec_2": overlap(v2, ds.x2_star),
        "comb_1": overlap(combs[0], ds.x1_star) if combs[0] is not None else math.nan,
        "comb_2": overlap(combs[1], ds.x2_star) if combs[1] is not None else math.nan,
    }
    return EstimationResult(x_lin, v1, v2, s1.lam1, s1.lam2, s1.lam3, combs[0], combs[1], ov, signs)


# ---------------------------------------------------------------------------
# scikit-learn style wrappers
# ---------------------------------------------------------------------------
class _MixedGLMBase(BaseEstimator):
    def _model(self) -> LinkModel:
        return make_model(self.model, self.sigma)

    def _validate(self, A, y):
        A, y = check_X_y(A, y, dtype=np.float64, y_numeric=True)
        if A.shape[1] < 2:
            raise ValueError("need at least two features")
        return A, y


class LinearEstimator(_MixedGLMBase):
    """x_lin = (1/n) A^T L(y) with a named preprocessor (default: optimal L*)."""

    def __init__(self, model="mlr", sigma=0.0, alpha=0.6, preproc="optlin"):
        self.model = model
        self.sigma = sigma
        self.alpha = alpha
        self.preproc = preproc

    def fit(self, A, y):
        A, y = self._validate(A, y)
        L = self.preproc if isinstance(self.preproc, Preprocessor) else make_preprocessor(
            self.preproc, self._model(), self.alpha
        )
        self.coef_ = A.T @ L(y) / A.shape[0]
        self.n_features_in_ = A.shape[1]
        return self

    def predict(self, A):
        check_is_fitted(self, "coef_")
        return np.asarray(A, dtype=float) @ self.coef_


class SpectralEstimator(_MixedGLMBase):
    """Top eigenvectors of D = (1/n) A^T diag(T(y)) A.

    After ``fit``: ``components_`` holds the top two unit eigenvectors as rows
    and ``eigenvalues_`` the top three eigenvalues.
    """

    def __init__(self, model="mlr", sigma=0.0, alpha=0.6, preproc="opt1"):
        self.model = model
        self.sigma = sigma
        self.alpha = alpha
        self.preproc = preproc

    def fit(self, A, y):
        A, y = self._validate(A, y)
        T = self.preproc if isinstance(self.preproc, Preprocessor) else make_preprocessor(
            self.preproc, self._model(), self.alpha
        )
        D = spectral_matrix(A, T(y))
        d = D.shape[0]
        k = min(3, d)
        vals, vecs = eigh(D, subset_by_index=[d - k, d - 1])
        self.eigenvalues_ = vals[::-1].copy()
        self.components_ = np.stack([_canonical_sign(vecs[:, -1]), _canonical_sign(vecs[:, -2])])
        self.n_features_in_ = d
        return self

    def transform(self, A):
        check_is_fitted(self, "components_")
        return np.asarray(A, dtype=float) @ self.components_.T


class CombinedEstimator(_MixedGLMBase):
    """Bayes-optimal linear combination of the linear and spectral estimates.

    The coefficients come from the asymptotic theory at delta = n/d. The
    spectral sign is chosen blind, by matching <v, x_lin> to the predicted
    correlation nu between the two estimators.
    """

    def __init__(self, model="mlr", sigma=0.0, alpha=0.6, signal=1, spec: QuadratureSpec = DEFAULT_SPEC):
        self.model = model
        self.sigma = sigma
        self.alpha = alpha
        self.signal = signal
        self.spec = spec

    def fit(self, A, y):
        A, y = self._validate(A, y)
        n, d = A.shape
        mdl = self._model()
        L = make_preprocessor("optlin", mdl, self.alpha, self.spec)
        T = make_preprocessor(f"opt{self.signal}", mdl, self.alpha, self.spec)
        rep = theory_report(mdl, self.alpha, n / d, T, L, self.spec)
        i = self.signal
        coeffs = ComboCoefficients(
            getattr(rep, f"nu_{i}"), getattr(rep, f"xi_{i}"), getattr(rep, f"zeta_c_{i}"),
            getattr(rep, f"combo_overlap_{i}"),
        )
        x_lin = A.T @ L(y) / n
        D = spectral_matrix(A, T(y))
        vals, vecs = eigh(D, subset_by_index=[d - 2, d - 1])
        v = vecs[:, -1] if i == 1 else vecs[:, -2]
        v = v * calibrate_signs(v, x_lin, coeffs.nu)
        self.coefficients_ = coeffs
        self.report_ = rep
        self.coef_ = combined_estimate(x_lin, v, coeffs)
        self.n_features_in_ = d
        return self

    def predict(self, A):
        check_is_fitted(self, "coef_")
        return np.asarray(A, dtype=float) @ self.coef_
