"""Asymptotic predictions for linear, spectral and combined estimators.

All expectations over (G, Y) are reduced to one-dimensional integrals over
the observation axis against m0, m1, m2. With Z = T(Y):

    E[h(Z)]             = int h(T(y)) m0(y) dy
    E[h(Z) G^2]         = int h(T(y)) m2(y) dy
    E[h(Z) (G^2 - 1)]   = int h(T(y)) (m2(y) - m0(y)) dy
    E[G L(Y) h(Z)]      = int L(y) h(T(y)) m1(y) dy

The integrals are evaluated with a composite Gauss-Legendre rule on the
truncated support, built once per (model, maps, spec) and cached.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.special import erfcx

from .models import LinkModel, h_function
from .numerics import (
    DEFAULT_SPEC,
    DomainError,
    NumericalError,
    QuadratureSpec,
    expand_bracket,
    find_root_monotone,
    panel_rule,
)
from .preprocessors import IneffectiveLinearError, Preprocessor, optimal_linear

__all__ = [
    "ObservationGrid",
    "observation_grid",
    "SubcriticalError",
    "DegenerateCorrelationError",
    "phi",
    "psi",
    "zeta",
    "lambda_bar",
    "lambda_star",
    "predict_eigenvalues",
    "LinearOverlap",
    "rho_lin",
    "rho_spec",
    "cross_cov",
    "combo_coefficients",
    "spectral_threshold",
    "beta_star",
    "beta_star_overlap",
    "closed_form_mlr_fixed_point",
    "closed_form_pr_threshold",
    "stieltjes_inverse_sum",
    "TheoryReport",
    "theory_report",
]

# Radicand values in (-_RADICAND_SLACK, 0) are treated as zero.
_RADICAND_SLACK = 1e-10


class SubcriticalError(ValueError):
    """Requested a supercritical quantity below the spectral threshold."""


class DegenerateCorrelationError(ValueError):
    """The linear and spectral estimators are perfectly correlated."""


# ---------------------------------------------------------------------------
# observation-axis quadrature
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class ObservationGrid:
    """Nodes ``y`` with ``w0 = weight * m0``, ``r1 = m1/m0``, ``r2 = m2/m0``."""

    y: np.ndarray
    w0: np.ndarray
    r1: np.ndarray
    r2: np.ndarray

    def e0(self, h) -> float:
        return float(np.dot(self.w0, h))

    def e1(self, h) -> float:
        return float(np.dot(self.w0 * self.r1, h))

    def e2(self, h) -> float:
        return float(np.dot(self.w0 * self.r2, h))

    def emix(self, h) -> float:
        return float(np.dot(self.w0 * (self.r2 - 1.0), h))


def _grid_nodes(model, breaks, factor):
    counts = [max(1, math.ceil(factor * (b - a) / model.local_scale(a, b))) for a, b in zip(breaks[:-1], breaks[1:])]
    return panel_rule(breaks, counts)


@lru_cache(maxsize=256)
def _cached_grid(model: LinkModel, maps: tuple, spec: QuadratureSpec) -> ObservationGrid:
    lo, hi = model.truncated_support(spec)
    extra = [b for m in maps for b in m.breakpoints]
    breaks = sorted({lo, hi, *(b for b in (*model.breakpoints(), *extra) if lo < b < hi)})
    factor = 1
    prev = None
    while factor <= 256:
        y, w = _grid_nodes(model, breaks, factor)
        m0, r1, r2 = model.moment_table(y)
        w0 = w * m0
        probes = [w0.sum(), np.dot(w0, r2), np.dot(w0, (r2 - 1.0) ** 2), np.dot(w0, r1 ** 2)]
        for m in maps:
            z = m(y)
            probes += [np.dot(w0, z), np.dot(w0 * r2, z * z)]
        cur = np.array(probes, dtype=float)
        if prev is not None:
            err = np.abs(cur - prev)
            if np.all(err <= spec.abs_tol + spec.rel_tol * np.abs(cur)):
                for arr in (y, w0, r1, r2):
                    arr.setflags(write=False)
                return ObservationGrid(y, w0, r1, r2)
        prev = cur
        factor *= 2
    raise NumericalError("observation grid did not converge", estimate=float(prev[0]))


def observation_grid(
    model: LinkModel, spec: QuadratureSpec = DEFAULT_SPEC, *maps: Preprocessor
) -> ObservationGrid:
    """Quadrature grid on the truncated support, refined for the given maps."""
    return _cached_grid(model, tuple(maps), spec)


# ---------------------------------------------------------------------------
# phi, psi, zeta and their roots
# ---------------------------------------------------------------------------
def _lower(T: Preprocessor) -> float:
    s = T.sup_on_support
    if not s > 0:
        raise DomainError(f"{T.name}: need sup T > 0, got {s}")
    return s * (1.0 + 1e-8) + 1e-12


def _check_lambda(lam: float, T: Preprocessor) -> None:
    if not lam > T.sup_on_support:
        raise DomainError(f"lambda={lam} must exceed sup T={T.sup_on_support}")


def _ratio(z: np.ndarray, lam: float) -> np.ndarray:
    return z / (lam - z)


def phi(lam: float, T: Preprocessor, model: LinkModel, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """lam * E[Z G^2 / (lam - Z)]."""
    _check_lambda(lam, T)
    g = observation_grid(model, spec, T)
    return lam * g.e2(_ratio(T(g.y), lam))


def psi(
    lam: float, Delta: float, T: Preprocessor, model: LinkModel, spec: QuadratureSpec = DEFAULT_SPEC
) -> float:
    """lam * (1/Delta + E[Z / (lam - Z)])."""
    _check_lambda(lam, T)
    if not Delta > 0:
        raise ValueError("Delta must be positive")
    g = observation_grid(model, spec, T)
    return lam * (1.0 / Delta + g.e0(_ratio(T(g.y), lam)))


def lambda_bar(Delta: float, T: Preprocessor, model: LinkModel, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Minimiser of psi(.; Delta) on (sup Z, inf).

    It solves E[(Z/(lam - Z))^2] = 1/Delta. When that has no solution the
    minimum sits at the left edge, which is returned.
    """
    if not Delta > 0:
        raise ValueError("Delta must be positive")
    g = observation_grid(model, spec, T)
    z = T(g.y)

    def dpsi(lam):
        return 1.0 / Delta - g.e0(_ratio(z, lam) ** 2)

    lo = _lower(T)
    if dpsi(lo) >= 0:
        return lo
    a, b = expand_bracket(dpsi, lo)
    return find_root_monotone(dpsi, a, b, spec.root_tol)


def zeta(lam: float, Delta: float, T: Preprocessor, model: LinkModel, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """psi(max(lam, lambda_bar(Delta)); Delta)."""
    return psi(max(lam, lambda_bar(Delta, T, model, spec)), Delta, T, model, spec)


class LambdaStar(NamedTuple):
    value: float
    supercritical: bool


def lambda_star(
    Delta_i: float, delta: float, T: Preprocessor, model: LinkModel, spec: QuadratureSpec = DEFAULT_SPEC
) -> LambdaStar:
    """Unique root of zeta(lam; Delta_i) = phi(lam) and the flag lam > lambda_bar(delta).

    zeta is non-decreasing and phi strictly decreasing, so the difference is
    monotone. Above lambda_bar(Delta_i) the root coincides with the root of
    E[Z (G^2 - 1) / (lam - Z)] = 1/Delta_i.
    """
    g = observation_grid(model, spec, T)
    z = T(g.y)
    lb_i = lambda_bar(Delta_i, T, model, spec)
    floor = lb_i * (1.0 / Delta_i + g.e0(_ratio(z, lb_i)))

    def gap(lam):
        zeta_val = floor if lam <= lb_i else lam * (1.0 / Delta_i + g.e0(_ratio(z, lam)))
        return zeta_val - lam * g.e2(_ratio(z, lam))

    lo = _lower(T)
    if gap(lo) >= 0:
        root = lo
    else:
        a, b = expand_bracket(gap, lo)
        root = find_root_monotone(gap, a, b, spec.root_tol)
    lb = lambda_bar(delta, T, model, spec)
    return LambdaStar(root, bool(root > lb))


def predict_eigenvalues(
    alpha: float, delta: float, T: Preprocessor, model: LinkModel, spec: QuadratureSpec = DEFAULT_SPEC
) -> tuple[float, float, float]:
    """Limits of the top three eigenvalues of D = (1/n) A^T diag(T(y)) A."""
    ls1 = lambda_star(alpha * delta, delta, T, model, spec).value
    ls2 = lambda_star((1 - alpha) * delta, delta, T, model, spec).value
    lb = lambda_bar(delta, T, model, spec)
    e1 = psi(max(ls1, lb), delta, T, model, spec)
    e2 = psi(max(ls2, lb), delta, T, model, spec)
    e3 = psi(lb, delta, T, model, spec)
    return e1, e2, e3


def stieltjes_inverse_sum(
    z: float, delta: float, T: Preprocessor, model: LinkModel, spec: QuadratureSpec = DEFAULT_SPEC
) -> float:
    """-1/z + delta * E[Z / (1 + z Z)]."""
    if z == 0:
        raise DomainError("z = 0 is a pole")
    g = observation_grid(model, spec, T)
    zz = T(g.y)
    den = 1.0 + z * zz
    lo_den = 1.0 + z * (T.sup_on_support if z < 0 else T.inf_on_support)
    if np.any(den <= 0) or lo_den <= 0:
        raise DomainError(f"1 + z T(y) vanishes on the support for z={z}")
    return -1.0 / z + delta * g.e0(zz / den)


# ---------------------------------------------------------------------------
# overlaps
# ---------------------------------------------------------------------------
class LinearOverlap(NamedTuple):
    rho1: float
    rho2: float
    n_lin: float
    effective: bool


def rho_lin(
    alpha: float, delta: float, L: Preprocessor, model: LinkModel, spec: QuadratureSpec = DEFAULT_SPEC
) -> LinearOverlap:
    """Limiting overlaps of x_lin = (1/n) A^T L(y) with both signals."""
    g = observation_grid(model, spec, L)
    l_vals = L(g.y)
    egl = g.e1(l_vals)
    el2 = g.e0(l_vals ** 2)
    n_lin = math.sqrt((alpha ** 2 + (1 - alpha) ** 2) * egl ** 2 + el2 / delta)
    if abs(egl) <= 1e-13 * max(1.0, math.sqrt(el2)) or n_lin == 0:
        return LinearOverlap(0.0, 0.0, n_lin, False)
    return LinearOverlap(alpha * egl / n_lin, (1 - alpha) * egl / n_lin, n_lin, True)


def _weight(alpha: float, signal: int) -> float:
    if signal not in (1, 2):
        raise ValueError("signal must be 1 or 2")
    return alpha if signal == 1 else 1.0 - alpha


def rho_spec(
    alpha: float,
    delta: float,
    T: Preprocessor,
    model: LinkModel,
    signal: int = 1,
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> float:
    """Limiting overlap of the i-th eigenvector of D with signal i."""
    a = _weight(alpha, signal)
    lam, sup = lambda_star(a * delta, delta, T, model, spec)
    if not sup:
        return 0.0
    g = observation_grid(model, spec, T)
    q2 = _ratio(T(g.y), lam) ** 2
    num = 1.0 / delta - g.e0(q2)
    den = 1.0 / delta + a * g.emix(q2)
    rad = num / den
    if rad < 0:
        if rad < -_RADICAND_SLACK:
            raise NumericalError(f"negative radicand {rad:.3e} in the spectral overlap")
        rad = 0.0
    return math.sqrt(rad)


def cross_cov(
    alpha: float,
    delta: float,
    L: Preprocessor,
    T: Preprocessor,
    model: LinkModel,
    signal: int = 1,
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> float:
    """Limit of E[W_lin W_i_spec] for the jointly Gaussian noise parts."""
    a = _weight(alpha, signal)
    lin = rho_lin(alpha, delta, L, model, spec)
    if not lin.effective:
        return 0.0
    rs = rho_spec(alpha, delta, T, model, signal, spec)
    if rs == 0.0:
        return 0.0
    lam = lambda_star(a * delta, delta, T, model, spec).value
    g = observation_grid(model, spec, L, T)
    val = g.e1(L(g.y) * _ratio(T(g.y), lam))
    return a * rs / lin.n_lin * val


class ComboCoefficients(NamedTuple):
    nu: float
    xi: float
    zeta_c: float
    combo_overlap: float


def combo_coefficients(rho_lin_i: float, rho_spec_i: float, cross_cov_i: float) -> ComboCoefficients:
    """Coefficients of the Bayes-optimal combination and its overlap."""
    nu = rho_lin_i * rho_spec_i + cross_cov_i
    if nu * nu >= 1:
        raise DegenerateCorrelationError(f"nu^2 = {nu * nu} >= 1")
    xi = rho_lin_i - rho_spec_i * nu
    zc = rho_spec_i - rho_lin_i * nu
    quad = xi * xi + zc * zc + 2 * xi * zc * nu
    return ComboCoefficients(nu, xi, zc, math.sqrt(max(quad, 0.0)) / (1 - nu * nu))


# ---------------------------------------------------------------------------
# optimal preprocessing: thresholds and fixed points
# ---------------------------------------------------------------------------
def _threshold_integral(model: LinkModel, spec: QuadratureSpec) -> float:
    g = observation_grid(model, spec)
    return g.e0((g.r2 - 1.0) ** 2)


def spectral_threshold(alpha: float, signal: int, model: LinkModel, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Smallest delta with non-zero overlap for the optimally preprocessed spectral method."""
    a = _weight(alpha, signal)
    val = _threshold_integral(model, spec)
    if val <= 0:
        return math.inf
    return 1.0 / (a * a * val)


def beta_star(
    alpha: float, delta: float, signal: int, model: LinkModel, spec: QuadratureSpec = DEFAULT_SPEC
) -> float:
    """Root in (1 - a, inf) of (beta - (1 - a)) int (m2 - m0)^2/(a m2 + beta m0) = 1/(a^2 delta)."""
    a = _weight(alpha, signal)
    thr = spectral_threshold(alpha, signal, model, spec)
    if not delta > thr:
        raise SubcriticalError(f"delta={delta} is not above the threshold {thr}")
    g = observation_grid(model, spec)
    sq = (g.r2 - 1.0) ** 2
    target = 1.0 / (a * a * delta)

    def f(beta):
        return (beta - (1 - a)) * g.e0(sq / (a * g.r2 + beta)) - target

    lo = 1.0 - a
    lo_, hi = expand_bracket(f, lo)
    return find_root_monotone(f, lo_, hi, spec.root_tol * 1e-2)


def beta_star_overlap(alpha: float, delta: float, signal: int, model: LinkModel, spec=DEFAULT_SPEC) -> float:
    """1/sqrt(beta* + a), the optimal spectral overlap."""
    a = _weight(alpha, signal)
    return 1.0 / math.sqrt(beta_star(alpha, delta, signal, model, spec) + a)


def _mlr_closed_integral(beta: float, a: float, sigma: float) -> float:
    s2 = sigma * sigma
    u = s2 * a + (1 + s2) * beta
    s = u / (2 * a)
    root = math.sqrt(math.pi * (1 + s2) ** 2 / (2 * a * u))
    # exp(s) erfc(sqrt(s)) = erfcx(sqrt(s))
    return -(a + beta) / a ** 2 + ((a + beta) / a) ** 2 * root * float(erfcx(math.sqrt(s)))


def closed_form_mlr_fixed_point(
    alpha: float, delta: float, sigma: float, signal: int = 1, tol: float = 1e-12
) -> float:
    """beta* for mixed linear regression from the erfc form of the integral."""
    a = _weight(alpha, signal)
    thr = (1 + sigma ** 2) ** 2 / (2 * a * a)
    if not delta > thr:
        raise SubcriticalError(f"delta={delta} is not above the threshold {thr}")
    target = 1.0 / (a * a * delta)

    def f(beta):
        return (beta - (1 - a)) * _mlr_closed_integral(beta, a, sigma) - target

    lo, hi = expand_bracket(f, 1.0 - a)
    return find_root_monotone(f, lo, hi, tol)


def closed_form_pr_threshold(alpha: float, sigma: float, signal: int = 1, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Spectral threshold for mixed phase retrieval via the function h."""
    a = _weight(alpha, signal)
    c2 = (1 + sigma ** 2) ** 2
    val = 2.0 / c2
    if sigma > 0:
        val += 4 * sigma ** 5 * h_function(sigma ** 2, spec) / (math.pi ** 1.5 * c2)
    return 1.0 / (a * a * val)


# ---------------------------------------------------------------------------
# full report
# ---------------------------------------------------------------------------
@dataclass
class TheoryReport:
    model: str
    sigma: float
    alpha: float
    delta: float
    preproc: str
    linear: str
    lambda_bar: float
    lambda_star_1: float
    lambda_star_2: float
    eig1: float
    eig2: float
    eig3: float
    rho_lin_1: float
    rho_lin_2: float
    n_lin: float
    linear_effective: bool
    rho_spec_1: float
    rho_spec_2: float
    cross_cov_1: float
    cross_cov_2: float
    nu_1: float
    nu_2: float
    xi_1: float
    xi_2: float
    zeta_c_1: float
    zeta_c_2: float
    combo_overlap_1: float
    combo_overlap_2: float
    supercritical_1: bool
    supercritical_2: bool
    threshold_1: float
    threshold_2: float

    def to_dict(self) -> dict:
        return asdict(self)


def theory_report(
    model: LinkModel,
    alpha: float,
    delta: float,
    T: Preprocessor,
    L: Preprocessor | None = None,
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> TheoryReport:
    """Every asymptotic prediction for one (model, alpha, delta, T, L)."""
    if L is None:
        try:
            L = optimal_linear(model, spec)
        except IneffectiveLinearError:
            L = None
    lb = lambda_bar(delta, T, model, spec)
    ls1 = lambda_star(alpha * delta, delta, T, model, spec)
    ls2 = lambda_star((1 - alpha) * delta, delta, T, model, spec)
    e1, e2, e3 = predict_eigenvalues(alpha, delta, T, model, spec)
    if L is not None:
        lin = rho_lin(alpha, delta, L, model, spec)
    else:
        lin = LinearOverlap(0.0, 0.0, 0.0, False)
    rs = [rho_spec(alpha, delta, T, model, i, spec) for i in (1, 2)]
    cc = [cross_cov(alpha, delta, L, T, model, i, spec) if lin.effective else 0.0 for i in (1, 2)]
    combos = [combo_coefficients(r, s, c) for r, s, c in zip((lin.rho1, lin.rho2), rs, cc)]
    return TheoryReport(
        model=model.kind,
        sigma=model.sigma,
        alpha=alpha,
        delta=delta,
        preproc=T.name,
        linear=L.name if L is not None else "none",
        lambda_bar=lb,
        lambda_star_1=ls1.value,
        lambda_star_2=ls2.value,
        eig1=e1,
        eig2=e2,
        eig3=e3,
        rho_lin_1=lin.rho1,
        rho_lin_2=lin.rho2,
        n_lin=lin.n_lin,
        linear_effective=lin.effective,
        rho_spec_1=rs[0],
        rho_spec_2=rs[1],
        cross_cov_1=cc[0],
        cross_cov_2=cc[1],
        nu_1=combos[0].nu,
        nu_2=combos[1].nu,
        xi_1=combos[0].xi,
        xi_2=combos[1].xi,
        zeta_c_1=combos[0].zeta_c,
        zeta_c_2=combos[1].zeta_c,
        combo_overlap_1=combos[0].combo_overlap,
        combo_overlap_2=combos[1].combo_overlap,
        supercritical_1=ls1.supercritical,
        supercritical_2=ls2.supercritical,
        threshold_1=spectral_threshold(alpha, 1, model, spec),
        threshold_2=spectral_threshold(alpha, 2, model, spec),
    )
