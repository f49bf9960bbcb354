"""GAMP iteration whose fixed points are the spectral eigenvectors, with state evolution.

Conventions follow the rescaled problem: Abar = A/sqrt(d), xbar_i = sqrt(d) x_i,
Dbar = Abar^T diag(T(y)) Abar. With F(y) = T(y)/(lambda*(delta_i) - T(y)),
deterministic Onsager terms c_t = sqrt(delta) E[F] and b_{t+1} = 1/(delta beta_{t+1}),
the iteration reads

    v^1 = Abar^T L(y),        u^1 = Abar xbar_i / sqrt(delta)
    v^2 = Abar^T F u^1 - sqrt(delta) E[F] xbar_i
    u^t = (Abar v^t - F u^{t-1}) / (sqrt(delta) beta_t)                t >= 2
    v^{t+1} = Abar^T F u^t - (sqrt(delta)/beta_t) E[F] v^t
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .estimators import Dataset, spectral_estimate
from .models import LinkModel
from .numerics import DEFAULT_SPEC, QuadratureSpec
from .preprocessors import IneffectiveLinearError, Preprocessor, optimal_linear
from .theory import lambda_star, observation_grid

__all__ = [
    "SubcriticalGampError",
    "InstabilityError",
    "SETrace",
    "state_evolution",
    "se_fixed_point",
    "GampResult",
    "run_gamp",
]


class SubcriticalGampError(ValueError):
    """The fixed-point hypotheses E[F(G_i^2-1)] > 0 and delta > E[F^2]/E[F(G_i^2-1)]^2 fail."""


class InstabilityError(RuntimeError):
    """GAMP iterates blew up or a normalisation constant vanished."""


@dataclass
class _SEScalars:
    lam: float
    ef: float  # E[F(Y)]
    a: float  # E[F(Ytilde)(G_i^2 - 1)]
    b: float  # E[F(Ytilde)^2 G_i^2]
    c: float  # E[F(Ytilde)^2]
    egl: float
    el2: float


def _se_scalars(choice, alpha, delta, T, model, L, spec) -> _SEScalars:
    if choice not in (1, 2):
        raise ValueError("choice must be 1 or 2")
    w = alpha if choice == 1 else 1.0 - alpha
    lam = lambda_star(w * delta, delta, T, model, spec).value
    g = observation_grid(model, spec, T)
    z = T(g.y)
    F = z / (lam - z)
    a = w * g.emix(F)
    b = w * g.e2(F * F) + (1 - w) * g.e0(F * F)
    c = g.e0(F * F)
    if L is not None:
        gl = observation_grid(model, spec, L)
        lv = L(gl.y)
        egl, el2 = gl.e1(lv), gl.e0(lv * lv)
    else:
        egl = el2 = 0.0
    return _SEScalars(lam, g.e0(F), a, b, c, egl, el2)


def _default_linear(model, spec):
    try:
        return optimal_linear(model, spec)
    except IneffectiveLinearError:
        return None


@dataclass
class SETrace:
    """State-evolution parameters; entry k of each array is iteration t = k + 1."""

    choice: int
    delta: float
    mu1: np.ndarray
    mu2: np.ndarray
    sigmaU2: np.ndarray
    chi1: np.ndarray
    chi2: np.ndarray
    sigmaV2: np.ndarray
    beta: np.ndarray
    chi_tilde: float
    sigma2_tilde: float
    beta_tilde2: float
    lambda_star: float
    mean_F: float

    @property
    def beta2(self) -> np.ndarray:
        return self.beta ** 2

    def chi_signal(self) -> np.ndarray:
        return self.chi1 if self.choice == 1 else self.chi2


def _fixed_point(s: _SEScalars, delta: float):
    if not s.a > 0:
        raise SubcriticalGampError(f"E[F(G^2-1)] = {s.a:.3e} is not positive")
    if not delta > s.c / s.a ** 2:
        raise SubcriticalGampError(f"delta={delta} does not exceed E[F^2]/E[F(G^2-1)]^2 = {s.c / s.a ** 2:.6g}")
    bt2 = delta * s.a ** 2
    den = bt2 + s.b - s.c
    chi = math.sqrt(max(bt2 * (bt2 - s.c) / den, 0.0))
    sig2 = bt2 * s.b / den
    return chi, sig2, bt2


def se_fixed_point(
    choice: int,
    alpha: float,
    delta: float,
    T: Preprocessor,
    model: LinkModel,
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> tuple[float, float]:
    """(chi_tilde, sigma2_tilde) in closed form."""
    s = _se_scalars(choice, alpha, delta, T, model, None, spec)
    chi, sig2, _ = _fixed_point(s, delta)
    return chi, sig2


def state_evolution(
    choice: int,
    alpha: float,
    delta: float,
    T: Preprocessor,
    model: LinkModel,
    t_max: int = 200,
    L: Optional[Preprocessor] = None,
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> SETrace:
    """Iterate the scalar recursion for ``t_max`` steps."""
    if t_max < 1:
        raise ValueError("t_max must be at least 1")
    if L is None:
        L = _default_linear(model, spec)
    s = _se_scalars(choice, alpha, delta, T, model, L, spec)
    chi_t, sig2_t, bt2 = _fixed_point(s, delta)

    mu = np.zeros((2, t_max))
    chi = np.zeros((2, t_max))
    sU2 = np.zeros(t_max)
    sV2 = np.zeros(t_max)
    beta = np.zeros(t_max)
    i = choice - 1
    rd = math.sqrt(delta)

    chi[0, 0] = delta * alpha * s.egl
    chi[1, 0] = delta * (1 - alpha) * s.egl
    sV2[0] = delta * s.el2
    beta[0] = math.sqrt(chi[0, 0] ** 2 + chi[1, 0] ** 2 + sV2[0])
    mu[i, 0] = 1.0 / rd
    for k in range(t_max - 1):
        chi[i, k + 1] = delta * mu[i, k] * s.a
        sV2[k + 1] = delta * (mu[i, k] ** 2 * s.b + sU2[k] * s.c)
        beta[k + 1] = math.sqrt(chi[i, k + 1] ** 2 + sV2[k + 1])
        mu[i, k + 1] = chi[i, k + 1] / (rd * beta[k + 1])
        sU2[k + 1] = sV2[k + 1] / (delta * beta[k + 1] ** 2)
    return SETrace(
        choice, delta, mu[0], mu[1], sU2, chi[0], chi[1], sV2, beta,
        chi_t, sig2_t, bt2, s.lam, s.ef,
    )


@dataclass
class GampResult:
    """Final iterates and per-iteration diagnostics (entry k is t = k + 1)."""

    v: np.ndarray
    u: np.ndarray
    trace: SETrace
    t: np.ndarray
    norm2_over_d: np.ndarray
    corr_x1: np.ndarray
    corr_x2: np.ndarray
    corr_with_eigvec: np.ndarray
    eig_residual: np.ndarray
    iterations: int
    converged: bool
    eigvec: np.ndarray = field(repr=False)


def run_gamp(
    ds: Dataset,
    T: Preprocessor,
    choice: int = 1,
    t_max: int = 200,
    tol: float = 0.0,
    model: Optional[LinkModel] = None,
    L: Optional[Preprocessor] = None,
    spec: QuadratureSpec = DEFAULT_SPEC,
    trace: Optional[SETrace] = None,
    onsager: str = "deterministic",
) -> GampResult:
    """Run GAMP with the infeasible (oracle) initialisation f = xbar_choice.

    Stops after ``t_max`` iterates or once the relative change
    |v^t - v^{t-1}| / |v^{t-1}| drops below ``tol``. ``model`` must be the link model that
    generated ``ds``. ``onsager="empirical"`` replaces E[F] in the memory
    terms by the sample mean of F(y_i).
    """
    if onsager not in ("deterministic", "empirical"):
        raise ValueError("onsager must be 'deterministic' or 'empirical'")
    if model is None:
        raise ValueError("run_gamp needs the link model that generated the dataset")
    if L is None:
        L = _default_linear(model, spec)
    n, d = ds.A.shape
    delta = n / d
    if trace is None or len(trace.beta) < t_max:
        trace = state_evolution(choice, ds.alpha, delta, T, model, t_max, L, spec)
    lam = trace.lambda_star
    ef = trace.mean_F
    rd = math.sqrt(delta)

    Abar = ds.A / math.sqrt(d)
    x1 = math.sqrt(d) * ds.x1_star
    x2 = math.sqrt(d) * ds.x2_star
    xs = x1 if choice == 1 else x2
    tv = np.asarray(T(ds.y), dtype=float)
    F = tv / (lam - tv)
    if onsager == "empirical":
        ef = float(np.mean(F))

    sp = spectral_estimate(ds, T)
    eig = sp.v1 if choice == 1 else sp.v2
    # with beta_inf = 1/sqrt(delta), Abar^T F (I+F)^{-1} Abar = Dbar / lambda* and v^inf has eigenvalue 1 + delta E[F]
    target = 1.0 + delta * ef

    hist = {k: [] for k in ("norm2", "c1", "c2", "ce", "res")}

    def record(v, t):
        nv = float(np.linalg.norm(v))
        hist["norm2"].append(nv * nv / d)
        hist["c1"].append(float(v @ x1) / d)
        hist["c2"].append(float(v @ x2) / d)
        hist["ce"].append(abs(float(v @ eig)) / nv if nv > 0 else 0.0)
        if nv > 0:
            # rescale to the predicted norm so the residual ignores finite-d drift of |v^t|
            vh = v * (math.sqrt(d) * trace.beta[t - 1] / nv)
            mv = Abar.T @ ((tv / lam) * (Abar @ vh))
            hist["res"].append(float(np.linalg.norm(mv - target * vh)) / math.sqrt(d))
        else:
            hist["res"].append(math.nan)

    lv = np.asarray(L(ds.y), dtype=float) if L is not None else np.zeros(n)
    v = Abar.T @ lv
    record(v, 1)
    u = Abar @ xs / rd
    converged = False
    t = 1
    if t_max >= 2:
        v_prev = v
        v = Abar.T @ (F * u) - rd * ef * xs
        t = 2
        record(v, 2)
        while t < t_max:
            bt = trace.beta[t - 1]
            if bt < 1e-8:
                raise InstabilityError(f"beta_{t} = {bt:.3e} is too small")
            u = (Abar @ v - F * u) / (rd * bt)
            v_prev = v
            v = Abar.T @ (F * u) - (rd / bt) * ef * v
            t += 1
            record(v, t)
            if hist["norm2"][-1] > 1e3 * trace.beta[t - 1] ** 2:
                raise InstabilityError(f"|v^{t}|^2/d exceeded 1e3 * beta_t^2")
            if tol > 0 and np.linalg.norm(v - v_prev) < tol * np.linalg.norm(v_prev):
                converged = True
                break

    return GampResult(
        v=v,
        u=u,
        trace=trace,
        t=np.arange(1, t + 1),
        norm2_over_d=np.array(hist["norm2"]),
        corr_x1=np.array(hist["c1"]),
        corr_x2=np.array(hist["c2"]),
        corr_with_eigvec=np.array(hist["ce"]),
        eig_residual=np.array(hist["res"]),
        iterations=t,
        converged=converged,
        eigvec=eig,
    )
