"""Scalar link models: y = q(g, eps) with Gaussian noise.

Each model exposes the moment functions m_k(y) = E[G^k p(y|G)] for
k in {0, 1, 2}, which is all the asymptotic theory needs. Internally the
theory works with m0 together with the ratios m1/m0 and m2/m0, because
the ratios stay finite far into the tails where m0 itself underflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import erfc, erfcx

from .numerics import (
    DEFAULT_SPEC,
    DomainError,
    NumericalError,
    QuadratureSpec,
    integrate_y,
    panel_rule,
)

__all__ = [
    "LinkModel",
    "mixed_linear_regression",
    "mixed_phase_retrieval",
    "custom_model",
    "make_model",
    "h_function",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)
# Half-width of the g-range used by the generic moment quadrature.
_G_RANGE = 12.0


@dataclass(frozen=True, eq=False)
class LinkModel:
    """Conditional law of one observation given the projection g.

    kind is ``"mlr"`` (y = g + eps), ``"pr"`` (y = |g| + eps) or ``"custom"``.
    For custom models pass ``density(y, g)`` and ``sampler(g, rng)``;
    ``moments(k, y)`` is optional and replaces the generic quadrature.
    """

    kind: str
    sigma: float = 0.0
    density: Optional[Callable] = field(default=None, repr=False)
    sampler: Optional[Callable] = field(default=None, repr=False)
    moments: Optional[Callable] = field(default=None, repr=False)
    support: tuple[float, float] = (-math.inf, math.inf)
    y_scale: float = 1.0
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("mlr", "pr", "custom"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if not self.sigma >= 0:
            raise ValueError("sigma must be non-negative")
        if self.kind == "custom" and (self.density is None and self.moments is None):
            raise ValueError("custom models need a density or moment functions")

    # identity-free equality so that models can key caches
    def _key(self):
        return (self.kind, float(self.sigma), self.density, self.sampler, self.moments, self.support)

    def __eq__(self, other):
        return isinstance(other, LinkModel) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    @property
    def closed_form_moments(self) -> bool:
        return self.kind in ("mlr", "pr") or self.moments is not None

    @property
    def noiseless(self) -> bool:
        return self.sigma == 0.0

    # ------------------------------------------------------------------
    # sampling and density
    # ------------------------------------------------------------------
    def sample_y(self, g, rng: np.random.Generator):
        """Draw y = q(g, eps). Accepts scalars or arrays."""
        g_arr = np.asarray(g, dtype=float)
        if self.kind == "custom":
            if self.sampler is None:
                raise ValueError("custom model has no sampler")
            out = np.asarray(self.sampler(g_arr, rng), dtype=float)
        else:
            base = g_arr if self.kind == "mlr" else np.abs(g_arr)
            if self.sigma > 0:
                out = base + self.sigma * rng.standard_normal(g_arr.shape)
            else:
                out = base.copy()
        return float(out) if np.ndim(out) == 0 else out

    def cond_density(self, y, g):
        """p(y | g). Not defined for noiseless built-in models."""
        if self.kind == "custom":
            if self.density is None:
                raise DomainError("custom model was given moments only, no density")
            return self.density(y, g)
        if self.sigma == 0:
            raise DomainError("noiseless model has a degenerate conditional law")
        centre = np.asarray(g, dtype=float)
        if self.kind == "pr":
            centre = np.abs(centre)
        z = (np.asarray(y, dtype=float) - centre) / self.sigma
        return np.exp(-0.5 * z * z) / (_SQRT_2PI * self.sigma)

    # ------------------------------------------------------------------
    # moments
    # ------------------------------------------------------------------
    def moment_m(self, k: int, y):
        """m_k(y) = E[G^k p(y|G)] for k in {0, 1, 2}."""
        if k not in (0, 1, 2):
            raise ValueError(f"k must be 0, 1 or 2, got {k!r}")
        y_arr = np.asarray(y, dtype=float)
        if self.kind == "custom":
            out = self._custom_moment(k, y_arr)
        else:
            m0 = self._m0(y_arr)
            if k == 0:
                out = m0
            elif k == 1:
                out = m0 * self._r1(y_arr)
            else:
                out = m0 * self._delta(y_arr)
        return float(out) if np.ndim(out) == 0 else out

    def ratio_delta(self, y):
        """m2(y) / m0(y)."""
        y_arr = np.asarray(y, dtype=float)
        if self.kind == "custom":
            m0 = self._custom_moment(0, y_arr)
            if np.any(m0 <= 0):
                raise DomainError("m0 vanishes at a support point")
            out = self._custom_moment(2, y_arr) / m0
        else:
            self._check_support(y_arr)
            out = self._delta(y_arr)
        return float(out) if np.ndim(out) == 0 else out

    def ratio_m1(self, y):
        """m1(y) / m0(y)."""
        y_arr = np.asarray(y, dtype=float)
        if self.kind == "custom":
            out = self._custom_moment(1, y_arr) / self._custom_moment(0, y_arr)
        else:
            out = self._r1(y_arr)
        return float(out) if np.ndim(out) == 0 else out

    def moment_table(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(m0, m1/m0, m2/m0) on an array of support points."""
        y = np.asarray(y, dtype=float)
        if self.kind == "custom":
            m0 = self._custom_moment(0, y)
            safe = np.where(m0 > 0, m0, 1.0)
            r1 = np.where(m0 > 0, self._custom_moment(1, y) / safe, 0.0)
            r2 = np.where(m0 > 0, self._custom_moment(2, y) / safe, 0.0)
            return m0, r1, r2
        return self._m0(y), self._r1(y), self._delta(y)

    def _check_support(self, y):
        lo, hi = self.support
        if np.any(y < lo) or np.any(y > hi):
            raise DomainError(f"y outside the support [{lo}, {hi}]")

    def _m0(self, y):
        s2 = self.sigma ** 2
        c = 1.0 + s2
        if self.kind == "mlr":
            return np.exp(-0.5 * y * y / c) / math.sqrt(2 * math.pi * c)
        if self.sigma == 0:
            return np.where(y >= 0, 2.0 * np.exp(-0.5 * y * y) / _SQRT_2PI, 0.0)
        x = y / math.sqrt(2.0 * s2 * c)
        # 1 + erf(x) = erfc(-x); switch to erfcx on the negative side to avoid underflow
        with np.errstate(under="ignore"):
            pos = np.exp(-0.5 * y * y / c) * erfc(-x)
            neg = np.exp(-0.5 * y * y / s2) * erfcx(-np.minimum(x, 0.0))
        return np.where(x >= 0, pos, neg) / math.sqrt(2 * math.pi * c)

    def _r1(self, y):
        if self.kind == "mlr":
            return y / (1.0 + self.sigma ** 2)
        return np.zeros_like(y)

    def _delta(self, y):
        s2 = self.sigma ** 2
        c = 1.0 + s2
        base = (y * y + s2 + s2 * s2) / (c * c)
        if self.kind == "mlr" or self.sigma == 0:
            return base
        x = y / math.sqrt(2.0 * s2 * c)
        with np.errstate(over="ignore", invalid="ignore"):
            extra = math.sqrt(2.0 / math.pi) * self.sigma * y / (c ** 1.5 * erfcx(-x))
        # erfcx(-x) overflows for large positive x, where the correction is zero anyway
        return base + np.where(np.isfinite(extra), extra, 0.0)

    def _custom_moment(self, k, y):
        if self.moments is not None:
            return np.asarray(self.moments(k, y), dtype=float)
        return _moment_by_quadrature(self.density, k, y)

    # ------------------------------------------------------------------
    # integration support
    # ------------------------------------------------------------------
    def truncated_support(self, spec: QuadratureSpec = DEFAULT_SPEC) -> tuple[float, float]:
        half = spec.y_tail_sigmas * self.y_scale
        lo, hi = self.support
        return max(lo, -half), min(hi, half)

    def breakpoints(self) -> tuple[float, ...]:
        """Points where integrands change character (kinks or narrow features)."""
        if self.kind == "pr" and self.sigma > 0:
            s = self.sigma
            return (-40 * s, -10 * s, -3 * s, 0.0, 3 * s, 10 * s)
        return (0.0,)

    def local_scale(self, a: float, b: float) -> float:
        """Panel width suited to the segment [a, b]."""
        if self.kind == "pr" and self.sigma > 0 and max(abs(a), abs(b)) <= 40 * self.sigma + 1e-12:
            return min(self.sigma, self.y_scale) / 2.0
        return self.y_scale / 2.0


def _moment_by_quadrature(density, k, y, tol=1e-12):
    """m_k(y) by adaptive Gauss-Legendre over g, split at g = 0."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    m = 16
    prev = None
    while m <= 2048:
        g, w = panel_rule((-_G_RANGE, 0.0, _G_RANGE), (m, m))
        phi = np.exp(-0.5 * g * g) / _SQRT_2PI
        weights = w * phi * g ** k
        vals = np.asarray(density(y[:, None], g[None, :]), dtype=float) @ weights
        if prev is not None and np.max(np.abs(vals - prev)) <= tol * max(1.0, np.max(np.abs(vals))):
            return vals
        prev = vals
        m *= 2
    raise NumericalError("moment quadrature did not converge", estimate=None)


def mixed_linear_regression(sigma: float = 0.0) -> LinkModel:
    return LinkModel("mlr", float(sigma), y_scale=math.sqrt(1 + sigma ** 2), name=f"mlr(sigma={sigma})")


def mixed_phase_retrieval(sigma: float = 0.0) -> LinkModel:
    support = (0.0, math.inf) if sigma == 0 else (-math.inf, math.inf)
    return LinkModel(
        "pr", float(sigma), support=support, y_scale=math.sqrt(1 + sigma ** 2), name=f"pr(sigma={sigma})"
    )


def custom_model(
    density: Callable | None = None,
    sampler: Callable | None = None,
    moments: Callable | None = None,
    support: tuple[float, float] = (-math.inf, math.inf),
    y_scale: float = 1.0,
    sigma: float = 0.0,
    name: str = "custom",
) -> LinkModel:
    return LinkModel("custom", sigma, density, sampler, moments, support, y_scale, name)


def make_model(kind: str, sigma: float = 0.0) -> LinkModel:
    """Build a built-in model from its CLI key (``mlr`` or ``pr``)."""
    key = kind.lower()
    if key in ("mlr", "mixed_linear_regression"):
        return mixed_linear_regression(sigma)
    if key in ("pr", "mixed_phase_retrieval"):
        return mixed_phase_retrieval(sigma)
    raise ValueError(f"unknown model {kind!r}; expected 'mlr' or 'pr'")


def h_function(s: float, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """h(s) = int exp(-(2+s) z^2) z^2 / (1 + erf z) dz over the real line."""
    if s < 0:
        raise ValueError("s must be non-negative")

    def integrand(z):
        # exp(-(2+s) z^2) / erfc(-z) = exp(-(1+s) z^2) / erfcx(-z)
        return np.exp(-(1.0 + s) * z * z) * z * z / erfcx(-z)

    half = 40.0 / math.sqrt(1.0 + s)
    return integrate_y(integrand, (-half, half), spec, breakpoints=(0.0,))
