"""Deterministic 1-D quadrature and bracketed root finding.

Everything in the theory layer reduces to Gaussian expectations or to
integrals over the observation axis, followed by scalar root solves on
monotone functions. These helpers keep those pieces in one place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss
from scipy.optimize import brentq

__all__ = [
    "QuadratureSpec",
    "DEFAULT_SPEC",
    "DomainError",
    "NumericalError",
    "BracketError",
    "gauss_hermite_expect",
    "hermite_rule",
    "integrate_y",
    "panel_rule",
    "find_root_monotone",
    "expand_bracket",
]


class DomainError(ValueError):
    """Raised when a function is evaluated outside its valid domain."""


class NumericalError(RuntimeError):
    """Raised when a numerical routine fails to reach its tolerance."""

    def __init__(self, message: str, estimate: float | None = None):
        super().__init__(message)
        self.estimate = estimate


class BracketError(ValueError):
    """Raised when a root-finding bracket has no sign change."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Accuracy knobs shared by all theory computations.

    hermite_order: number of probabilists' Hermite nodes for E over N(0,1).
    y_tail_sigmas: truncation of the observation axis, in standard deviations of Y.
    abs_tol, rel_tol: targets for adaptive integration on the observation axis.
    root_tol: absolute tolerance on the argument for root solves.
    """

    hermite_order: int = 80
    y_tail_sigmas: float = 12.0
    abs_tol: float = 1e-12
    rel_tol: float = 1e-11
    root_tol: float = 1e-10

    def __post_init__(self):
        if int(self.hermite_order) != self.hermite_order or self.hermite_order < 20:
            raise ValueError("hermite_order must be an integer >= 20")
        if not self.y_tail_sigmas > 0:
            raise ValueError("y_tail_sigmas must be positive")
        for name in ("abs_tol", "rel_tol", "root_tol"):
            val = getattr(self, name)
            if not 0 < val < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {val}")


DEFAULT_SPEC = QuadratureSpec()

# Gauss-Legendre order used on every panel.
_PANEL_NODES = 16
# Hard cap on panels for adaptive refinement.
_MAX_PANELS = 1 << 14


@lru_cache(maxsize=16)
def hermite_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for E[f(G)], G ~ N(0,1); weights sum to one."""
    x, w = hermegauss(order)
    w = w / math.sqrt(2.0 * math.pi)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _eval_vectorized(f: Callable, x: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(f(x), dtype=float)
        if out.shape == x.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([float(f(xi)) for xi in x])


def gauss_hermite_expect(f: Callable, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """E[f(G)] for G ~ N(0,1) via probabilists' Gauss-Hermite quadrature."""
    x, w = hermite_rule(spec.hermite_order)
    vals = _eval_vectorized(f, x)
    bad = ~np.isfinite(vals)
    if bad.any():
        node = float(x[np.argmax(bad)])
        raise DomainError(f"integrand is not finite at Hermite node g={node!r}")
    return float(np.dot(w, vals))


@lru_cache(maxsize=4)
def _legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    return leggauss(n)


def panel_rule(breaks: Sequence[float], n_per_segment: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule.

    Segment ``[breaks[i], breaks[i+1]]`` is cut into ``n_per_segment[i]``
    equal panels with a 16-point rule on each.
    """
    t, wt = _legendre(_PANEL_NODES)
    xs, ws = [], []
    for (a, b), m in zip(zip(breaks[:-1], breaks[1:]), n_per_segment):
        if b <= a:
            continue
        edges = np.linspace(a, b, int(m) + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        xs.append((mid[:, None] + half[:, None] * t[None, :]).ravel())
        ws.append((half[:, None] * wt[None, :]).ravel())
    if not xs:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(xs), np.concatenate(ws)


def integrate_y(
    f: Callable,
    support: tuple[float, float],
    spec: QuadratureSpec = DEFAULT_SPEC,
    breakpoints: Sequence[float] = (),
) -> float:
    """Integrate ``f`` over a finite interval by panel doubling.

    The composite rule is refined until two successive estimates agree to
    ``max(abs_tol, rel_tol * |I|)``. Interior ``breakpoints`` (kinks) are
    always panel edges.
    """
    lo, hi = float(support[0]), float(support[1])
    if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
        raise ValueError(f"support must be a finite interval, got {support!r}")
    breaks = sorted({lo, hi, *(b for b in breakpoints if lo < b < hi)})
    nseg = len(breaks) - 1
    m = 4
    prev = None
    while m * nseg <= _MAX_PANELS:
        x, w = panel_rule(breaks, [m] * nseg)
        vals = _eval_vectorized(f, x)
        if not np.all(np.isfinite(vals)):
            raise DomainError("integrand is not finite on the observation grid")
        cur = float(np.dot(w, vals))
        if prev is not None and abs(cur - prev) <= max(spec.abs_tol, spec.rel_tol * abs(cur)):
            return cur
        prev = cur
        m *= 2
    raise NumericalError("integrate_y did not converge within the panel budget", estimate=prev)


def find_root_monotone(
    f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10
) -> float:
    """Root of a monotone scalar function on ``[lo, hi]``.

    Uses Brent's method (bisection safeguarded secant/inverse quadratic steps).
    """
    flo, fhi = float(f(lo)), float(f(hi))
    if flo == 0.0:
        return float(lo)
    if fhi == 0.0:
        return float(hi)
    if not (np.isfinite(flo) and np.isfinite(fhi)):
        raise DomainError(f"non-finite value at bracket ends: f({lo})={flo}, f({hi})={fhi}")
    if flo * fhi > 0:
        raise BracketError(f"no sign change on [{lo}, {hi}]: f(lo)={flo:.3e}, f(hi)={fhi:.3e}")
    return float(brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500))


def expand_bracket(
    f: Callable[[float], float], lo: float, max_doublings: int = 60
) -> tuple[float, float]:
    """Find ``hi > lo`` with a sign change of ``f`` by doubling the width.

    The search starts at ``hi = lo * (1 + 1e-6)`` (plus a small offset so
    that ``lo = 0`` still moves) and doubles the distance to ``lo``.
    """
    flo = float(f(lo))
    width = abs(lo) * 1e-6 + 1e-9
    for _ in range(max_doublings + 1):
        hi = lo + width
        fhi = float(f(hi))
        if flo * fhi <= 0:
            return lo, hi
        width *= 2.0
    raise BracketError(f"no sign change found above {lo} after {max_doublings} doublings")
