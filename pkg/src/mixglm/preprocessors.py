"""Scalar preprocessing maps for the linear (L) and spectral (T) estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .models import LinkModel
from .numerics import DEFAULT_SPEC, QuadratureSpec

__all__ = [
    "Preprocessor",
    "IneffectiveLinearError",
    "optimal_linear",
    "optimal_spectral",
    "baseline_ycs",
    "baseline_lal",
    "custom_preprocessor",
    "validate_preprocessor",
    "make_preprocessor",
]

YCS_CAP = 10.0
LAL_FLOOR = -10.0


class IneffectiveLinearError(ValueError):
    """The linear estimator has zero asymptotic overlap for this model."""

    def __init__(self, value: float):
        super().__init__(f"linear estimator is ineffective: int m1^2/m0 dy = {value:.3e}")
        self.value = value


@dataclass(frozen=True, eq=False)
class Preprocessor:
    """A vectorised scalar map with its range over the observation support.

    ``breakpoints`` lists kinks of the map; quadrature panels are aligned
    with them.
    """

    func: Callable = field(repr=False)
    sup_on_support: float
    inf_on_support: float
    lipschitz: bool = True
    name: str = "custom"
    breakpoints: tuple[float, ...] = ()

    def __call__(self, y):
        out = self.func(np.asarray(y, dtype=float))
        return float(out) if np.ndim(out) == 0 else np.asarray(out, dtype=float)

    def scaled(self, c: float) -> "Preprocessor":
        """The map ``c * T`` with matching range; ``c`` must be positive."""
        if not c > 0:
            raise ValueError("scale must be positive")
        f = self.func
        return replace(
            self,
            func=lambda y: c * f(y),
            sup_on_support=c * self.sup_on_support,
            inf_on_support=c * self.inf_on_support,
            name=f"{c:g}*{self.name}",
        )


def optimal_linear(model: LinkModel, spec: QuadratureSpec = DEFAULT_SPEC) -> Preprocessor:
    """L*(y) = m1(y)/m0(y); raises for models where int m1^2/m0 = 0."""
    from .theory import observation_grid  # local import avoids a cycle

    grid = observation_grid(model, spec)
    value = float(np.dot(grid.w0, grid.r1 ** 2))
    if not value > 1e-13:
        raise IneffectiveLinearError(value)
    lo, hi = model.truncated_support(spec)
    probe = np.linspace(lo, hi, 2001)
    vals = model.ratio_m1(probe)
    return Preprocessor(
        func=model.ratio_m1,
        sup_on_support=float(np.max(vals)),
        inf_on_support=float(np.min(vals)),
        lipschitz=True,
        name="optlin",
    )


def optimal_spectral(
    model: LinkModel, alpha: float, signal: int = 1, spec: QuadratureSpec = DEFAULT_SPEC
) -> Preprocessor:
    """T_i*(y) = 1 - 1/(a * m2(y)/m0(y) + 1 - a) with a = alpha (signal 1) or 1 - alpha."""
    if not 0.5 < alpha < 1:
        raise ValueError(f"alpha must lie in (1/2, 1), got {alpha}")
    if signal not in (1, 2):
        raise ValueError("signal must be 1 or 2")
    a = alpha if signal == 1 else 1.0 - alpha

    def t_map(y):
        return 1.0 - 1.0 / (a * model.ratio_delta(y) + (1.0 - a))

    lo, hi = model.truncated_support(spec)
    probe = np.linspace(lo, hi, 4001)
    vals = t_map(probe)
    if model.kind in ("mlr", "pr"):
        # m2/m0 is unbounded in y, so the map tends to 1 without reaching it
        sup = 1.0
    else:
        sup = float(np.max(vals))
    # m2/m0 >= 0 bounds the map below by 1 - 1/(1 - a); the grid value is tighter
    inf = float(np.min(vals))
    return Preprocessor(
        func=t_map,
        sup_on_support=sup,
        inf_on_support=inf,
        lipschitz=True,
        name=f"opt{signal}",
    )


def baseline_ycs() -> Preprocessor:
    """min(y^2, 10)."""
    return Preprocessor(
        func=lambda y: np.minimum(y * y, YCS_CAP),
        sup_on_support=YCS_CAP,
        inf_on_support=0.0,
        lipschitz=True,
        name="ycs",
        breakpoints=(-math.sqrt(YCS_CAP), math.sqrt(YCS_CAP)),
    )


def _lal(y):
    with np.errstate(divide="ignore"):
        inv = np.where(y == 0, np.inf, 1.0 / np.where(y == 0, 1.0, y * y))
    return np.maximum(1.0 - inv, LAL_FLOOR)


def baseline_lal() -> Preprocessor:
    """max(1 - 1/y^2, -10); the truncation also covers y = 0."""
    knot = 1.0 / math.sqrt(1.0 - LAL_FLOOR)
    return Preprocessor(
        func=_lal,
        sup_on_support=1.0,
        inf_on_support=LAL_FLOOR,
        lipschitz=True,
        name="lal",
        breakpoints=(-knot, knot),
    )


def custom_preprocessor(
    func: Callable,
    sup_on_support: float,
    inf_on_support: float,
    name: str = "custom",
    breakpoints: tuple[float, ...] = (),
    model: LinkModel | None = None,
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> Preprocessor:
    """Wrap a user map; if ``model`` is given the declared range is checked."""
    pre = Preprocessor(func, float(sup_on_support), float(inf_on_support), True, name, tuple(breakpoints))
    if model is not None:
        validate_preprocessor(pre, model, spec)
    return pre


def validate_preprocessor(
    pre: Preprocessor, model: LinkModel, spec: QuadratureSpec = DEFAULT_SPEC, spectral: bool = True
) -> None:
    """Grid scan of the declared range and the non-degeneracy conditions."""
    lo, hi = model.truncated_support(spec)
    probe = np.linspace(lo, hi, 20001)
    vals = pre(probe)
    if not np.all(np.isfinite(vals)):
        raise ValueError(f"{pre.name}: map is not finite on the support")
    slack = 1e-9 * max(1.0, abs(pre.sup_on_support), abs(pre.inf_on_support))
    if np.max(vals) > pre.sup_on_support + slack:
        raise ValueError(f"{pre.name}: declared sup {pre.sup_on_support} is below max {np.max(vals)}")
    if np.min(vals) < pre.inf_on_support - slack:
        raise ValueError(f"{pre.name}: declared inf {pre.inf_on_support} is above min {np.min(vals)}")
    if np.all(vals == 0):
        raise ValueError(f"{pre.name}: map vanishes on the whole support")
    if spectral:
        if not (0 < pre.sup_on_support < math.inf):
            raise ValueError(f"{pre.name}: spectral maps need 0 < sup < inf")
        if not pre.inf_on_support > -math.inf:
            raise ValueError(f"{pre.name}: spectral maps need a finite inf")


def make_preprocessor(
    key: str, model: LinkModel, alpha: float, spec: QuadratureSpec = DEFAULT_SPEC
) -> Preprocessor:
    """Build a preprocessor from its CLI key: opt1, opt2, ycs, lal, optlin."""
    key = key.lower()
    if key == "opt1":
        return optimal_spectral(model, alpha, 1, spec)
    if key == "opt2":
        return optimal_spectral(model, alpha, 2, spec)
    if key == "ycs":
        return baseline_ycs()
    if key == "lal":
        return baseline_lal()
    if key == "optlin":
        return optimal_linear(model, spec)
    raise ValueError(f"unknown preprocessor {key!r}")
