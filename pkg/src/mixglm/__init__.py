"""Linear, spectral and combined estimators for two-component mixed GLMs."""

from .models import LinkModel, make_model, mixed_linear_regression, mixed_phase_retrieval
from .numerics import DEFAULT_SPEC, QuadratureSpec
from .preprocessors import (
    Preprocessor,
    baseline_lal,
    baseline_ycs,
    make_preprocessor,
    optimal_linear,
    optimal_spectral,
)
from .theory import TheoryReport, theory_report

__version__ = "0.1.0"

__all__ = [
    "LinkModel",
    "make_model",
    "mixed_linear_regression",
    "mixed_phase_retrieval",
    "QuadratureSpec",
    "DEFAULT_SPEC",
    "Preprocessor",
    "optimal_linear",
    "optimal_spectral",
    "baseline_ycs",
    "baseline_lal",
    "make_preprocessor",
    "TheoryReport",
    "theory_report",
]
