"""Simulation sweeps, figure presets and the tables behind the CLI."""

from __future__ import annotations

import configparser
import csv
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .estimators import (
    calibrate_signs,
    combined_estimate,
    generate_dataset,
    linear_estimate,
    overlap,
    spectral_estimate,
)
from .gamp import run_gamp, state_evolution
from .models import LinkModel, make_model
from .numerics import DEFAULT_SPEC, QuadratureSpec
from .preprocessors import (
    IneffectiveLinearError,
    Preprocessor,
    baseline_lal,
    baseline_ycs,
    make_preprocessor,
    optimal_linear,
    optimal_spectral,
)
from .theory import ComboCoefficients, predict_eigenvalues, rho_spec, theory_report

__all__ = [
    "ESTIMATORS",
    "CSV_COLUMNS",
    "GAMP_COLUMNS",
    "EIGS_COLUMNS",
    "SweepConfig",
    "PRESETS",
    "preset",
    "linear_map",
    "sweep",
    "run_sweeps",
    "write_csv",
    "read_config_file",
    "predict_report",
    "gamp_verify",
    "eigs_compare",
    "dump_dataset",
]

ESTIMATORS = ("lin", "spec_opt", "spec_ycs", "spec_lal", "comb")
CSV_COLUMNS = (
    "model", "sigma", "alpha", "d", "delta", "estimator", "signal",
    "overlap_mean", "overlap_std", "overlap_pred", "trials", "seed_base",
)
GAMP_COLUMNS = (
    "t", "beta_t2", "chi1_t", "empirical_norm2_over_d", "empirical_corr_x1", "corr_with_eigvec",
    "chi2_t", "empirical_corr_x2", "eig_residual",
)
EIGS_COLUMNS = ("seed", "k", "eig_empirical", "eig_pred")


@dataclass(frozen=True)
class SweepConfig:
    """One curve family: a model, a delta grid and the estimators to run."""

    model: str = "mlr"
    sigma: float = 0.0
    alpha: float = 0.6
    d: int = 2000
    delta_grid: tuple[float, ...] = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0)
    trials: int = 10
    estimators: tuple[str, ...] = ESTIMATORS
    seed_base: int = 0
    output_path: Optional[str] = None
    signals: tuple[int, ...] = (1, 2)

    def __post_init__(self):
        object.__setattr__(self, "delta_grid", tuple(float(x) for x in self.delta_grid))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        object.__setattr__(self, "signals", tuple(int(s) for s in self.signals))
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.d < 2:
            raise ValueError("d must be at least 2")
        if not self.delta_grid:
            raise ValueError("delta_grid is empty")
        if any(b <= a for a, b in zip(self.delta_grid, self.delta_grid[1:])):
            raise ValueError("delta_grid must be strictly increasing")
        if any(x <= 0 for x in self.delta_grid):
            raise ValueError("delta_grid entries must be positive")
        bad = set(self.estimators) - set(ESTIMATORS)
        if bad or not self.estimators:
            raise ValueError(f"unknown estimators {sorted(bad)}; choose from {ESTIMATORS}")
        if not self.signals or set(self.signals) - {1, 2}:
            raise ValueError("signals must be a non-empty subset of {1, 2}")
        if not 0.5 < self.alpha < 1:
            raise ValueError("alpha must lie in (1/2, 1)")
        make_model(self.model, self.sigma)

    def link(self) -> LinkModel:
        return make_model(self.model, self.sigma)


_FIG_GRID = (1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0)

PRESETS: dict[str, tuple[SweepConfig, ...]] = {
    "fig1": (SweepConfig("mlr", 0.0, 0.6, 2000, _FIG_GRID, 10, ESTIMATORS),),
    "fig2": tuple(
        SweepConfig("mlr", 0.0, a, 2000, _FIG_GRID, 10, ("spec_opt",)) for a in (0.6, 0.8)
    ),
    "fig3": tuple(
        SweepConfig(m, s, 0.8, 2000, _FIG_GRID, 10, ("spec_opt",), signals=(1,))
        for s in (0.8, 1.5)
        for m in ("mlr", "pr")
    ),
    "fig4": tuple(
        SweepConfig(m, 1.5, 0.6, 2000, (2.0, 4.0, 6.0, 8.0, 10.0, 14.0, 20.0), 10, ("spec_opt",))
        for m in ("mlr", "pr")
    ),
}


def preset(name: str, scale: str = "full") -> tuple[SweepConfig, ...]:
    """Named figure configs; ``scale="desk"`` maps d 2000 -> 500 and trials 10 -> 5."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    if scale not in ("full", "desk"):
        raise ValueError("scale must be 'full' or 'desk'")
    cfgs = PRESETS[name]
    if scale == "desk":
        cfgs = tuple(replace(c, d=500, trials=5) for c in cfgs)
    return cfgs


def linear_map(model: LinkModel, spec: QuadratureSpec = DEFAULT_SPEC) -> Preprocessor:
    """L* when it is informative, otherwise the identity (whose overlap also vanishes)."""
    try:
        return optimal_linear(model, spec)
    except IneffectiveLinearError:
        return Preprocessor(lambda y: y, math.inf, -math.inf, True, "identity")


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------
@dataclass
class _Maps:
    L: Preprocessor
    T: dict  # (estimator, signal) -> Preprocessor for spectral estimators


def _maps(cfg: SweepConfig, model: LinkModel, spec: QuadratureSpec) -> _Maps:
    T = {}
    for s in (1, 2):
        T[("spec_opt", s)] = optimal_spectral(model, cfg.alpha, s, spec)
        T[("spec_ycs", s)] = baseline_ycs()
        T[("spec_lal", s)] = baseline_lal()
    return _Maps(linear_map(model, spec), T)


def _predictions(cfg, model, delta, maps, spec):
    """overlap predictions and combiner coefficients at one delta."""
    pred, coeffs = {}, {}
    L = maps.L if maps.L.name != "identity" else None
    for s in cfg.signals:
        rep = theory_report(model, cfg.alpha, delta, maps.T[("spec_opt", s)], L, spec)
        coeffs[s] = ComboCoefficients(
            getattr(rep, f"nu_{s}"), getattr(rep, f"xi_{s}"), getattr(rep, f"zeta_c_{s}"),
            getattr(rep, f"combo_overlap_{s}"),
        )
        for est in cfg.estimators:
            if est == "lin":
                pred[(est, s)] = getattr(rep, f"rho_lin_{s}")
            elif est == "spec_opt":
                pred[(est, s)] = getattr(rep, f"rho_spec_{s}")
            elif est == "comb":
                pred[(est, s)] = coeffs[s].combo_overlap
            else:
                pred[(est, s)] = rho_spec(cfg.alpha, delta, maps.T[(est, s)], model, s, spec)
    return pred, coeffs


def _trial(cfg, model, delta, seed, maps, coeffs):
    ds = generate_dataset(cfg.d, delta, cfg.alpha, model, seed)
    truth = {1: ds.x1_star, 2: ds.x2_star}
    x_lin = linear_estimate(ds, maps.L)
    eig_cache = {}
    out = {}

    def spec_vec(est, s):
        T = maps.T[(est, s)]
        key = (T.name, T.func)
        if key not in eig_cache:
            eig_cache[key] = spectral_estimate(ds, T)
        r = eig_cache[key]
        v = r.v1 if s == 1 else r.v2
        return v * calibrate_signs(v, truth[s])

    for s in cfg.signals:
        for est in cfg.estimators:
            if est == "lin":
                out[(est, s)] = overlap(x_lin, truth[s])
            elif est == "comb":
                v = spec_vec("spec_opt", s)
                out[(est, s)] = overlap(combined_estimate(x_lin, v, coeffs[s]), truth[s])
            else:
                out[(est, s)] = overlap(spec_vec(est, s), truth[s])
    return out


def sweep(
    config: SweepConfig,
    workers: Optional[int] = None,
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> list[dict]:
    """Run every (delta, estimator, signal) cell; rows come back in grid order.

    Trial k uses seed ``seed_base + k`` at every delta. If
    ``config.output_path`` is set the rows are also written there as CSV.
    """
    model = config.link()
    maps = _maps(config, model, spec)
    rows = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for delta in config.delta_grid:
            pred, coeffs = _predictions(config, model, delta, maps, spec)
            seeds = [config.seed_base + k for k in range(config.trials)]
            results = list(pool.map(lambda s: _trial(config, model, delta, s, maps, coeffs), seeds))
            for est in config.estimators:
                for s in config.signals:
                    vals = np.array([r[(est, s)] for r in results])
                    rows.append({
                        "model": config.model,
                        "sigma": config.sigma,
                        "alpha": config.alpha,
                        "d": config.d,
                        "delta": delta,
                        "estimator": est,
                        "signal": s,
                        "overlap_mean": float(vals.mean()),
                        "overlap_std": float(vals.std()),
                        "overlap_pred": float(pred[(est, s)]),
                        "trials": config.trials,
                        "seed_base": config.seed_base,
                    })
    if config.output_path:
        write_csv(rows, config.output_path, CSV_COLUMNS)
    return rows


def run_sweeps(
    configs: Sequence[SweepConfig],
    output_path: Optional[str] = None,
    workers: Optional[int] = None,
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> list[dict]:
    """Concatenate the sweeps of several configs into one table."""
    rows = []
    for cfg in configs:
        rows.extend(sweep(replace(cfg, output_path=None), workers, spec))
    if output_path:
        write_csv(rows, output_path, CSV_COLUMNS)
    return rows


def write_csv(rows: Iterable[dict], path, columns: Sequence[str]) -> None:
    """Write rows with ``repr`` floats so identical runs give identical bytes; ``-`` is stdout."""
    if str(path) == "-":
        _write_rows(sys.stdout, rows, columns)
        return
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            _write_rows(fh, rows, columns)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _write_rows(fh, rows, columns):
    w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: _fmt(row[k]) for k in columns})


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------
def read_config_file(path) -> dict[str, str]:
    """Parse a plain ``key = value`` file; ``#`` starts a comment."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    parser.read_string("[config]\n" + text)
    return {k.replace("-", "_"): v.strip() for k, v in parser["config"].items()}


# ---------------------------------------------------------------------------
# single-point tables
# ---------------------------------------------------------------------------
def predict_report(
    model: str,
    sigma: float,
    alpha: float,
    delta: float,
    preproc: str = "opt1",
    linear: str = "optlin",
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> dict:
    """TheoryReport as a flat dict plus the input configuration."""
    mdl = make_model(model, sigma)
    T = make_preprocessor(preproc, mdl, alpha, spec)
    if linear == "optlin":
        try:
            L = optimal_linear(mdl, spec)
        except IneffectiveLinearError:
            L = None
    else:
        L = make_preprocessor(linear, mdl, alpha, spec)
    rep = theory_report(mdl, alpha, delta, T, L, spec).to_dict()
    rep["input"] = {
        "model": model, "sigma": sigma, "alpha": alpha, "delta": delta,
        "preproc": preproc, "linear": linear,
    }
    return rep


def gamp_verify(
    model: str = "mlr",
    sigma: float = 0.0,
    alpha: float = 0.6,
    delta: float = 6.0,
    d: int = 1000,
    choice: int = 1,
    t_max: int = 50,
    seed: int = 0,
    tol: float = 0.0,
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> list[dict]:
    """Per-iteration comparison of a GAMP run with its state evolution."""
    mdl = make_model(model, sigma)
    T = optimal_spectral(mdl, alpha, choice, spec)
    tr = state_evolution(choice, alpha, delta, T, mdl, t_max, spec=spec)
    ds = generate_dataset(d, delta, alpha, mdl, seed)
    res = run_gamp(ds, T, choice, t_max, tol, model=mdl, spec=spec, trace=tr)
    rows = []
    for k in range(res.iterations):
        rows.append({
            "t": k + 1,
            "beta_t2": float(tr.beta[k] ** 2),
            "chi1_t": float(tr.chi1[k]),
            "empirical_norm2_over_d": float(res.norm2_over_d[k]),
            "empirical_corr_x1": float(res.corr_x1[k]),
            "corr_with_eigvec": float(res.corr_with_eigvec[k]),
            "chi2_t": float(tr.chi2[k]),
            "empirical_corr_x2": float(res.corr_x2[k]),
            "eig_residual": float(res.eig_residual[k]),
        })
    return rows


def eigs_compare(
    model: str = "mlr",
    sigma: float = 0.0,
    alpha: float = 0.6,
    delta: float = 6.0,
    d: int = 1000,
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    preproc: str = "opt1",
    workers: Optional[int] = None,
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> list[dict]:
    """Top three eigenvalues of D per seed next to their limits."""
    mdl = make_model(model, sigma)
    T = make_preprocessor(preproc, mdl, alpha, spec)
    pred = predict_eigenvalues(alpha, delta, T, mdl, spec)

    def one(seed):
        r = spectral_estimate(generate_dataset(d, delta, alpha, mdl, seed), T)
        return (r.lam1, r.lam2, r.lam3)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        emp = list(pool.map(one, seeds))
    rows = []
    for seed, lams in zip(seeds, emp):
        for k in range(3):
            rows.append({"seed": seed, "k": k + 1, "eig_empirical": float(lams[k]), "eig_pred": float(pred[k])})
    return rows


def dump_dataset(ds, path, config: Optional[dict] = None) -> None:
    """CSV of (y, eta) with the seed and config in a JSON header comment; A is regenerable."""
    path = Path(path)
    meta = {"seed": ds.seed, "alpha": ds.alpha, "delta": ds.delta, "d": ds.d, "model": ds.model_name}
    meta.update(config or {})
    try:
        with path.open("w", newline="") as fh:
            fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["y", "eta"])
            for y, e in zip(ds.y, ds.eta):
                w.writerow([repr(float(y)), int(e)])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
