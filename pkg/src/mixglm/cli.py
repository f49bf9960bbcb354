"""Command-line interface: predict, sweep, gamp-verify, eigs and verify."""

from __future__ import annotations

import json
import sys
from dataclasses import replace

import click

from . import experiments as ex
from .acceptance import format_result, run_criteria


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in str(text).replace(" ", "").split(",") if x)


def _words(text: str) -> tuple[str, ...]:
    return tuple(x for x in str(text).replace(" ", "").split(",") if x)


def _emit_json(obj, output):
    text = json.dumps(obj, indent=2, sort_keys=False)
    if output in (None, "-"):
        click.echo(text)
    else:
        try:
            with open(output, "w") as fh:
                fh.write(text + "\n")
        except OSError as exc:
            raise click.ClickException(f"cannot write {output}: {exc.strerror or exc}")


def _emit_csv(rows, columns, output):
    try:
        ex.write_csv(rows, output or "-", columns)
    except OSError as exc:
        raise click.ClickException(str(exc))


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="Plain-text key = value file supplying option defaults.")
@click.pass_context
def cli(ctx, config_path):
    """Linear, spectral and combined estimation in mixed GLMs."""
    if not config_path:
        return
    values = ex.read_config_file(config_path)
    known = {p.name for cmd in cli.commands.values() for p in cmd.params}
    unknown = sorted(set(values) - known)
    if unknown:
        raise click.UsageError(f"unknown config keys: {', '.join(unknown)}")
    ctx.default_map = {
        name: {k: v for k, v in values.items() if k in {p.name for p in cmd.params}}
        for name, cmd in cli.commands.items()
    }


def _model_options(f):
    f = click.option("--alpha", type=float, default=0.6, show_default=True, help="Mixing weight in (1/2, 1).")(f)
    f = click.option("--sigma", type=float, default=0.0, show_default=True, help="Noise level.")(f)
    f = click.option("--model", type=click.Choice(["mlr", "pr"]), default="mlr", show_default=True)(f)
    return f


@cli.command()
@_model_options
@click.option("--delta", type=float, required=True, help="Sampling ratio n/d.")
@click.option("--preproc", default="opt1", show_default=True, help="Spectral map: opt1, opt2, ycs or lal.")
@click.option("--linear", default="optlin", show_default=True, help="Linear map: optlin, ycs or lal.")
@click.option("--output", "-o", default=None, help="JSON file (stdout when omitted).")
def predict(model, sigma, alpha, delta, preproc, linear, output):
    """Asymptotic predictions at one (model, alpha, delta) as JSON."""
    try:
        rep = ex.predict_report(model, sigma, alpha, delta, preproc, linear)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    _emit_json(rep, output)


@cli.command()
@click.option("--preset", type=click.Choice(sorted(ex.PRESETS)), default=None, help="Named figure config.")
@click.option("--scale", type=click.Choice(["full", "desk"]), default="full", show_default=True)
@_model_options
@click.option("--d", "d", type=int, default=2000, show_default=True)
@click.option("--deltas", default="1,2,3,4,5,6,8", show_default=True, help="Comma-separated increasing grid.")
@click.option("--trials", type=int, default=10, show_default=True)
@click.option("--estimators", default=",".join(ex.ESTIMATORS), show_default=True)
@click.option("--signals", default="1,2", show_default=True)
@click.option("--seed-base", type=int, default=0, show_default=True)
@click.option("--workers", type=int, default=None, help="Threads for concurrent trials.")
@click.option("--output", "-o", default=None, help="CSV file (stdout when omitted).")
def sweep(preset, scale, model, sigma, alpha, d, deltas, trials, estimators, signals, seed_base, workers, output):
    """Simulated and predicted overlaps over a delta grid as CSV."""
    try:
        if preset:
            cfgs = ex.preset(preset, scale)
        else:
            cfg = ex.SweepConfig(model, sigma, alpha, d, _floats(deltas), trials, _words(estimators),
                                 seed_base, None, tuple(int(s) for s in _words(signals)))
            cfgs = (cfg,)
            if scale == "desk":
                cfgs = (replace(cfg, d=500, trials=5),)
        rows = ex.run_sweeps(cfgs, workers=workers)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    _emit_csv(rows, ex.CSV_COLUMNS, output)


@cli.command("gamp-verify")
@_model_options
@click.option("--delta", type=float, default=6.0, show_default=True)
@click.option("--d", "d", type=int, default=1000, show_default=True)
@click.option("--choice", type=click.Choice(["1", "2"]), default="1", show_default=True)
@click.option("--t-max", type=int, default=50, show_default=True)
@click.option("--tol", type=float, default=0.0, show_default=True, help="Relative-change stopping rule.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output", "-o", default=None, help="CSV file (stdout when omitted).")
def gamp_verify(model, sigma, alpha, delta, d, choice, t_max, tol, seed, output):
    """GAMP iterates against state evolution, one row per iteration."""
    try:
        rows = ex.gamp_verify(model, sigma, alpha, delta, d, int(choice), t_max, seed, tol)
    except (ValueError, RuntimeError) as exc:
        raise click.ClickException(str(exc))
    _emit_csv(rows, ex.GAMP_COLUMNS, output)


@cli.command()
@_model_options
@click.option("--delta", type=float, default=6.0, show_default=True)
@click.option("--d", "d", type=int, default=1000, show_default=True)
@click.option("--seeds", type=int, default=5, show_default=True, help="Number of seeds.")
@click.option("--seed-base", type=int, default=0, show_default=True)
@click.option("--preproc", default="opt1", show_default=True)
@click.option("--output", "-o", default=None, help="CSV file (stdout when omitted).")
def eigs(model, sigma, alpha, delta, d, seeds, seed_base, preproc, output):
    """Top three eigenvalues of D per seed next to their limits."""
    try:
        rows = ex.eigs_compare(model, sigma, alpha, delta, d, range(seed_base, seed_base + seeds), preproc)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    _emit_csv(rows, ex.EIGS_COLUMNS, output)


@cli.command()
@click.option("--tol-scale", type=float, default=1.0, show_default=True, help="Multiplier on every tolerance.")
@click.option("--only", default=None, help="Comma-separated criterion keys, e.g. C1,C4.")
def verify(tol_scale, only):
    """Run the acceptance criteria; exit status 1 if any fails."""
    keys = _words(only) if only else None
    try:
        results = run_criteria(tol_scale, keys)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    for r in results:
        click.echo(format_result(r))
    failed = [r.key for r in results if not r.passed]
    click.echo(f"{len(results) - len(failed)}/{len(results)} criteria passed"
               + (f"; failed: {', '.join(failed)}" if failed else ""))
    sys.exit(1 if failed else 0)


def main():
    cli(prog_name="mixglm")


if __name__ == "__main__":
    main()
