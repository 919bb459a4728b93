"""``setvalued`` command line: run experiments and write CSV, JSON and SVG artifacts."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from pathlib import Path

import click
import numpy as np

from .config import EXPERIMENTS, FAMILIES, TOLERANCE_KEYS, ExperimentConfig, load_config
from .errors import ConfigError, SetValuedError

SCHEMA_VERSION = "1.0"
OUTPUT_ENV = "SETVALUED_OUTPUT_DIR"

log = logging.getLogger("setvalued")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def summary_document(cfg: ExperimentConfig, result) -> dict:
    """JSON-ready summary; identical for identical (config, seed) regardless of workers."""
    return _clean({
        "schema_version": SCHEMA_VERSION,
        "experiment": cfg.experiment,
        "config": cfg.reportable(),
        "summary": result.summary,
        "checks": {k: {"value": c.value, "tolerance": c.tolerance, "passed": c.passed}
                   for k, c in result.checks.items()},
        "passed": result.passed,
    })


def summary_json(cfg: ExperimentConfig, result) -> str:
    return json.dumps(summary_document(cfg, result), indent=2, sort_keys=True)


def write_csv(path: Path, columns: list[str], data: np.ndarray) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in np.atleast_2d(data):
            writer.writerow([format(float(v), ".17g") for v in row])


def plot_from_csv(csv_path: Path, svg_path: Path, x: str, ys, title: str) -> None:
    """Render a line plot using only the CSV contents."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "setvalued"
    table = np.genfromtxt(csv_path, delimiter=",", names=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    groups = np.unique(table["path"]) if "path" in table.dtype.names else [None]
    for g in groups:
        sel = slice(None) if g is None else table["path"] == g
        for y in ys:
            ax.plot(table[x][sel], table[y][sel], lw=0.8, label=y if g in (None, groups[0]) else None)
    ax.set_xlabel(x)
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)


def output_root(cfg: ExperimentConfig) -> Path:
    return Path(cfg.output_dir or os.environ.get(OUTPUT_ENV) or "setvalued-output")


def execute(cfg: ExperimentConfig):
    """Run an experiment and write its artifacts; returns ``(result, output directory)``."""
    from .experiments import run_experiment

    start = time.perf_counter()
    result = run_experiment(cfg)
    log.info("%s finished in %.2f s", cfg.experiment, time.perf_counter() - start)
    out = output_root(cfg) / cfg.experiment
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(summary_json(cfg, result) + "\n")
    for name, (columns, data) in result.tables.items():
        write_csv(out / f"{name}.csv", columns, data)
    if cfg.plot:
        for p in result.plots:
            plot_from_csv(out / f"{p.table}.csv", out / f"{p.table}.svg", p.x, p.y, p.title)
    return result, out


def _parse_tolerances(items) -> dict[str, float]:
    tol = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise click.BadParameter(f"expected KEY=VALUE, got {item!r}", param_hint="--tol")
        try:
            tol[key.strip()] = float(value)
        except ValueError:
            raise click.BadParameter(f"tolerance {key!r} is not a number", param_hint="--tol") from None
    return tol


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool) -> None:
    """Numerical checks for set-valued functions, boundary flows and set-valued HJB equations."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")


@main.command()
@click.argument("experiment", type=click.Choice(EXPERIMENTS))
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False), help="JSON or TOML file.")
@click.option("--family", help="Reference family (see `setvalued families`).")
@click.option("--paths", type=int)
@click.option("--seed", type=int)
@click.option("--workers", type=int)
@click.option("--dt", type=float)
@click.option("--dx", type=float)
@click.option("--horizon", type=float)
@click.option("--delta-min", type=float)
@click.option("--points", type=int)
@click.option("--pairs", type=int)
@click.option("--eps", type=float)
@click.option("-T", "--horizon-T", "T", type=float, help="Terminal time T.")
@click.option("--lam", type=float, help="Risk aversion for mean-variance runs.")
@click.option("--x0", type=float)
@click.option("--regime", type=click.Choice(["tangential", "inward", "outward"]))
@click.option("--form", type=click.Choice(["X*2", "X*"]))
@click.option("--order-study/--no-order-study", default=None)
@click.option("--tol", "tolerances", multiple=True, help="Tolerance override KEY=VALUE (repeatable).")
@click.option("--output-dir", type=click.Path(file_okay=False), help=f"Defaults to ${OUTPUT_ENV} or ./setvalued-output.")
@click.option("--plot/--no-plot", default=None, help="Also write SVG figures (needs matplotlib).")
def run(experiment, config_file, tolerances, **flags):
    """Run EXPERIMENT; exit status 0 iff every configured check passes."""
    overrides = {k: v for k, v in flags.items() if v is not None}
    if tolerances:
        overrides["tolerances"] = _parse_tolerances(tolerances)
    try:
        cfg = load_config(experiment, config_file, overrides)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        raise SystemExit(2) from None
    try:
        result, out = execute(cfg)
    except SetValuedError as exc:
        click.echo(f"{experiment} failed: {type(exc).__name__}: {exc}", err=True)
        raise SystemExit(3) from None
    for name, check in result.checks.items():
        mark = "PASS" if check.passed else "FAIL"
        click.echo(f"{mark} {name}: {check.value:.6g} (tolerance {check.tolerance:.3g})")
    click.echo(f"artifacts: {out}")
    raise SystemExit(0 if result.passed else 1)


@main.command()
def families() -> None:
    """List experiments with their families and tolerance keys."""
    for name in EXPERIMENTS:
        click.echo(f"{name}: families={', '.join(FAMILIES[name])}; tolerances={', '.join(TOLERANCE_KEYS[name])}")


if __name__ == "__main__":  # pragma: no cover
    main()
