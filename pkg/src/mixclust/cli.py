"""Command-line interface: generate, fit, score and bench subcommands."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import bench as bench_mod
from . import io as mio
from .core import MixclustError
from .metrics import ami, ari
from .simgen import generate as generate_data


@click.group()
def main():
    """Mixed-type data clustering toolbox."""


def _load_json(path):
    return json.loads(Path(path).read_text())


@main.command()
@click.option("--model", type=click.Choice(["m1", "m2", "m3", "m4"]), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON file of generator parameters (seed included).")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--seed", type=int, default=None, help="Overrides the config seed.")
def generate(model, config_path, out_dir, seed):
    """Generate one labeled dataset; writes data.csv, schema.json, labels.csv."""
    params = _load_json(config_path) if config_path else {}
    if seed is not None:
        params["seed"] = seed
    params.setdefault("seed", 0)
    seed_value = params.pop("seed")
    dataset, truth = generate_data(model, params, seed=seed_value)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mio.write_dataset(dataset, out / "data.csv", out / "schema.json")
    mio.write_labels(truth, out / "labels.csv")
    click.echo(f"wrote {dataset.n} rows to {out}")


def _json_safe(value):
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if hasattr(value, "tolist"):
        return value.tolist()
    return None


@main.command()
@click.option("--method", type=click.Choice(sorted(bench_mod.METHOD_REGISTRY)), required=True)
@click.option("--k", "k", type=int, required=True, help="Number of clusters.")
@click.option("--data", "data_path", type=click.Path(exists=True), required=True)
@click.option("--schema", "schema_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON file of method tuning options.")
@click.option("--seed", type=int, default=0)
def fit(method, k, data_path, schema_path, out_dir, config_path, seed):
    """Cluster a dataset; writes labels.csv and summary.json (plus
    networks.json for the mixture of Bayesian networks)."""
    tuning = _load_json(config_path) if config_path else {}
    dataset, _ = mio.read_dataset(data_path, schema_path)
    result = bench_mod.METHOD_REGISTRY[method](dataset, k, seed, tuning)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mio.write_labels(result.partition, out / "labels.csv")
    model = result.details.pop("model", None)
    summary = {
        "method": method,
        "K": k,
        "seed": seed,
        "objective": result.objective,
        "iterations": result.iterations,
        "converged": result.converged,
        "details": _json_safe(result.details),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    if model is not None:
        networks = {
            "mixing": model.mixing.tolist(),
            "components": [net.to_dict() for net in model.components],
        }
        (out / "networks.json").write_text(json.dumps(networks, indent=2) + "\n")
    click.echo(f"objective={result.objective:.6g} iterations={result.iterations} -> {out}")


@main.command()
@click.option("--true", "true_path", type=click.Path(exists=True), required=True)
@click.option("--pred", "pred_path", type=click.Path(exists=True), required=True)
@click.option("--metric", type=click.Choice(["ari", "ami"]), default="ari")
def score(true_path, pred_path, metric):
    """Print one external-validation score for two label files."""
    truth = mio.read_labels(true_path)
    pred = mio.read_labels(pred_path)
    value = ari(truth, pred) if metric == "ari" else ami(truth, pred)
    click.echo(f"{value:.6f}")


@main.group()
def bench():
    """Benchmark grids over the simulation models."""


@bench.command("run")
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--quiet", is_flag=True, default=False)
def bench_run(config_path, quiet):
    """Run a factor grid and write replicates.csv plus the report files."""
    config = _load_json(config_path)
    progress = None if quiet else lambda msg: click.echo(msg, err=True)
    results, summary, written = bench_mod.run_and_report(config, progress=progress)
    n_fail = sum(1 for r in results if not r.ok)
    click.echo(f"{len(results)} cells ({n_fail} failed); wrote:")
    for path in written:
        click.echo(f"  {path}")


@bench.command("report")
@click.option("--results", "results_path", type=click.Path(exists=True), required=True,
              help="replicates.csv from a previous run.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
def bench_report(results_path, out_dir):
    """Re-summarize a replicates CSV and emit the report files."""
    results = bench_mod.read_replicates_csv(results_path)
    summary = bench_mod.summarize(results)
    for path in bench_mod.emit_report(summary, out_dir):
        click.echo(f"  {path}")


def entrypoint():
    try:
        main(standalone_mode=True)
    except MixclustError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    entrypoint()
