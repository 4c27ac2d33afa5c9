"""Benchmark harness: factor grids, seeded replicates, scoring and reports.

A grid config is a JSON-compatible dict::

    {
      "model": "m1",
      "factors": {"K": [2, 5], "overlap": [0.3, 0.6], ...},
      "methods": ["kproto", "kamila", ...],
      "replicates": 10,
      "seed": 0,
      "output_dir": "out"
    }

Every (scenario, replicate) cell derives its seed from the base seed and a
stable content hash, so cells are independent of grid edits and execution
order, failures stay contained to their cell, and identical configs yield
byte-identical summary CSVs.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .core import ConfigError, FitResult, MixedDataset, Partition
from .distance_methods import (
    ConvexKmConfig,
    KProtoConfig,
    PdqConfig,
    convex_kmeans_fit,
    kprototypes_fit,
    pdq_fit,
)
from .kamila import KamilaConfig, kamila_fit
from .lcm import lcm_fit
from .mbn import mbn_cem_fit
from .metrics import ami, ari
from .simgen import generate


def _fit_kproto(dataset, K, seed, tuning):
    return kprototypes_fit(dataset, KProtoConfig(K=K, seed=seed, **tuning))


def _fit_pdq(dataset, K, seed, tuning):
    return pdq_fit(dataset, PdqConfig(K=K, seed=seed, **tuning))


def _fit_convexkm(dataset, K, seed, tuning):
    return convex_kmeans_fit(dataset, ConvexKmConfig(K=K, seed=seed, **tuning))


def _fit_kamila(dataset, K, seed, tuning):
    return kamila_fit(dataset, KamilaConfig(K=K, seed=seed, **tuning))


def _fit_lcm(dataset, K, seed, tuning):
    return lcm_fit(dataset, K=K, seed=seed, **tuning)


def _fit_mbn(dataset, K, seed, tuning):
    return mbn_cem_fit(dataset, K=K, seed=seed, **tuning)


# Default tuning: 10 k-prototypes
# starts with the estimated gamma, 20 KAMILA starts, a 20-point weight grid
# for convex k-means, Gower/k-medoid-style PDQ, 10 MBN starts capped at 200
# CEM iterations.
METHOD_REGISTRY: dict[str, Callable[..., FitResult]] = {
    "kproto": _fit_kproto,
    "pdq": _fit_pdq,
    "convexkm": _fit_convexkm,
    "kamila": _fit_kamila,
    "lcm": _fit_lcm,
    "mbn": _fit_mbn,
}


@dataclass(frozen=True)
class ScenarioSpec:
    model: str
    factors: dict
    methods: tuple
    replicates: int = 10
    base_seed: int = 0

    def __post_init__(self):
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.model not in ("m1", "m2", "m3", "m4"):
            raise ConfigError(f"unknown model {self.model!r}")

    @property
    def scenario_id(self) -> str:
        parts = ",".join(f"{k}={_format_value(self.factors[k])}" for k in sorted(self.factors))
        return f"{self.model}[{parts}]"


@dataclass
class ScenarioResult:
    scenario_id: str
    model: str
    factors: dict
    method: str
    replicate: int
    seed: int
    ari: Optional[float]
    ami: Optional[float]
    seconds: float
    iterations: int
    converged: bool
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _format_value(value) -> str:
    if isinstance(value, (list, tuple)):
        return "(" + "-".join(_format_value(v) for v in value) + ")"
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def stable_hash(*parts) -> int:
    """Deterministic 63-bit hash of the stringified parts (unlike ``hash``,
    stable across processes and Python versions)."""
    text = "|".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & 0x7FFFFFFFFFFFFFFF


def cell_seed(base_seed: int, scenario_id: str, replicate: int, method: str = "") -> int:
    return (base_seed ^ stable_hash(scenario_id, replicate, method)) & 0x7FFFFFFFFFFFFFFF


def expand_grid(config: dict) -> list[ScenarioSpec]:
    """All factor combinations of a grid config, in deterministic order."""
    for key in ("model", "factors"):
        if key not in config:
            raise ConfigError(f"grid config is missing {key!r}")
    factors = config["factors"]
    if not isinstance(factors, dict):
        raise ConfigError("factors must map factor name -> list of values")
    names = sorted(factors)
    for name in names:
        if not isinstance(factors[name], list):
            raise ConfigError(f"factors[{name!r}] must be a list of values")
    methods = tuple(config.get("methods", ()))
    for m in methods:
        if m not in METHOD_REGISTRY:
            raise ConfigError(f"methods[{m!r}]: not implemented "
                              f"(known: {sorted(METHOD_REGISTRY)})")
    combos = [()]
    for name in names:
        combos = [prev + (value,) for prev in combos for value in factors[name]]
    specs = []
    for combo in combos:
        spec_factors = {
            name: tuple(v) if isinstance(v, list) else v
            for name, v in zip(names, combo)
        }
        specs.append(ScenarioSpec(
            model=config["model"],
            factors=spec_factors,
            methods=methods,
            replicates=int(config.get("replicates", 10)),
            base_seed=int(config.get("seed", 0)),
        ))
    return specs


def run_grid(config: dict, registry: Optional[dict] = None,
             progress: Optional[Callable[[str], None]] = None) -> list[ScenarioResult]:
    """Run every (scenario, replicate, method) cell of the grid.

    Data are regenerated per replicate from the cell seed; method failures
    are recorded in their cell (``error`` set, metrics None) and never abort
    the grid.
    """
    registry = METHOD_REGISTRY if registry is None else registry
    results: list[ScenarioResult] = []
    for spec in expand_grid(config):
        sid = spec.scenario_id
        for rep in range(spec.replicates):
            data_seed = cell_seed(spec.base_seed, sid, rep)
            dataset, truth = generate(spec.model, dict(spec.factors), seed=data_seed)
            K = int(spec.factors["K"])
            for method in spec.methods:
                seed = cell_seed(spec.base_seed, sid, rep, method)
                tuning = dict(config.get("tuning", {}).get(method, {}))
                t0 = time.perf_counter()
                try:
                    fit = registry[method](dataset, K, seed, tuning)
                    elapsed = time.perf_counter() - t0
                    result = ScenarioResult(
                        scenario_id=sid, model=spec.model, factors=dict(spec.factors),
                        method=method, replicate=rep, seed=seed,
                        ari=ari(truth, fit.partition), ami=ami(truth, fit.partition),
                        seconds=elapsed, iterations=fit.iterations,
                        converged=fit.converged)
                except Exception as exc:  # contained per cell
                    elapsed = time.perf_counter() - t0
                    result = ScenarioResult(
                        scenario_id=sid, model=spec.model, factors=dict(spec.factors),
                        method=method, replicate=rep, seed=seed,
                        ari=None, ami=None, seconds=elapsed, iterations=0,
                        converged=False, error=f"{type(exc).__name__}: {exc}")
                results.append(result)
                if progress is not None:
                    status = "FAIL" if result.error else f"ari={result.ari:.3f}"
                    progress(f"{sid} rep={rep} {method}: {status}")
    return results


@dataclass(frozen=True)
class SummaryRow:
    scenario_id: str
    model: str
    factors: dict
    method: str
    mean_ari: float
    sd_ari: float
    mean_ami: float
    sd_ami: float
    n_ok: int
    n_fail: int


def summarize(results: list[ScenarioResult]) -> list[SummaryRow]:
    """Per-scenario, per-method means and standard deviations of ARI/AMI.

    Failed cells are excluded from the statistics and counted in
    ``n_fail``; rows are ordered canonically (scenario id, then method).
    """
    if not results:
        raise ConfigError("no results to summarize")
    groups: dict[tuple, list[ScenarioResult]] = {}
    for r in results:
        groups.setdefault((r.scenario_id, r.method), []).append(r)
    rows = []
    for (sid, method), cells in sorted(groups.items()):
        ok = [c for c in cells if c.ok]
        aris = np.array([c.ari for c in ok], dtype=float)
        amis = np.array([c.ami for c in ok], dtype=float)
        rows.append(SummaryRow(
            scenario_id=sid,
            model=cells[0].model,
            factors=cells[0].factors,
            method=method,
            mean_ari=float(aris.mean()) if ok else float("nan"),
            sd_ari=float(aris.std(ddof=1)) if len(ok) > 1 else 0.0,
            mean_ami=float(amis.mean()) if ok else float("nan"),
            sd_ami=float(amis.std(ddof=1)) if len(ok) > 1 else 0.0,
            n_ok=len(ok),
            n_fail=len(cells) - len(ok),
        ))
    return rows


RESULTS_CSV_COLUMNS = ["model", "scenario", "factors", "method", "mean_ari", "sd_ari",
                       "mean_ami", "sd_ami", "n_ok", "n_fail"]


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def write_results_csv(summary: list[SummaryRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULTS_CSV_COLUMNS)
        for row in summary:
            writer.writerow([
                row.model, row.scenario_id,
                json.dumps(row.factors, sort_keys=True),
                row.method,
                _fmt(row.mean_ari), _fmt(row.sd_ari),
                _fmt(row.mean_ami), _fmt(row.sd_ami),
                row.n_ok, row.n_fail,
            ])


def read_results_csv(path) -> list[SummaryRow]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(SummaryRow(
                scenario_id=rec["scenario"], model=rec["model"],
                factors=json.loads(rec["factors"]), method=rec["method"],
                mean_ari=float(rec["mean_ari"]), sd_ari=float(rec["sd_ari"]),
                mean_ami=float(rec["mean_ami"]), sd_ami=float(rec["sd_ami"]),
                n_ok=int(rec["n_ok"]), n_fail=int(rec["n_fail"])))
    return rows


REPLICATES_CSV_COLUMNS = ["model", "scenario", "factors", "method", "replicate", "seed",
                          "ari", "ami", "seconds", "iterations", "converged", "error"]


def write_replicates_csv(results: list[ScenarioResult], path) -> None:
    ordered = sorted(results, key=lambda r: (r.scenario_id, r.method, r.replicate))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPLICATES_CSV_COLUMNS)
        for r in ordered:
            writer.writerow([
                r.model, r.scenario_id, json.dumps(r.factors, sort_keys=True),
                r.method, r.replicate, r.seed,
                "" if r.ari is None else _fmt(r.ari),
                "" if r.ami is None else _fmt(r.ami),
                _fmt(r.seconds), r.iterations, r.converged, r.error or "",
            ])


def read_replicates_csv(path) -> list[ScenarioResult]:
    results = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            results.append(ScenarioResult(
                scenario_id=rec["scenario"], model=rec["model"],
                factors=json.loads(rec["factors"]), method=rec["method"],
                replicate=int(rec["replicate"]), seed=int(rec["seed"]),
                ari=float(rec["ari"]) if rec["ari"] else None,
                ami=float(rec["ami"]) if rec["ami"] else None,
                seconds=float(rec["seconds"]), iterations=int(rec["iterations"]),
                converged=rec["converged"] == "True",
                error=rec["error"] or None))
    return results


def _scenario_label(factors: dict) -> str:
    return ", ".join(f"{k}={_format_value(v)}" for k, v in sorted(factors.items()))


def format_text_table(summary: list[SummaryRow], model: str) -> str:
    """Fixed-width mean ARI/AMI table: methods as rows, scenarios as columns."""
    rows = [r for r in summary if r.model == model]
    scenarios = sorted({r.scenario_id: None for r in rows})
    methods = sorted({r.method for r in rows})
    by_key = {(r.scenario_id, r.method): r for r in rows}
    headers = [""]
    factor_of = {r.scenario_id: r.factors for r in rows}
    headers += [_scenario_label(factor_of[s]) for s in scenarios]
    lines = []
    width = max(12, max((len(h) for h in headers), default=12) + 2)
    lines.append("".join(h.ljust(width) for h in headers))
    for method in methods:
        cells = [method]
        for s in scenarios:
            r = by_key.get((s, method))
            if r is None or r.n_ok == 0:
                cells.append("--")
            else:
                cells.append(f"{r.mean_ari:.2f}/{r.mean_ami:.2f}")
        lines.append("".join(c.ljust(width) for c in cells))
    return "\n".join(lines) + "\n"


def render_bar_chart(summary: list[SummaryRow], model: str, path) -> None:
    """Grouped mean-ARI bars per scenario, one group color per method."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = [r for r in summary if r.model == model]
    scenarios = sorted({r.scenario_id: None for r in rows})
    methods = sorted({r.method for r in rows})
    factor_of = {r.scenario_id: r.factors for r in rows}
    by_key = {(r.scenario_id, r.method): r for r in rows}
    x = np.arange(len(scenarios))
    group_width = 0.8
    bar_width = group_width / max(len(methods), 1)
    fig, ax = plt.subplots(figsize=(max(6.0, 1.8 * len(scenarios)), 4.5))
    for i, method in enumerate(methods):
        heights = []
        for s in scenarios:
            r = by_key.get((s, method))
            heights.append(r.mean_ari if r is not None and r.n_ok else 0.0)
        offsets = x - group_width / 2 + (i + 0.5) * bar_width
        ax.bar(offsets, heights, bar_width, label=method)
    ax.set_xticks(x)
    ax.set_xticklabels([_scenario_label(factor_of[s]) for s in scenarios],
                       rotation=30, ha="right", fontsize=7)
    ax.set_ylabel("mean ARI")
    ax.set_title(f"Model {model.upper()}: mean ARI by scenario and method")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def emit_report(summary: list[SummaryRow], out_dir) -> list[Path]:
    """Write the results CSV plus one text table and one SVG chart per model."""
    if not summary:
        raise ConfigError("empty summary")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    csv_path = out_dir / "results.csv"
    write_results_csv(summary, csv_path)
    written.append(csv_path)
    for model in sorted({r.model for r in summary}):
        table_path = out_dir / f"{model}_table.txt"
        table_path.write_text(format_text_table(summary, model))
        written.append(table_path)
        svg_path = out_dir / f"{model}_ari.svg"
        render_bar_chart(summary, model, svg_path)
        written.append(svg_path)
    return written


def run_and_report(config: dict, registry: Optional[dict] = None,
                   progress=None) -> tuple[list[ScenarioResult], list[SummaryRow], list[Path]]:
    """End-to-end: run the grid, write replicates.csv and the report files
    into the configured output directory."""
    out_dir = Path(config.get("output_dir", "bench_out"))
    results = run_grid(config, registry=registry, progress=progress)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_replicates_csv(results, out_dir / "replicates.csv")
    summary = summarize(results) if results else []
    written = emit_report(summary, out_dir) if summary else []
    return results, summary, written
