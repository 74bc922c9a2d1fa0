"""Benchmark orchestration: splits x algorithms x seeds, metrics, aggregates, output files."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import metrics
from .baseline import ConvergenceWarning, gaussian_affinity, lp_propagate
from .datasets import Dataset, SplitMask, load_bundled, load_csv, make_splits
from .propagation import OTPConfig, propagate

log = logging.getLogger(__name__)

ALGORITHMS = ("otp", "lp")
CSV_COLUMNS = ("dataset", "fraction", "seed", "algorithm", "acc", "nmi", "ari", "runtime_s")
LARGE_N = 600


@dataclass
class BenchmarkConfig:
    fractions: list[float] = field(default_factory=lambda: [0.15, 0.25, 0.35])
    seeds: list[int] = field(default_factory=lambda: list(range(10)))
    algorithms: list[str] = field(default_factory=lambda: ["otp", "lp"])
    epsilon: float = OTPConfig.epsilon
    alpha: float = OTPConfig.alpha
    sinkhorn_tol: float = OTPConfig.tol
    sinkhorn_max_iter: int = OTPConfig.max_iter
    sigma_grid: list[float] = field(default_factory=lambda: [round(0.1 * k, 1) for k in range(1, 31)])
    lp_tol: float = 1e-6
    lp_max_iter: int = 1000
    record_runtime: bool = True
    large: bool = False

    @property
    def otp(self) -> OTPConfig:
        return OTPConfig(self.epsilon, self.alpha, self.sinkhorn_tol, self.sinkhorn_max_iter)


@dataclass
class CellResult:
    dataset: str
    fraction: float
    seed: int
    algorithm: str
    acc: float = float("nan")
    nmi: float = float("nan")
    ari: float = float("nan")
    runtime_s: float = 0.0
    iterations: int = 0
    relaxed_iterations: int = 0
    sigma: float | None = None
    lp_converged: bool | None = None
    error: str | None = None

    @property
    def key(self) -> tuple:
        return (self.dataset, self.fraction, self.seed, self.algorithm)


@dataclass
class BenchmarkReport:
    cells: list[CellResult]
    aggregate: dict
    traces: dict[tuple, str] = field(default_factory=dict)
    skipped: list[str] = field(default_factory=list)

    @property
    def ok_cells(self) -> list[CellResult]:
        return [c for c in self.cells if c.error is None]


def _score_cell(cell: CellResult, truth, predicted) -> None:
    cell.acc = metrics.accuracy(truth, predicted)
    cell.nmi = metrics.nmi(truth, predicted)
    cell.ari = metrics.ari(truth, predicted) if len(truth) >= 2 else float("nan")


def run_otp_cell(ds: Dataset, split: SplitMask, cfg: BenchmarkConfig) -> tuple[CellResult, str]:
    cell = CellResult(ds.name, split.fraction, split.seed, "otp")
    X, y = ds.features, ds.labels
    start = time.perf_counter()
    pred, trace = propagate(X[split.labeled], y[split.labeled], X[split.unlabeled], cfg.otp)
    elapsed = time.perf_counter() - start
    trace.check_conservation()
    # only the initially unlabeled points are predictions
    _score_cell(cell, y[split.unlabeled], pred)
    cell.runtime_s = elapsed if cfg.record_runtime else 0.0
    cell.iterations = trace.n_iterations
    cell.relaxed_iterations = sum(r.relaxed for r in trace.iterations)
    for w in trace.warnings:
        log.warning("%s fraction=%s seed=%s: %s", ds.name, split.fraction, split.seed, w)
    return cell, trace.to_csv()


def run_lp_cells(ds: Dataset, splits: list[SplitMask], cfg: BenchmarkConfig) -> list[CellResult]:
    """LP over the whole sigma grid; keeps the sigma with the best mean accuracy."""
    X, y = ds.features, ds.labels
    best: list[CellResult] | None = None
    best_acc = -np.inf
    for sigma in cfg.sigma_grid:
        W = gaussian_affinity(X, sigma).values
        cells = []
        for split in splits:
            cell = CellResult(ds.name, split.fraction, split.seed, "lp", sigma=float(sigma))
            order = np.concatenate([split.labeled, split.unlabeled])
            start = time.perf_counter()
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", ConvergenceWarning)
                pred = lp_propagate(W[np.ix_(order, order)], y[split.labeled], cfg.lp_tol, cfg.lp_max_iter)
            elapsed = time.perf_counter() - start
            cell.lp_converged = not caught
            _score_cell(cell, y[split.unlabeled], pred)
            cell.runtime_s = elapsed if cfg.record_runtime else 0.0
            cells.append(cell)
        mean_acc = float(np.mean([c.acc for c in cells]))
        if mean_acc > best_acc:
            best, best_acc = cells, mean_acc
    return best or []


def _aggregate(cells: list[CellResult], algorithms) -> dict:
    groups: dict[tuple, list[CellResult]] = {}
    for c in cells:
        if c.error is None:
            groups.setdefault((c.dataset, c.fraction, c.algorithm), []).append(c)
    summary = []
    for (name, frac, algo), group in sorted(groups.items()):
        entry = {"dataset": name, "fraction": frac, "algorithm": algo, "n_cells": len(group)}
        for m in ("acc", "nmi", "ari", "runtime_s"):
            vals = np.array([getattr(c, m) for c in group], dtype=np.float64)
            entry[f"{m}_mean"] = float(np.mean(vals))
            entry[f"{m}_std"] = float(np.std(vals))
        if algo == "lp":
            entry["sigma"] = group[0].sigma
            entry["lp_unconverged"] = sum(not c.lp_converged for c in group)
        summary.append(entry)

    scores = []
    datasets = sorted({e["dataset"] for e in summary})
    for frac in sorted({e["fraction"] for e in summary}):
        for m in ("acc", "nmi", "ari"):
            perf = {}
            for algo in algorithms:
                vals = {e["dataset"]: e[f"{m}_mean"] for e in summary
                        if e["fraction"] == frac and e["algorithm"] == algo}
                if vals:
                    perf[algo] = vals
            entry = {"fraction": frac, "metric": m, "score": None}
            try:
                if perf and all(set(v) == set(datasets) for v in perf.values()):
                    entry["score"] = metrics.score_measure(perf)
                else:
                    entry["reason"] = "missing cells"
            except ValueError as exc:
                entry["reason"] = str(exc)
            scores.append(entry)
    return {"summary": summary, "score": scores}


def run_benchmark(datasets: list[Dataset], fractions, seeds, algorithms,
                  config: BenchmarkConfig | None = None) -> BenchmarkReport:
    cfg = config or BenchmarkConfig()
    unknown = set(algorithms) - set(ALGORITHMS)
    if unknown:
        raise ValueError(f"unknown algorithms {sorted(unknown)}; choose from {ALGORITHMS}")
    cells: list[CellResult] = []
    traces: dict[tuple, str] = {}
    skipped: list[str] = []
    for ds in datasets:
        if ds.n > LARGE_N and not cfg.large:
            skipped.append(f"{ds.name}: n={ds.n} > {LARGE_N}, enable 'large' to include")
            continue
        for frac in fractions:
            try:
                splits = make_splits(ds, frac, seeds)
            except ValueError as exc:
                for seed in seeds:
                    for algo in algorithms:
                        cells.append(CellResult(ds.name, float(frac), int(seed), algo, error=str(exc)))
                continue
            for algo in algorithms:
                if algo == "otp":
                    for split in splits:
                        try:
                            cell, trace_csv = run_otp_cell(ds, split, cfg)
                            traces[cell.key] = trace_csv
                        except Exception as exc:  # recorded per cell, the run goes on
                            cell = CellResult(ds.name, split.fraction, split.seed, algo, error=repr(exc))
                        cells.append(cell)
                else:
                    try:
                        cells.extend(run_lp_cells(ds, splits, cfg))
                    except Exception as exc:
                        cells.extend(CellResult(ds.name, s.fraction, s.seed, algo, error=repr(exc))
                                     for s in splits)
    cells.sort(key=lambda c: c.key)
    return BenchmarkReport(cells, _aggregate(cells, list(algorithms)), traces, skipped)


def _fmt(x) -> str:
    return repr(float(x))


def results_csv(report: BenchmarkReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for c in report.ok_cells:
        writer.writerow([c.dataset, _fmt(c.fraction), c.seed, c.algorithm,
                         _fmt(c.acc), _fmt(c.nmi), _fmt(c.ari), _fmt(c.runtime_s)])
    return buf.getvalue()


def results_json(report: BenchmarkReport) -> str:
    payload = {
        "cells": [{k: v for k, v in asdict(c).items() if k != "error"} for c in report.ok_cells],
        "failures": [{"dataset": c.dataset, "fraction": c.fraction, "seed": c.seed,
                      "algorithm": c.algorithm, "error": c.error}
                     for c in report.cells if c.error is not None],
        "skipped": report.skipped,
        "aggregate": report.aggregate,
    }
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n"


def emit_results(report: BenchmarkReport, fmt: str, path) -> Path:
    """Write results as CSV or JSON; identical reports give identical bytes."""
    if not report.cells:
        raise ValueError("no results to write")
    if fmt == "csv":
        text = results_csv(report)
    elif fmt == "json":
        text = results_json(report)
    else:
        raise ValueError(f"unknown format {fmt!r}; use 'csv' or 'json'")
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ValueError(f"cannot write {path}: {exc}") from exc
    return path


def write_traces(report: BenchmarkReport, directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for (name, frac, seed, algo), text in sorted(report.traces.items()):
        path = directory / f"{name}_{frac:g}_{seed}_{algo}.csv"
        path.write_text(text)
        written.append(path)
    return written


def load_config(path) -> tuple[list[Dataset], BenchmarkConfig]:
    """Parse a benchmark JSON config into datasets and settings."""
    with open(path) as fh:
        raw = json.load(fh)
    base = Path(path).parent
    datasets = []
    for entry in raw.get("datasets", []):
        if isinstance(entry, str):
            entry = {"bundled": entry}
        standardize = entry.get("standardize", True)
        if "bundled" in entry:
            ds = load_bundled(entry["bundled"], standardize)
        else:
            data_path = Path(entry["path"])
            if not data_path.is_absolute():
                data_path = base / data_path
            ds = load_csv(data_path, entry["label_col"], standardize,
                          entry.get("delimiter", ","), name=entry.get("name"))
        datasets.append(ds)
    tolerances = raw.get("tolerances", {})
    cfg = BenchmarkConfig()
    for key in ("fractions", "seeds", "algorithms", "epsilon", "alpha", "sigma_grid",
                "record_runtime", "large"):
        if key in raw:
            setattr(cfg, key, raw[key])
    for key in ("sinkhorn_tol", "sinkhorn_max_iter", "lp_tol", "lp_max_iter"):
        if key in tolerances:
            setattr(cfg, key, tolerances[key])
    return datasets, cfg
