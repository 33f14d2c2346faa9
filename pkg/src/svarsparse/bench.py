"""Benchmark harness: simulate -> fit -> score per grid cell and seed.

Cells run in-process and sequentially by default; seeds are derived per
(cell, repetition) so an optional process pool over cells cannot change any
number.  A cell that exceeds its wall-clock budget is recorded as timed out,
not failed, and partial results are flushed after every cell.
"""

from __future__ import annotations

import csv
import json
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import RunConfig
from .core import build_past_embedding
from .estimate import FitTimeout, fit, recover_shocks
from .metrics import score_graph, score_shocks
from .simulate import generate_dataset

STATUS_OK = "ok"
STATUS_TIMED_OUT = "timed_out"

RESULT_COLUMNS = [
    "cell",
    "d",
    "n",
    "t",
    "k",
    "seed_index",
    "status",
    "runtime_seconds",
    "shd",
    "precision",
    "recall",
    "f1",
    "auroc",
    "nmse",
    "shock_shd",
    "shock_nmse",
    "beta_hat",
    "h_final",
    "epochs_run",
    "stop_reason",
]

AGGREGATE_COLUMNS = [
    "cell",
    "d",
    "n",
    "t",
    "k",
    "completed",
    "timed_out",
    "shd_mean",
    "shd_std",
    "runtime_mean",
    "runtime_std",
]

EVAL_THRESHOLD = 1e-8


def _derived_seed(base: int, *indices: int) -> int:
    ss = np.random.SeedSequence((int(base) & (2**64 - 1), *indices))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def run_cell(
    config: RunConfig,
    d: int,
    n: int,
    t: int,
    k: int,
    cell_index: int,
    seed_index: int,
) -> dict:
    """One simulate/fit/score pass; returns a flat result row."""
    graph_spec = replace(
        config.graph, d=d, k=k, seed=_derived_seed(config.graph.seed, cell_index, seed_index, 0)
    )
    shock_spec = replace(config.shocks, seed=_derived_seed(config.shocks.seed, cell_index, seed_index, 1))
    fit_cfg = replace(config.fit, seed=_derived_seed(config.fit.seed, cell_index, seed_index, 2))

    row = {
        "cell": cell_index,
        "d": d,
        "n": n,
        "t": t,
        "k": k,
        "seed_index": seed_index,
        "status": STATUS_OK,
    }
    start = time.monotonic()
    deadline = start + config.bench.timeout if config.bench.timeout is not None else None
    w_true, s_true, x = generate_dataset(graph_spec, shock_spec, n, t)
    try:
        if deadline is not None and time.monotonic() > deadline:
            raise FitTimeout("budget consumed during generation")
        report = fit(x, k, fit_cfg, deadline=deadline)
    except FitTimeout:
        row["status"] = STATUS_TIMED_OUT
        row["runtime_seconds"] = time.monotonic() - start
        return row
    row["runtime_seconds"] = time.monotonic() - start

    score = score_graph(report.w_hat, w_true, EVAL_THRESHOLD, weights=np.abs(report.w_dense.stacked))
    x_past = build_past_embedding(x, k)
    s_dense, _ = recover_shocks(x, x_past, report.w_hat, shock_spec.significance_threshold)
    shocks = score_shocks(s_dense, s_true, shock_spec.significance_threshold)
    row.update(
        {
            "shd": score.shd,
            "precision": score.precision,
            "recall": score.recall,
            "f1": score.f1,
            "auroc": score.auroc,
            "nmse": score.nmse,
            "shock_shd": shocks.shock_shd,
            "shock_nmse": shocks.shock_nmse,
            "beta_hat": report.beta_hat,
            "h_final": report.h_final,
            "epochs_run": report.epochs_run,
            "stop_reason": report.stop_reason,
        }
    )
    return row


def _cell_worker(args) -> dict:
    return run_cell(*args)


def run_bench(config: RunConfig, out_dir: str | Path, parallel_cells: int = 1) -> list[dict]:
    """Run the whole grid, flushing each row as it completes.

    Writes ``bench_results.csv`` / ``bench_results.jsonl`` (one row per cell
    and seed) and ``bench_aggregate.csv`` (mean and standard deviation over
    the completed seeds of each cell).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = config.bench.cells()
    jobs = [
        (config, d, n, t, k, cell_index, seed_index)
        for cell_index, (d, n, t, k) in enumerate(cells)
        for seed_index in range(config.bench.seeds)
    ]

    results_csv = out_dir / "bench_results.csv"
    results_jsonl = out_dir / "bench_results.jsonl"
    rows: list[dict] = []
    with results_csv.open("w", newline="") as csv_handle, results_jsonl.open("w") as jsonl_handle:
        writer = csv.DictWriter(csv_handle, fieldnames=RESULT_COLUMNS, restval="")
        writer.writeheader()
        csv_handle.flush()

        def emit(row: dict) -> None:
            rows.append(row)
            writer.writerow(row)
            csv_handle.flush()
            jsonl_handle.write(json.dumps(row, sort_keys=True) + "\n")
            jsonl_handle.flush()

        if parallel_cells > 1:
            with ProcessPoolExecutor(max_workers=parallel_cells) as pool:
                for row in pool.map(_cell_worker, jobs):
                    emit(row)
        else:
            for job in jobs:
                emit(run_cell(*job))

    rows.sort(key=lambda r: (r["cell"], r["seed_index"]))
    _write_aggregate(out_dir / "bench_aggregate.csv", cells, rows)
    return rows


def _write_aggregate(path: Path, cells: list[tuple[int, int, int, int]], rows: list[dict]) -> None:
    with path.open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=AGGREGATE_COLUMNS)
        writer.writeheader()
        for cell_index, (d, n, t, k) in enumerate(cells):
            cell_rows = [r for r in rows if r["cell"] == cell_index]
            done = [r for r in cell_rows if r["status"] == STATUS_OK]
            shds = [float(r["shd"]) for r in done]
            times = [float(r["runtime_seconds"]) for r in cell_rows]
            writer.writerow(
                {
                    "cell": cell_index,
                    "d": d,
                    "n": n,
                    "t": t,
                    "k": k,
                    "completed": len(done),
                    "timed_out": len(cell_rows) - len(done),
                    "shd_mean": statistics.mean(shds) if shds else "",
                    "shd_std": statistics.stdev(shds) if len(shds) > 1 else (0.0 if shds else ""),
                    "runtime_mean": statistics.mean(times) if times else "",
                    "runtime_std": statistics.stdev(times) if len(times) > 1 else (0.0 if times else ""),
                }
            )
