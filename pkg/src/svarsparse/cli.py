"""Command line interface: simulate, fit, eval, bench, ingest.

Heavy imports happen inside the command handlers so that ``--threads`` can
pin the BLAS thread pools before any numerical library loads.  Every error
path writes one JSON object to stderr and exits non-zero; exit code 0 means
all requested work completed (timed-out bench cells are completed work —
they are recorded and labeled).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

ENV_OUT = "SVARSPARSE_OUT"

_THREAD_ENV_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors are machine-parseable JSON."""

    def error(self, message):
        print(json.dumps({"error": "usage", "message": message}), file=sys.stderr)
        raise SystemExit(2)


def _emit_error(exc: BaseException) -> None:
    print(
        json.dumps({"error": type(exc).__name__, "message": str(exc)}, sort_keys=True),
        file=sys.stderr,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="svarsparse", description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, default=None, help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=None, help="override every config seed")
    parser.add_argument(
        "--out",
        type=Path,
        default=None,
        help=f"output directory (default: ${ENV_OUT} if set, else the config io.out_dir)",
    )
    parser.add_argument(
        "--preset",
        choices=["laplace-default", "bernoulli-default"],
        default=None,
        help="named estimator hyperparameter profile",
    )
    parser.add_argument("--loss", choices=["logl1", "mse"], default=None, help="estimator data term")
    parser.add_argument("--threads", type=int, default=None, help="BLAS thread count")

    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate a synthetic dataset")
    p_sim.add_argument("--d", type=int, default=None)
    p_sim.add_argument("--k", type=int, default=None)
    p_sim.add_argument("--n", type=int, default=None)
    p_sim.add_argument("--t", type=int, default=None)
    p_sim.add_argument("--distribution", choices=["laplace", "bernoulli"], default=None)
    p_sim.add_argument("--beta", type=float, default=None)
    p_sim.add_argument("--p", type=float, default=None)
    p_sim.set_defaults(handler=cmd_simulate)

    p_fit = sub.add_parser("fit", help="estimate a window graph from data")
    p_fit.add_argument("--data", type=Path, required=True, help="dataset directory or a single T x d CSV")
    p_fit.add_argument("--k", type=int, required=True, help="maximum lag to parametrize")
    p_fit.add_argument("--lambda1", type=float, default=None)
    p_fit.add_argument("--lambda2", type=float, default=None)
    p_fit.add_argument("--omega", type=float, default=None)
    p_fit.add_argument("--learning-rate", type=float, default=None)
    p_fit.add_argument("--max-epochs", type=int, default=None)
    p_fit.add_argument("--patience", type=int, default=None)
    p_fit.add_argument("--init", choices=["zero", "uniform"], default=None)
    p_fit.add_argument("--init-scale", type=float, default=None)
    p_fit.add_argument(
        "--shock-threshold", type=float, default=0.1, help="magnitude below which recovered shocks are zeroed"
    )
    p_fit.set_defaults(handler=cmd_fit)

    p_eval = sub.add_parser("eval", help="score an estimate against ground truth")
    p_eval.add_argument("--estimate", type=Path, default=None, help="directory written by `fit`")
    p_eval.add_argument("--truth", type=Path, default=None, help="directory written by `simulate`")
    p_eval.add_argument(
        "--pair",
        action="append",
        default=None,
        metavar="ESTIMATE:TRUTH",
        help="repeatable estimate:truth directory pair (aggregates over pairs)",
    )
    p_eval.add_argument("--threshold", type=float, default=1e-8, help="edge binarization magnitude")
    p_eval.set_defaults(handler=cmd_eval)

    p_bench = sub.add_parser("bench", help="sweep the config's bench grid")
    p_bench.add_argument("--parallel-cells", type=int, default=1)
    p_bench.set_defaults(handler=cmd_bench)

    p_ing = sub.add_parser("ingest", help="price CSV -> windowed log-return tensor")
    p_ing.add_argument("--prices", type=Path, required=True)
    p_ing.add_argument("--window", type=int, required=True)
    p_ing.add_argument("--standardize", action="store_true", help="per-ticker standardization of returns")
    p_ing.set_defaults(handler=cmd_ingest)

    return parser


def _apply_threads(threads: int | None) -> None:
    if threads is None:
        return
    if threads < 1:
        raise ValueError("--threads must be at least 1")
    for var in _THREAD_ENV_VARS:
        os.environ[var] = str(threads)


def _load_config(args):
    from .config import RunConfig, load_run_config

    config = load_run_config(args.config) if args.config else RunConfig()
    from dataclasses import replace

    if args.seed is not None:
        config = RunConfig(
            graph=replace(config.graph, seed=args.seed),
            shocks=replace(config.shocks, seed=args.seed),
            fit=replace(config.fit, seed=args.seed),
            bench=config.bench,
            io=config.io,
        )
    return config


def _resolve_out(args, config) -> Path:
    if args.out is not None:
        return args.out
    env = os.environ.get(ENV_OUT)
    if env:
        return Path(env)
    return Path(config.io.out_dir)


def _fit_config(args, config):
    """Config file, then the named preset's fields, then per-field CLI overrides."""
    from dataclasses import replace

    from .estimate import PRESETS

    cfg = config.fit
    if args.preset is not None:
        cfg = replace(cfg, **PRESETS[args.preset])
    overrides = {}
    for field_name, arg_name in [
        ("lambda1", "lambda1"),
        ("lambda2", "lambda2"),
        ("omega", "omega"),
        ("learning_rate", "learning_rate"),
        ("max_epochs", "max_epochs"),
        ("patience", "patience"),
        ("init", "init"),
        ("init_scale", "init_scale"),
    ]:
        value = getattr(args, arg_name, None)
        if value is not None:
            overrides[field_name] = value
    if args.loss is not None:
        overrides["loss"] = args.loss
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg


def cmd_simulate(args) -> None:
    from dataclasses import asdict, replace

    from . import serialize
    from .simulate import generate_dataset

    config = _load_config(args)
    graph_spec = config.graph
    shock_spec = config.shocks
    overrides = {}
    if args.d is not None:
        overrides["d"] = args.d
    if args.k is not None:
        overrides["k"] = args.k
    if overrides:
        graph_spec = replace(graph_spec, **overrides)
    shock_overrides = {}
    if args.distribution is not None:
        shock_overrides["distribution"] = args.distribution
    if args.beta is not None:
        shock_overrides["beta"] = args.beta
    if args.p is not None:
        shock_overrides["p"] = args.p
    if shock_overrides:
        shock_spec = replace(shock_spec, **shock_overrides)
    n = args.n if args.n is not None else 10
    t = args.t if args.t is not None else 1000

    out_dir = _resolve_out(args, config)
    out_dir.mkdir(parents=True, exist_ok=True)
    w, s, x = generate_dataset(graph_spec, shock_spec, n, t)
    serialize.save_window_graph(w, out_dir / "ground_truth.csv")
    serialize.save_time_series(x, out_dir, prefix="sample")
    serialize.save_shocks(s, out_dir, prefix="shocks")
    serialize.write_json(
        out_dir / "manifest.json",
        {
            "N": n,
            "T": t,
            "d": graph_spec.d,
            "k": graph_spec.k,
            "graph": asdict(graph_spec),
            "shocks": asdict(shock_spec),
            "conventions": {
                "mean_degree": "expected edges per block = d * degree / 2",
                "rejection": "regenerate graph and shocks when sum|X| > 1e6 * N * T * d",
            },
        },
    )
    print(str(out_dir))


def _load_fit_input(path: Path):
    from .core import TimeSeriesTensor
    from .serialize import _read_matrix_csv, load_time_series

    if path.is_dir():
        return load_time_series(path, prefix="sample")
    if not path.exists():
        raise FileNotFoundError(str(path))
    return TimeSeriesTensor.from_matrix(_read_matrix_csv(path))


def cmd_fit(args) -> None:
    from dataclasses import asdict

    from . import serialize
    from .core import build_past_embedding
    from .estimate import fit, recover_shocks

    config = _load_config(args)
    cfg = _fit_config(args, config)
    x = _load_fit_input(args.data)
    out_dir = _resolve_out(args, config)
    out_dir.mkdir(parents=True, exist_ok=True)

    start = time.monotonic()
    report = fit(x, args.k, cfg)
    wall = time.monotonic() - start

    serialize.save_window_graph(report.w_hat, out_dir / "w_hat.csv")
    serialize.save_window_graph(report.w_dense, out_dir / "w_dense.csv")
    x_past = build_past_embedding(x, args.k)
    dense, significant = recover_shocks(x, x_past, report.w_hat, args.shock_threshold)
    serialize.save_shocks(dense, out_dir, prefix="shocks_hat")
    serialize.save_shocks(significant, out_dir, prefix="shocks_significant")
    serialize.write_json(
        out_dir / "report.json",
        {
            "beta_hat": report.beta_hat,
            "h_final": report.h_final,
            "epochs_run": report.epochs_run,
            "stop_reason": report.stop_reason,
            "wall_time_seconds": wall,
            "shock_threshold": args.shock_threshold,
            "config": asdict(cfg),
            "loss_trace": list(report.loss_trace),
            "data": str(args.data),
            "k": args.k,
        },
    )
    print(str(out_dir))


def _eval_one(estimate_dir: Path, truth_dir: Path, threshold: float) -> dict:
    import numpy as np

    from .metrics import alignment_fraction, score_graph, score_shocks
    from .serialize import load_shocks, load_time_series, load_window_graph

    w_hat_path = estimate_dir / "w_hat.csv"
    truth_path = truth_dir / "ground_truth.csv"
    for required in (w_hat_path, truth_path):
        if not required.exists():
            raise FileNotFoundError(str(required))
    w_hat = load_window_graph(w_hat_path)
    truth = load_window_graph(truth_path)
    dense_path = estimate_dir / "w_dense.csv"
    weights = np.abs(load_window_graph(dense_path).stacked) if dense_path.exists() else None

    report_path = estimate_dir / "report.json"
    report = json.loads(report_path.read_text()) if report_path.exists() else {}
    manifest_path = truth_dir / "manifest.json"
    manifest = json.loads(manifest_path.read_text()) if manifest_path.exists() else {}
    shock_threshold = float(
        report.get("shock_threshold", manifest.get("shocks", {}).get("significance_threshold", 0.1))
    )

    row = {
        "method": "svarsparse-" + str(report.get("config", {}).get("loss", "logl1")),
        "instance": str(truth_dir),
        "estimate": str(estimate_dir),
        "seed": report.get("config", {}).get("seed"),
        "threshold": threshold,
    }
    row.update(score_graph(w_hat, truth, threshold, weights=weights).to_dict())

    if (truth_dir / "shocks_manifest.json").exists() and (estimate_dir / "shocks_hat_manifest.json").exists():
        s_true = load_shocks(truth_dir, prefix="shocks")
        s_hat = load_shocks(estimate_dir, prefix="shocks_hat")
        row.update(score_shocks(s_hat, s_true, shock_threshold).to_dict())
        if (truth_dir / "sample_manifest.json").exists():
            x = load_time_series(truth_dir, prefix="sample")
            count, fraction = alignment_fraction(s_hat, x, shock_threshold)
            row["alignment_count"] = count
            row["alignment_fraction"] = fraction
    return row


def cmd_eval(args) -> None:
    import csv as _csv
    import io
    import statistics

    from .serialize import write_json

    pairs: list[tuple[Path, Path]] = []
    if args.pair:
        for spec in args.pair:
            left, sep, right = spec.partition(":")
            if not sep:
                raise ValueError(f"--pair needs ESTIMATE:TRUTH, got {spec!r}")
            pairs.append((Path(left), Path(right)))
    if args.estimate is not None or args.truth is not None:
        if args.estimate is None or args.truth is None:
            raise ValueError("--estimate and --truth must be given together")
        pairs.append((args.estimate, args.truth))
    if not pairs:
        raise ValueError("nothing to evaluate: pass --estimate/--truth or --pair")

    rows = [_eval_one(est, tru, args.threshold) for est, tru in pairs]
    for (est, _), row in zip(pairs, rows):
        write_json(est / "metrics.json", row)

    columns = sorted({key for row in rows for key in row})
    buffer = io.StringIO()
    writer = _csv.DictWriter(buffer, fieldnames=columns, restval="")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    sys.stdout.write(buffer.getvalue())

    if len(rows) > 1:
        numeric = [
            c
            for c in columns
            if all(isinstance(r.get(c), (int, float)) and not isinstance(r.get(c), bool) for r in rows)
        ]
        aggregate = {}
        for c in numeric:
            values = [float(r[c]) for r in rows]
            aggregate[f"{c}_mean"] = statistics.mean(values)
            aggregate[f"{c}_std"] = statistics.stdev(values) if len(values) > 1 else 0.0
        config = _load_config(args)
        out_dir = _resolve_out(args, config)
        out_dir.mkdir(parents=True, exist_ok=True)
        with (out_dir / "eval_aggregate.csv").open("w", newline="") as handle:
            writer = _csv.DictWriter(handle, fieldnames=sorted(aggregate))
            writer.writeheader()
            writer.writerow(aggregate)


def cmd_bench(args) -> None:
    from .bench import run_bench
    from .config import RunConfig

    config = _load_config(args)
    config = RunConfig(
        graph=config.graph,
        shocks=config.shocks,
        fit=_fit_config(args, config),
        bench=config.bench,
        io=config.io,
    )
    out_dir = _resolve_out(args, config)
    run_bench(config, out_dir, parallel_cells=args.parallel_cells)
    print(str(out_dir))


def cmd_ingest(args) -> None:
    from . import serialize
    from .ingest import load_price_csv, log_returns, windowize

    config = _load_config(args)
    out_dir = _resolve_out(args, config)
    out_dir.mkdir(parents=True, exist_ok=True)
    panel = load_price_csv(args.prices)
    returns = log_returns(panel, standardize=args.standardize)
    windows = windowize(returns, args.window)
    serialize.save_time_series(windows, out_dir, prefix="sample")
    serialize.write_json(
        out_dir / "manifest.json",
        {
            "N": windows.n_samples,
            "T": windows.n_steps,
            "d": windows.n_vars,
            "tickers": list(panel.tickers),
            "date_range": [panel.dates[0], panel.dates[-1]],
            "window": args.window,
            "standardize": bool(args.standardize),
            "source": str(args.prices),
        },
    )
    print(str(out_dir))


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_threads(args.threads)
        args.handler(args)
    except SystemExit:
        raise
    except KeyboardInterrupt:
        _emit_error(RuntimeError("interrupted"))
        return 130
    except BaseException as exc:
        _emit_error(exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
