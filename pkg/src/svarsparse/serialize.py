"""CSV/JSON serialization for window graphs and tensors.

Graphs are stored as one CSV of the stacked coefficient matrix plus a JSON
sidecar ``{"d": ..., "k": ...}``.  Tensors are stored as one CSV per sample
(``n_steps`` rows by ``n_vars`` columns) indexed ``<prefix>_0000.csv``,
``<prefix>_0001.csv``, ... plus a JSON manifest recording the shape.

Floats are written with ``repr``, the shortest decimal that round-trips, so
identical inputs serialize to identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import ShockTensor, TimeSeriesTensor, WindowGraph


def _write_matrix_csv(path: Path, matrix: np.ndarray) -> None:
    lines = [",".join(repr(float(v)) for v in row) for row in matrix]
    path.write_text("\n".join(lines) + "\n")


def _read_matrix_csv(path: Path) -> np.ndarray:
    rows = []
    for line in path.read_text().splitlines():
        if line:
            rows.append([float(v) for v in line.split(",")])
    return np.asarray(rows, dtype=float)


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def save_window_graph(w: WindowGraph, csv_path: str | Path) -> Path:
    """Write the stacked matrix plus its ``{d, k}`` sidecar; returns the sidecar path."""
    csv_path = Path(csv_path)
    _write_matrix_csv(csv_path, w.stacked)
    sidecar = csv_path.with_suffix(".json")
    write_json(sidecar, {"d": w.d, "k": w.k})
    return sidecar


def load_window_graph(csv_path: str | Path, validated: bool = False) -> WindowGraph:
    csv_path = Path(csv_path)
    if not csv_path.exists():
        raise FileNotFoundError(str(csv_path))
    sidecar = csv_path.with_suffix(".json")
    if not sidecar.exists():
        raise FileNotFoundError(str(sidecar))
    meta = json.loads(sidecar.read_text())
    stacked = _read_matrix_csv(csv_path)
    return WindowGraph.from_stacked(stacked, d=int(meta["d"]), k=int(meta["k"]), validated=validated)


def tensor_filename(prefix: str, index: int) -> str:
    return f"{prefix}_{index:04d}.csv"


def save_tensor(values: np.ndarray, directory: str | Path, prefix: str) -> list[Path]:
    """Write one CSV per sample plus ``<prefix>_manifest.json``; returns the CSV paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    values = np.asarray(values, dtype=float)
    if values.ndim != 3:
        raise ValueError(f"expected a 3-d tensor, got shape {values.shape}")
    n, t, d = values.shape
    paths = []
    for i in range(n):
        path = directory / tensor_filename(prefix, i)
        _write_matrix_csv(path, values[i])
        paths.append(path)
    write_json(directory / f"{prefix}_manifest.json", {"N": n, "T": t, "d": d})
    return paths


def load_tensor(directory: str | Path, prefix: str) -> np.ndarray:
    directory = Path(directory)
    manifest_path = directory / f"{prefix}_manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(str(manifest_path))
    meta = json.loads(manifest_path.read_text())
    n, t, d = int(meta["N"]), int(meta["T"]), int(meta["d"])
    out = np.zeros((n, t, d))
    for i in range(n):
        path = directory / tensor_filename(prefix, i)
        if not path.exists():
            raise FileNotFoundError(str(path))
        matrix = _read_matrix_csv(path)
        if matrix.shape != (t, d):
            raise ValueError(f"{path} has shape {matrix.shape}, manifest says ({t}, {d})")
        out[i] = matrix
    return out


def save_time_series(x: TimeSeriesTensor, directory: str | Path, prefix: str = "sample") -> list[Path]:
    return save_tensor(x.values, directory, prefix)


def load_time_series(directory: str | Path, prefix: str = "sample") -> TimeSeriesTensor:
    return TimeSeriesTensor(load_tensor(directory, prefix))


def save_shocks(s: ShockTensor, directory: str | Path, prefix: str = "shocks") -> list[Path]:
    return save_tensor(s.values, directory, prefix)


def load_shocks(directory: str | Path, prefix: str = "shocks") -> ShockTensor:
    return ShockTensor(load_tensor(directory, prefix))
