"""Recovery metrics for window graphs and shock tensors.

Graph metrics binarize at a magnitude threshold and compare edge sets.  A
reversed edge (present in opposite orientations within the same lag block)
costs one edit; the convention is recorded in :data:`REVERSAL_CONVENTION`
so downstream comparisons can adjust.  The ranking metric excludes the
structurally-zero diagonal of the instantaneous block from its population.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from .core import ShockTensor, TimeSeriesTensor, WindowGraph

REVERSAL_CONVENTION = "within-block-reversal-counts-1"


@dataclass(frozen=True)
class GraphScore:
    """Bundle of graph-recovery metrics; ``*_defined`` flags mark the
    degenerate cases reported with their fallback values."""

    shd: int
    precision: float
    recall: float
    f1: float
    auroc: float
    nmse: float
    precision_defined: bool = True
    recall_defined: bool = True
    auroc_defined: bool = True

    def to_dict(self) -> dict:
        out = asdict(self)
        out["reversal_convention"] = REVERSAL_CONVENTION
        return out


@dataclass(frozen=True)
class ShockScore:
    """Support mismatch count and norm ratio for recovered shocks."""

    shock_shd: int
    shock_nmse: float
    threshold: float

    def to_dict(self) -> dict:
        return asdict(self)


def _check_same_shape(estimate: WindowGraph, truth: WindowGraph) -> None:
    if estimate.d != truth.d or estimate.k != truth.k:
        raise ValueError(
            f"estimate (d={estimate.d}, k={estimate.k}) and truth (d={truth.d}, k={truth.k}) differ"
        )


def _binarize(w: WindowGraph, threshold: float) -> np.ndarray:
    return np.abs(w.stacked) >= threshold


def shd(estimate: WindowGraph, truth: WindowGraph, threshold: float) -> int:
    """Edge insertions + removals + within-block reversals separating the
    binarized graphs."""
    _check_same_shape(estimate, truth)
    d = truth.d
    est = _binarize(estimate, threshold)
    tru = _binarize(truth, threshold)
    total = 0
    for tau in range(truth.k + 1):
        e = est[tau * d:(tau + 1) * d, :]
        t = tru[tau * d:(tau + 1) * d, :]
        mismatches = int(np.sum(e != t))
        # est holds i->j only where truth holds j->i only: two mismatched
        # cells that a single reversal fixes.
        rev = e & ~t & t.T & ~e.T
        total += mismatches - int(np.sum(rev))
    return total


def prf1(
    estimate: WindowGraph, truth: WindowGraph, threshold: float
) -> tuple[float, float, float, bool, bool]:
    """Edge-set precision, recall, and F1 over the binarized stacked matrix.

    Returns ``(precision, recall, f1, precision_defined, recall_defined)``;
    an empty estimate leaves precision undefined (reported 0), an empty
    truth leaves recall undefined (reported 0).
    """
    _check_same_shape(estimate, truth)
    est = _binarize(estimate, threshold)
    tru = _binarize(truth, threshold)
    tp = int(np.sum(est & tru))
    n_est = int(np.sum(est))
    n_tru = int(np.sum(tru))
    precision_defined = n_est > 0
    recall_defined = n_tru > 0
    precision = tp / n_est if precision_defined else 0.0
    recall = tp / n_tru if recall_defined else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1, precision_defined, recall_defined


def _score_population(d: int, k: int) -> np.ndarray:
    """Mask selecting learnable cells of the stacked matrix (the diagonal of
    the instantaneous block is structurally zero and excluded)."""
    mask = np.ones((d * (k + 1), d), dtype=bool)
    np.fill_diagonal(mask[:d, :], False)
    return mask


def auroc(weights: np.ndarray, truth: WindowGraph) -> float:
    """Rank-based area under the ROC curve of ``|weight|`` scores against the
    truth's edge labels, midranks for ties; degenerate labelings score 0.5."""
    d, k = truth.d, truth.k
    weights = np.abs(np.asarray(weights, dtype=float))
    if weights.shape != (d * (k + 1), d):
        raise ValueError(f"weights have shape {weights.shape}, expected ({d * (k + 1)}, {d})")
    mask = _score_population(d, k)
    scores = weights[mask]
    labels = (np.abs(truth.stacked) > 0)[mask]
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return 0.5
    ranks = rankdata(scores, method="average")
    u = float(np.sum(ranks[labels])) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def nmse(estimate: WindowGraph, truth: WindowGraph) -> float:
    """Frobenius-norm ratio ||estimate - truth|| / ||truth||."""
    _check_same_shape(estimate, truth)
    denom = float(np.linalg.norm(truth.stacked))
    if denom == 0.0:
        raise ValueError("truth graph has zero norm")
    return float(np.linalg.norm(estimate.stacked - truth.stacked)) / denom


def shock_nmse(s_hat: ShockTensor, s_true: ShockTensor) -> float:
    """Frobenius-norm ratio for recovered shock tensors."""
    if s_hat.shape != s_true.shape:
        raise ValueError(f"shapes differ: {s_hat.shape} vs {s_true.shape}")
    denom = float(np.linalg.norm(s_true.values))
    if denom == 0.0:
        raise ValueError("true shock tensor has zero norm")
    return float(np.linalg.norm(s_hat.values - s_true.values)) / denom


def shock_shd(s_hat: ShockTensor, s_true: ShockTensor, threshold: float) -> int:
    """Entrywise mismatch count between thresholded shock supports."""
    if s_hat.shape != s_true.shape:
        raise ValueError(f"shapes differ: {s_hat.shape} vs {s_true.shape}")
    return int(np.sum((np.abs(s_hat.values) >= threshold) != (np.abs(s_true.values) >= threshold)))


def alignment_fraction(
    s_hat: ShockTensor, x: TimeSeriesTensor, threshold: float
) -> tuple[int, float]:
    """How many significant shocks move the data the way their sign predicts.

    Over entries with ``|s| >= threshold`` (the final step has no successor
    and is excluded), counts those satisfying the strict inequality
    ``s * (x_next - (1 + s/2) * x) > 0`` and returns ``(count, fraction)``;
    an empty selection reports fraction 0.
    """
    if s_hat.shape != x.shape:
        raise ValueError(f"shapes differ: {s_hat.shape} vs {x.shape}")
    if x.n_steps < 2:
        raise ValueError("need at least two time steps")
    s = s_hat.values[:, :-1, :]
    x_now = x.values[:, :-1, :]
    x_next = x.values[:, 1:, :]
    significant = np.abs(s) >= threshold
    count = int(significant.sum())
    if count == 0:
        return 0, 0.0
    aligned = s * (x_next - (1.0 + s / 2.0) * x_now) > 0.0
    return count, float(np.sum(aligned & significant)) / count


def score_graph(
    estimate: WindowGraph,
    truth: WindowGraph,
    threshold: float,
    weights: np.ndarray | None = None,
) -> GraphScore:
    """Full metric bundle; ``weights`` default to the estimate's magnitudes
    (pass the pre-threshold matrix for a meaningful ranking score)."""
    _check_same_shape(estimate, truth)
    precision, recall, f1, precision_defined, recall_defined = prf1(estimate, truth, threshold)
    if weights is None:
        weights = np.abs(estimate.stacked)
    mask = _score_population(truth.d, truth.k)
    labels = (np.abs(truth.stacked) > 0)[mask]
    auroc_defined = 0 < int(labels.sum()) < labels.size
    return GraphScore(
        shd=shd(estimate, truth, threshold),
        precision=precision,
        recall=recall,
        f1=f1,
        auroc=auroc(weights, truth),
        nmse=nmse(estimate, truth),
        precision_defined=precision_defined,
        recall_defined=recall_defined,
        auroc_defined=auroc_defined,
    )


def score_shocks(s_hat: ShockTensor, s_true: ShockTensor, threshold: float) -> ShockScore:
    return ShockScore(
        shock_shd=shock_shd(s_hat, s_true, threshold),
        shock_nmse=shock_nmse(s_hat, s_true),
        threshold=threshold,
    )
