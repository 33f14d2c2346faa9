"""Core SVAR data types, the lag embedding, and the generating recurrence.

The model couples every observation vector to its own time step (an
instantaneous adjacency) and to up to ``k`` earlier steps (lagged
adjacencies).  All coefficient blocks are collected in a single stacked
matrix of shape ``d*(k+1) x d`` whose block-rows are the instantaneous
block followed by the lag blocks in increasing lag order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve


class CyclicGraph(ValueError):
    """Instantaneous block contains a directed cycle."""


class SingularSystem(ValueError):
    """(I - B0) is numerically singular; the recurrence cannot be solved."""


class NonFinite(ValueError):
    """A generated or supplied value is NaN or infinite."""


def _as_readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class WindowGraph:
    """Stacked SVAR coefficient matrix.

    Parameters
    ----------
    blocks : sequence of ndarray
        ``k+1`` dense ``d x d`` matrices, instantaneous block first.
    validated : bool
        True only when the instantaneous block has been certified acyclic
        by exact cycle search (never by the smooth penalty).
    """

    blocks: tuple[np.ndarray, ...]
    validated: bool = False

    def __post_init__(self):
        if len(self.blocks) == 0:
            raise ValueError("need at least the instantaneous block")
        blocks = tuple(_as_readonly(b) for b in self.blocks)
        d = blocks[0].shape[0]
        for i, b in enumerate(blocks):
            if b.ndim != 2 or b.shape != (d, d):
                raise ValueError(f"block {i} has shape {b.shape}, expected ({d}, {d})")
            if not np.all(np.isfinite(b)):
                raise NonFinite(f"block {i} contains non-finite entries")
        if np.any(np.diag(blocks[0]) != 0.0):
            raise ValueError("instantaneous block must have a zero diagonal")
        object.__setattr__(self, "blocks", blocks)

    @property
    def d(self) -> int:
        return self.blocks[0].shape[0]

    @property
    def k(self) -> int:
        return len(self.blocks) - 1

    @property
    def b0(self) -> np.ndarray:
        return self.blocks[0]

    @property
    def stacked(self) -> np.ndarray:
        """The ``d*(k+1) x d`` stacked view, instantaneous block-rows first."""
        return np.vstack(self.blocks)

    @classmethod
    def from_stacked(cls, w: np.ndarray, d: int, k: int, validated: bool = False) -> "WindowGraph":
        w = np.asarray(w, dtype=float)
        if w.shape != (d * (k + 1), d):
            raise ValueError(f"stacked matrix has shape {w.shape}, expected ({d * (k + 1)}, {d})")
        blocks = tuple(w[tau * d:(tau + 1) * d, :] for tau in range(k + 1))
        return cls(blocks, validated=validated)

    @classmethod
    def zeros(cls, d: int, k: int) -> "WindowGraph":
        return cls(tuple(np.zeros((d, d)) for _ in range(k + 1)), validated=True)

    def validate(self) -> "WindowGraph":
        """Return a copy flagged `validated` after exact cycle search on B0."""
        if self.validated:
            return self
        if not is_acyclic_exact(self.b0, 0.0):
            raise CyclicGraph("instantaneous block contains a directed cycle")
        return WindowGraph(self.blocks, validated=True)

    def scaled(self, factor: float) -> "WindowGraph":
        """Uniformly rescale all edge weights (support, hence acyclicity, is preserved)."""
        return WindowGraph(tuple(b * float(factor) for b in self.blocks), validated=self.validated)


def _check_3d(values: np.ndarray, what: str) -> np.ndarray:
    out = np.array(values, dtype=float)
    if out.ndim != 3:
        raise ValueError(f"{what} must be a 3-d array (samples, steps, variables), got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise NonFinite(f"{what} contains non-finite entries")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TimeSeriesTensor:
    """Observed panel: ``n_samples x n_steps x n_vars`` of finite values."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _check_3d(self.values, "data tensor"))

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_steps(self) -> int:
        return self.values.shape[1]

    @property
    def n_vars(self) -> int:
        return self.values.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape

    @classmethod
    def from_matrix(cls, x: np.ndarray) -> "TimeSeriesTensor":
        """Wrap a single ``T x d`` realization as a one-sample tensor."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 2:
            raise ValueError(f"expected a 2-d array, got shape {x.shape}")
        return cls(x[None, :, :])


@dataclass(frozen=True)
class ShockTensor:
    """Structural input: same shape contract as the paired data tensor."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _check_3d(self.values, "shock tensor"))

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_steps(self) -> int:
        return self.values.shape[1]

    @property
    def n_vars(self) -> int:
        return self.values.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape


@dataclass(frozen=True)
class PastTensor:
    """Lag-embedded regressors: ``n_samples x n_steps x d*(k+1)``.

    Row ``(n, t)`` is the concatenation ``(x_t, x_{t-1}, ..., x_{t-k})``
    with zero vectors substituted wherever ``t - tau < 0``.
    """

    values: np.ndarray
    k: int
    n_vars: int = field(init=False)

    def __post_init__(self):
        values = _check_3d(self.values, "past tensor")
        if self.k < 0:
            raise ValueError("lag count must be non-negative")
        if values.shape[2] % (self.k + 1) != 0:
            raise ValueError(
                f"last axis {values.shape[2]} is not divisible by k+1 = {self.k + 1}"
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "n_vars", values.shape[2] // (self.k + 1))

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_steps(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape


def build_past_embedding(x: TimeSeriesTensor, k: int) -> PastTensor:
    """Stack each time step with its ``k`` predecessors, zero-padding before t=0.

    Column block ``tau`` at step ``t`` equals the source at step ``t - tau``
    when that index is non-negative and is exactly zero otherwise.
    """
    if k < 0:
        raise ValueError("lag count must be non-negative")
    v = x.values
    n, t, d = v.shape
    out = np.zeros((n, t, d * (k + 1)))
    for tau in range(k + 1):
        if tau == 0:
            out[:, :, :d] = v
        elif tau < t:
            out[:, tau:, tau * d:(tau + 1) * d] = v[:, :t - tau, :]
    return PastTensor(out, k=k)


def svar_residual(x: TimeSeriesTensor, x_past: PastTensor, w: WindowGraph) -> ShockTensor:
    """Recover the input implied by a coefficient matrix: X - X_past W."""
    if x_past.shape[:2] != x.values.shape[:2] or x_past.n_vars != x.n_vars:
        raise ValueError(
            f"past tensor shape {x_past.shape} inconsistent with data shape {x.shape}"
        )
    if w.d != x.n_vars or w.k != x_past.k:
        raise ValueError(
            f"graph with d={w.d}, k={w.k} inconsistent with data d={x.n_vars}, k={x_past.k}"
        )
    return ShockTensor(x.values - x_past.values @ w.stacked)


def rollout(w: WindowGraph, s: ShockTensor) -> TimeSeriesTensor:
    """Generate data by solving the recurrence forward in time.

    For each sample and step, ``x_t = (s_t + sum_tau x_{t-tau} B_tau)(I - B0)^-1``
    with ``x_t = 0`` for ``t < 0``.  The instantaneous system is LU-factored
    once and the factorization is reused across steps and samples.
    """
    w = w.validate()
    if s.n_vars != w.d:
        raise ValueError(f"shock tensor has {s.n_vars} variables, graph has {w.d}")
    n, t, d = s.shape
    k = w.k
    # Right-multiplication x_t (I - B0) = rhs_t transposes to a standard solve.
    try:
        factor = lu_factor((np.eye(d) - w.b0).T)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - acyclic B0 cannot trigger this
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(factor[0])):
        raise SingularSystem("(I - B0) produced a non-finite factorization")

    sv = s.values
    out = np.zeros((n, t, d))
    for step in range(t):
        rhs = sv[:, step, :].copy()
        for tau in range(1, k + 1):
            if step - tau >= 0:
                rhs += out[:, step - tau, :] @ w.blocks[tau]
        out[:, step, :] = lu_solve(factor, rhs.T).T
    if not np.all(np.isfinite(out)):
        raise NonFinite("rollout produced non-finite values")
    return TimeSeriesTensor(out)


def stability_margin(w: WindowGraph) -> float:
    """Total absolute weight flowing into the most loaded variable.

    This is the matrix norm induced by the sup norm on row-vector data,
    computed on the stacked coefficient matrix: the maximum over the ``d``
    columns of the summed absolute column entries.  A margin below one
    certifies that bounded inputs produce output bounded by
    ``max|input| / (1 - margin)``; a margin of one or more proves nothing.
    """
    stacked = w.stacked
    if stacked.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(stacked), axis=0)))


def is_acyclic_exact(b0: np.ndarray, edge_tolerance: float = 0.0) -> bool:
    """Exact acyclicity of the digraph with edges ``|b0[i, j]| > edge_tolerance``.

    Kahn ordering: repeatedly peel vertices with no unresolved predecessors.
    """
    b0 = np.asarray(b0)
    if b0.ndim != 2 or b0.shape[0] != b0.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {b0.shape}")
    adj = np.abs(b0) > edge_tolerance
    d = adj.shape[0]
    indegree = adj.sum(axis=0)
    ready = [j for j in range(d) if indegree[j] == 0]
    seen = 0
    while ready:
        i = ready.pop()
        seen += 1
        for j in np.flatnonzero(adj[i]):
            indegree[j] -= 1
            if indegree[j] == 0:
                ready.append(j)
    return seen == d
