"""Synthetic data generation: random window graphs, sparse shocks, stable panels.

Graphs are directed Erdos-Renyi blocks.  The instantaneous block is made
acyclic by sampling a uniformly random vertex order and admitting only
forward edges; expected edge counts follow the undirected-degree convention
``d * degree / 2`` per block.  Shocks come from either a zero-centered
double-exponential or a Bernoulli-uniform mixture, both driving the
recurrence in :mod:`svarsparse.core`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import NonFinite, ShockTensor, TimeSeriesTensor, WindowGraph, rollout

LAPLACE = "laplace"
BERNOULLI = "bernoulli"

# Discard a generated panel when the summed magnitude of the data exceeds
# 1e6 per entry; regenerate graph and shocks from fresh sub-seeds.
REJECTION_MEAN_BOUND = 1e6
MAX_ATTEMPTS = 100


class RejectionBudgetExhausted(RuntimeError):
    """Every regeneration attempt produced unbounded data; the spec is pathological."""


def _mask64(seed: int) -> int:
    return int(seed) & (2**64 - 1)


@dataclass(frozen=True)
class GraphSpec:
    """Parameters of the random window-graph sampler."""

    d: int
    k: int
    mean_degree_b0: float = 5.0
    mean_degree_lag: float = 2.0
    weight_low: float = 0.1
    weight_high: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.d <= 0:
            raise ValueError("d must be positive")
        if self.k < 0:
            raise ValueError("k must be non-negative")
        if not (0.0 < self.weight_low < self.weight_high):
            raise ValueError("need 0 < weight_low < weight_high")
        for name, deg in (("mean_degree_b0", self.mean_degree_b0), ("mean_degree_lag", self.mean_degree_lag)):
            if deg < 0 or deg > self.d - 1:
                raise ValueError(f"{name} must lie in [0, d-1]")


@dataclass(frozen=True)
class ShockSpec:
    """Parameters of the sparse shock sampler.

    ``distribution`` selects between ``"laplace"`` (scale ``beta``) and
    ``"bernoulli"`` (each entry non-zero with probability ``p``, magnitude
    uniform on ``[low, high]`` with random sign, Gaussian noise of standard
    deviation ``noise_sigma`` added everywhere).  ``significance_threshold``
    is the magnitude that separates significant shocks from noise.
    """

    distribution: str = BERNOULLI
    beta: float = 1.0 / 3.0
    p: float = 0.05
    low: float = 0.1
    high: float = 1.0
    noise_sigma: float = 0.01
    significance_threshold: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.distribution not in (LAPLACE, BERNOULLI):
            raise ValueError(f"unknown distribution {self.distribution!r}")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if not (0.0 <= self.p <= 1.0):
            raise ValueError("p must lie in [0, 1]")
        if not (0.0 < self.low < self.high):
            raise ValueError("need 0 < low < high")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.significance_threshold < 0:
            raise ValueError("significance_threshold must be non-negative")


def sample_window_graph(spec: GraphSpec, rng: np.random.Generator) -> WindowGraph:
    """Draw a random window graph with an acyclic instantaneous block.

    Edges forward in a random vertex order are kept with probability
    ``mean_degree_b0 / (d - 1)`` so the instantaneous block carries
    ``d * mean_degree_b0 / 2`` edges in expectation; each lag block keeps
    each ordered pair with probability ``mean_degree_lag / (2d)``.  Every
    kept edge gets weight ``u * sigma`` with ``u ~ Uniform[weight_low,
    weight_high]`` and an equiprobable sign.
    """
    d, k = spec.d, spec.k
    order = rng.permutation(d)
    rank = np.empty(d, dtype=int)
    rank[order] = np.arange(d)
    forward = rank[:, None] < rank[None, :]

    p_b0 = spec.mean_degree_b0 / (d - 1) if d > 1 else 0.0
    p_lag = spec.mean_degree_lag / (2.0 * d)

    blocks = []
    for tau in range(k + 1):
        keep = rng.random((d, d)) < (p_b0 if tau == 0 else p_lag)
        if tau == 0:
            keep &= forward
        magnitude = rng.uniform(spec.weight_low, spec.weight_high, size=(d, d))
        sign = rng.integers(0, 2, size=(d, d)) * 2 - 1
        blocks.append(np.where(keep, sign * magnitude, 0.0))
    return WindowGraph(tuple(blocks), validated=True)


def sample_shocks(spec: ShockSpec, n: int, t: int, d: int, rng: np.random.Generator) -> ShockTensor:
    """Draw an ``n x t x d`` shock tensor from the configured distribution."""
    shape = (n, t, d)
    if spec.distribution == LAPLACE:
        # Inverse CDF: s = -beta * sign(u) * ln(1 - 2|u|), u ~ Uniform(-1/2, 1/2).
        u = rng.random(shape) - 0.5
        inner = np.maximum(1.0 - 2.0 * np.abs(u), np.finfo(float).tiny)
        values = -spec.beta * np.sign(u) * np.log(inner)
    else:
        keep = rng.random(shape) < spec.p
        magnitude = rng.uniform(spec.low, spec.high, size=shape)
        sign = rng.integers(0, 2, size=shape) * 2 - 1
        values = np.where(keep, sign * magnitude, 0.0)
        values = values + rng.normal(0.0, spec.noise_sigma, size=shape)
    return ShockTensor(values)


def laplace_tail_fraction(beta: float, omega: float) -> float:
    """Probability that a double-exponential draw with scale ``beta`` exceeds
    ``omega`` in magnitude: ``exp(-omega / beta)``."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    if omega < 0:
        raise ValueError("omega must be non-negative")
    return math.exp(-omega / beta)


def _shock_rng(spec: ShockSpec, attempt: int, sample: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((_mask64(spec.seed), attempt, sample)))


def _graph_rng(spec: GraphSpec, attempt: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((_mask64(spec.seed), attempt)))


def generate_dataset(
    graph_spec: GraphSpec,
    shock_spec: ShockSpec,
    n: int,
    t: int,
) -> tuple[WindowGraph, ShockTensor, TimeSeriesTensor]:
    """Sample a graph, sample shocks, roll the recurrence forward; reject and
    regenerate everything from fresh sub-seeds when the data is unbounded.

    Shocks are drawn sample-by-sample from seeds derived as (seed, attempt,
    sample index), so parallel generation across samples cannot change the
    result.
    """
    d = graph_spec.d
    for attempt in range(MAX_ATTEMPTS):
        w = sample_window_graph(graph_spec, _graph_rng(graph_spec, attempt))
        shocks = np.concatenate(
            [sample_shocks(shock_spec, 1, t, d, _shock_rng(shock_spec, attempt, i)).values for i in range(n)],
            axis=0,
        )
        s = ShockTensor(shocks)
        try:
            x = rollout(w, s)
        except NonFinite:
            continue
        if np.sum(np.abs(x.values)) > REJECTION_MEAN_BOUND * n * t * d:
            continue
        return w, s, x
    raise RejectionBudgetExhausted(
        f"{MAX_ATTEMPTS} consecutive generations exceeded the magnitude bound; "
        "check the graph weights and degrees"
    )
