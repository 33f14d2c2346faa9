"""Structured run configuration with strict key checking.

A config document is JSON with sections ``graph``, ``shocks``, ``fit``,
``bench``, and ``io``.  Every field has a default; any key that does not
name a field is a hard error so typos cannot silently fall back to
defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .estimate import FitConfig
from .simulate import GraphSpec, ShockSpec


class UnknownConfigKey(ValueError):
    """Config document contains a key that matches no known field."""


@dataclass(frozen=True)
class BenchSpec:
    """Sweep grid: the cell list is the cartesian product of the axes."""

    d: tuple[int, ...] = (20,)
    n: tuple[int, ...] = (10,)
    t: tuple[int, ...] = (1000,)
    k: tuple[int, ...] = (2,)
    seeds: int = 5
    timeout: float | None = 10_000.0

    def __post_init__(self):
        for name in ("d", "n", "t", "k"):
            values = tuple(int(v) for v in getattr(self, name))
            if not values or any(v < (0 if name == "k" else 1) for v in values):
                raise ValueError(f"bench.{name} must be a non-empty list of valid sizes")
            object.__setattr__(self, name, values)
        if self.seeds < 1:
            raise ValueError("bench.seeds must be at least 1")
        if self.timeout is not None and self.timeout <= 0:
            raise ValueError("bench.timeout must be positive or null")

    def cells(self) -> list[tuple[int, int, int, int]]:
        return [
            (d, n, t, k)
            for d in self.d
            for n in self.n
            for t in self.t
            for k in self.k
        ]


@dataclass(frozen=True)
class IoSpec:
    out_dir: str = "runs"


_GRAPH_DEFAULTS = {"d": 20, "k": 2}


@dataclass(frozen=True)
class RunConfig:
    graph: GraphSpec = field(default_factory=lambda: GraphSpec(**_GRAPH_DEFAULTS))
    shocks: ShockSpec = field(default_factory=ShockSpec)
    fit: FitConfig = field(default_factory=FitConfig)
    bench: BenchSpec = field(default_factory=BenchSpec)
    io: IoSpec = field(default_factory=IoSpec)


_SECTIONS = {
    "graph": (GraphSpec, _GRAPH_DEFAULTS),
    "shocks": (ShockSpec, {}),
    "fit": (FitConfig, {}),
    "bench": (BenchSpec, {}),
    "io": (IoSpec, {}),
}


def _build_section(name: str, cls, defaults: dict, data: dict):
    if not isinstance(data, dict):
        raise UnknownConfigKey(f"section {name!r} must be an object")
    allowed = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise UnknownConfigKey(f"unknown config key {name}.{unknown[0]!r}")
    merged = dict(defaults)
    merged.update(data)
    for key, value in merged.items():
        if isinstance(value, list):
            merged[key] = tuple(value)
    return cls(**merged)


def run_config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise UnknownConfigKey("config document must be a JSON object")
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise UnknownConfigKey(f"unknown config key {unknown[0]!r}")
    built = {}
    for name, (cls, defaults) in _SECTIONS.items():
        built[name] = _build_section(name, cls, defaults, data.get(name, {}))
    return RunConfig(**built)


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    return run_config_from_dict(json.loads(path.read_text()))
