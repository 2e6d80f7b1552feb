"""Seeded sampling of site sets and the point-volume measure ``V_d(delta)``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import SiteSet

MASK64 = (1 << 64) - 1


class ConfigError(ValueError):
    pass


def substream(base: int, *key: int) -> np.random.Generator:
    """Independent PCG64 stream for ``(base, *key)``; the same key always yields the same stream."""
    base = int(base) & MASK64
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(base, spawn_key=tuple(int(k) for k in key))))


@dataclass(frozen=True)
class DistributionSpec:
    """Per-coordinate attribute distribution.

    ``kind == "uniform"`` is U(0, 1).  ``kind == "pwl"`` is given by its inverse
    CDF, piecewise linear through ``points = [(u, t), ...]``.
    """

    kind: str = "uniform"
    points: tuple[tuple[float, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind == "uniform":
            return
        if self.kind != "pwl":
            raise ConfigError(f"unknown distribution kind {self.kind!r}")
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise ConfigError("pwl distribution needs at least two (u, t) breakpoints")
        u, t = pts[:, 0], pts[:, 1]
        if u[0] != 0.0 or u[-1] != 1.0 or np.any(np.diff(u) <= 0):
            raise ConfigError("pwl breakpoints: u must increase strictly from 0 to 1")
        if np.any(np.diff(t) <= 0) or t[0] < 0.0 or t[-1] > 1.0:
            raise ConfigError("pwl breakpoints: t must increase strictly within [0, 1]")

    def inverse_cdf(self, u: np.ndarray) -> np.ndarray:
        if self.kind == "uniform":
            return np.asarray(u, dtype=float)
        pts = np.asarray(self.points, dtype=float)
        return np.interp(u, pts[:, 0], pts[:, 1])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.inverse_cdf(rng.random(size))

    @classmethod
    def from_json(cls, data) -> "DistributionSpec":
        if not isinstance(data, dict) or "kind" not in data:
            raise ConfigError(f"bad distribution spec {data!r}")
        if data["kind"] == "uniform":
            return cls("uniform")
        try:
            points = tuple((float(u), float(t)) for u, t in data["points"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad pwl points: {exc}") from exc
        return cls(data["kind"], points)

    def to_json(self) -> dict:
        if self.kind == "uniform":
            return {"kind": "uniform"}
        return {"kind": "pwl", "points": [list(p) for p in self.points]}


UNIFORM = DistributionSpec()


def _per_coordinate(spec, d: int) -> list[DistributionSpec]:
    if spec is None:
        return [UNIFORM] * d
    if isinstance(spec, DistributionSpec):
        return [spec] * d
    specs = list(spec)
    if len(specs) != d:
        raise ConfigError(f"got {len(specs)} distribution specs for d={d}")
    return specs


def sample_site_set(
    n: int,
    d: int,
    location_mode: str = "uniform",
    attr_spec: DistributionSpec | Sequence[DistributionSpec] | None = None,
    seed: int = 0,
    *,
    locations=None,
    rng: np.random.Generator | None = None,
) -> SiteSet:
    """Sample ``n`` sites with ``d`` attributes.

    Locations are fixed (``location_mode="file"``, taken from ``locations``) or
    uniform in the unit square; each attribute coordinate is drawn independently
    from its own distribution.  With ``rng`` omitted the draw is a pure function
    of ``seed``.
    """
    if n < 1 or d < 1:
        raise ConfigError("n and d must be >= 1")
    specs = _per_coordinate(attr_spec, d)
    if rng is None:
        rng = substream(seed)
    if location_mode == "uniform":
        locs = rng.random((n, 2))
    elif location_mode == "file":
        if locations is None:
            raise ConfigError("location_mode='file' needs locations")
        locs = np.asarray(locations, dtype=float).reshape(-1, 2)
        if len(locs) != n:
            raise ConfigError(f"{len(locs)} locations given for n={n}")
    else:
        raise ConfigError(f"unknown location mode {location_mode!r}")
    attrs = np.column_stack([s.sample(rng, n) for s in specs])
    return SiteSet(d, np.arange(n), locs, attrs)


def _log_inv(delta: float) -> float:
    # ln(1/delta); log1p keeps precision when delta is close to 1
    if delta > 0.5:
        return -math.log1p(delta - 1.0)
    return -math.log(delta)


def v_delta(d: int, delta: float) -> float:
    """Measure of ``{p in [0,1]^d : p_1 * ... * p_d <= delta}``.

    Closed form ``sum_{i<d} delta * ln(1/delta)^i / i!``, accumulated from the
    highest-order term down.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if not (0.0 < delta <= 1.0):
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    L = _log_inv(delta)
    total = 0.0
    for i in range(d - 1, -1, -1):
        total += L ** i / math.factorial(i)
    return min(1.0, delta * total)


@dataclass(frozen=True)
class VDeltaResult:
    value: float
    estimate: float
    stderr: float
    samples: int


def v_delta_mc(d: int, delta: float, samples: int, seed: int = 0, *, rng: np.random.Generator | None = None,
               chunk: int = 250_000) -> VDeltaResult:
    """Monte Carlo estimate of ``v_delta`` by counting uniform cube samples."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if rng is None:
        rng = substream(seed)
    hits = 0
    left = samples
    while left:
        m = min(chunk, left)
        hits += int(np.count_nonzero(np.prod(rng.random((m, d)), axis=1) <= delta))
        left -= m
    p = hits / samples
    value = v_delta(d, delta) if 0.0 < delta <= 1.0 else float("nan")
    return VDeltaResult(value, p, math.sqrt(p * (1.0 - p) / samples), samples)


def harmonic(n: int) -> float:
    return math.fsum(1.0 / i for i in range(1, n + 1))
