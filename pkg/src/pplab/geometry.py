"""Base types and primitive predicates: dominance, point volume, distances, lifting.

Sites are stored column-wise in :class:`SiteSet` (numpy arrays) so the heavier
modules can vectorize; :class:`Site` is the per-element view.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)


class DimensionError(ValueError):
    pass


class SiteSetError(ValueError):
    pass


@dataclass(frozen=True)
class PlanePoint:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite plane point ({self.x}, {self.y})")

    def __iter__(self):
        yield self.x
        yield self.y


@dataclass(frozen=True)
class Site:
    id: int
    loc: PlanePoint
    attrs: tuple[float, ...]


@dataclass(frozen=True)
class LiftedPlane:
    """Plane ``z = a*x + b*y + c`` tangent to ``z = -(x^2 + y^2)`` above a site."""

    a: float
    b: float
    c: float
    source_id: int = -1

    def height(self, x: float, y: float) -> float:
        return self.a * x + self.b * y + self.c


def _as_xy(x) -> tuple[float, float]:
    if isinstance(x, PlanePoint):
        return x.x, x.y
    if isinstance(x, Site):
        return x.loc.x, x.loc.y
    px, py = x
    return float(px), float(py)


class SiteSet:
    """``n`` sites in the plane, each carrying a ``dim``-dimensional attribute point.

    Construction validates the invariants: unique non-negative ids, pairwise
    distinct locations, attributes inside ``[0, 1]``.  Tied attribute values are
    accepted (they are broken by id downstream) but logged.
    """

    def __init__(self, dim: int, ids, locs, attrs):
        if dim < 1:
            raise SiteSetError("dim must be >= 1")
        ids = np.asarray(ids, dtype=np.int64).reshape(-1)
        locs = np.asarray(locs, dtype=float).reshape(-1, 2)
        attrs = np.asarray(attrs, dtype=float).reshape(len(ids), -1) if len(ids) else np.zeros((0, dim))
        n = len(ids)
        if locs.shape[0] != n or attrs.shape[0] != n:
            raise SiteSetError("ids, locs and attrs must have the same length")
        if attrs.shape[1] != dim:
            raise DimensionError(f"attribute length {attrs.shape[1]} != dim {dim}")
        if n == 0:
            raise SiteSetError("a site set needs at least one site")
        if np.any(ids < 0):
            raise SiteSetError("site ids must be non-negative")
        if len(np.unique(ids)) != n:
            raise SiteSetError("duplicate site ids")
        if not np.all(np.isfinite(locs)):
            raise SiteSetError("non-finite site location")
        if len(np.unique(locs, axis=0)) != n:
            raise SiteSetError("duplicate site locations")
        if not np.all((attrs >= 0.0) & (attrs <= 1.0)):
            raise SiteSetError("attribute values must lie in [0, 1]")
        self.dim = int(dim)
        self.ids = ids
        self.locs = locs
        self.attrs = attrs
        self.ids.setflags(write=False)
        self.locs.setflags(write=False)
        self.attrs.setflags(write=False)
        self._index = {int(i): k for k, i in enumerate(ids)}
        if self.attr_ties:
            log.warning("site set has tied attribute values; ties are broken by site id")

    @classmethod
    def from_sites(cls, dim: int, sites: Iterable[Site]) -> "SiteSet":
        sites = list(sites)
        return cls(
            dim,
            [s.id for s in sites],
            [(s.loc.x, s.loc.y) for s in sites],
            [s.attrs for s in sites],
        )

    def __len__(self) -> int:
        return len(self.ids)

    def __repr__(self) -> str:
        return f"SiteSet(n={len(self)}, dim={self.dim})"

    @property
    def attr_ties(self) -> bool:
        return any(len(np.unique(col)) != len(col) for col in self.attrs.T)

    @property
    def sites(self) -> list[Site]:
        return [self.site(int(i)) for i in self.ids]

    def index_of(self, site_id: int) -> int:
        try:
            return self._index[int(site_id)]
        except KeyError:
            raise KeyError(f"no site with id {site_id}") from None

    def site(self, site_id: int) -> Site:
        k = self.index_of(site_id)
        return Site(int(self.ids[k]), PlanePoint(*map(float, self.locs[k])), tuple(map(float, self.attrs[k])))

    def subset(self, site_ids: Sequence[int]) -> "SiteSet":
        rows = [self.index_of(i) for i in site_ids]
        return SiteSet(self.dim, self.ids[rows], self.locs[rows], self.attrs[rows])

    def dist2_from(self, x) -> np.ndarray:
        """Squared distances from ``x`` to every site, in storage order."""
        px, py = _as_xy(x)
        dx = self.locs[:, 0] - px
        dy = self.locs[:, 1] - py
        return dx * dx + dy * dy

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "sites": [
                {"id": int(i), "x": float(p[0]), "y": float(p[1]), "attrs": [float(a) for a in row]}
                for i, p, row in zip(self.ids, self.locs, self.attrs)
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "SiteSet":
        try:
            dim = int(data["dim"])
            rows = data["sites"]
            ids = [int(r["id"]) for r in rows]
            locs = [(float(r["x"]), float(r["y"])) for r in rows]
            attrs = [[float(a) for a in r["attrs"]] for r in rows]
        except (KeyError, TypeError) as exc:
            raise SiteSetError(f"malformed site set document: {exc}") from exc
        for a in attrs:
            if len(a) != dim:
                raise DimensionError(f"site attribute length {len(a)} != dim {dim}")
        return cls(dim, ids, locs, attrs)


def load_site_set(path: str | Path) -> SiteSet:
    with open(path) as fh:
        return SiteSet.from_json(json.load(fh))


def save_site_set(sites: SiteSet, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(sites.to_json(), fh, indent=1)


def dominates(p: Sequence[float], q: Sequence[float]) -> bool:
    """True iff ``p[i] <= q[i]`` for every coordinate."""
    if len(p) != len(q):
        raise DimensionError(f"cannot compare points of length {len(p)} and {len(q)}")
    return all(a <= b for a, b in zip(p, q))


def point_volume(p: Sequence[float]) -> float:
    return float(np.prod(np.asarray(p, dtype=float)))


def volume_order_index(sites: SiteSet) -> np.ndarray:
    """Row indices of ``sites`` sorted by increasing point volume.

    Equal volumes fall back to lexicographic attributes and then id; the
    lexicographic step keeps the order consistent with dominance even when a
    rounded product ties.
    """
    vol = np.prod(sites.attrs, axis=1)
    keys = [sites.ids] + [sites.attrs[:, j] for j in range(sites.dim - 1, -1, -1)] + [vol]
    return np.lexsort(keys)


def volume_ordering(sites: SiteSet) -> list[int]:
    return [int(i) for i in sites.ids[volume_order_index(sites)]]


def dist2(x, s) -> float:
    px, py = _as_xy(x)
    sx, sy = _as_xy(s)
    return (px - sx) ** 2 + (py - sy) ** 2


def dist(x, s) -> float:
    return math.sqrt(dist2(x, s))


def lift(s) -> LiftedPlane:
    """Tangent plane to the paraboloid ``z = -(x^2 + y^2)`` at the lifted site.

    Its height at ``w`` is ``|w - s|^2 - |w|^2``, so planes ordered by height
    below ``w`` are sites ordered by distance from ``w``.
    """
    p, q = _as_xy(s)
    sid = s.id if isinstance(s, Site) else -1
    return LiftedPlane(-2.0 * p, -2.0 * q, p * p + q * q, sid)


def lift_all(sites: SiteSet) -> np.ndarray:
    """Lifted planes of every site as an ``(n, 3)`` array of ``(a, b, c)``."""
    p = sites.locs[:, 0]
    q = sites.locs[:, 1]
    return np.column_stack([-2.0 * p, -2.0 * q, p * p + q * q])
