"""Candidate sets, proxy sets, k-environments and the proxy overlay."""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import shapely

from .arrangement import bisector, build_arrangement
from .geometry import PlanePoint, SiteSet, _as_xy, volume_order_index
from .staircase import staircase_mask

log = logging.getLogger(__name__)

_CHUNK = 512


@dataclass(frozen=True)
class CandidateSet:
    query: PlanePoint
    member_ids: list[int]

    @property
    def size(self) -> int:
        return len(self.member_ids)


@dataclass(frozen=True)
class ProxySet:
    query: PlanePoint
    k: int
    member_ids: list[int]

    @property
    def size(self) -> int:
        return len(self.member_ids)


def query_lift(x, sites: SiteSet) -> np.ndarray:
    """Attribute points extended by the distance to ``x``; one ``(d+1)``-row per site."""
    return np.column_stack([sites.attrs, np.sqrt(sites.dist2_from(x))])


def candidate_set(x, sites: SiteSet) -> CandidateSet:
    """Sites whose (attributes, distance to ``x``) point is undominated."""
    px, py = _as_xy(x)
    d2 = sites.dist2_from((px, py))
    # squared distances order the sites exactly like distances and skip the rounding of sqrt
    coords = np.column_stack([sites.attrs, d2])
    mask = staircase_mask(coords, sites.ids)
    if log.isEnabledFor(logging.DEBUG):
        _, counts = np.unique(d2, return_counts=True)
        if np.any(counts > 1):
            log.debug("query (%g, %g) is equidistant from several sites; ties broken by id", px, py)
    return CandidateSet(PlanePoint(px, py), sorted(int(i) for i in sites.ids[mask]))


def proxy_set(x, sites: SiteSet, k: int) -> ProxySet:
    """Union over volume-ordering prefixes of the ``k`` nearest sites to ``x``.

    A site enters the union exactly when it is among the ``k`` nearest at its
    own insertion, so one pass with a bounded max-heap suffices.  Distance ties
    are broken by id.
    """
    n = len(sites)
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    px, py = _as_xy(x)
    order = volume_order_index(sites)
    d2 = sites.dist2_from((px, py))[order]
    ids = sites.ids[order]
    heap: list[tuple[float, int]] = []  # (-d2, -id): root is the worst of the current k
    members = []
    for start in range(0, n, _CHUNK):
        stop = min(n, start + _CHUNK)
        if len(heap) == k:
            # the admission threshold only shrinks, so anything beyond it now stays out
            rows = start + np.flatnonzero(d2[start:stop] <= -heap[0][0])
        else:
            rows = range(start, stop)
        for j in rows:
            key = (float(d2[j]), int(ids[j]))
            if len(heap) < k:
                heapq.heappush(heap, (-key[0], -key[1]))
                members.append(key[1])
            elif key < (-heap[0][0], -heap[0][1]):
                heapq.heapreplace(heap, (-key[0], -key[1]))
                members.append(key[1])
    return ProxySet(PlanePoint(px, py), k, sorted(members))


def containment_violations(sites: SiteSet, k: int, queries) -> list[tuple[tuple[float, float], int]]:
    """Pairs ``(query, id)`` with the site a candidate at the query but missing from its proxy set."""
    k = min(k, len(sites))
    out = []
    for q in queries:
        qx, qy = _as_xy(q)
        proxy = set(proxy_set((qx, qy), sites, k).member_ids)
        out.extend(((qx, qy), i) for i in candidate_set((qx, qy), sites).member_ids if i not in proxy)
    return out


def closer_count(x, s_id: int, sites: SiteSet) -> int:
    """Number of other sites strictly closer to ``x`` than site ``s_id``."""
    d2 = sites.dist2_from(x)
    return int(np.count_nonzero(d2 < d2[sites.index_of(s_id)]))


def env_membership(x, s_id: int, sites: SiteSet, k: int) -> bool:
    """Whether site ``s_id`` is among the ``k`` nearest sites of ``x`` (closer-site count at most ``k-1``)."""
    if not 1 <= k <= len(sites):
        raise ValueError(f"k must lie in [1, {len(sites)}], got {k}")
    return closer_count(x, s_id, sites) <= k - 1


@dataclass
class StarPolygon:
    center: int
    vertices: np.ndarray  # counterclockwise, not repeated at the end
    is_bbox: bool = False
    flags: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def area(self) -> float:
        v = self.vertices - self.vertices[0]
        return 0.5 * float(np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1]))

    def contains(self, x) -> bool:
        """Even-odd test; points on the boundary may go either way."""
        return bool(self.contains_many(np.array([_as_xy(x)]))[0])

    def contains_many(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        px, py = pts[:, 0][:, None], pts[:, 1][:, None]
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        straddle = (v[:, 1] > py) != (w[:, 1] > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = v[:, 0] + (py - v[:, 1]) * (w[:, 0] - v[:, 0]) / (w[:, 1] - v[:, 1])
        return np.count_nonzero(straddle & (px < xc), axis=1) % 2 == 1

    def to_shapely(self):
        return shapely.Polygon(self.vertices)


def default_bbox(sites: SiteSet, margin: float = 0.5) -> tuple[float, float, float, float]:
    """Site bounding box padded by ``margin`` times its larger side on every side."""
    lo = sites.locs.min(axis=0)
    hi = sites.locs.max(axis=0)
    pad = margin * max(float(np.max(hi - lo)), 1.0)
    return (float(lo[0] - pad), float(lo[1] - pad), float(hi[0] + pad), float(hi[1] + pad))


def _box_polygon(center: int, bbox, flag: str | None) -> StarPolygon:
    x0, y0, x1, y1 = bbox
    verts = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)
    return StarPolygon(center, verts, True, [flag] if flag else [])


def k_environment_polygon(s_id: int, sites: SiteSet, k: int, bbox=None) -> StarPolygon:
    """Region where site ``s_id`` is among the ``k`` nearest, clipped to ``bbox``.

    Faces of the arrangement of the bisectors between ``s`` and every other
    site are labeled by how many bisectors separate them from ``s``; the
    boundary of the faces with label at most ``k-1`` is traced into a polygon.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if bbox is None:
        bbox = default_bbox(sites)
    n = len(sites)
    row = sites.index_of(s_id)
    sx, sy = sites.locs[row]
    x0, y0, x1, y1 = bbox
    if not (x0 < sx < x1 and y0 < sy < y1):
        raise ValueError("bbox must contain the center site")
    if k >= n:
        return _box_polygon(s_id, bbox, "k >= n: the whole box")
    s = sites.site(s_id)
    others = [sites.site(int(i)) for i in sites.ids if int(i) != s_id]
    lines = [bisector(s, o) for o in others]
    sub = build_arrangement(lines, bbox, expand=False, warn=False)
    flags = list(sub.flags)

    # a face's label: bisectors (as built, possibly perturbed) with the face on the far side from s
    side_s = np.sign(sub.A @ np.array([sx, sy]) - sub.C)
    side_f = np.sign(sub.face_rep @ sub.A.T - sub.C)
    counts = np.count_nonzero(side_f != side_s, axis=1)
    good = counts <= k - 1
    if good.all():
        return _box_polygon(s_id, bbox, "every face qualifies: the whole box")

    hf = sub.he_face
    twin_face = hf[np.arange(len(hf)) ^ 1]
    inside = np.where(hf >= 0, good[np.maximum(hf, 0)], False)
    outside_twin = np.where(twin_face >= 0, ~good[np.maximum(twin_face, 0)], True)
    boundary = inside & outside_twin
    nxt = sub.he_next
    seen = np.zeros(len(hf), dtype=bool)
    cycles = []
    for h0 in np.flatnonzero(boundary):
        if seen[h0]:
            continue
        cyc = []
        h = int(h0)
        while not seen[h]:
            seen[h] = True
            cyc.append(h)
            g = int(nxt[h])
            while not boundary[g]:
                g = int(nxt[g ^ 1])
            h = g
        cycles.append(cyc)
    if len(cycles) != 1:
        flags.append(f"{len(cycles)} boundary cycles; kept the one around the center")
    best = None
    for cyc in cycles:
        poly = StarPolygon(s_id, _simplify(sub, cyc))
        if poly.contains((sx, sy)) and (best is None or poly.area > best.area):
            best = poly
    if best is None:
        raise RuntimeError(f"k-environment of site {s_id} lost its center")
    best.flags = flags
    return best


def _simplify(sub, cyc: list[int]) -> np.ndarray:
    """Cycle vertices with the pass-through ones (same supporting line on both sides) removed."""
    lines = sub.edge_line[np.asarray(cyc) // 2]
    prev = np.roll(lines, 1)
    keep = lines != prev
    origins = sub.he_origin(np.asarray(cyc))
    return sub.vertices[origins[keep]]


def prefix_environments(sites: SiteSet, k: int, bbox=None) -> list[StarPolygon]:
    """``env_k(s_i, S_i)`` for every prefix ``S_i`` of the volume ordering."""
    if bbox is None:
        bbox = default_bbox(sites)
    order = volume_order_index(sites)
    polys = []
    for i in range(1, len(sites) + 1):
        prefix = sites.subset([int(j) for j in sites.ids[order[:i]]])
        polys.append(k_environment_polygon(int(sites.ids[order[i - 1]]), prefix, k, bbox))
    return polys


@dataclass(frozen=True)
class OverlayComplexity:
    V: int
    E: int
    F: int
    components: int

    @property
    def total(self) -> int:
        return self.V + self.E + self.F


def overlay_complexity(polygons: list[StarPolygon], *, grid: float | None = None) -> OverlayComplexity:
    """Vertices, edges and bounded faces of the planar map formed by the polygon boundaries.

    Boundaries are noded with shapely (snapped to ``grid``); F follows from
    Euler's relation per connected component, counting only bounded faces.
    """
    rings = [np.vstack([p.vertices, p.vertices[:1]]) for p in polygons]
    if grid is None:
        scale = max(1.0, max(float(np.max(np.abs(r))) for r in rings))
        grid = 1e-9 * scale
    geom = shapely.set_precision(shapely.multilinestrings([shapely.linestrings(r) for r in rings]), grid)
    noded = shapely.unary_union(geom)
    segs = set()
    for part in shapely.get_parts(noded):
        c = shapely.get_coordinates(part)
        for a, b in zip(map(tuple, c[:-1]), map(tuple, c[1:])):
            if a != b:
                segs.add((a, b) if a < b else (b, a))
    index: dict[tuple, int] = {}
    for a, b in segs:
        index.setdefault(a, len(index))
        index.setdefault(b, len(index))
    parent = list(range(len(index)))

    def find(u):
        while parent[u] != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    for a, b in segs:
        ra, rb = find(index[a]), find(index[b])
        if ra != rb:
            parent[ra] = rb
    V = len(index)
    E = len(segs)
    C = len({find(u) for u in range(V)})
    return OverlayComplexity(V, E, E - V + C, C)


def proxy_overlay_complexity(sites: SiteSet, k: int, bbox=None) -> OverlayComplexity:
    return overlay_complexity(prefix_environments(sites, k, bbox))


@dataclass(frozen=True)
class RayProfile:
    angle: float
    exit_t: float
    ts: np.ndarray
    counts: np.ndarray  # closer-site counts at ts
    inside: np.ndarray  # polygon membership at ts, when a polygon was given

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.counts) >= 0))

    @property
    def prefix_shaped(self) -> bool:
        """Membership is true on an initial stretch of the ray and false afterwards."""
        if self.inside is None or len(self.inside) == 0:
            return True
        flips = np.count_nonzero(self.inside[1:] != self.inside[:-1])
        return bool(self.inside[0]) and flips <= 1


def ray_profiles(s_id: int, sites: SiteSet, bbox, *, rays: int = 360, samples: int = 200,
                 polygon: StarPolygon | None = None) -> list[RayProfile]:
    """Closer-site counts (and optional polygon membership) at sample points along rays from a site."""
    row = sites.index_of(s_id)
    sx, sy = sites.locs[row]
    x0, y0, x1, y1 = bbox
    out = []
    for j in range(rays):
        ang = 2.0 * math.pi * j / rays
        ux, uy = math.cos(ang), math.sin(ang)
        exits = []
        if ux > 0:
            exits.append((x1 - sx) / ux)
        if ux < 0:
            exits.append((x0 - sx) / ux)
        if uy > 0:
            exits.append((y1 - sy) / uy)
        if uy < 0:
            exits.append((y0 - sy) / uy)
        T = min(exits)
        ts = T * (np.arange(1, samples + 1) - 0.5) / samples
        px = sx + ts * ux
        py = sy + ts * uy
        dx = sites.locs[:, 0][None, :] - px[:, None]
        dy = sites.locs[:, 1][None, :] - py[:, None]
        d2 = dx * dx + dy * dy
        counts = np.count_nonzero(d2 < d2[:, row][:, None], axis=1)
        inside = None
        if polygon is not None:
            inside = polygon.contains_many(np.column_stack([px, py]))
        out.append(RayProfile(ang, T, ts, counts, inside))
    return out
