"""Levels in arrangements of lines and of planes, and below conflict lists.

Lines are ``y = m*x + b`` given as parallel arrays of slopes and intercepts.
Planes are ``z = a*x + b*y + c`` given as an ``(n, 3)`` array; lifted sites
(:func:`pplab.geometry.lift_all`) are the main source.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .arrangement import DegeneracyWarning
from .geometry import LiftedPlane, lift_all
from .random_model import sample_site_set, substream

MAX_PLANES = 80
_REL_TOL = 1e-10
_REL_SHIFT = 1e-8


class LevelSizeError(ValueError):
    pass


def _jitter(m: int) -> np.ndarray:
    k = np.arange(1, m + 1, dtype=float)
    return np.mod(k * 0.6180339887498949, 1.0) + 0.5


def as_lines(lines) -> tuple[np.ndarray, np.ndarray]:
    """``(slopes, intercepts)`` from an ``(m, 2)`` array or a pair of arrays."""
    if isinstance(lines, tuple) and len(lines) == 2:
        m, b = (np.asarray(v, dtype=float).reshape(-1) for v in lines)
    else:
        arr = np.asarray(lines, dtype=float).reshape(-1, 2)
        m, b = arr[:, 0].copy(), arr[:, 1].copy()
    if len(m) != len(b):
        raise ValueError("slopes and intercepts differ in length")
    return m, b


def point_level_lines(lines, p) -> int:
    """Number of lines strictly below ``p``.

    A point on a line is moved up by a tiny amount first (with a
    :class:`DegeneracyWarning`), so lines through it count as below.
    """
    m, b = as_lines(lines)
    px, py = map(float, p)
    h = m * px + b
    scale = max(1.0, abs(py), float(np.max(np.abs(h))) if len(h) else 0.0)
    tol = _REL_TOL * scale
    if np.any(np.abs(h - py) <= tol):
        warnings.warn(f"point ({px}, {py}) lies on a line; evaluated just above it", DegeneracyWarning, stacklevel=2)
        py += 10.0 * tol
    return int(np.count_nonzero(h < py))


@dataclass(frozen=True)
class LineLevelEdge:
    line: int
    x0: float  # -inf for a ray to the left
    x1: float  # +inf for a ray to the right
    level: int
    left: int = -1  # line crossed at x0, -1 for a ray
    right: int = -1  # line crossed at x1

    @property
    def left_ray(self) -> bool:
        return math.isinf(self.x0)

    @property
    def right_ray(self) -> bool:
        return math.isinf(self.x1)

    def midpoint_x(self) -> float:
        if self.left_ray and self.right_ray:
            return 0.0
        if self.left_ray:
            return self.x1 - 1.0
        if self.right_ray:
            return self.x0 + 1.0
        return 0.5 * (self.x0 + self.x1)


@dataclass
class LineLevels:
    """Every edge of the arrangement, each tagged with its level."""

    slopes: np.ndarray
    intercepts: np.ndarray  # as used (possibly perturbed)
    edges: list[LineLevelEdge]
    perturbed: bool = False
    flags: list[str] = field(default_factory=list)

    def at_level(self, k: int) -> list[LineLevelEdge]:
        return [e for e in self.edges if e.level == k]


def _line_levels_once(m: np.ndarray, b: np.ndarray) -> list[LineLevelEdge]:
    n = len(m)
    scale = max(1.0, float(np.max(np.abs(b))) if n else 1.0)
    tol = _REL_TOL * scale
    edges = []
    idx = np.arange(n)
    for i in range(n):
        others = idx != i
        dm = m[i] - m[others]
        par = dm == 0.0
        if np.any(par & (np.abs(b[others] - b[i]) <= tol)):
            raise _Degenerate("coincident lines")
        js = idx[others][~par]
        xs = (b[js] - b[i]) / (m[i] - m[js])
        order = np.argsort(xs, kind="stable")
        js, xs = js[order], xs[order]
        if np.any(np.diff(xs) <= tol * np.maximum(1.0, np.abs(xs[1:]))):
            raise _Degenerate("three lines through one point")
        # lines below line i far to the left: steeper ones, and parallel ones underneath
        start = int(np.count_nonzero(m > m[i])) + int(np.count_nonzero((m == m[i]) & (b < b[i])))
        steps = np.where(m[js] > m[i], -1, 1)
        levels = start + np.concatenate([[0], np.cumsum(steps)])
        bounds = np.concatenate([[-np.inf], xs, [np.inf]])
        nbr = np.concatenate([[-1], js, [-1]])
        for t, lev in enumerate(levels):
            edges.append(LineLevelEdge(i, float(bounds[t]), float(bounds[t + 1]), int(lev), int(nbr[t]), int(nbr[t + 1])))
    return edges


class _Degenerate(Exception):
    pass


def line_levels(lines) -> LineLevels:
    """All edges of the line arrangement with their levels.

    Three concurrent or two coincident lines get their intercepts shifted by
    small index-dependent amounts (warned and flagged).
    """
    m, b0 = as_lines(lines)
    scale = max(1.0, float(np.max(np.abs(b0))) if len(b0) else 1.0)
    shift = 0.0
    jit = _jitter(len(m))
    last = None
    for _ in range(5):
        b = b0 + shift * jit
        try:
            edges = _line_levels_once(m, b)
        except _Degenerate as exc:
            last = exc
            shift = _REL_SHIFT * scale if shift == 0.0 else shift * 10.0
            continue
        res = LineLevels(m, b, edges, shift > 0.0)
        if shift:
            msg = f"degenerate lines ({last}); intercepts perturbed by up to {1.5 * shift:.3g}"
            warnings.warn(msg, DegeneracyWarning, stacklevel=3)
            res.flags.append(msg)
        return res
    raise ValueError(f"could not resolve degenerate lines: {last}")


def k_level_edges_lines(lines, k: int) -> list[LineLevelEdge]:
    """Maximal pieces of the lines with exactly ``k`` lines strictly below."""
    return line_levels(lines).at_level(k)


def edges_on_line_at_level(lines, line: int, k: int) -> int:
    return sum(1 for e in k_level_edges_lines(lines, k) if e.line == line)


def _vertex_keys(edges: list[LineLevelEdge], ids: np.ndarray) -> set[frozenset]:
    out = set()
    for e in edges:
        if e.left >= 0:
            out.add(frozenset((int(ids[e.line]), int(ids[e.left]))))
        if e.right >= 0:
            out.add(frozenset((int(ids[e.line]), int(ids[e.right]))))
    return out


def incremental_k_level_vertices(lines, order, k: int) -> int:
    """Insert lines in ``order``; count the distinct vertices that ever lie on the k-level.

    Vertices are identified by their pair of lines, so the count is
    combinatorial.  Degenerate inputs are perturbed once up front.
    """
    lv = line_levels(lines)
    m, b = lv.slopes, lv.intercepts
    order = np.asarray(order, dtype=np.int64)
    if sorted(order.tolist()) != list(range(len(m))):
        raise ValueError("order must be a permutation of the line indices")
    seen: set[frozenset] = set()
    for t in range(1, len(order) + 1):
        ids = order[:t]
        edges = [e for e in _line_levels_once(m[ids], b[ids]) if e.level == k]
        seen |= _vertex_keys(edges, ids)
    return len(seen)


def random_lines(n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` lines with standard normal slopes and intercepts, as an ``(n, 2)`` array."""
    return rng.standard_normal((n, 2))


# planes --------------------------------------------------------------------

def as_planes(planes) -> np.ndarray:
    if len(planes) and isinstance(planes[0], LiftedPlane):
        return np.array([[p.a, p.b, p.c] for p in planes], dtype=float)
    return np.asarray(planes, dtype=float).reshape(-1, 3)


@dataclass(frozen=True)
class PlaneArrangementVertex:
    triple: tuple[int, int, int]
    coords: tuple[float, float, float]
    level: int
    below_ids: tuple[int, ...] = ()


def _height(H: np.ndarray, x, y):
    return H[:, 0] * x + H[:, 1] * y + H[:, 2]


def _triple_points(H: np.ndarray, T: np.ndarray):
    """Intersection points of plane triples ``T`` (rows of indices); NaN where two intersection lines are parallel."""
    i, j, k = T[:, 0], T[:, 1], T[:, 2]
    a1 = H[i, 0] - H[j, 0]
    b1 = H[i, 1] - H[j, 1]
    r1 = H[j, 2] - H[i, 2]
    a2 = H[i, 0] - H[k, 0]
    b2 = H[i, 1] - H[k, 1]
    r2 = H[k, 2] - H[i, 2]
    det = a1 * b2 - a2 * b1
    ok = np.abs(det) > 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.where(ok, (r1 * b2 - r2 * b1) / det, np.nan)
        y = np.where(ok, (a1 * r2 - a2 * r1) / det, np.nan)
    z = H[i, 0] * x + H[i, 1] * y + H[i, 2]
    return x, y, z


def enumerate_plane_vertices(planes, external=None, *, max_planes: int = MAX_PLANES) -> list[PlaneArrangementVertex]:
    """Every triple intersection of ``planes`` with its level.

    The level counts planes of ``planes`` strictly below the vertex.  When
    ``external`` planes are given, ``below_ids`` lists the indices of those
    lying strictly below it.  Triples whose intersection is not a single point
    are skipped.
    """
    H = as_planes(planes)
    n = len(H)
    if n > max_planes:
        raise LevelSizeError(f"{n} planes exceeds the limit of {max_planes}")
    X = None if external is None else as_planes(external)
    if n < 3:
        return []
    T = np.array(list(combinations(range(n), 3)), dtype=np.int64)
    x, y, z = _triple_points(H, T)
    ok = np.isfinite(x)
    T, x, y, z = T[ok], x[ok], y[ok], z[ok]
    hz = H[:, 0][None, :] * x[:, None] + H[:, 1][None, :] * y[:, None] + H[:, 2][None, :]
    tol = _REL_TOL * np.maximum(1.0, np.abs(z))[:, None]
    below = hz < z[:, None] - tol
    below[np.arange(len(T))[:, None], T] = False
    levels = below.sum(axis=1)
    if X is not None and len(X):
        xz = X[:, 0][None, :] * x[:, None] + X[:, 1][None, :] * y[:, None] + X[:, 2][None, :]
        xb = xz < z[:, None] - tol
    out = []
    for r in range(len(T)):
        bids = tuple(int(v) for v in np.flatnonzero(xb[r])) if X is not None and len(X) else ()
        out.append(PlaneArrangementVertex(tuple(int(v) for v in T[r]), (float(x[r]), float(y[r]), float(z[r])),
                                          int(levels[r]), bids))
    return out


@dataclass(frozen=True)
class PlaneEdge:
    pair: tuple[int, int]
    ends: tuple[tuple[float, float], tuple[float, float]]  # projected endpoints
    end_vertices: tuple[tuple | None, tuple | None]  # defining triples, None for a clipped end
    level: int


def plane_edges(H: np.ndarray, *, margin: float = 1.0, bbox=None) -> list[PlaneEdge]:
    """Edges of the arrangement of planes ``H``, unbounded ones clipped to a box.

    The default box is the xy bounding box of all vertices grown by ``margin``.
    """
    n = len(H)
    if n < 2:
        return []
    T = np.array(list(combinations(range(n), 3)), dtype=np.int64) if n >= 3 else np.zeros((0, 3), dtype=np.int64)
    vx, vy, _ = _triple_points(H, T) if len(T) else (np.zeros(0), np.zeros(0), None)
    if bbox is None:
        fin = np.isfinite(vx)
        if fin.any():
            bbox = (vx[fin].min() - margin, vy[fin].min() - margin, vx[fin].max() + margin, vy[fin].max() + margin)
        else:
            bbox = (-margin, -margin, margin, margin)
    x0, y0, x1, y1 = bbox
    vert_of = {tuple(t): (vx[r], vy[r]) for r, t in enumerate(T.tolist())}
    out = []
    for i, j in combinations(range(n), 2):
        # projection of the intersection line: a x + b y = c
        a = H[i, 0] - H[j, 0]
        b = H[i, 1] - H[j, 1]
        c = H[j, 2] - H[i, 2]
        nn = math.hypot(a, b)
        if nn == 0.0:
            continue
        a, b, c = a / nn, b / nn, c / nn
        D = np.array([-b, a])
        P0 = np.array([a * c, b * c])
        lo, hi = -np.inf, np.inf
        for axis, l, h in ((0, x0, x1), (1, y0, y1)):
            if D[axis] != 0.0:
                t1, t2 = (l - P0[axis]) / D[axis], (h - P0[axis]) / D[axis]
                lo, hi = max(lo, min(t1, t2)), min(hi, max(t1, t2))
            elif not (l < P0[axis] < h):
                lo, hi = 0.0, -1.0
        if hi <= lo:
            continue
        pts = []
        for l in range(n):
            if l in (i, j):
                continue
            key = tuple(sorted((i, j, l)))
            px, py = vert_of.get(key, (np.nan, np.nan))
            if np.isfinite(px):
                pts.append(((px - P0[0]) * D[0] + (py - P0[1]) * D[1], key))
        pts.sort()
        ts = [lo] + [t for t, _ in pts] + [hi]
        keys = [None] + [kk for _, kk in pts] + [None]
        others = np.array([l for l in range(n) if l not in (i, j)], dtype=np.int64)
        for s in range(len(ts) - 1):
            ta, tb = ts[s], ts[s + 1]
            mid = P0 + 0.5 * (ta + tb) * D
            zi = H[i, 0] * mid[0] + H[i, 1] * mid[1] + H[i, 2]
            hz = _height(H[others], mid[0], mid[1])
            level = int(np.count_nonzero(hz < zi - _REL_TOL * max(1.0, abs(zi))))
            ua = P0 + ta * D
            ub = P0 + tb * D
            out.append(PlaneEdge((i, j), ((float(ua[0]), float(ua[1])), (float(ub[0]), float(ub[1]))),
                                 (keys[s], keys[s + 1]), level))
    return out


@dataclass
class ConflictSizes:
    vertex_b: dict  # triple (indices into H) -> b(v)
    edge_b: list[tuple[PlaneEdge, int]]
    edge_violations: int  # bounded edges with b(e) > b(u) + b(v)

    @property
    def vertex_sum(self) -> int:
        return int(sum(self.vertex_b.values()))

    @property
    def edge_sum(self) -> int:
        return int(sum(b for _, b in self.edge_b))


def below_conflict_sizes(R_idx, planes, k: int) -> ConflictSizes:
    """``b(v)`` and ``b(e)`` over vertices and edges of level at most ``k`` in the arrangement of the sample.

    ``b(v)`` counts planes outside the sample strictly below ``v``; ``b(e)``
    counts those below some point of ``e``, which for a segment means below one
    of its (possibly clipped) endpoints.
    """
    H = as_planes(planes)
    R_idx = np.asarray(sorted(set(int(i) for i in R_idx)), dtype=np.int64)
    if len(R_idx) > MAX_PLANES:
        raise LevelSizeError(f"sample of {len(R_idx)} planes exceeds the limit of {MAX_PLANES}")
    ext = np.setdiff1d(np.arange(len(H)), R_idx)
    R = H[R_idx]
    X = H[ext]

    def below_set(px, py, pz):
        if not len(X):
            return frozenset()
        hz = _height(X, px, py)
        return frozenset(np.flatnonzero(hz < pz - _REL_TOL * max(1.0, abs(pz))).tolist())

    vb = {}
    vsets = {}
    for v in enumerate_plane_vertices(R):
        if v.level <= k:
            bs = below_set(*v.coords)
            key = tuple(int(R_idx[t]) for t in v.triple)
            vb[key] = len(bs)
            vsets[v.triple] = bs
    eb = []
    viol = 0
    for e in plane_edges(R):
        if e.level > k:
            continue
        i = e.pair[0]
        sets = []
        for (px, py), vkey in zip(e.ends, e.end_vertices):
            if vkey is not None and vkey in vsets:
                sets.append(vsets[vkey])
            else:
                pz = R[i, 0] * px + R[i, 1] * py + R[i, 2]
                sets.append(below_set(px, py, pz))
        be = len(sets[0] | sets[1])
        if all(vk is not None for vk in e.end_vertices) and be > len(sets[0]) + len(sets[1]):
            viol += 1
        mapped = PlaneEdge((int(R_idx[e.pair[0]]), int(R_idx[e.pair[1]])), e.ends,
                           tuple(None if vk is None else tuple(int(R_idx[t]) for t in vk) for vk in e.end_vertices),
                           e.level)
        eb.append((mapped, be))
    return ConflictSizes(vb, eb, viol)


@dataclass
class MomentReport:
    n: int
    r: int
    k: int
    trials: int
    vertex_sums: list[int]
    edge_sums: list[int]

    @staticmethod
    def _stats(xs):
        if not xs:
            return float("nan"), float("nan")
        a = np.asarray(xs, dtype=float)
        se = float(a.std(ddof=1) / math.sqrt(len(a))) if len(a) > 1 else float("nan")
        return float(a.mean()), se

    @property
    def vertex_mean(self) -> float:
        return self._stats(self.vertex_sums)[0]

    @property
    def vertex_stderr(self) -> float:
        return self._stats(self.vertex_sums)[1]

    @property
    def edge_mean(self) -> float:
        return self._stats(self.edge_sums)[0]

    @property
    def edge_stderr(self) -> float:
        return self._stats(self.edge_sums)[1]

    def rows(self) -> list[dict]:
        return [{"trial": t, "n": self.n, "r": self.r, "k": self.k, "sum_b_vertices": v, "sum_b_edges": e}
                for t, (v, e) in enumerate(zip(self.vertex_sums, self.edge_sums))]


def moment_trial(n: int, r: int, k: int, rng: np.random.Generator) -> tuple[int, int]:
    """One draw: lifted planes of ``n`` uniform sites, a sample of ``r`` without replacement."""
    if not 3 <= r <= n:
        raise ValueError("need 3 <= r <= n")
    sites = sample_site_set(n, 1, rng=rng)
    H = lift_all(sites)
    R = rng.choice(n, size=r, replace=False)
    cs = below_conflict_sizes(R, H, k)
    return cs.vertex_sum, cs.edge_sum


def moment_experiment(n: int, r: int, k: int, trials: int, seed: int = 0) -> MomentReport:
    vs, es = [], []
    for t in range(trials):
        v, e = moment_trial(n, r, k, substream(seed, t))
        vs.append(v)
        es.append(e)
    return MomentReport(n, r, k, trials, vs, es)
