"""Line arrangements clipped to a box, bisector arrangements and the diagrams built on them.

The subdivision is a plain half-edge structure derived from sorted incidences:
every vertex is either a box corner, a line/box crossing or a crossing of two
lines.  Degenerate inputs (three concurrent lines, coincident lines, a vertex on
the box boundary) are resolved by shifting the line offsets by small,
index-dependent amounts; a :class:`DegeneracyWarning` is emitted and the
subdivision records the applied shift.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import SiteSet

MAX_LINES = 2000
MAX_DIAGRAM_SITES = 60
DET_EPS = 1e-12
_REL_TOL = 1e-10  # separation below which two incidences on a line count as coincident
_REL_SHIFT = 1e-8  # first perturbation size, relative to the coordinate scale

# box sides appear in edge_line as negative codes
BOTTOM, RIGHT, TOP, LEFT = -1, -2, -3, -4


class ArrangementError(ValueError):
    pass


class ArrangementSizeError(ArrangementError):
    pass


class AmbiguousLocation(ValueError):
    """Query point too close to an edge to be located reliably."""


class DegeneracyWarning(UserWarning):
    pass


class _Degenerate(Exception):
    pass


@dataclass(frozen=True)
class Line:
    """``a*x + b*y = c`` with ``(a, b)`` a unit vector whose first nonzero entry is positive."""

    a: float
    b: float
    c: float
    tag: tuple | None = None

    @classmethod
    def normalized(cls, a: float, b: float, c: float, tag=None) -> "Line":
        norm = math.hypot(a, b)
        if norm == 0.0:
            raise ArrangementError("degenerate line: zero normal")
        a, b, c = a / norm, b / norm, c / norm
        if a < 0.0 or (a == 0.0 and b < 0.0):
            a, b, c = -a, -b, -c
        return cls(a + 0.0, b + 0.0, c + 0.0, tag)

    def signed_distance(self, x: float, y: float) -> float:
        return self.a * x + self.b * y - self.c


def bisector(s1, s2) -> Line:
    """Perpendicular bisector of two sites (anything with ``.loc`` or an ``(x, y)`` pair)."""
    (x1, y1), tag1 = _loc_and_id(s1)
    (x2, y2), tag2 = _loc_and_id(s2)
    if x1 == x2 and y1 == y2:
        raise ArrangementError("bisector of coincident sites")
    a = x2 - x1
    b = y2 - y1
    c = 0.5 * ((x2 * x2 + y2 * y2) - (x1 * x1 + y1 * y1))
    tag = None
    if tag1 is not None and tag2 is not None:
        tag = (min(tag1, tag2), max(tag1, tag2))
    return Line.normalized(a, b, c, tag)


def _loc_and_id(s):
    if hasattr(s, "loc"):
        return (float(s.loc.x), float(s.loc.y)), int(s.id)
    x, y = s
    return (float(x), float(y)), None


def site_bisectors(sites: SiteSet, pairs=None) -> list[Line]:
    rows = range(len(sites))
    if pairs is None:
        pairs = [(i, j) for i in rows for j in rows if i < j]
    out = []
    for i, j in pairs:
        out.append(bisector(sites.site(int(sites.ids[i])), sites.site(int(sites.ids[j]))))
    return out


def _jitter(m: int) -> np.ndarray:
    # golden-ratio sequence: deterministic, distinct, no accidental linear relations
    k = np.arange(1, m + 1, dtype=float)
    return np.mod(k * 0.6180339887498949, 1.0) + 0.5


@dataclass
class PlanarSubdivision:
    bbox: tuple[float, float, float, float]
    lines: list[Line]
    A: np.ndarray  # (m, 2) unit normals
    C: np.ndarray  # (m,) offsets actually used (perturbed)
    shift: float
    near_tol: float
    vertices: np.ndarray
    edges: np.ndarray  # (E, 2) vertex indices, low parameter first
    edge_line: np.ndarray  # supporting line index, or a negative box side code
    he_next: np.ndarray
    he_face: np.ndarray
    face_halfedges: list[np.ndarray]
    face_rep: np.ndarray
    face_area: np.ndarray
    sliver: np.ndarray
    flags: list[str] = field(default_factory=list)

    def __post_init__(self):
        self._orig = np.array([[l.a, l.b, l.c] for l in self.lines], dtype=float).reshape(-1, 3)

    @property
    def n_faces(self) -> int:
        return len(self.face_halfedges)

    def complexity(self) -> tuple[int, int, int]:
        return len(self.vertices), len(self.edges), self.n_faces

    def he_origin(self, h) -> np.ndarray:
        h = np.asarray(h)
        return self.edges[h // 2, h % 2]

    def face_vertices(self, f: int) -> np.ndarray:
        return self.he_origin(self.face_halfedges[f])

    def face_polygon(self, f: int) -> np.ndarray:
        return self.vertices[self.face_vertices(f)]

    def line_distances(self, x: float, y: float) -> np.ndarray:
        """Distances from ``(x, y)`` to every line, original and perturbed."""
        orig = self._orig
        d0 = np.abs(orig[:, 0] * x + orig[:, 1] * y - orig[:, 2])
        d1 = np.abs(self.A[:, 0] * x + self.A[:, 1] * y - self.C)
        return np.minimum(d0, d1)

    def inside_box(self, x: float, y: float) -> bool:
        x0, y0, x1, y1 = self.bbox
        return x0 < x < x1 and y0 < y < y1

    def locate(self, x, tol: float | None = None) -> int:
        """Face containing ``x``; see :func:`point_locate`."""
        return point_locate(self, x, tol)

    def resolve(self, x, *, step: float = 1e-6, tries: int = 16) -> tuple[int, tuple[float, float], bool]:
        """Locate ``x``, nudging it off nearby edges first.

        Returns ``(face, point_used, nudged)``.
        """
        px, py = map(float, x)
        scale = max(1.0, max(abs(v) for v in self.bbox))
        delta = max(step * scale, 2.0 * self.near_tol)
        nudged = False
        for t in range(tries):
            try:
                return point_locate(self, (px, py)), (px, py), nudged
            except AmbiguousLocation:
                ang = 0.7 + 2.399963229728653 * t  # golden angle walk
                px += delta * math.cos(ang)
                py += delta * math.sin(ang)
                nudged = True
        raise AmbiguousLocation(f"could not move {x} away from the arrangement edges")


def _auto_bbox(A, C, bbox, expand: bool):
    m = len(C)
    if bbox is None:
        r = max(1.0, float(np.max(np.abs(C))) if m else 1.0)
        bbox = (-r, -r, r, r)
    x0, y0, x1, y1 = map(float, bbox)
    if not (x0 < x1 and y0 < y1):
        raise ArrangementError(f"empty bounding box {bbox}")
    if expand and m >= 2:
        I, J = np.triu_indices(m, 1)
        det = A[I, 0] * A[J, 1] - A[J, 0] * A[I, 1]
        ok = np.abs(det) > DET_EPS
        if ok.any():
            I, J, det = I[ok], J[ok], det[ok]
            px = (C[I] * A[J, 1] - C[J] * A[I, 1]) / det
            py = (A[I, 0] * C[J] - A[J, 0] * C[I]) / det
            x0, x1 = min(x0, px.min()), max(x1, px.max())
            y0, y1 = min(y0, py.min()), max(y1, py.max())
        margin = 0.05 * max(x1 - x0, y1 - y0) + 1e-3
        x0, y0, x1, y1 = x0 - margin, y0 - margin, x1 + margin, y1 + margin
    return (x0, y0, x1, y1)


def build_arrangement(lines, bbox=None, *, expand: bool = True, max_lines: int = MAX_LINES,
                      warn: bool = True) -> PlanarSubdivision:
    """Arrangement of ``lines`` clipped to ``bbox``.

    With ``expand`` the box grows until it contains every pairwise crossing,
    so all ``C(m, 2)`` vertices of a generic arrangement are present.  A
    perturbation is always recorded in ``flags``; ``warn`` also raises a
    :class:`DegeneracyWarning`.
    """
    lines = list(lines)
    m = len(lines)
    if m > max_lines:
        raise ArrangementSizeError(f"{m} lines exceeds the limit of {max_lines}")
    A = np.array([[l.a, l.b] for l in lines], dtype=float).reshape(-1, 2)
    C0 = np.array([l.c for l in lines], dtype=float)
    scale = max([1.0] + ([float(np.max(np.abs(C0)))] if m else []) + ([max(abs(v) for v in bbox)] if bbox else []))
    box = _auto_bbox(A, C0, bbox, expand)
    if expand and m >= 2:
        # room for the perturbed crossings as well
        pad = 1e-4 * scale
        box = (box[0] - pad, box[1] - pad, box[2] + pad, box[3] + pad)
    shift = 0.0
    jit = _jitter(m)
    last = None
    for attempt in range(5):
        C = C0 + shift * jit
        try:
            sub = _construct(lines, A, C, box, scale, shift)
        except _Degenerate as exc:
            last = exc
            shift = _REL_SHIFT * scale if shift == 0.0 else shift * 10.0
            continue
        if shift:
            msg = f"degenerate line configuration ({last}); offsets perturbed by up to {1.5 * shift:.3g}"
            if warn:
                warnings.warn(msg, DegeneracyWarning, stacklevel=2)
            sub.flags.append(msg)
        return sub
    raise ArrangementError(f"could not resolve degeneracy after perturbation: {last}")


def _construct(lines, A, C, box, scale, shift) -> PlanarSubdivision:
    m = len(C)
    tol = _REL_TOL * scale
    x0, y0, x1, y1 = box
    D = np.column_stack([-A[:, 1], A[:, 0]]) if m else np.zeros((0, 2))  # line directions
    P0 = A * C[:, None] if m else np.zeros((0, 2))

    corners = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    verts = [corners]
    nv = 4

    # clip every line to the box (slab method)
    tin = np.full(m, -np.inf)
    tout = np.full(m, np.inf)
    side_in = np.zeros(m, dtype=np.int64)
    side_out = np.zeros(m, dtype=np.int64)
    for axis, lo, hi, s_lo, s_hi in ((0, x0, x1, LEFT, RIGHT), (1, y0, y1, BOTTOM, TOP)):
        d = D[:, axis]
        p = P0[:, axis]
        nz = np.abs(d) > 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = np.where(nz, (lo - p) / np.where(nz, d, 1.0), -np.inf)
            tb = np.where(nz, (hi - p) / np.where(nz, d, 1.0), np.inf)
        enter = np.where(nz, np.where(d > 0, ta, tb), -np.inf)
        leave = np.where(nz, np.where(d > 0, tb, ta), np.inf)
        enter_side = np.where(d > 0, s_lo, s_hi)
        leave_side = np.where(d > 0, s_hi, s_lo)
        # a line parallel to this axis must lie strictly inside the slab
        outside = ~nz & ((p <= lo) | (p >= hi))
        enter = np.where(outside, np.inf, enter)
        upd = enter > tin
        both = nz & np.isfinite(tin) & np.isfinite(enter)
        if np.any(np.abs(enter[both] - tin[both]) < tol):
            raise _Degenerate("line through a box corner")
        side_in = np.where(upd, enter_side, side_in)
        tin = np.maximum(tin, enter)
        upd = leave < tout
        side_out = np.where(upd, leave_side, side_out)
        tout = np.minimum(tout, leave)
    active = tout - tin > tol
    if np.any(np.abs(tout - tin)[~active & np.isfinite(tin) & np.isfinite(tout)] <= tol):
        raise _Degenerate("line grazing the box")
    act = np.flatnonzero(active)

    inc_line, inc_t, inc_v = [], [], []
    side_inc = {BOTTOM: [], RIGHT: [], TOP: [], LEFT: []}  # (param, vid)
    hit_pts = []
    for i in act:
        for t, side in ((tin[i], side_in[i]), (tout[i], side_out[i])):
            pt = P0[i] + t * D[i]
            hit_pts.append(pt)
            inc_line.append(i)
            inc_t.append(t)
            inc_v.append(nv)
            side_inc[int(side)].append((pt[0] if side in (BOTTOM, TOP) else pt[1], nv))
            nv += 1
    if hit_pts:
        verts.append(np.array(hit_pts))

    # crossings of active lines strictly inside the box
    if len(act) >= 2:
        I, J = np.triu_indices(len(act), 1)
        I, J = act[I], act[J]
        det = A[I, 0] * A[J, 1] - A[J, 0] * A[I, 1]
        ok = np.abs(det) > DET_EPS
        par = ~ok
        if par.any():
            # coincident lines cannot be ordered; parallel distinct lines never meet
            same = np.abs(C[I[par]] - C[J[par]] * np.sign(A[I[par], 0] * A[J[par], 0] + A[I[par], 1] * A[J[par], 1])) < tol
            if same.any():
                raise _Degenerate("coincident lines")
        I, J, det = I[ok], J[ok], det[ok]
        px = (C[I] * A[J, 1] - C[J] * A[I, 1]) / det
        py = (A[I, 0] * C[J] - A[J, 0] * C[I]) / det
        inside = (px > x0) & (px < x1) & (py > y0) & (py < y1)
        near = np.minimum.reduce([np.abs(px - x0), np.abs(px - x1), np.abs(py - y0), np.abs(py - y1)])
        if np.any(near[inside] < tol):
            raise _Degenerate("crossing on the box boundary")
        I, J, px, py = I[inside], J[inside], px[inside], py[inside]
        pts = np.column_stack([px, py])
        vid = nv + np.arange(len(I))
        nv += len(I)
        verts.append(pts)
        inc_line.extend(I.tolist())
        inc_t.extend(np.einsum("ij,ij->i", pts, D[I]).tolist())
        inc_v.extend(vid.tolist())
        inc_line.extend(J.tolist())
        inc_t.extend(np.einsum("ij,ij->i", pts, D[J]).tolist())
        inc_v.extend(vid.tolist())
    vertices = np.vstack(verts)

    inc_line = np.asarray(inc_line, dtype=np.int64)
    inc_t = np.asarray(inc_t, dtype=float)
    inc_v = np.asarray(inc_v, dtype=np.int64)
    order = np.lexsort((inc_t, inc_line))
    L, T, V = inc_line[order], inc_t[order], inc_v[order]
    same_line = L[1:] == L[:-1]
    if np.any(same_line & (np.diff(T) <= tol)):
        raise _Degenerate("concurrent lines")
    e_u = V[:-1][same_line]
    e_v = V[1:][same_line]
    e_line = L[:-1][same_line]
    e_dir = D[e_line]

    bu, bv, bl, bd = [], [], [], []
    corner_of = {BOTTOM: ((x0, 0), (x1, 1)), RIGHT: ((y0, 1), (y1, 2)), TOP: ((x0, 3), (x1, 2)), LEFT: ((y0, 0), (y1, 3))}
    side_dir = {BOTTOM: (1.0, 0.0), RIGHT: (0.0, 1.0), TOP: (1.0, 0.0), LEFT: (0.0, 1.0)}
    for side, items in side_inc.items():
        items = sorted(items + list(corner_of[side]))
        params = np.array([p for p, _ in items])
        if np.any(np.diff(params) <= tol):
            raise _Degenerate("coincident box incidences")
        for (_, a), (_, b) in zip(items[:-1], items[1:]):
            bu.append(a)
            bv.append(b)
            bl.append(side)
            bd.append(side_dir[side])
    edges = np.column_stack([np.concatenate([e_u, bu]), np.concatenate([e_v, bv])]).astype(np.int64)
    edge_line = np.concatenate([e_line, np.array(bl, dtype=np.int64)])
    edir = np.vstack([e_dir.reshape(-1, 2), np.array(bd, dtype=float).reshape(-1, 2)])

    # half-edges: 2e runs u->v along edir, 2e+1 runs back
    E = len(edges)
    origin = np.empty(2 * E, dtype=np.int64)
    origin[0::2] = edges[:, 0]
    origin[1::2] = edges[:, 1]
    dest = np.empty(2 * E, dtype=np.int64)
    dest[0::2] = edges[:, 1]
    dest[1::2] = edges[:, 0]
    hdir = np.empty((2 * E, 2))
    hdir[0::2] = edir
    hdir[1::2] = -edir
    ang = np.arctan2(hdir[:, 1], hdir[:, 0])
    ordh = np.lexsort((ang, origin))
    pos = np.empty(2 * E, dtype=np.int64)
    pos[ordh] = np.arange(2 * E)
    deg = np.bincount(origin, minlength=len(vertices))
    start = np.concatenate([[0], np.cumsum(deg)[:-1]])
    twin = np.arange(2 * E) ^ 1
    tpos = pos[twin]
    nxt = ordh[start[dest] + np.mod(tpos - start[dest] - 1, deg[dest])]

    # the lower side of any bottom box edge runs along the outer face
    outer_start = 2 * int(np.flatnonzero(edge_line == BOTTOM)[0]) + 1
    he_face = np.full(2 * E, -2, dtype=np.int64)
    faces = []
    areas = []
    nxt_list = nxt.tolist()
    for h0 in [outer_start] + list(range(2 * E)):
        if he_face[h0] != -2:
            continue
        cyc = [h0]
        h = nxt_list[h0]
        while h != h0:
            cyc.append(h)
            h = nxt_list[h]
        cyc = np.asarray(cyc, dtype=np.int64)
        if h0 == outer_start:
            he_face[cyc] = -1
            continue
        he_face[cyc] = len(faces)
        faces.append(cyc)
        areas.append(_area(vertices[origin[cyc]]))

    reps = np.array([_rep_point(vertices[origin[c]], a) for c, a in zip(faces, areas)]).reshape(-1, 2)
    near_tol = max(1e-9 * scale, 20.0 * shift)
    sub = PlanarSubdivision(
        bbox=(x0, y0, x1, y1), lines=list(lines), A=A, C=C, shift=shift, near_tol=near_tol,
        vertices=vertices, edges=edges, edge_line=edge_line, he_next=nxt, he_face=he_face,
        face_halfedges=faces, face_rep=reps, face_area=np.asarray(areas), sliver=np.zeros(len(faces), dtype=bool),
    )
    _check_reps(sub)
    return sub


def _area(poly: np.ndarray) -> float:
    q = poly - poly[0]
    return 0.5 * float(np.sum(q[:, 0] * np.roll(q[:, 1], -1) - np.roll(q[:, 0], -1) * q[:, 1]))


def _rep_point(poly: np.ndarray, area: float) -> np.ndarray:
    if area <= 0 or len(poly) < 3:
        return poly.mean(axis=0)
    # area centroid, translated to the first vertex for accuracy
    q = poly - poly[0]
    x, y = q[:, 0], q[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cr = x * yn - xn * y
    a6 = 3.0 * float(np.sum(cr))
    if a6 == 0.0:
        return poly.mean(axis=0)
    return poly[0] + np.array([np.sum((x + xn) * cr), np.sum((y + yn) * cr)]) / a6


def _check_reps(sub: PlanarSubdivision) -> None:
    """Make every representative locate back to its own face; mark faces too thin to hold one safely."""
    F = sub.n_faces
    if len(sub.lines) and F:
        R = sub.face_rep
        d0 = np.abs(R @ sub._orig[:, :2].T - sub._orig[:, 2])
        d1 = np.abs(R @ sub.A.T - sub.C)
        sub.sliver[:] = np.minimum(d0, d1).min(axis=1) < sub.near_tol
    if F * max(1, len(sub.edges)) > 5e7:
        return
    for f in range(F):
        if _locate_ok(sub, sub.face_rep[f], f):
            continue
        poly = sub.face_polygon(f)
        for w in (0.5, 0.25, 0.1):
            for v in poly:
                cand = (1 - w) * sub.face_rep[f] + w * v
                if _locate_ok(sub, cand, f):
                    sub.face_rep[f] = cand
                    break
            else:
                continue
            break
        else:
            raise ArrangementError(f"no representative point found for face {f}")


def _locate_ok(sub, p, f) -> bool:
    try:
        return point_locate(sub, p, tol=0.0) == f
    except AmbiguousLocation:
        return False


def point_locate(sub: PlanarSubdivision, x, tol: float | None = None) -> int:
    """Face containing ``x``, found by shooting a ray straight down to the first edge.

    Raises :class:`AmbiguousLocation` when ``x`` is within ``tol`` (default
    ``sub.near_tol``) of a line or outside the box.
    """
    px, py = map(float, x)
    if tol is None:
        tol = sub.near_tol
    if not sub.inside_box(px, py):
        raise AmbiguousLocation(f"({px}, {py}) is outside the bounding box")
    if tol > 0 and len(sub.lines) and sub.line_distances(px, py).min() < tol:
        raise AmbiguousLocation(f"({px}, {py}) is within {tol:g} of an arrangement line")
    V = sub.vertices
    xu = V[sub.edges[:, 0], 0]
    xv = V[sub.edges[:, 1], 0]
    yu = V[sub.edges[:, 0], 1]
    yv = V[sub.edges[:, 1], 1]
    lo = np.minimum(xu, xv)
    hi = np.maximum(xu, xv)
    cand = np.flatnonzero((lo <= px) & (px <= hi) & (hi > lo))
    if len(cand) == 0:
        return _locate_scan(sub, px, py)
    w = (px - xu[cand]) / (xv[cand] - xu[cand])
    yy = yu[cand] + w * (yv[cand] - yu[cand])
    below = yy < py
    if not below.any():
        return _locate_scan(sub, px, py)
    cb = cand[below]
    yb = yy[below]
    k = int(np.argmax(yb))
    top = yb[k]
    eps = 1e-12 * max(1.0, abs(top)) + 1e-15
    if np.count_nonzero(yb >= top - eps) > 1 or py - top < eps:
        return _locate_scan(sub, px, py)
    e = int(cb[k])
    h = 2 * e if xu[e] < xv[e] else 2 * e + 1
    f = int(sub.he_face[h])
    if f < 0:
        return _locate_scan(sub, px, py)
    return f


def _locate_scan(sub: PlanarSubdivision, px: float, py: float) -> int:
    """Linear scan over the (convex) faces."""
    best, best_margin = -1, -np.inf
    for f in range(sub.n_faces):
        poly = sub.face_polygon(f)
        nxt = np.roll(poly, -1, axis=0)
        cross = (nxt[:, 0] - poly[:, 0]) * (py - poly[:, 1]) - (nxt[:, 1] - poly[:, 1]) * (px - poly[:, 0])
        margin = cross.min()
        if margin > best_margin:
            best, best_margin = f, margin
    if best < 0:
        raise AmbiguousLocation(f"({px}, {py}) lies in no face")
    return best


# diagrams on the bisector arrangement ------------------------------------------

class _DSU:
    def __init__(self, n):
        self.p = list(range(n))

    def find(self, a):
        p = self.p
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.p[max(ra, rb)] = min(ra, rb)


@dataclass
class MergedCells:
    cell_of_face: np.ndarray
    n_cells: int
    complexity: tuple[int, int, int]  # (V, E, F) of the merged map
    components: int


def merge_faces(sub: PlanarSubdivision, labels: list) -> MergedCells:
    """Union adjacent faces with equal labels and measure the resulting planar map.

    Vertices of the merged map are the box corners and the points where the
    cell boundary branches or turns; edges are the boundary chains between them.
    """
    F = sub.n_faces
    dsu = _DSU(F)
    E = len(sub.edges)
    f0 = sub.he_face[0::2]
    f1 = sub.he_face[1::2]
    boundary = np.ones(E, dtype=bool)
    for e in range(E):
        a, b = int(f0[e]), int(f1[e])
        if a >= 0 and b >= 0 and labels[a] == labels[b]:
            dsu.union(a, b)
            boundary[e] = False
    roots = np.array([dsu.find(f) for f in range(F)], dtype=np.int64)
    _, cell_of_face = np.unique(roots, return_inverse=True)
    n_cells = int(cell_of_face.max()) + 1 if F else 0

    be = np.flatnonzero(boundary)
    incident: dict[int, list[int]] = {}
    for e in be:
        for v in sub.edges[e]:
            incident.setdefault(int(v), []).append(int(e))
    real = 0
    passthrough = 0
    for v, es in incident.items():
        if len(es) == 2 and sub.edge_line[es[0]] == sub.edge_line[es[1]]:
            passthrough += 1
        else:
            real += 1
    vdsu = _DSU(len(sub.vertices))
    for e in be:
        vdsu.union(int(sub.edges[e, 0]), int(sub.edges[e, 1]))
    comps = len({vdsu.find(v) for v in incident})
    return MergedCells(cell_of_face, n_cells, (real, len(be) - passthrough, n_cells), comps)


@dataclass
class CandidateDiagram:
    sites: SiteSet
    subdivision: PlanarSubdivision
    face_candidates: list[tuple[int, ...]]
    cells: MergedCells

    @property
    def complexity(self) -> tuple[int, int, int]:
        """(V, E, F) of the candidate diagram: faces merged by equal candidate set."""
        return self.cells.complexity

    @property
    def arrangement_complexity(self) -> tuple[int, int, int]:
        return self.subdivision.complexity()

    @property
    def space_complexity(self) -> int:
        """Sum of candidate-set sizes over the faces of the bisector arrangement."""
        return sum(len(c) for c in self.face_candidates)

    def query(self, x) -> tuple[tuple[int, ...], tuple[float, float], bool]:
        """Stored candidate set at ``x`` as ``(members, point_used, nudged)``."""
        f, used, nudged = self.subdivision.resolve(x)
        return self.face_candidates[f], used, nudged

    def to_json(self) -> dict:
        sub = self.subdivision
        return {
            "bbox": list(sub.bbox),
            "complexity": list(self.complexity),
            "arrangement_complexity": list(self.arrangement_complexity),
            "space_complexity": self.space_complexity,
            "faces": [
                {
                    "id": f,
                    "cell": int(self.cells.cell_of_face[f]),
                    "vertices": sub.face_polygon(f).tolist(),
                    "rep": sub.face_rep[f].tolist(),
                    "candidates": list(self.face_candidates[f]),
                }
                for f in range(sub.n_faces)
            ],
        }


def _site_bbox(sites: SiteSet, margin: float = 0.25):
    lo = sites.locs.min(axis=0)
    hi = sites.locs.max(axis=0)
    span = max(float(np.max(hi - lo)), 1e-6)
    pad = margin * span + 1e-3
    return (lo[0] - pad, lo[1] - pad, hi[0] + pad, hi[1] + pad)


def bisector_arrangement(sites: SiteSet, bbox=None) -> PlanarSubdivision:
    if len(sites) > MAX_DIAGRAM_SITES:
        raise ArrangementSizeError(f"{len(sites)} sites exceeds the limit of {MAX_DIAGRAM_SITES}")
    if bbox is None:
        bbox = _site_bbox(sites)
    # bisectors of any three sites meet in one point, so perturbation is the normal case here;
    # it stays recorded in sub.flags
    return build_arrangement(site_bisectors(sites), bbox, expand=True, warn=False)


def candidate_diagram(sites: SiteSet, bbox=None) -> CandidateDiagram:
    from .candidate import candidate_set

    sub = bisector_arrangement(sites, bbox)
    cands = [tuple(candidate_set(tuple(sub.face_rep[f]), sites).member_ids) for f in range(sub.n_faces)]
    return CandidateDiagram(sites, sub, cands, merge_faces(sub, cands))


@dataclass
class KthOrderCells:
    k: int
    subdivision: PlanarSubdivision
    face_labels: list[frozenset]
    cells: MergedCells

    @property
    def n_cells(self) -> int:
        return self.cells.n_cells

    def label_at(self, x) -> frozenset:
        f, _, _ = self.subdivision.resolve(x)
        return self.face_labels[f]

    def cell_faces(self, cell: int) -> list[int]:
        return [int(f) for f in np.flatnonzero(self.cells.cell_of_face == cell)]


def k_nearest(sites: SiteSet, x, k: int) -> frozenset:
    """Ids of the ``k`` nearest sites, distance ties broken by id."""
    d2 = sites.dist2_from(x)
    order = np.lexsort((sites.ids, d2))
    return frozenset(int(i) for i in sites.ids[order[:k]])


def kth_order_cells(sites: SiteSet, k: int, bbox=None) -> KthOrderCells:
    if not 1 <= k <= len(sites):
        raise ValueError(f"k must lie in [1, {len(sites)}]")
    sub = bisector_arrangement(sites, bbox)
    labels = [k_nearest(sites, sub.face_rep[f], k) for f in range(sub.n_faces)]
    return KthOrderCells(k, sub, labels, merge_faces(sub, labels))
