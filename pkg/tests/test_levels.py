import math

import numpy as np
import pytest

from pplab.arrangement import DegeneracyWarning, k_nearest
from pplab.geometry import lift_all
from pplab.levels import (
    LevelSizeError, below_conflict_sizes, edges_on_line_at_level, enumerate_plane_vertices,
    incremental_k_level_vertices, k_level_edges_lines, line_levels, moment_experiment, plane_edges,
    point_level_lines, random_lines,
)
from pplab.random_model import sample_site_set


def level_on_line(L, i, x):
    """Lines other than ``i`` strictly below line ``i`` at abscissa ``x``."""
    y = L[:, 0] * x + L[:, 1]
    return int(np.count_nonzero(np.delete(y, i) < y[i]))


# point levels

def test_point_level_extremes(rng):
    L = random_lines(8, rng)
    assert point_level_lines(L, (0.0, -100.0)) == 0
    assert point_level_lines(L, (0.0, 100.0)) == 8


def test_point_level_matches_direct_evaluation(rng):
    L = random_lines(20, rng)
    for p in rng.normal(size=(100, 2)):
        assert point_level_lines(L, p) == int(np.count_nonzero(L[:, 0] * p[0] + L[:, 1] < p[1]))


def test_point_level_on_line_is_flagged():
    with pytest.warns(DegeneracyWarning):
        assert point_level_lines([(1.0, 0.0), (0.0, 5.0)], (2.0, 2.0)) == 1


# k-level edges of lines

def test_two_lines_lower_envelope():
    edges = k_level_edges_lines([(1.0, 0.0), (-1.0, 0.0)], 0)
    assert len(edges) == 2
    assert {e.line for e in edges} == {0, 1}
    assert sorted((e.x0, e.x1) for e in edges) == [(-math.inf, 0.0), (0.0, math.inf)]
    for line in (0, 1):
        assert edges_on_line_at_level([(1.0, 0.0), (-1.0, 0.0)], line, 0) == 1


def test_lower_envelope_edge_count(rng):
    for _ in range(20):
        L = random_lines(15, rng)
        assert len(k_level_edges_lines(L, 0)) <= 15


def lower_hull(points):
    pts = sorted(points)
    hull = []
    for p in pts:
        while len(hull) >= 2:
            (ax, ay, _), (bx, by, _) = hull[-2], hull[-1]
            if (bx - ax) * (p[1] - ay) - (by - ay) * (p[0] - ax) <= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


def test_lower_envelope_matches_dual_hull(rng):
    # the lines on the lower envelope are the lower hull of the dual points (slope, intercept),
    # visited in decreasing slope from left to right
    for _ in range(30):
        L = random_lines(12, rng)
        hull = lower_hull([(m, b, i) for i, (m, b) in enumerate(L)])
        expect = [i for _, _, i in reversed(hull)]
        got = [e.line for e in sorted(k_level_edges_lines(L, 0), key=lambda e: e.x0)]
        assert got == expect


@pytest.mark.parametrize("k", range(6))
def test_level_edges_match_midpoint_oracle(k, rng):
    for _ in range(5):
        L = random_lines(12, rng)
        got = {(e.line, round(e.midpoint_x(), 9)) for e in k_level_edges_lines(L, k)}
        for e in k_level_edges_lines(L, k):
            assert level_on_line(L, e.line, e.midpoint_x()) == k
        expect = set()
        for i in range(12):
            xs = sorted((L[j, 1] - L[i, 1]) / (L[i, 0] - L[j, 0]) for j in range(12) if j != i)
            mids = [xs[0] - 1.0] + [0.5 * (a + b) for a, b in zip(xs, xs[1:])] + [xs[-1] + 1.0]
            expect |= {(i, round(x, 9)) for x in mids if level_on_line(L, i, x) == k}
        assert got == expect


def test_edges_per_line_bound(rng):
    for _ in range(30):
        L = random_lines(12, rng)
        lv = line_levels(L)
        for k in range(6):
            for i in range(12):
                assert sum(1 for e in lv.edges if e.level == k and e.line == i) <= k + 2


def test_top_level_is_upper_envelope(rng):
    L = random_lines(6, rng)
    counts = [edges_on_line_at_level(L, i, 5) for i in range(6)]
    assert sum(counts) >= 1
    # level m-1 is the upper envelope: the dual upper hull, i.e. the lower hull of (slope, -intercept)
    on_top = {i for _, _, i in lower_hull([(m, -b, i) for i, (m, b) in enumerate(L)])}
    assert {i for i, c in enumerate(counts) if c} == on_top
    assert edges_on_line_at_level([(0.5, 0.1)], 0, 0) == 1


def test_parallel_lines_levels():
    L = [(1.0, 0.0), (1.0, 2.0), (-1.0, 1.0)]
    lv = line_levels(L)
    assert not lv.perturbed
    for e in lv.edges:
        assert level_on_line(np.asarray(L), e.line, e.midpoint_x()) == e.level


def test_concurrent_lines_are_perturbed():
    L = [(1.0, 0.0), (-1.0, 0.0), (2.0, 0.0)]
    with pytest.warns(DegeneracyWarning):
        lv = line_levels(L)
    assert lv.perturbed and lv.flags
    assert len(lv.edges) == 3 * 3


# incremental k-level vertices

def test_incremental_two_lines():
    L = np.array([(1.0, 0.0), (-1.0, 0.5)])
    for k in range(3):
        assert incremental_k_level_vertices(L, [1, 0], k) <= 1


def test_incremental_bound_and_order_dependence(rng):
    L = random_lines(25, rng)
    k = 2
    counts = [incremental_k_level_vertices(L, rng.permutation(25), k) for _ in range(2)]
    assert all(c <= 2 * (k + 2) * 25 for c in counts)
    final = {frozenset((e.line, e.right)) for e in k_level_edges_lines(L, k) if e.right >= 0}
    assert min(counts) >= len(final)


def test_incremental_rejects_bad_order(rng):
    with pytest.raises(ValueError):
        incremental_k_level_vertices(random_lines(4, rng), [0, 1, 1, 3], 1)


# plane arrangements

def test_three_planes_one_vertex():
    H = [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.3, 0.2, 1.0)]
    vs = enumerate_plane_vertices(H)
    assert len(vs) == 1 and vs[0].level == 0


def test_four_generic_planes(rng):
    H = rng.normal(size=(4, 3))
    vs = enumerate_plane_vertices(H)
    assert len(vs) == 4
    for v in vs:
        x, y, z = v.coords
        other = (set(range(4)) - set(v.triple)).pop()
        direct = int(H[other, 0] * x + H[other, 1] * y + H[other, 2] < z)
        assert v.level == direct in (0, 1)


def test_lifted_vertex_is_equidistant():
    s = sample_site_set(5, 1, seed=8)
    for v in enumerate_plane_vertices(lift_all(s)):
        x, y, _ = v.coords
        d = [math.dist((x, y), s.locs[t]) for t in v.triple]
        assert max(d) - min(d) <= 1e-8 * max(1.0, max(d))


def test_plane_limit():
    with pytest.raises(LevelSizeError):
        enumerate_plane_vertices(np.zeros((81, 3)))


def test_conflicts_without_external_planes(rng):
    H = rng.normal(size=(8, 3))
    cs = below_conflict_sizes(range(8), H, 3)
    assert cs.vertex_b and all(b == 0 for b in cs.vertex_b.values())
    assert cs.edge_sum == 0


def test_single_plane_below_everything(rng):
    H = np.vstack([rng.normal(size=(7, 3)), [[0.0, 0.0, -1e7]]])
    cs = below_conflict_sizes(range(7), H, 10)
    assert len(cs.vertex_b) == 35
    assert all(b == 1 for b in cs.vertex_b.values())


def test_edge_conflicts_bounded_by_endpoints():
    s = sample_site_set(30, 1, seed=31)
    H = lift_all(s)
    R = np.random.default_rng(3).choice(30, 15, replace=False)
    cs = below_conflict_sizes(R, H, 2)
    assert cs.edge_violations == 0
    for e, be in cs.edge_b:
        if all(v is not None for v in e.end_vertices):
            bu, bv = (cs.vertex_b.get(tuple(v)) for v in e.end_vertices)
            if bu is not None and bv is not None:
                assert be <= bu + bv


def test_moments_full_sample_is_zero():
    rep = moment_experiment(12, 12, 2, trials=3, seed=1)
    assert rep.vertex_sums == [0, 0, 0] and rep.edge_sums == [0, 0, 0]
    rep = moment_experiment(10, 10, 100, trials=2, seed=1)
    assert rep.vertex_mean == 0


def test_moment_sample_size_checked():
    with pytest.raises(ValueError):
        moment_experiment(10, 2, 1, trials=1)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_lifted_level_edges_project_to_kth_order_boundaries(k):
    # an edge of level k-1 lies on a bisector (i, j) with k-1 sites closer; crossing it swaps i and j
    s = sample_site_set(10, 1, seed=50 + k)
    H = lift_all(s)
    for e in plane_edges(H):
        if e.level != k - 1:
            continue
        (ax, ay), (bx, by) = e.ends
        mx, my = (ax + bx) / 2, (ay + by) / 2
        i, j = e.pair
        nx, ny = s.locs[j] - s.locs[i]
        eps = 1e-7 / math.hypot(nx, ny)
        near_i = k_nearest(s, (mx - eps * nx, my - eps * ny), k)
        near_j = k_nearest(s, (mx + eps * nx, my + eps * ny), k)
        assert near_i ^ near_j == {int(s.ids[i]), int(s.ids[j])}


def test_plane_edges_levels_match_direct_count(rng):
    H = rng.normal(size=(7, 3))
    for e in plane_edges(H):
        (ax, ay), (bx, by) = e.ends
        mx, my = (ax + bx) / 2, (ay + by) / 2
        z = H[:, 0] * mx + H[:, 1] * my + H[:, 2]
        i = e.pair[0]
        assert int(np.count_nonzero(np.delete(z, list(e.pair)) < z[i])) == e.level


def test_lifted_conflicts_match_circumcircle_oracle():
    # a lifted plane lies below a vertex exactly when its site is inside the circle through the triple
    s = sample_site_set(24, 1, seed=77)
    H = lift_all(s)
    R = np.random.default_rng(5).choice(24, 12, replace=False)
    ext = [j for j in range(24) if j not in set(R.tolist())]
    cs = below_conflict_sizes(R, H, 2)
    assert cs.vertex_b
    for triple, b in cs.vertex_b.items():
        (ax, ay), (bx, by), (cx, cy) = s.locs[list(triple)]
        d = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
        ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay) + (cx * cx + cy * cy) * (ay - by)) / d
        uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx) + (cx * cx + cy * cy) * (bx - ax)) / d
        rad2 = (ax - ux) ** 2 + (ay - uy) ** 2
        inside = sum((s.locs[j, 0] - ux) ** 2 + (s.locs[j, 1] - uy) ** 2 < rad2 for j in ext)
        inner = sum((s.locs[j, 0] - ux) ** 2 + (s.locs[j, 1] - uy) ** 2 < rad2 for j in R if j not in triple)
        assert inner <= 2
        assert b == inside
