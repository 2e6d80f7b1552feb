"""Staircase (Pareto minima) computation in d dimensions.

Dominance between two distinct elements uses coordinatewise ``<=``; two
elements with identical coordinates are ordered by id, so the staircase of a
nonempty cloud is never empty and the relation stays a strict partial order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_HULL_DIM = 20
_CHUNK = 64


class EmptyInputError(ValueError):
    pass


@dataclass(frozen=True)
class PointCloud:
    dim: int
    ids: np.ndarray
    coords: np.ndarray

    @classmethod
    def from_points(cls, points, ids=None) -> "PointCloud":
        coords = np.asarray(points, dtype=float)
        if coords.ndim == 1:
            coords = coords.reshape(-1, 1)
        if ids is None:
            ids = np.arange(len(coords))
        ids = np.asarray(ids, dtype=np.int64)
        if len(ids) != len(coords):
            raise ValueError("ids and points differ in length")
        if len(np.unique(ids)) != len(ids):
            raise ValueError("duplicate ids in point cloud")
        return cls(coords.shape[1], ids, coords)

    def __len__(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class StaircaseResult:
    member_ids: list[int]

    @property
    def size(self) -> int:
        return len(self.member_ids)


def _cloud(points, ids=None) -> PointCloud:
    return points if isinstance(points, PointCloud) else PointCloud.from_points(points, ids)


def _dominance(a: np.ndarray, a_ids: np.ndarray, b: np.ndarray, b_ids: np.ndarray) -> np.ndarray:
    """``out[i, j]`` is true iff ``b[j]`` dominates ``a[i]``."""
    le = np.all(b[None, :, :] <= a[:, None, :], axis=2)
    strict = np.any(b[None, :, :] < a[:, None, :], axis=2) | (b_ids[None, :] < a_ids[:, None])
    return le & strict


def prefix_minima_mask(coords: np.ndarray, ids: np.ndarray, order: np.ndarray) -> np.ndarray:
    """Mark each element that no element earlier in ``order`` dominates.

    Works chunk by chunk while keeping the staircase of everything processed so
    far: an element has an earlier dominator iff some staircase member or some
    earlier element of its own chunk dominates it.
    """
    n = len(order)
    mask = np.zeros(len(coords), dtype=bool)
    if n == 0:
        return mask
    d = coords.shape[1]
    front = np.empty((0, d))
    front_ids = np.empty(0, dtype=np.int64)
    for start in range(0, n, _CHUNK):
        chunk = order[start:start + _CHUNK]
        pts = coords[chunk]
        cids = ids[chunk]
        if len(front):
            sel = np.flatnonzero(~_dominance(pts, cids, front, front_ids).any(axis=1))
            if len(sel) == 0:
                continue
            chunk, pts, cids = chunk[sel], pts[sel], cids[sel]
        alive = ~np.tril(_dominance(pts, cids, pts, cids), k=-1).any(axis=1)
        mask[chunk[alive]] = True
        new, new_ids = pts[alive], cids[alive]
        # for orders other than lexicographic a newcomer may dominate older staircase members
        keep_front = ~_dominance(front, front_ids, new, new_ids).any(axis=1)
        keep_new = ~_dominance(new, new_ids, new, new_ids).any(axis=1)
        front = np.vstack([front[keep_front], new[keep_new]])
        front_ids = np.concatenate([front_ids[keep_front], new_ids[keep_new]])
    return mask


def lexicographic_order(coords: np.ndarray, ids: np.ndarray) -> np.ndarray:
    keys = [ids] + [coords[:, j] for j in range(coords.shape[1] - 1, -1, -1)]
    return np.lexsort(keys)


def staircase_mask(coords: np.ndarray, ids: np.ndarray) -> np.ndarray:
    """Boolean mask of the undominated rows of ``coords``."""
    n, d = coords.shape
    if n == 0:
        return np.zeros(0, dtype=bool)
    order = lexicographic_order(coords, ids)
    if d == 1:
        mask = np.zeros(n, dtype=bool)
        mask[order[0]] = True
        return mask
    if d == 2:
        # sorted by (x, y, id): a point survives iff its y beats every earlier y
        ys = coords[order, 1]
        prev_min = np.minimum.accumulate(np.concatenate([[np.inf], ys[:-1]]))
        mask = np.zeros(n, dtype=bool)
        mask[order[ys < prev_min]] = True
        return mask
    return prefix_minima_mask(coords, ids, order)


def staircase(points, ids=None) -> StaircaseResult:
    cloud = _cloud(points, ids)
    if len(cloud) == 0:
        raise EmptyInputError("staircase of an empty cloud")
    mask = staircase_mask(cloud.coords, cloud.ids)
    return StaircaseResult(sorted(int(i) for i in cloud.ids[mask]))


def staircase_bruteforce(points, ids=None) -> StaircaseResult:
    """O(n^2 d) pairwise filter; reference for the sorted paths."""
    cloud = _cloud(points, ids)
    if len(cloud) == 0:
        raise EmptyInputError("staircase of an empty cloud")
    c = cloud.coords
    le = np.all(c[:, None, :] <= c[None, :, :], axis=2)
    lt = np.any(c[:, None, :] < c[None, :, :], axis=2) | (cloud.ids[:, None] < cloud.ids[None, :])
    dom = le & lt  # dom[j, i]: j dominates i
    np.fill_diagonal(dom, False)
    keep = ~dom.any(axis=0)
    return StaircaseResult(sorted(int(i) for i in cloud.ids[keep]))


def prefix_staircase_union(points, ids=None) -> StaircaseResult:
    """Union of the staircases of all prefixes of an ordered cloud.

    A point lies in some prefix staircase iff it lies in the staircase of its
    own prefix, i.e. no earlier point dominates it.
    """
    cloud = _cloud(points, ids)
    if len(cloud) == 0:
        raise EmptyInputError("staircase of an empty cloud")
    mask = prefix_minima_mask(cloud.coords, cloud.ids, np.arange(len(cloud)))
    return StaircaseResult(sorted(int(i) for i in cloud.ids[mask]))


def orthogonal_hull_points(points, ids=None) -> list[int]:
    """Points on the staircase of at least one of the ``2^d`` corners."""
    cloud = _cloud(points, ids)
    if cloud.dim > MAX_HULL_DIM:
        raise ValueError(f"refusing 2^{cloud.dim} corner staircases (d > {MAX_HULL_DIM})")
    if len(cloud) == 0:
        raise EmptyInputError("orthogonal hull of an empty cloud")
    members: set[int] = set()
    for mask in range(1 << cloud.dim):
        flip = np.array([(mask >> j) & 1 for j in range(cloud.dim)], dtype=bool)
        coords = np.where(flip, 1.0 - cloud.coords, cloud.coords)
        members.update(int(i) for i in cloud.ids[staircase_mask(coords, cloud.ids)])
    return sorted(members)
