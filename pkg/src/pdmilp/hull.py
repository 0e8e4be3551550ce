"""Finite point sets generating conv(X_i).

For a compact mixed-integer set, conv(X_i) is the convex hull of the vertices
of the continuous slices ``{w : (k, w) in X_i}`` taken over every feasible
integer assignment ``k``. Pure-integer blocks are simply enumerated. The
resulting point cloud is pruned to its extreme points with qhull when the
points are full-dimensional.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .model import AgentBlock

__all__ = ["HullCapExceeded", "integer_grid_size", "integer_points", "slice_vertices", "hull_points"]

DEFAULT_CAP = 100_000


class HullCapExceeded(ValueError):
    """The integer enumeration would exceed the configured cap."""


def _int_ranges(block: AgentBlock):
    idx = list(block.integer_idx)
    lo = np.ceil(block.lower[idx] - 1e-9).astype(int)
    hi = np.floor(block.upper[idx] + 1e-9).astype(int)
    return idx, lo, hi


def integer_grid_size(block: AgentBlock) -> int:
    _, lo, hi = _int_ranges(block)
    return int(math.prod(int(max(h - l + 1, 0)) for l, h in zip(lo, hi)))


def _grid(lo, hi):
    axes = [np.arange(l, h + 1, dtype=float) for l, h in zip(lo, hi)]
    if not axes:
        return np.zeros((1, 0))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def integer_points(block: AgentBlock, cap: int = DEFAULT_CAP, tol: float = 1e-9) -> np.ndarray:
    """All points of a pure-integer X_i, in lexicographic order."""
    if not block.is_pure_integer:
        raise ValueError("integer_points needs a pure-integer block")
    size = integer_grid_size(block)
    if size > cap:
        raise HullCapExceeded(f"{size} integer points exceed cap {cap}")
    _, lo, hi = _int_ranges(block)
    P = _grid(lo, hi)
    if block.local_lhs.shape[0]:
        P = P[np.all(P @ block.local_lhs.T <= block.local_rhs + tol, axis=1)]
    return P


def slice_vertices(block: AgentBlock, k, tol: float = 1e-9) -> np.ndarray:
    """Vertices of the continuous slice at integer assignment ``k`` (may be empty)."""
    ints, cont = list(block.integer_idx), list(block.continuous_idx)
    D = block.local_lhs
    h = block.local_rhs - D[:, ints] @ np.asarray(k, dtype=float)
    G = D[:, cont]
    R = len(cont)
    lo, hi = block.lower[cont], block.upper[cont]
    if R == 1:
        g = G[:, 0]
        zero = np.abs(g) <= 1e-14
        if np.any(h[zero] < -tol):
            return np.zeros((0, 1))
        a = max(lo[0], np.max(h[g < -1e-14] / g[g < -1e-14], initial=-np.inf))
        b = min(hi[0], np.min(h[g > 1e-14] / g[g > 1e-14], initial=np.inf))
        if a > b + tol:
            return np.zeros((0, 1))
        return np.array([[a], [b]]) if b > a else np.array([[a]])
    Gall = np.vstack([G, np.eye(R), -np.eye(R)])
    hall = np.concatenate([h, hi, -lo])
    verts = []
    for rows in itertools.combinations(range(Gall.shape[0]), R):
        M = Gall[list(rows)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        w = np.linalg.solve(M, hall[list(rows)])
        if np.all(Gall @ w <= hall + 1e-9 * (1 + np.abs(hall))):
            verts.append(w)
    if not verts:
        return np.zeros((0, R))
    return np.unique(np.round(np.array(verts), 12), axis=0)


def _extreme(P: np.ndarray) -> np.ndarray:
    if P.shape[0] <= 2:
        return P
    n = P.shape[1]
    if n == 1:
        return np.array([P[np.argmin(P[:, 0])], P[np.argmax(P[:, 0])]])
    try:
        hull = ConvexHull(P)
    except (QhullError, ValueError):
        return P
    return P[np.sort(hull.vertices)]


def hull_points(block: AgentBlock, cap: int = DEFAULT_CAP, prune: bool = True) -> np.ndarray:
    """Points of X_i whose convex hull equals conv(X_i).

    Raises :class:`HullCapExceeded` when the integer grid is larger than
    ``cap``, and ``ValueError`` when X_i is empty.
    """
    size = integer_grid_size(block)
    if size > cap:
        raise HullCapExceeded(f"{size} integer assignments exceed cap {cap}")
    if block.is_pure_integer:
        P = integer_points(block, cap)
    else:
        ints, cont = list(block.integer_idx), list(block.continuous_idx)
        _, lo, hi = _int_ranges(block)
        pts = []
        for k in _grid(lo, hi):
            V = slice_vertices(block, k)
            if V.shape[0]:
                X = np.empty((V.shape[0], block.n))
                X[:, ints] = k
                X[:, cont] = V
                pts.append(X)
        P = np.vstack(pts) if pts else np.zeros((0, block.n))
    if P.shape[0] == 0:
        raise ValueError("local set X_i is empty")
    P = np.unique(P, axis=0)
    return _extreme(P) if prune else P
