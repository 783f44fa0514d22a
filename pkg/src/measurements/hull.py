"""
2D convex hulls (monotone chain) and their boundary edges
"""
from typing import List, Sequence

import numpy as np


def _cross(o: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull_2d(points: Sequence[Sequence[float]]) -> List[int]:
    """Indices of the counter-clockwise hull, starting at the lexicographic minimum.

    Collinear points on hull edges and duplicate points are left out. All-collinear
    input yields the two segment endpoints; a single distinct point yields one index.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        return []

    order = np.lexsort((pts[:, 1], pts[:, 0]))
    unique: List[int] = []
    for i in order.tolist():
        if unique and pts[i, 0] == pts[unique[-1], 0] and pts[i, 1] == pts[unique[-1], 1]:
            continue
        unique.append(i)
    if len(unique) <= 2:
        return unique

    lower: List[int] = []
    for i in unique:
        while len(lower) >= 2 and _cross(pts[lower[-2]], pts[lower[-1]], pts[i]) <= 0:
            lower.pop()
        lower.append(i)
    upper: List[int] = []
    for i in reversed(unique):
        while len(upper) >= 2 and _cross(pts[upper[-2]], pts[upper[-1]], pts[i]) <= 0:
            upper.pop()
        upper.append(i)
    return lower[:-1] + upper[:-1]


def closed_edges(count: int) -> np.ndarray:
    """Consecutive index pairs of a closed loop; a 2-point loop runs there and back"""
    if count < 2:
        return np.zeros((0, 2), dtype=np.int64)
    idx = np.arange(count)
    return np.column_stack([idx, np.roll(idx, -1)])


def hull_edge_lengths(points: Sequence[Sequence[float]], hull: Sequence[int]) -> np.ndarray:
    """Lengths of the closed boundary edges; a degenerate hull runs there and back"""
    pts = np.asarray(points, dtype=np.float64)[list(hull)]
    edges = closed_edges(len(pts))
    return np.linalg.norm(pts[edges[:, 1]] - pts[edges[:, 0]], axis=1)
