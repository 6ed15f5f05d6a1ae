"""Planar helpers shared by the packer, the validator and the renderers.

Every consumer that needs a chart in atlas space goes through
:func:`placed_vertices`, so the packer's texel bookkeeping and the
validator see bit-identical coordinates.
"""

from __future__ import annotations

import math

import numpy as np


def rotate(points: np.ndarray, angle: float) -> np.ndarray:
    """Rotate points counter-clockwise by ``angle`` radians about the origin."""
    if angle == 0.0:
        return np.array(points, dtype=np.float64, copy=True)
    c, s = math.cos(angle), math.sin(angle)
    x, y = points[:, 0], points[:, 1]
    return np.stack([x * c - y * s, x * s + y * c], axis=1)


def rotate_quarter(points: np.ndarray, degrees: int) -> np.ndarray:
    """Rotate by a multiple of 90 degrees using exact coordinate swaps."""
    x, y = points[:, 0], points[:, 1]
    turns = (degrees // 90) % 4
    if turns == 0:
        return np.array(points, dtype=np.float64, copy=True)
    if turns == 1:
        return np.stack([-y, x], axis=1)
    if turns == 2:
        return np.stack([-x, -y], axis=1)
    return np.stack([y, -x], axis=1)


def posed_vertices(vertices: np.ndarray, prerotation: float = 0.0,
                   rotation: int = 0) -> np.ndarray:
    """Vertices after pre-rotation and quarter turn, translated to a zero minimum."""
    v = rotate(np.asarray(vertices, dtype=np.float64), prerotation)
    v = rotate_quarter(v, rotation)
    return v - v.min(axis=0)


def scaled_extent(length, num: int, den: int):
    """Integer texel extent of a continuous length at scale num/den.

    Works on scalars and arrays; the operation order matches the kernels.
    """
    return np.ceil(length * num / den).astype(np.int64)


def placed_vertices(vertices: np.ndarray, placement) -> np.ndarray:
    """Map chart vertices into atlas texel space for ``placement``.

    The chain is pre-rotation, quarter turn, translation to the origin,
    scaling, reflection inside the integer texel box, then the integer
    translation.
    """
    base = posed_vertices(vertices, placement.prerotation_angle, placement.rotation)
    num, den = placement.scale
    out = base * num / den
    if placement.reflect_x:
        out[:, 0] = int(scaled_extent(base[:, 0].max(), num, den)) - out[:, 0]
    if placement.reflect_y:
        out[:, 1] = int(scaled_extent(base[:, 1].max(), num, den)) - out[:, 1]
    tx, ty = placement.translation
    out[:, 0] += tx
    out[:, 1] += ty
    return out


def triangle_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Unsigned area of each triangle."""
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    return 0.5 * np.abs(cross)


def boundary_loops(triangles: np.ndarray) -> list[list[int]]:
    """Closed vertex loops along edges used by exactly one triangle."""
    edges = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    key = np.sort(edges, axis=1)
    uniq, counts = np.unique(key, axis=0, return_counts=True)
    border = uniq[counts == 1]
    neighbours: dict[int, list[int]] = {}
    for a, b in border.tolist():
        neighbours.setdefault(a, []).append(b)
        neighbours.setdefault(b, []).append(a)
    used: set[tuple[int, int]] = set()
    loops = []
    for start in sorted(neighbours):
        for first in sorted(neighbours[start]):
            if (min(start, first), max(start, first)) in used:
                continue
            loop = [start]
            prev, cur = start, first
            used.add((min(start, first), max(start, first)))
            while cur != start:
                loop.append(cur)
                nxt = None
                for cand in sorted(neighbours[cur]):
                    e = (min(cur, cand), max(cur, cand))
                    if cand != prev and e not in used:
                        nxt = cand
                        break
                if nxt is None:
                    break
                used.add((min(cur, nxt), max(cur, nxt)))
                prev, cur = cur, nxt
            if len(loop) >= 3:
                loops.append(loop)
    return loops


def polygon_area(points: np.ndarray) -> float:
    x, y = points[:, 0], points[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))
