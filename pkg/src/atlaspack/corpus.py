"""Deterministic synthetic chart sets for tests and benchmarks."""

from __future__ import annotations

import math

import numpy as np

from .chartset_io import Chart, ChartSet
from .geometry import rotate, triangle_areas

SHAPES = ("rectangle", "right_triangle", "l_shape", "blob")


def _rectangle(rng, w, h):
    v = np.array([[0, 0], [w, 0], [w, h], [0, h]], dtype=np.float64)
    return v, np.array([[0, 1, 2], [0, 2, 3]])


def _right_triangle(rng, w, h):
    corners = np.array([[0, 0], [w, 0], [w, h], [0, h]], dtype=np.float64)
    drop = int(rng.integers(4))
    v = np.delete(corners, drop, axis=0)
    return v, np.array([[0, 1, 2]])


def _l_shape(rng, w, h):
    fx, fy = rng.uniform(0.3, 0.75, size=2)
    nx, ny = w * fx, h * fy
    # notch cut from the top-right corner; index 3 is the reflex corner
    v = np.array([[0, 0], [nx, 0], [nx, h - ny], [w, h - ny], [w, h], [0, h]], dtype=np.float64)
    v = v[[2, 3, 4, 5, 0, 1]]  # start the fan at the reflex corner
    tris = np.array([[0, 1, 2], [0, 2, 3], [0, 3, 4], [0, 4, 5]])
    flip = int(rng.integers(4))
    if flip & 1:
        v[:, 0] = w - v[:, 0]
    if flip & 2:
        v[:, 1] = h - v[:, 1]
    return v, tris


def _blob(rng, w, h):
    m = int(rng.integers(5, 13))
    ang = np.sort(rng.uniform(0.0, 2.0 * math.pi, size=m))
    rad = rng.uniform(0.7, 1.0, size=m)
    ring = np.stack([0.5 * w * (1 + rad * np.cos(ang)), 0.5 * h * (1 + rad * np.sin(ang))], axis=1)
    v = np.vstack([[0.5 * w, 0.5 * h], ring])
    tris = np.array([[0, 1 + i, 1 + (i + 1) % m] for i in range(m)])
    return v, tris


_MAKERS = {"rectangle": _rectangle, "right_triangle": _right_triangle,
           "l_shape": _l_shape, "blob": _blob}


def generate(seed: int, count: int, area: float = 2.0 * 256 * 256,
             height_ratio: float = 20.0, rotate_fraction: float = 0.3) -> ChartSet:
    """Random star-shaped charts whose total area is ``area``.

    Heights are log-uniform and the tallest chart is ``height_ratio`` times
    the shortest.
    """
    if count < 1:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(seed)
    heights = np.exp(rng.uniform(0.0, math.log(height_ratio), size=count))
    if count >= 2:
        heights[0], heights[1] = height_ratio, 1.0
    raw = []
    for h in heights:
        shape = SHAPES[int(rng.integers(len(SHAPES)))]
        w = h * math.exp(rng.uniform(math.log(0.25), math.log(1.5)))
        v, tris = _MAKERS[shape](rng, w, h)
        if rng.uniform() < rotate_fraction:
            v = rotate(v, float(rng.uniform(0.0, math.pi)))
        raw.append((v - v.min(axis=0), tris))
    total = sum(float(triangle_areas(v, t).sum()) for v, t in raw)
    k = math.sqrt(area / total)
    charts = [Chart(i, np.round(v * k, 6), t) for i, (v, t) in enumerate(raw)]
    return ChartSet(charts, source_name=f"synthetic-{seed}-{count}")
