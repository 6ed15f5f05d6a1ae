"""Horizontal compaction of two neighbouring charts from their proxies.

Both charts are taken in their final pose with top-aligned bounding boxes,
the right box flush against the left one. The distance is how far the right
chart may slide left without the proxies overlapping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .proxies import ChartProxy, LocalAabbProxy, Obb


@dataclass(frozen=True)
class PairCompaction:
    distance: float
    left_locked: bool
    right_locked: bool
    source: str  # "local", "obb" or "zero"


def _bands(proxy: LocalAabbProxy):
    """Horizontal slices relative to the proxy's box: (top, bottom, left, right)."""
    x0, y0 = proxy.x_edges[0], proxy.y_edges[0]
    keep = ~proxy.y_empty
    return (proxy.y_edges[:-1][keep] - y0, proxy.y_edges[1:][keep] - y0,
            proxy.y_left[keep] - x0, proxy.y_right[keep] - x0)


def distance_local(left: LocalAabbProxy, right: LocalAabbProxy) -> float:
    """Slide allowed by the horizontal slices whose vertical extents overlap."""
    lt, lb, _, lr = _bands(left)
    rt, rb, rl, _ = _bands(right)
    wl = left.x_edges[-1] - left.x_edges[0]
    overlap = (lt[:, None] < rb[None, :]) & (rt[None, :] < lb[:, None])
    if not overlap.any():
        return 0.0
    gaps = (wl + rl)[None, :] - lr[:, None]
    return max(0.0, float(gaps[overlap].min()))


def _projection(corners: np.ndarray, axis: np.ndarray) -> tuple[float, float]:
    p = corners @ axis
    return float(p.min()), float(p.max())


def distance_obb(left: Obb, right: Obb, cap: float = math.inf) -> float:
    """Slide of the right box before it touches the left one (separating axes).

    Both boxes must already be placed in the shared frame. When no slide
    makes them overlap the result is ``cap``.
    """
    a = left.corners()
    b = right.corners()
    lo, hi = -math.inf, math.inf
    for axis in (*left.axes(), *right.axes()):
        if axis[0] < 0:
            axis = -axis
        a0, a1 = _projection(a, axis)
        b0, b1 = _projection(b, axis)
        nx = float(axis[0])
        if nx <= 1e-15:
            if not (b0 < a1 and a0 < b1):
                return cap
            continue
        # sliding by t moves b's projection by -t * nx
        lo = max(lo, (b0 - a1) / nx)
        hi = min(hi, (b1 - a0) / nx)
    if lo >= hi or hi <= 0.0:
        return cap
    return max(0.0, lo)


def _local_locks(left: LocalAabbProxy, right: LocalAabbProxy, offset: float) -> tuple[bool, bool]:
    lt, lb, _, lr = _bands(left)
    rt, rb, rl, _ = _bands(right)
    touching = (offset + rl)[None, :] <= lr[:, None]
    left_locked = bool((touching & (rb[None, :] <= lt[:, None])).any())
    right_locked = bool((touching & (lb[:, None] <= rt[None, :])).any())
    return left_locked, right_locked


def _obb_locks(left: Obb, right: Obb) -> tuple[bool, bool]:
    a = left.corners()
    b = right.corners()
    ia = max(range(4), key=lambda i: (a[i, 0], a[i, 1]))
    ib = min(range(4), key=lambda i: (b[i, 0], -b[i, 1]))
    ya, yb = a[ia, 1], b[ib, 1]
    if ya == yb:
        return True, True
    return bool(ya > yb), bool(yb > ya)


def compact_pair(left: ChartProxy, right: ChartProxy) -> PairCompaction:
    """Larger of the local and OBB distances, with the matching lock rule."""
    wl = left.width
    d_local = distance_local(left.local, right.local)
    d_obb = distance_obb(left.obb, right.obb.translated(wl, 0.0), cap=right.width)
    d = max(d_local, d_obb)
    if d <= 0.0:
        return PairCompaction(0.0, False, False, "zero")
    if d_local >= d_obb:
        ll, rl = _local_locks(left.local, right.local, wl - d)
        return PairCompaction(d, ll, rl, "local")
    ll, rl = _obb_locks(left.obb, right.obb.translated(wl - d, 0.0))
    return PairCompaction(d, ll, rl, "obb")
