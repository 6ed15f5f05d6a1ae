"""Texel-resolution chart profiles and pairwise compaction.

A profile describes a chart at one scale as integer intervals: for each
texel column the rows it may touch (``top``/``bottom``, bottom exclusive)
and for each texel row the columns it may touch (``left``/``right``). The
intervals are derived from the continuous proxies and always contain every
texel whose open square meets the chart.
"""

from __future__ import annotations

import math
from collections import namedtuple

import numpy as np
from numba import njit

from .geometry import scaled_extent

SNAP = 1e-9

# Continuous base-pose proxies for a list of charts; row c belongs to chart c.
ProxyArrays = namedtuple(
    "ProxyArrays",
    "k width height x_edges x_top x_bottom y_edges y_left y_right obb reflect_x reflect_y tight",
)

# Integer profiles for a run of charts, stored back to back (CSR style).
Profiles = namedtuple("Profiles", "width height col_off top bottom row_off left right")


def proxy_arrays(batch, order, tight: bool = True) -> ProxyArrays:
    """Kernel view of a :class:`~atlaspack.proxies.ProxyBatch`, rows in packing order."""
    o = np.asarray(order, dtype=np.int64)

    def take(arr):
        return np.ascontiguousarray(arr[o])

    return ProxyArrays(
        k=batch.k,
        width=take(batch.width), height=take(batch.height),
        x_edges=take(batch.x_edges), x_top=take(batch.x_top), x_bottom=take(batch.x_bottom),
        y_edges=take(batch.y_edges), y_left=take(batch.y_left), y_right=take(batch.y_right),
        obb=take(batch.obb_corners),
        reflect_x=take(batch.reflect_x), reflect_y=take(batch.reflect_y),
        tight=tight,
    )


def allocate_profiles(pa: ProxyArrays, num: int, den: int) -> Profiles:
    """Profiles for every chart at scale ``num/den`` (allocated here, filled by numba)."""
    w = scaled_extent(pa.width, num, den)
    h = scaled_extent(pa.height, num, den)
    col_off = np.zeros(len(w) + 1, dtype=np.int64)
    row_off = np.zeros(len(h) + 1, dtype=np.int64)
    np.cumsum(w, out=col_off[1:])
    np.cumsum(h, out=row_off[1:])
    prof = Profiles(w, h, col_off, np.empty(col_off[-1], np.int64), np.empty(col_off[-1], np.int64),
                    row_off, np.empty(row_off[-1], np.int64), np.empty(row_off[-1], np.int64))
    fill_profiles(pa, 0, num, den, prof)
    return prof


@njit(cache=True, nogil=True)
def _snap(v):
    r = math.floor(v + 0.5)
    if abs(v - r) < SNAP:
        return r
    return v


@njit(cache=True, nogil=True)
def _strip(cx, cy, lo, hi):
    """Range of ``cy`` over the convex quad clipped to ``lo <= cx <= hi``."""
    vmin = np.inf
    vmax = -np.inf
    for a in range(4):
        b = (a + 1) % 4
        x0, y0, x1, y1 = cx[a], cy[a], cx[b], cy[b]
        if lo <= x0 <= hi:
            vmin = min(vmin, y0)
            vmax = max(vmax, y0)
        for xc in (lo, hi):
            if (x0 - xc) * (x1 - xc) < 0.0:
                y = y0 + (xc - x0) / (x1 - x0) * (y1 - y0)
                vmin = min(vmin, y)
                vmax = max(vmax, y)
    return vmin, vmax


@njit(cache=True, nogil=True)
def _quantize(lo, hi, limit):
    a = math.floor(_snap(lo))
    b = math.ceil(_snap(hi))
    a = min(max(a, 0), limit)
    b = min(max(b, 0), limit)
    if b <= a:
        if a < limit:
            b = a + 1
        else:
            a = b - 1
    return a, b


@njit(cache=True, nogil=True)
def _axis_profile(n_cells, extent, limit, s_edges, s_lo, s_hi, o_edges, o_lo, o_hi,
                  qa, qb, tight, out_lo, out_hi):
    """Per-cell intervals along one axis.

    ``s_*`` are the slices cut along this axis, ``o_*`` those of the other
    axis (used as a cross check), ``qa``/``qb`` the box corners with the
    axis coordinate first.
    """
    k = s_lo.shape[0]
    for i in range(n_cells):
        lo = 0.0
        hi = extent
        if tight:
            c0, c1 = i * 1.0, i + 1.0
            a = np.inf
            b = -np.inf
            for j in range(k):
                if not math.isnan(s_lo[j]) and s_edges[j] < c1 and s_edges[j + 1] > c0:
                    a = min(a, s_lo[j])
                    b = max(b, s_hi[j])
            if a <= b:
                lo = max(lo, a)
                hi = min(hi, b)
            a = np.inf
            b = -np.inf
            for m in range(k):
                if not math.isnan(o_lo[m]) and o_lo[m] < c1 and o_hi[m] > c0:
                    a = min(a, o_edges[m])
                    b = max(b, o_edges[m + 1])
            if a <= b:
                lo = max(lo, a)
                hi = min(hi, b)
            a, b = _strip(qa, qb, c0, c1)
            if a <= b:
                lo = max(lo, a)
                hi = min(hi, b)
            if lo > hi:
                lo = 0.0
                hi = extent
        out_lo[i], out_hi[i] = _quantize(lo, hi, limit)


@njit(cache=True, nogil=True)
def fill_profiles(pa, first, num, den, prof):
    """Fill ``prof`` with charts ``first .. first + len(prof.width) - 1`` of ``pa``."""
    for local in range(prof.width.shape[0]):
        c = first + local
        W = prof.width[local]
        H = prof.height[local]
        sw = pa.width[c] * num / den
        sh = pa.height[c] * num / den
        xe = pa.x_edges[c] * num / den
        ye = pa.y_edges[c] * num / den
        xt = pa.x_top[c] * num / den
        xb = pa.x_bottom[c] * num / den
        yl = pa.y_left[c] * num / den
        yr = pa.y_right[c] * num / den
        ox = pa.obb[c, :, 0] * num / den
        oy = pa.obb[c, :, 1] * num / den
        co = prof.col_off[local]
        ro = prof.row_off[local]
        top = prof.top[co:co + W]
        bot = prof.bottom[co:co + W]
        left = prof.left[ro:ro + H]
        right = prof.right[ro:ro + H]
        _axis_profile(W, sh, H, xe, xt, xb, ye, yl, yr, ox, oy, pa.tight, top, bot)
        _axis_profile(H, sw, W, ye, yl, yr, xe, xt, xb, oy, ox, pa.tight, left, right)
        if pa.reflect_x[c]:
            top[:] = top[::-1].copy()
            bot[:] = bot[::-1].copy()
            t = W - right
            right[:] = W - left
            left[:] = t
        if pa.reflect_y[c]:
            left[:] = left[::-1].copy()
            right[:] = right[::-1].copy()
            t = H - bot
            bot[:] = H - top
            top[:] = t


@njit(cache=True, nogil=True)
def make_profiles(pa, first, last, num, den):
    """Allocate and fill profiles for charts ``first .. last`` inclusive."""
    m = last - first + 1
    w = np.empty(m, np.int64)
    h = np.empty(m, np.int64)
    col_off = np.zeros(m + 1, np.int64)
    row_off = np.zeros(m + 1, np.int64)
    for i in range(m):
        w[i] = math.ceil(pa.width[first + i] * num / den)
        h[i] = math.ceil(pa.height[first + i] * num / den)
        col_off[i + 1] = col_off[i] + w[i]
        row_off[i + 1] = row_off[i] + h[i]
    prof = Profiles(w, h, col_off, np.empty(col_off[m], np.int64), np.empty(col_off[m], np.int64),
                    row_off, np.empty(row_off[m], np.int64), np.empty(row_off[m], np.int64))
    fill_profiles(pa, first, num, den, prof)
    return prof


@njit(cache=True, nogil=True)
def pair_compaction(prof, a, b, gutter):
    """Horizontal compaction of chart ``b`` towards chart ``a`` (its left neighbour).

    Returns ``(hc, a_locked, b_locked)``: the reduction of the plain advance
    ``width[a] + 2 * gutter`` and whether either chart may not rise above the
    other once the pair is compacted.
    """
    gg = 2 * gutter
    wa = prof.width[a]
    ha = prof.height[a]
    hb = prof.height[b]
    ra = prof.right[prof.row_off[a]:prof.row_off[a] + ha]
    lb = prof.left[prof.row_off[b]:prof.row_off[b] + hb]
    need = -(1 << 40)
    for r in range(hb):
        lo = max(0, r - gg)
        hi = min(ha - 1, r + gg)
        if lo > hi:
            continue
        m = ra[lo]
        for q in range(lo + 1, hi + 1):
            m = max(m, ra[q])
        need = max(need, m + gg - lb[r])
    plain = wa + gg
    hc = min(max(plain - need, 0), wa - 1)
    if hc <= 0:
        return 0, False, False
    step = plain - hc
    # a rising: b's rows above a's window must stay clear
    a_locked = False
    lb_min = np.empty(hb, np.int64)
    cur = 1 << 40
    for r in range(hb):
        cur = min(cur, lb[r])
        lb_min[r] = cur
    for r in range(ha):
        lim = min(hb - 1, r + gg)
        if lim >= 0 and step + lb_min[lim] < ra[r] + gg:
            a_locked = True
            break
    b_locked = False
    ra_max = np.empty(ha, np.int64)
    cur = -(1 << 40)
    for r in range(ha):
        cur = max(cur, ra[r])
        ra_max[r] = cur
    for r in range(hb):
        lim = min(ha - 1, r + gg)
        if lim >= 0 and step + lb[r] < ra_max[lim] + gg:
            b_locked = True
            break
    return hc, a_locked, b_locked


@njit(cache=True, nogil=True)
def fill_compaction(prof, gutter, hc, a_locked, b_locked):
    n = prof.width.shape[0]
    for c in range(n - 1):
        hc[c], a_locked[c], b_locked[c] = pair_compaction(prof, c, c + 1, gutter)
    if n:
        hc[n - 1] = 0
        a_locked[n - 1] = False
        b_locked[n - 1] = False
