"""Row folding, pushing and the per-row configuration choice.

The kernels here work on texel profiles (see :mod:`atlaspack.profiles`).
Chart ``c`` of a row sits at an integer offset; its texels occupy columns
``x + i`` for ``i`` in ``[0, width)`` and rows ``y + top[i] .. y + bottom[i]``.
The frontline stores, per atlas column, the first free row, already padded
by twice the gutter so that later charts stay a full gutter-pair away.
"""

from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .profiles import Profiles, make_profiles, pair_compaction

LTR, RTL = 0, 1

Options = namedtuple(
    "Options",
    "atlas_w atlas_h gutter use_hc dynamic_dir use_knees t_opt_px",
)

# knee: [pending, left_to_right, left_edge, right_edge, chart]
# counters: [rows, knees, knee_folds, configs, direction, folded, hc, score]
State = namedtuple(
    "State",
    "frontline xs ys mirrored knee counters fold_x ys_buf xs_buf fl_buf fin_num fin_den",
)

BIG = 1 << 60


def new_state(n: int, atlas_w: int) -> State:
    return State(
        frontline=np.zeros(atlas_w, np.int64),
        xs=np.zeros(n, np.int64),
        ys=np.zeros(n, np.int64),
        mirrored=np.zeros(n, np.bool_),
        knee=np.zeros(5, np.int64),
        counters=np.zeros(8, np.int64),
        fold_x=np.zeros((4, n), np.int64),
        ys_buf=np.zeros((4, n), np.int64),
        xs_buf=np.zeros((4, n), np.int64),
        fl_buf=np.zeros((4, atlas_w), np.int64),
        fin_num=np.zeros(n, np.int64),
        fin_den=np.ones(n, np.int64),
    )


# ---------------------------------------------------------------- kernels


@njit(cache=True, nogil=True)
def _fold(row_start, n, fold_width, use_hc, widths, hc, gutter, xs):
    gg = 2 * gutter
    curr = 0
    c = row_start
    while c < n:
        nxt = curr + widths[c]
        if nxt > fold_width:
            return c - 1
        xs[c] = curr
        curr = nxt + gg
        if use_hc:
            curr -= hc[c]
        c += 1
    return n - 1


@njit(cache=True, nogil=True)
def _correct(a_locked, b_locked, rs, re, ys):
    """Raise charts until no locked pair has its locked member above the other.

    Returns the number of sweeps that changed something.
    """
    sweeps = 0
    changed = True
    while changed:
        changed = False
        for c in range(rs, re):
            if a_locked[c] and ys[c] < ys[c + 1]:
                ys[c] = ys[c + 1]
                changed = True
            if b_locked[c] and ys[c + 1] < ys[c]:
                ys[c + 1] = ys[c]
                changed = True
        if changed:
            sweeps += 1
    return sweeps


@njit(cache=True, nogil=True)
def _conflict(prof, i, j, dx, dy, gutter):
    """True when chart j at (dx, dy) relative to chart i comes within the gutter."""
    gg = 2 * gutter
    hi_ = prof.height[i]
    oi = prof.row_off[i]
    oj = prof.row_off[j]
    for rj in range(prof.height[j]):
        r = rj + dy
        lo = max(0, r - gg)
        hi = min(hi_ - 1, r + gg)
        for ri in range(lo, hi + 1):
            if (dx + prof.left[oj + rj] < prof.right[oi + ri] + gg
                    and prof.left[oi + ri] < dx + prof.right[oj + rj] + gg):
                return True
    return False


@njit(cache=True, nogil=True)
def _settle(prof, a_locked, b_locked, rs, re, xs, ys, gutter):
    """Interlock correction plus a direct check of non-adjacent overlapping pairs."""
    gg = 2 * gutter
    while True:
        _correct(a_locked, b_locked, rs, re, ys)
        changed = False
        for i in range(rs, re - 1):
            reach = xs[i] + prof.width[i] + gg
            for j in range(i + 2, re + 1):
                if xs[j] >= reach:
                    break
                if ys[i] != ys[j] and _conflict(prof, i, j, xs[j] - xs[i], ys[j] - ys[i], gutter):
                    m = max(ys[i], ys[j])
                    ys[i] = m
                    ys[j] = m
                    changed = True
        if not changed:
            return


@njit(cache=True, nogil=True)
def _push(prof, a_locked, b_locked, rs, re, xs, lo, hi, mirror, interlock, gutter, fl, ys, xa):
    """Drop the folded row onto frontline ``fl`` inside columns ``[lo, hi)``."""
    gg = 2 * gutter
    wa = fl.shape[0]
    for c in range(rs, re + 1):
        w = prof.width[c]
        o = prof.col_off[c]
        x = hi - xs[c] - w if mirror else lo + xs[c]
        xa[c] = x
        y = 0
        for i in range(w):
            t = prof.top[o + w - 1 - i] if mirror else prof.top[o + i]
            v = fl[x + i] - t
            if v > y:
                y = v
        ys[c] = y
    if interlock:
        _settle(prof, a_locked, b_locked, rs, re, xs, ys, gutter)
    for c in range(rs, re + 1):
        w = prof.width[c]
        o = prof.col_off[c]
        x = xa[c]
        for i in range(w):
            b = prof.bottom[o + w - 1 - i] if mirror else prof.bottom[o + i]
            v = ys[c] + b + gg
            for col in range(max(0, x + i - gg), min(wa, x + i + gg + 1)):
                if fl[col] < v:
                    fl[col] = v


@njit(cache=True, nogil=True)
def _detect_knee(rs, re, heights, atlas_h):
    """Pair index of the largest qualifying height drop in a row, or -1."""
    best = -1
    best_diff = 0.0
    for c in range(rs, re):
        taller = max(heights[c], heights[c + 1])
        diff = abs(heights[c] - heights[c + 1])
        if diff * 10.0 >= atlas_h and diff * 5.0 >= taller and (best < 0 or diff > best_diff):
            best = c
            best_diff = diff
    return best


@njit(cache=True, nogil=True)
def _update_knee(knee, fl):
    """Shrink the remembered knee chart to the part still walling off the concavity."""
    wa = fl.shape[0]
    left = knee[2]
    right = knee[3]
    if knee[1] == 1:
        if right >= wa:
            knee[0] = 0
            return
        h = fl[right]
        edge = left - 1
        for x in range(left, right):
            if fl[x] >= h:
                edge = x
        knee[3] = edge + 1
    else:
        if left <= 0:
            knee[0] = 0
            return
        h = fl[left - 1]
        edge = right
        for x in range(right - 1, left - 1, -1):
            if fl[x] >= h:
                edge = x
        knee[2] = edge
    if knee[3] <= knee[2]:
        knee[0] = 0


@njit(cache=True, nogil=True)
def _pack_row(prof, hc, a_locked, b_locked, heights, opt, st, rs):
    """Evaluate the row configurations starting at chart ``rs`` and commit the best.

    Returns the last chart of the committed row, -1 if the first chart does
    not fit horizontally, or -2 if the committed row overflows the atlas.
    """
    n = prof.width.shape[0]
    wa = opt.atlas_w
    gg = 2 * opt.gutter
    knee = st.knee
    n_fold = 2 if (opt.use_knees and knee[0] == 1) else 1
    fixed_dir = st.counters[0] % 2
    ends = np.full(2, -1, np.int64)
    dirs = np.zeros(2, np.int64)
    hcs = np.zeros(2, np.bool_)
    fulls = np.full(2, BIG, np.int64)
    for f in range(n_fold):
        if f == 0:
            lo, hi = 0, wa
        elif knee[1] == 1:
            lo, hi = knee[3], wa
        else:
            lo, hi = 0, knee[2]
        width = hi - lo
        xa = st.fold_x[2 * f]
        xb = st.fold_x[2 * f + 1]
        end = _fold(rs, n, width, False, prof.width, hc, opt.gutter, xa)
        use = False
        if opt.use_hc:
            end_hc = _fold(rs, n, width, True, prof.width, hc, opt.gutter, xb)
            if end_hc > end:
                end = end_hc
                use = True
        if end < rs:
            continue
        xs = xb if use else xa
        best = BIG
        for d in range(2):
            if not opt.dynamic_dir and d != fixed_dir:
                continue
            slot = 2 * f + d
            fl = st.fl_buf[slot]
            fl[:] = st.frontline
            _push(prof, a_locked, b_locked, rs, end, xs, lo, hi, d == RTL, use, opt.gutter,
                  fl, st.ys_buf[slot], st.xs_buf[slot])
            full = fl.max()
            score = full if f == 0 else fl[lo:hi].max()
            if score < best:
                best = score
                dirs[f] = d
                fulls[f] = full
        ends[f] = end
        hcs[f] = use
    if ends[0] < rs:
        return -1
    f = 0
    if n_fold == 2 and ends[1] >= rs and fulls[1] <= fulls[0] - 1:
        f = 1
    d = dirs[f]
    slot = 2 * f + d
    end = ends[f]
    st.frontline[:] = st.fl_buf[slot]
    for c in range(rs, end + 1):
        st.xs[c] = st.xs_buf[slot, c]
        st.ys[c] = st.ys_buf[slot, c]
        st.mirrored[c] = d == RTL
    cnt = st.counters
    cnt[0] += 1
    cnt[3] = n_fold * (2 if opt.dynamic_dir else 1) * (2 if opt.use_hc else 1)
    cnt[4] = d
    cnt[5] = f
    cnt[6] = hcs[f]
    cnt[7] = fulls[f]
    if f == 1:
        cnt[2] += 1
    elif opt.use_knees:
        k = _detect_knee(rs, end, heights, opt.atlas_h)
        if k >= 0:
            knee[0] = 1
            knee[1] = 1 if d == LTR else 0
            knee[2] = st.xs[k]
            knee[3] = st.xs[k] + prof.width[k]
            knee[4] = k
            cnt[1] += 1
        else:
            knee[0] = 0
    if fulls[f] - gg > opt.atlas_h:
        return -2
    return end


@njit(cache=True, nogil=True)
def _pack_sequential(prof, hc, a_locked, b_locked, heights, opt, st):
    """Fold and push rows until done or until the hybrid switch fires.

    Returns the first chart left for the prefix phase (``n`` when none),
    or a negative code on failure.
    """
    n = prof.width.shape[0]
    rs = 0
    while rs < n:
        if st.knee[0] == 1:
            _update_knee(st.knee, st.frontline)
        if opt.t_opt_px > 0.0 and st.knee[0] == 0 and prof.height[rs] < opt.t_opt_px:
            return rs
        end = _pack_row(prof, hc, a_locked, b_locked, heights, opt, st, rs)
        if end < 0:
            return end
        rs = end + 1
    return n


@njit(cache=True, nogil=True)
def _prefix_positions(widths, hc, gutter, first, pos):
    """Cumulative compacted advance of charts ``first ..`` (``pos[0] = 0``)."""
    gg = 2 * gutter
    pos[0] = 0
    for i in range(first, widths.shape[0] - 1):
        pos[i - first + 1] = pos[i - first] + widths[i] + gg - hc[i]


@njit(cache=True, nogil=True)
def _row_layout(prof, gutter, xs):
    """Compact a whole row of ``prof``; returns its extent."""
    m = prof.width.shape[0]
    gg = 2 * gutter
    x = 0
    ext = 0
    for i in range(m):
        xs[i] = x
        ext = max(ext, x + prof.width[i])
        if i + 1 < m:
            h, _, _ = pair_compaction(prof, i, i + 1, gutter)
            x += prof.width[i] + gg - h
    return ext


@njit(cache=True, nogil=True)
def _pack_prefix(pa, prof, hc, a_locked, b_locked, opt, st, first, num, den):
    """Place charts ``first ..`` in prefix-sum rows, rescaling rows that overflow."""
    n = prof.width.shape[0]
    wa = opt.atlas_w
    gg = 2 * opt.gutter
    if first >= n:
        return True
    pos = np.empty(n - first, np.int64)
    _prefix_positions(prof.width, hc, opt.gutter, first, pos)
    q = 0
    a = first
    while a < n:
        rid = pos[a - first] // wa
        b = a
        while b + 1 < n and pos[b + 1 - first] // wa == rid:
            b += 1
        base = pos[a - first]
        ext = 0
        for c in range(a, b + 1):
            ext = max(ext, pos[c - first] - base + prof.width[c])
        mirror = q % 3 != 0
        if ext <= wa:
            xs = st.fold_x[0]
            for c in range(a, b + 1):
                xs[c] = pos[c - first] - base
                st.fin_num[c] = num
                st.fin_den[c] = den
            _push(prof, a_locked, b_locked, a, b, xs, 0, wa, mirror, True, opt.gutter,
                  st.frontline, st.ys, st.xs)
            for c in range(a, b + 1):
                st.mirrored[c] = mirror
        else:
            p = wa
            m = b - a + 1
            lx = np.empty(m, np.int64)
            while True:
                sub = make_profiles(pa, a, b, num * p, den * ext)
                e2 = _row_layout(sub, opt.gutter, lx)
                if e2 <= wa:
                    break
                p = min(p - 1, p * wa // e2)
                if p < 1:
                    return False
            shc = np.zeros(m, np.int64)
            sal = np.zeros(m, np.bool_)
            sbl = np.zeros(m, np.bool_)
            for i in range(m - 1):
                shc[i], sal[i], sbl[i] = pair_compaction(sub, i, i + 1, opt.gutter)
            sys_ = np.zeros(m, np.int64)
            sxa = np.zeros(m, np.int64)
            _push(sub, sal, sbl, 0, m - 1, lx, 0, wa, mirror, True, opt.gutter,
                  st.frontline, sys_, sxa)
            for i in range(m):
                c = a + i
                st.xs[c] = sxa[i]
                st.ys[c] = sys_[i]
                st.mirrored[c] = mirror
                st.fin_num[c] = num * p
                st.fin_den[c] = den * ext
        q += 1
        st.counters[0] += 1
        a = b + 1
    return st.frontline.max() - gg <= opt.atlas_h


# ---------------------------------------------------------------- python API


def fold_row(widths: Sequence[int], fold_width: int, compaction: Optional[Sequence[int]] = None,
             row_start: int = 0, gutter: int = 0) -> tuple[list[int], int]:
    """Fold charts into one row; returns (x offsets, last chart index).

    With ``compaction`` the advance after chart ``c`` shrinks by
    ``compaction[c]``. The last index is ``row_start - 1`` when even the
    first chart is wider than ``fold_width``.
    """
    w = np.asarray(widths, dtype=np.int64)
    use = compaction is not None
    hc = np.asarray(compaction if use else np.zeros(len(w)), dtype=np.int64)
    if len(hc) < len(w):
        hc = np.concatenate([hc, np.zeros(len(w) - len(hc), np.int64)])
    xs = np.zeros(len(w), np.int64)
    end = int(_fold(row_start, len(w), fold_width, use, w, hc, gutter, xs))
    return xs[row_start:end + 1].tolist(), end


def correct_y_offsets(ys: Sequence[int], a_locked: Sequence[bool],
                      b_locked: Sequence[bool]) -> tuple[list[int], int]:
    """Interlock correction over one row.

    ``a_locked[c]``: chart c may not sit above chart c + 1;
    ``b_locked[c]``: chart c + 1 may not sit above chart c.
    Returns the corrected offsets and the number of changing sweeps.
    """
    y = np.asarray(ys, dtype=np.int64).copy()
    al = np.zeros(len(y), np.bool_)
    bl = np.zeros(len(y), np.bool_)
    al[:len(a_locked)] = a_locked
    bl[:len(b_locked)] = b_locked
    sweeps = int(_correct(al, bl, 0, len(y) - 1, y))
    return y.tolist(), sweeps


@dataclass(frozen=True)
class TexelProfile:
    """Integer occupancy of one chart at one scale (bottom/right exclusive)."""

    width: int
    height: int
    top: np.ndarray
    bottom: np.ndarray
    left: np.ndarray
    right: np.ndarray

    @classmethod
    def box(cls, width: int, height: int) -> "TexelProfile":
        return cls(width, height, np.zeros(width, np.int64), np.full(width, height, np.int64),
                   np.zeros(height, np.int64), np.full(height, width, np.int64))


def stack_profiles(items: Sequence[TexelProfile]) -> Profiles:
    w = np.array([p.width for p in items], np.int64)
    h = np.array([p.height for p in items], np.int64)
    col_off = np.concatenate([[0], np.cumsum(w)]).astype(np.int64)
    row_off = np.concatenate([[0], np.cumsum(h)]).astype(np.int64)

    def cat(attr):
        return np.concatenate([np.asarray(getattr(p, attr), np.int64) for p in items])

    return Profiles(w, h, col_off, cat("top"), cat("bottom"), row_off, cat("left"), cat("right"))


def push_row(frontline: Sequence[int], profiles: Sequence[TexelProfile], x_offsets: Sequence[int],
             *, region: Optional[tuple[int, int]] = None, mirror: bool = False,
             compacted: bool = False, gutter: int = 0) -> tuple[list[int], list[int], list[int]]:
    """Push a folded row against ``frontline``.

    ``x_offsets`` are fold offsets inside ``region``. With ``compacted`` the
    pair locks are derived from the profiles and the interlock correction
    runs. Returns (atlas x offsets, y offsets, new frontline).
    """
    fl = np.asarray(frontline, dtype=np.int64).copy()
    lo, hi = region if region is not None else (0, len(fl))
    prof = stack_profiles(profiles)
    m = len(profiles)
    al = np.zeros(m, np.bool_)
    bl = np.zeros(m, np.bool_)
    if compacted:
        for c in range(m - 1):
            _, al[c], bl[c] = pair_compaction(prof, c, c + 1, gutter)
    xs = np.asarray(x_offsets, dtype=np.int64)
    ys = np.zeros(m, np.int64)
    xa = np.zeros(m, np.int64)
    _push(prof, al, bl, 0, m - 1, xs, lo, hi, mirror, compacted, gutter, fl, ys, xa)
    return xa.tolist(), ys.tolist(), fl.tolist()


@dataclass(frozen=True)
class Knee:
    """A row's large height drop; the concavity lies beside the taller chart."""

    left_to_right: bool
    chart_left_edge: int
    chart_right_edge: int
    chart_index: int = -1
    height_diff: float = 0.0

    def region(self, atlas_width: int) -> tuple[int, int]:
        if self.left_to_right:
            return self.chart_right_edge, atlas_width
        return 0, self.chart_left_edge


def detect_knee(heights: Sequence[float], atlas_height: float, row_start: int = 0,
                row_end: Optional[int] = None, x_offsets: Optional[Sequence[int]] = None,
                widths: Optional[Sequence[int]] = None,
                left_to_right: bool = True) -> Optional[Knee]:
    """Find the largest height drop of at least 10% of the atlas and 20% of the taller chart."""
    h = np.asarray(heights, dtype=np.float64)
    end = len(h) - 1 if row_end is None else row_end
    c = int(_detect_knee(row_start, end, h, float(atlas_height)))
    if c < 0:
        return None
    x = int(x_offsets[c - row_start]) if x_offsets is not None else 0
    w = int(widths[c - row_start]) if widths is not None else 0
    return Knee(left_to_right, x, x + w, c, float(abs(h[c] - h[c + 1])))


def update_knee_location(knee: Knee, frontline: Sequence[int]) -> Optional[Knee]:
    """Knee with edges moved to where the frontline still walls the concavity; None if gone."""
    arr = np.array([1, int(knee.left_to_right), knee.chart_left_edge, knee.chart_right_edge,
                    knee.chart_index], np.int64)
    _update_knee(arr, np.asarray(frontline, dtype=np.int64))
    if arr[0] == 0:
        return None
    return Knee(knee.left_to_right, int(arr[2]), int(arr[3]), knee.chart_index, knee.height_diff)


def should_switch_to_prefix(next_tallest_height: float, atlas_height: int,
                            t_opt_fraction: float, knee_pending: bool) -> bool:
    return (not knee_pending) and next_tallest_height < t_opt_fraction * atlas_height


@dataclass(frozen=True)
class PrefixRow:
    first: int
    last: int
    offsets: list[int]
    extent: int


def prefix_rows(widths: Sequence[int], compaction: Sequence[int], fold_width: int,
                gutter: int = 0) -> list[PrefixRow]:
    """Rows cut from the running compacted advance at multiples of ``fold_width``.

    Offsets are relative to each row's first chart. A row whose extent
    exceeds ``fold_width`` is later shrunk by ``fold_width / extent``.
    """
    w = np.asarray(widths, dtype=np.int64)
    hc = np.zeros(len(w), np.int64)
    hc[:len(compaction)] = compaction
    pos = np.zeros(len(w), np.int64)
    _prefix_positions(w, hc, gutter, 0, pos)
    rows = []
    a = 0
    while a < len(w):
        rid = pos[a] // fold_width
        b = a
        while b + 1 < len(w) and pos[b + 1] // fold_width == rid:
            b += 1
        offs = (pos[a:b + 1] - pos[a]).tolist()
        ext = int(max(o + int(w[a + i]) for i, o in enumerate(offs)))
        rows.append(PrefixRow(a, b, offs, ext))
        a = b + 1
    return rows
