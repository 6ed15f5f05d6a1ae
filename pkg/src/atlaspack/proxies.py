"""Conservative bounding proxies of charts and their canonical orientation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .chartset_io import AtlasSpec, Chart, ChartSet
from .geometry import posed_vertices, rotate, rotate_quarter

OBB_ANGLE_COUNT = 8


@dataclass(frozen=True)
class Aabb:
    min: tuple[float, float]
    max: tuple[float, float]

    @property
    def width(self) -> float:
        return self.max[0] - self.min[0]

    @property
    def height(self) -> float:
        return self.max[1] - self.min[1]

    @property
    def area(self) -> float:
        return self.width * self.height


def compute_aabb(vertices: np.ndarray) -> Aabb:
    lo = vertices.min(axis=0)
    hi = vertices.max(axis=0)
    return Aabb((float(lo[0]), float(lo[1])), (float(hi[0]), float(hi[1])))


@dataclass(eq=False)
class LocalAabbProxy:
    """Piecewise-constant hull: ``k`` slices along each axis.

    ``x_top``/``x_bottom`` bound the geometry in each vertical slice
    ``[x_edges[j], x_edges[j + 1]]``; ``y_left``/``y_right`` do the same for
    horizontal slices. Slices without geometry hold NaN.
    """

    k: int
    x_edges: np.ndarray
    x_top: np.ndarray
    x_bottom: np.ndarray
    y_edges: np.ndarray
    y_left: np.ndarray
    y_right: np.ndarray

    @property
    def x_empty(self) -> np.ndarray:
        return np.isnan(self.x_top)

    @property
    def y_empty(self) -> np.ndarray:
        return np.isnan(self.y_left)

    def area(self) -> float:
        """Total area of the vertical slice rectangles."""
        widths = np.diff(self.x_edges)
        heights = np.nan_to_num(self.x_bottom - self.x_top)
        return float(np.dot(widths, heights))

    def reflected(self, reflect_x: bool, reflect_y: bool) -> "LocalAabbProxy":
        """Proxy of the chart mirrored inside its own bounding box."""
        xe, xt, xb = self.x_edges, self.x_top, self.x_bottom
        ye, yl, yr = self.y_edges, self.y_left, self.y_right
        x0, x1 = xe[0], xe[-1]
        y0, y1 = ye[0], ye[-1]
        if reflect_x:
            xe = (x0 + x1) - xe[::-1]
            xt, xb = xt[::-1], xb[::-1]
            yl, yr = (x0 + x1) - yr, (x0 + x1) - yl
        if reflect_y:
            ye = (y0 + y1) - ye[::-1]
            yl, yr = yl[::-1], yr[::-1]
            xt, xb = (y0 + y1) - xb, (y0 + y1) - xt
        return LocalAabbProxy(self.k, xe.copy(), xt.copy(), xb.copy(), ye.copy(), yl.copy(), yr.copy())


def _edge_list(triangles: np.ndarray) -> np.ndarray:
    """All triangle edges (shared edges appear twice, which is harmless)."""
    t = np.asarray(triangles, dtype=np.int64)
    return np.ascontiguousarray(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]))


@njit(cache=True, nogil=True)
def _cuts(lo, hi, k, out):
    for j in range(k):
        out[j] = lo + (hi - lo) * j / k
    out[k] = hi


@njit(cache=True, nogil=True)
def _slice_extents(along, across, edges, cuts, lo, hi):
    """Exact min/max of ``across`` over the edges clipped to each closed slice."""
    k = cuts.shape[0] - 1
    lo[:] = np.inf
    hi[:] = -np.inf
    for e in range(edges.shape[0]):
        p, q = along[edges[e, 0]], along[edges[e, 1]]
        pa, qa = across[edges[e, 0]], across[edges[e, 1]]
        emin, emax = min(p, q), max(p, q)
        for j in range(k):
            a, b = cuts[j], cuts[j + 1]
            if emax < a or emin > b:
                continue
            if p == q:
                y0, y1 = pa, qa
            else:
                ta = (a - p) / (q - p)
                tb = (b - p) / (q - p)
                t0 = min(max(min(ta, tb), 0.0), 1.0)
                t1 = min(max(max(ta, tb), 0.0), 1.0)
                y0 = pa if t0 == 0.0 else (qa if t0 == 1.0 else pa + t0 * (qa - pa))
                y1 = pa if t1 == 0.0 else (qa if t1 == 1.0 else pa + t1 * (qa - pa))
            lo[j] = min(lo[j], y0, y1)
            hi[j] = max(hi[j], y0, y1)
    for j in range(k):
        if lo[j] == np.inf:
            lo[j] = np.nan
            hi[j] = np.nan


@njit(cache=True, nogil=True)
def _merge(xe, xt, xb, ye, yl, yr):
    """Tighten each slice with the slices of the other axis, in place."""
    k = xt.shape[0]
    nxt = xt.copy()
    nxb = xb.copy()
    for j in range(k):
        if np.isnan(xt[j]):
            continue
        a, b = np.inf, -np.inf
        for m in range(k):
            if not np.isnan(yl[m]) and yl[m] <= xe[j + 1] and yr[m] >= xe[j]:
                a = min(a, ye[m])
                b = max(b, ye[m + 1])
        if a <= b:
            nxt[j] = max(xt[j], a)
            nxb[j] = min(xb[j], b)
    for m in range(k):
        if np.isnan(yl[m]):
            continue
        a, b = np.inf, -np.inf
        for j in range(k):
            if not np.isnan(xt[j]) and xt[j] <= ye[m + 1] and xb[j] >= ye[m]:
                a = min(a, xe[j])
                b = max(b, xe[j + 1])
        if a <= b:
            yl[m] = max(yl[m], a)
            yr[m] = min(yr[m], b)
    xt[:] = nxt
    xb[:] = nxb


@njit(cache=True, nogil=True)
def _local(vx, vy, edges, k, merge, xe, xt, xb, ye, yl, yr):
    _cuts(vx.min(), vx.max(), k, xe)
    _cuts(vy.min(), vy.max(), k, ye)
    _slice_extents(vx, vy, edges, xe, xt, xb)
    _slice_extents(vy, vx, edges, ye, yl, yr)
    if merge:
        _merge(xe, xt, xb, ye, yl, yr)


@njit(cache=True, nogil=True)
def _obb_search(vx, vy):
    """Best angle index and the box extents along its two axes."""
    best = -1
    best_area = np.inf
    ext = np.zeros(4)
    for j in range(OBB_ANGLE_COUNT):
        theta = j * math.pi / (2 * OBB_ANGLE_COUNT)
        c, s = math.cos(theta), math.sin(theta)
        u0, u1, w0, w1 = np.inf, -np.inf, np.inf, -np.inf
        for i in range(vx.shape[0]):
            u = vx[i] * c + vy[i] * s
            w = -vx[i] * s + vy[i] * c
            u0, u1 = min(u0, u), max(u1, u)
            w0, w1 = min(w0, w), max(w1, w)
        area = (u1 - u0) * (w1 - w0)
        if best < 0 or area < best_area * (1.0 - 1e-12):
            best, best_area = j, area
            ext[0], ext[1], ext[2], ext[3] = u0, u1, w0, w1
    return best, ext


@njit(cache=True, nogil=True)
def _obb_corners(j, ext, out):
    theta = j * math.pi / (2 * OBB_ANGLE_COUNT)
    c, s = math.cos(theta), math.sin(theta)
    for i in range(4):
        u = ext[1] if i == 1 or i == 2 else ext[0]
        w = ext[3] if i >= 2 else ext[2]
        out[i, 0] = u * c - w * s
        out[i, 1] = u * s + w * c


@njit(cache=True, nogil=True)
def _orientation_areas(xe, xt, xb, ye, yl, yr):
    """top, bottom, left, right, top_left, top_right, bottom_left, bottom_right."""
    k = xt.shape[0]
    x0, x1, y0, y1 = xe[0], xe[k], ye[0], ye[k]
    mid = 0.5 * (x0 + x1)
    out = np.zeros(8)
    for j in range(k):
        if np.isnan(xt[j]):
            continue
        w = xe[j + 1] - xe[j]
        lw = max(min(xe[j + 1], mid) - xe[j], 0.0)
        rw = w - lw
        tg = xt[j] - y0
        bg = y1 - xb[j]
        out[0] += tg * w
        out[1] += bg * w
        out[4] += tg * lw
        out[5] += tg * rw
        out[6] += bg * lw
        out[7] += bg * rw
    for m in range(k):
        if np.isnan(yl[m]):
            continue
        h = ye[m + 1] - ye[m]
        out[2] += (yl[m] - x0) * h
        out[3] += (x1 - yr[m]) * h
    return out


@njit(cache=True, nogil=True)
def _choose_flags(a, box_area):
    reflect_y = a[0] > a[1]
    # after a vertical flip the old top gaps form the bottom
    bottom_left = a[4] if reflect_y else a[6]
    bottom_right = a[5] if reflect_y else a[7]
    diff = a[2] - a[3]
    if diff > 0.1 * box_area:
        reflect_x = True
    elif abs(diff) <= 0.1 * box_area:
        reflect_x = bottom_left > bottom_right
    else:
        reflect_x = False
    return reflect_x, reflect_y


@njit(cache=True, nogil=True)
def _batch(vx, vy, v_off, edges, e_off, k, orient, xe, xt, xb, ye, yl, yr, obb, obb_j, flags):
    for c in range(v_off.shape[0] - 1):
        a, b = v_off[c], v_off[c + 1]
        e = edges[e_off[c]:e_off[c + 1]]
        _local(vx[a:b], vy[a:b], e, k, True, xe[c], xt[c], xb[c], ye[c], yl[c], yr[c])
        j, ext = _obb_search(vx[a:b], vy[a:b])
        obb_j[c] = j
        _obb_corners(j, ext, obb[c])
        if orient:
            areas = _orientation_areas(xe[c], xt[c], xb[c], ye[c], yl[c], yr[c])
            box = (xe[c, k] - xe[c, 0]) * (ye[c, k] - ye[c, 0])
            flags[c, 0], flags[c, 1] = _choose_flags(areas, box)


def compute_local_aabbs(vertices: np.ndarray, triangles: np.ndarray, k: int = 10,
                        merge: bool = True) -> LocalAabbProxy:
    """Local AABB proxy of a triangulated chart with ``k`` slices per axis."""
    if k < 1:
        raise ValueError("k must be at least 1")
    v = np.asarray(vertices, dtype=np.float64)
    xe, ye = np.empty(k + 1), np.empty(k + 1)
    xt, xb, yl, yr = (np.empty(k) for _ in range(4))
    _local(np.ascontiguousarray(v[:, 0]), np.ascontiguousarray(v[:, 1]), _edge_list(triangles),
           k, merge, xe, xt, xb, ye, yl, yr)
    return LocalAabbProxy(k, xe, xt, xb, ye, yl, yr)


def merge_local_aabbs(proxy: LocalAabbProxy) -> LocalAabbProxy:
    """Tighten each slice using the slices of the other axis."""
    xt, xb = proxy.x_top.copy(), proxy.x_bottom.copy()
    yl, yr = proxy.y_left.copy(), proxy.y_right.copy()
    _merge(proxy.x_edges, xt, xb, proxy.y_edges, yl, yr)
    return LocalAabbProxy(proxy.k, proxy.x_edges, xt, xb, proxy.y_edges, yl, yr)


@dataclass(frozen=True)
class Obb:
    angle: float
    center: tuple[float, float]
    half_extents: tuple[float, float]

    @property
    def area(self) -> float:
        return 4.0 * self.half_extents[0] * self.half_extents[1]

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        c, s = math.cos(self.angle), math.sin(self.angle)
        return np.array([c, s]), np.array([-s, c])

    def corners(self) -> np.ndarray:
        u, w = self.axes()
        cx, cy = self.center
        hu, hw = self.half_extents
        centre = np.array([cx, cy])
        return np.array([centre - u * hu - w * hw, centre + u * hu - w * hw,
                         centre + u * hu + w * hw, centre - u * hu + w * hw])

    def translated(self, dx: float, dy: float) -> "Obb":
        return Obb(self.angle, (self.center[0] + dx, self.center[1] + dy), self.half_extents)


def _obb_from(j: int, ext: np.ndarray) -> Obb:
    theta = j * math.pi / (2 * OBB_ANGLE_COUNT)
    c, s = math.cos(theta), math.sin(theta)
    mu, mw = 0.5 * (ext[0] + ext[1]), 0.5 * (ext[2] + ext[3])
    return Obb(theta, (float(mu * c - mw * s), float(mu * s + mw * c)),
               (float(0.5 * (ext[1] - ext[0])), float(0.5 * (ext[3] - ext[2]))))


def compute_obb(vertices: np.ndarray) -> Obb:
    """Smallest box over the 8 angles j*pi/16; ties go to the smaller angle."""
    v = np.asarray(vertices, dtype=np.float64)
    j, ext = _obb_search(np.ascontiguousarray(v[:, 0]), np.ascontiguousarray(v[:, 1]))
    return _obb_from(int(j), ext)


@dataclass(frozen=True)
class OrientationFlags:
    reflect_x: bool = False
    reflect_y: bool = False


_AREA_NAMES = ("top", "bottom", "left", "right", "top_left", "top_right", "bottom_left",
               "bottom_right")


def orientation_areas(proxy: LocalAabbProxy) -> dict[str, float]:
    """Empty areas next to each side of the bounding box, as seen by the proxy."""
    a = _orientation_areas(proxy.x_edges, proxy.x_top, proxy.x_bottom, proxy.y_edges,
                           proxy.y_left, proxy.y_right)
    return dict(zip(_AREA_NAMES, map(float, a)))


def choose_orientation(proxy: LocalAabbProxy) -> OrientationFlags:
    """Put the larger empty region at the bottom, then bias it towards the right."""
    a = _orientation_areas(proxy.x_edges, proxy.x_top, proxy.x_bottom, proxy.y_edges,
                           proxy.y_left, proxy.y_right)
    box = (proxy.x_edges[-1] - proxy.x_edges[0]) * (proxy.y_edges[-1] - proxy.y_edges[0])
    rx, ry = _choose_flags(a, box)
    return OrientationFlags(bool(rx), bool(ry))


def normalize_rotation(chart: Chart) -> tuple[Chart, bool]:
    """Turn a chart by 90 degrees when it is wider than tall."""
    v = chart.vertices
    span = v.max(axis=0) - v.min(axis=0)
    if span[0] > span[1]:
        return Chart(chart.id, rotate_quarter(v, 90), chart.triangles), True
    return chart, False


def prerotation_angles(charts: ChartSet) -> list[float]:
    return [-compute_obb(c.vertices).angle for c in charts]


def prerotate(charts: ChartSet) -> tuple[ChartSet, list[float]]:
    """Rotate every chart so its approximate OBB becomes axis aligned."""
    angles = prerotation_angles(charts)
    out = [Chart(c.id, rotate(c.vertices, a), c.triangles) for c, a in zip(charts, angles)]
    return ChartSet(out, charts.source_name, charts.dropped), angles


@dataclass(eq=False)
class ProxyBatch:
    """Base-pose proxies of many charts as flat arrays (input order)."""

    k: int
    rotated: np.ndarray
    prerotation: np.ndarray
    width: np.ndarray
    height: np.ndarray
    area: np.ndarray
    x_edges: np.ndarray
    x_top: np.ndarray
    x_bottom: np.ndarray
    y_edges: np.ndarray
    y_left: np.ndarray
    y_right: np.ndarray
    obb_corners: np.ndarray
    obb_index: np.ndarray
    reflect_x: np.ndarray
    reflect_y: np.ndarray

    def __len__(self):
        return len(self.width)

    def order(self) -> np.ndarray:
        """Packing order: decreasing height, then decreasing width, then id."""
        return np.lexsort((np.arange(len(self.width)), -self.width, -self.height))

    def base_local(self, i: int) -> LocalAabbProxy:
        return LocalAabbProxy(self.k, self.x_edges[i], self.x_top[i], self.x_bottom[i],
                              self.y_edges[i], self.y_left[i], self.y_right[i])


def pose_all(charts: list[Chart], prerotation) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Base pose of every chart at once: (x, y, vertex offsets, rotated flags).

    Bit-identical to :func:`posed_vertices` applied chart by chart.
    """
    counts = np.array([len(c.vertices) for c in charts], dtype=np.int64)
    off = np.zeros(len(charts) + 1, dtype=np.int64)
    np.cumsum(counts, out=off[1:])
    v = np.concatenate([c.vertices for c in charts])
    ang = np.asarray(prerotation, dtype=np.float64)
    cos = np.repeat([math.cos(a) for a in ang], counts)
    sin = np.repeat([math.sin(a) for a in ang], counts)
    still = np.repeat(ang == 0.0, counts)
    x, y = v[:, 0], v[:, 1]
    rx = np.where(still, x, x * cos - y * sin)
    ry = np.where(still, y, x * sin + y * cos)
    starts = off[:-1]
    span_x = np.maximum.reduceat(rx, starts) - np.minimum.reduceat(rx, starts)
    span_y = np.maximum.reduceat(ry, starts) - np.minimum.reduceat(ry, starts)
    rotated = span_x > span_y
    turn = np.repeat(rotated, counts)
    bx = np.where(turn, -ry, rx)
    by = np.where(turn, rx, ry)
    bx = bx - np.repeat(np.minimum.reduceat(bx, starts), counts)
    by = by - np.repeat(np.minimum.reduceat(by, starts), counts)
    return bx, by, off, rotated


def proxy_batch(charts: list[Chart], k: int = 10, prerotation=None,
                orient: bool = True) -> ProxyBatch:
    n = len(charts)
    if prerotation is None:
        prerotation = np.zeros(n)
    bx, by, v_off, rotated = pose_all(charts, prerotation)
    edge_blocks = [_edge_list(c.triangles) for c in charts]
    e_off = np.zeros(n + 1, dtype=np.int64)
    np.cumsum([len(e) for e in edge_blocks], out=e_off[1:])
    edges = np.ascontiguousarray(np.concatenate(edge_blocks))
    xe, ye = np.empty((n, k + 1)), np.empty((n, k + 1))
    xt, xb, yl, yr = (np.empty((n, k)) for _ in range(4))
    obb = np.empty((n, 4, 2))
    obb_j = np.zeros(n, dtype=np.int64)
    flags = np.zeros((n, 2), dtype=np.bool_)
    _batch(bx, by, v_off, edges, e_off, k, orient, xe, xt, xb, ye, yl, yr, obb, obb_j, flags)
    starts = v_off[:-1]
    return ProxyBatch(
        k=k,
        rotated=rotated,
        prerotation=np.asarray(prerotation, dtype=np.float64),
        width=np.maximum.reduceat(bx, starts),
        height=np.maximum.reduceat(by, starts),
        area=np.array([c.area for c in charts]),
        x_edges=xe, x_top=xt, x_bottom=xb, y_edges=ye, y_left=yl, y_right=yr,
        obb_corners=obb, obb_index=obb_j,
        reflect_x=flags[:, 0].copy(), reflect_y=flags[:, 1].copy(),
    )


@dataclass(eq=False)
class ChartProxy:
    """Everything the packer needs to know about one chart.

    ``base_*`` describe the chart after pre-rotation and quarter turn but
    before reflection; ``local``/``obb``/``aabb`` are in the final pose.
    Both poses have their bounding box at the origin.
    """

    chart_id: int
    rotated_90: bool
    prerotation_angle: float
    flags: OrientationFlags
    width: float
    height: float
    area: float
    aabb: Aabb
    local: LocalAabbProxy
    obb: Obb
    base_local: LocalAabbProxy
    base_obb: Obb

    def final_vertices(self, chart: Chart) -> np.ndarray:
        v = posed_vertices(chart.vertices, self.prerotation_angle, 90 if self.rotated_90 else 0)
        if self.flags.reflect_x:
            v[:, 0] = self.width - v[:, 0]
        if self.flags.reflect_y:
            v[:, 1] = self.height - v[:, 1]
        return v


def _proxy_from_batch(batch: ProxyBatch, i: int, chart: Chart) -> ChartProxy:
    flags = OrientationFlags(bool(batch.reflect_x[i]), bool(batch.reflect_y[i]))
    base_local = batch.base_local(i)
    w, h = float(batch.width[i]), float(batch.height[i])
    proxy = ChartProxy(
        chart_id=chart.id,
        rotated_90=bool(batch.rotated[i]),
        prerotation_angle=float(batch.prerotation[i]),
        flags=flags,
        width=w,
        height=h,
        area=float(batch.area[i]),
        aabb=Aabb((0.0, 0.0), (w, h)),
        local=base_local.reflected(flags.reflect_x, flags.reflect_y),
        obb=None,
        base_local=base_local,
        base_obb=None,
    )
    base = posed_vertices(chart.vertices, proxy.prerotation_angle, 90 if proxy.rotated_90 else 0)
    proxy.base_obb = compute_obb(base)
    proxy.obb = compute_obb(proxy.final_vertices(chart))
    return proxy


def chart_proxy(chart: Chart, k: int = 10, prerotation_angle: float = 0.0,
                orient: bool = True) -> ChartProxy:
    batch = proxy_batch([chart], k, [prerotation_angle], orient)
    return _proxy_from_batch(batch, 0, chart)


def build_proxies(charts: ChartSet, spec: AtlasSpec, orient: bool = True,
                  prerotation: Optional[list[float]] = None) -> tuple[list[ChartProxy], list[int]]:
    """Proxies for every chart plus the packing order (as chart ids)."""
    if prerotation is None:
        prerotation = prerotation_angles(charts) if spec.prerotate else [0.0] * len(charts)
    batch = proxy_batch(charts.charts, spec.local_aabb_count, prerotation, orient)
    proxies = [_proxy_from_batch(batch, i, c) for i, c in enumerate(charts)]
    return proxies, batch.order().tolist()
