"""Packing quality (L2 stretch, occupancy) and texel-exact validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .chartset_io import AtlasSpec, ChartSet, PackResult
from .geometry import placed_vertices, triangle_areas

# Overlap depth (in texels) below which a triangle does not count as touching a texel.
COVER_EPS = 1e-7


class DegenerateChartError(ValueError):
    pass


@dataclass
class StretchReport:
    l2_stretch: float
    per_chart_stretch: list[float]
    occupancy: Optional[float] = None


@dataclass
class ValidationReport:
    overlap_texels: int
    gutter_violation_texels: int
    out_of_bounds_texels: int
    covered_texels: int
    atlas_texels: int
    missing_charts: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (self.overlap_texels == 0 and self.gutter_violation_texels == 0
                and self.out_of_bounds_texels == 0 and not self.missing_charts)

    @property
    def occupancy(self) -> float:
        return self.covered_texels / self.atlas_texels


def _stretch_terms(src: np.ndarray, dst: np.ndarray, tris: np.ndarray, chart_id: int):
    """Squared per-triangle stretch and input areas."""
    a, b, c = src[tris[:, 0]], src[tris[:, 1]], src[tris[:, 2]]
    pa, pb, pc = dst[tris[:, 0]], dst[tris[:, 1]], dst[tris[:, 2]]
    s1, s2 = b - a, c - a
    q1, q2 = pb - pa, pc - pa
    area_in = 0.5 * np.abs(s1[:, 0] * s2[:, 1] - s1[:, 1] * s2[:, 0])
    det = q1[:, 0] * q2[:, 1] - q1[:, 1] * q2[:, 0]
    keep = area_in > 0.0
    if np.any(keep & (det == 0.0)):
        raise DegenerateChartError(f"chart {chart_id}: packed triangle collapsed")
    s1, s2, q1, q2, det, area_in = s1[keep], s2[keep], q1[keep], q2[keep], det[keep], area_in[keep]
    # J maps packed to input: J = S Q^-1 with S, Q holding edge vectors as columns
    inv = np.stack([q2[:, 1], -q2[:, 0], -q1[:, 1], q1[:, 0]], axis=1) / det[:, None]
    j00 = s1[:, 0] * inv[:, 0] + s2[:, 0] * inv[:, 2]
    j01 = s1[:, 0] * inv[:, 1] + s2[:, 0] * inv[:, 3]
    j10 = s1[:, 1] * inv[:, 0] + s2[:, 1] * inv[:, 2]
    j11 = s1[:, 1] * inv[:, 1] + s2[:, 1] * inv[:, 3]
    sq = 0.5 * (j00 ** 2 + j01 ** 2 + j10 ** 2 + j11 ** 2)
    return sq, area_in


def l2_stretch(charts: ChartSet, result: PackResult, spec: Optional[AtlasSpec] = None) -> StretchReport:
    """Area-weighted L2 stretch of the packed charts relative to their input shape."""
    if not result.success:
        raise ValueError("stretch is undefined for a failed packing")
    total = 0.0
    weight = 0.0
    per_chart = [math.nan] * len(charts)
    for p in result.placements:
        chart = charts.charts[p.chart_id]
        dst = placed_vertices(chart.vertices, p)
        sq, area = _stretch_terms(chart.vertices, dst, chart.triangles, p.chart_id)
        num = float(np.dot(sq, area))
        den = float(area.sum())
        per_chart[p.chart_id] = math.sqrt(num / den) if den > 0 else math.nan
        total += num
        weight += den
    occ = validate_atlas(charts, result, spec).occupancy if spec is not None else None
    return StretchReport(math.sqrt(total / weight), per_chart, occ)


# ---------------------------------------------------------------- rasterization


@njit(cache=True, nogil=True)
def _overlaps_texel(ax, ay, bx, by, cx, cy, px, py):
    """Open texel square at (px, py) meets the triangle by more than COVER_EPS."""
    eps = 1e-7
    if min(max(ax, bx, cx), px + 1.0) - max(min(ax, bx, cx), px) <= eps:
        return False
    if min(max(ay, by, cy), py + 1.0) - max(min(ay, by, cy), py) <= eps:
        return False
    xs = (ax, bx, cx)
    ys = (ay, by, cy)
    for e in range(3):
        f = (e + 1) % 3
        nx = -(ys[f] - ys[e])
        ny = xs[f] - xs[e]
        norm = math.sqrt(nx * nx + ny * ny)
        if norm == 0.0:
            return False
        nx /= norm
        ny /= norm
        d0 = ax * nx + ay * ny
        d1 = bx * nx + by * ny
        d2 = cx * nx + cy * ny
        t0 = min(d0, d1, d2)
        t1 = max(d0, d1, d2)
        mid = (px + 0.5) * nx + (py + 0.5) * ny
        half = 0.5 * (abs(nx) + abs(ny))
        if min(t1, mid + half) - max(t0, mid - half) <= eps:
            return False
    return True


@njit(cache=True, nogil=True)
def _chart_cover(v, tris):
    """Boolean texel mask of one chart plus the mask origin."""
    x0 = math.floor(v[:, 0].min())
    y0 = math.floor(v[:, 1].min())
    gw = math.ceil(v[:, 0].max()) - x0 + 1
    gh = math.ceil(v[:, 1].max()) - y0 + 1
    mask = np.zeros((gh, gw), np.bool_)
    for t in range(tris.shape[0]):
        a, b, c = tris[t, 0], tris[t, 1], tris[t, 2]
        ax, ay, bx, by, cx, cy = v[a, 0], v[a, 1], v[b, 0], v[b, 1], v[c, 0], v[c, 1]
        lx = math.floor(min(ax, bx, cx))
        hx = math.ceil(max(ax, bx, cx))
        ly = math.floor(min(ay, by, cy))
        hy = math.ceil(max(ay, by, cy))
        for py in range(ly, hy):
            for px in range(lx, hx):
                if not mask[py - y0, px - x0] and _overlaps_texel(ax, ay, bx, by, cx, cy, px, py):
                    mask[py - y0, px - x0] = True
    return mask, x0, y0


@njit(cache=True, nogil=True)
def _validate(verts, tris, v_off, t_off, width, height, gutter):
    count = np.zeros((height, width), np.int32)
    halo = np.zeros((height, width), np.int32)
    oob = 0
    for c in range(v_off.shape[0] - 1):
        v = verts[v_off[c]:v_off[c + 1]]
        mask, x0, y0 = _chart_cover(v, tris[t_off[c]:t_off[c + 1]])
        gh, gw = mask.shape
        grown = np.zeros((gh + 2 * gutter, gw + 2 * gutter), np.bool_)
        for i in range(gh):
            for j in range(gw):
                if not mask[i, j]:
                    continue
                y = y0 + i
                x = x0 + j
                if 0 <= x < width and 0 <= y < height:
                    count[y, x] += 1
                else:
                    oob += 1
                grown[i:i + 2 * gutter + 1, j:j + 2 * gutter + 1] = True
        for i in range(gh + 2 * gutter):
            y = y0 - gutter + i
            if y < 0 or y >= height:
                continue
            for j in range(gw + 2 * gutter):
                x = x0 - gutter + j
                if grown[i, j] and 0 <= x < width:
                    halo[y, x] += 1
    overlap = 0
    violations = 0
    covered = 0
    for y in range(height):
        for x in range(width):
            if count[y, x] >= 2:
                overlap += 1
            if count[y, x] >= 1:
                covered += 1
            if halo[y, x] >= 2:
                violations += 1
    return overlap, violations, oob, covered


def coverage_mask(vertices: np.ndarray, triangles: np.ndarray) -> tuple[np.ndarray, int, int]:
    """Texels whose open square meets the triangles: (mask, x origin, y origin)."""
    mask, x0, y0 = _chart_cover(np.ascontiguousarray(vertices, dtype=np.float64),
                                np.ascontiguousarray(triangles, dtype=np.int64))
    return mask, int(x0), int(y0)


def validate_atlas(charts: ChartSet, result: PackResult, spec: AtlasSpec) -> ValidationReport:
    """Rasterize every placed chart and count overlaps, gutter breaches and spills."""
    placed = {p.chart_id: p for p in result.placements}
    missing = [c.id for c in charts if c.id not in placed]
    verts, tris = [], []
    v_off, t_off = [0], [0]
    for chart in charts:
        if chart.id not in placed:
            continue
        v = placed_vertices(chart.vertices, placed[chart.id])
        keep = triangle_areas(chart.vertices, chart.triangles) > 0.0
        verts.append(v)
        tris.append(chart.triangles[keep])
        v_off.append(v_off[-1] + len(v))
        t_off.append(t_off[-1] + int(keep.sum()))
    if verts:
        overlap, viol, oob, covered = _validate(
            np.ascontiguousarray(np.concatenate(verts)), np.ascontiguousarray(np.concatenate(tris)),
            np.asarray(v_off, np.int64), np.asarray(t_off, np.int64),
            spec.width, spec.height, spec.gutter)
    else:
        overlap = viol = oob = covered = 0
    return ValidationReport(int(overlap), int(viol), int(oob), int(covered),
                            spec.width * spec.height, missing)
