"""Chart sets, atlas parameters and packing results, plus their file formats."""

from __future__ import annotations

import colorsys
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .geometry import boundary_loops, placed_vertices, polygon_area, triangle_areas

log = logging.getLogger(__name__)


class ChartSetError(ValueError):
    """Raised for malformed or empty chart inputs."""


class ResultFormatError(ValueError):
    """Raised when a result file cannot be parsed."""


@dataclass(eq=False)
class Chart:
    """One connected UV island: a triangle soup in its own 2D frame."""

    id: int
    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 2)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(self.vertices) < 3:
            raise ChartSetError(f"chart {self.id}: needs at least 3 vertices")
        if len(self.triangles) == 0:
            raise ChartSetError(f"chart {self.id}: has no triangles")
        if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
            raise ChartSetError(f"chart {self.id}: triangle index out of range")
        if not np.isfinite(self.vertices).all():
            raise ChartSetError(f"chart {self.id}: non-finite vertex")

    @property
    def area(self) -> float:
        return float(triangle_areas(self.vertices, self.triangles).sum())


@dataclass(eq=False)
class ChartSet:
    charts: list[Chart]
    source_name: str = ""
    dropped: int = 0

    def __post_init__(self):
        if not self.charts:
            raise ChartSetError("chart set contains no charts")
        for i, chart in enumerate(self.charts):
            if chart.id != i:
                raise ChartSetError("chart ids must be contiguous from 0")

    def __len__(self):
        return len(self.charts)

    def __iter__(self):
        return iter(self.charts)


@dataclass(frozen=True)
class AtlasSpec:
    width: int
    height: int
    gutter: int = 1
    scale_count: int = 64
    prerotate: bool = False
    t_opt_fraction: Optional[float] = None
    local_aabb_count: int = 10

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("atlas dimensions must be positive")
        if self.gutter < 0:
            raise ValueError("gutter must be non-negative")
        if self.scale_count < 1:
            raise ValueError("scale_count must be at least 1")
        if self.local_aabb_count < 1:
            raise ValueError("local_aabb_count must be at least 1")
        if self.t_opt_fraction is not None and not 0.0 <= self.t_opt_fraction <= 1.0:
            raise ValueError("t_opt_fraction must lie in [0, 1]")

    def t_opt_for(self, chart_count: int) -> float:
        """Hybrid switch fraction, defaulting by input size."""
        if self.t_opt_fraction is not None:
            return self.t_opt_fraction
        return 0.0 if chart_count <= 10_000 else 0.01


@dataclass(frozen=True)
class Placement:
    chart_id: int
    rotation: int
    reflect_x: bool
    reflect_y: bool
    translation: tuple[int, int]
    prerotation_angle: float = 0.0
    scale: tuple[int, int] = (1, 1)
    mode: str = "sequential"


@dataclass(frozen=True)
class PackStats:
    rows: int = 0
    knees_detected: int = 0
    knee_folds: int = 0


@dataclass
class PackResult:
    success: bool
    scale_index: Optional[int]
    scale_count: int
    placements: list[Placement] = field(default_factory=list)
    stats: PackStats = field(default_factory=PackStats)
    diagnostics: str = ""

    @property
    def scale_value(self) -> float:
        return 0.0 if self.scale_index is None else self.scale_index / self.scale_count

    @property
    def per_chart_final_scale(self) -> list[float]:
        return [p.scale[0] / p.scale[1] for p in self.placements]


# ---------------------------------------------------------------- loading


def load_chart_set(path, format: str = "auto", texture_size=None) -> ChartSet:
    """Read a chart set from ``chartset_json`` or an OBJ file's UV layer.

    OBJ input needs ``texture_size`` (an int or a ``(w, h)`` pair) to map UVs
    onto texels.
    """
    path = Path(path)
    if format == "auto":
        format = "obj_uv" if path.suffix.lower() == ".obj" else "chartset_json"
    try:
        text = path.read_text()
    except OSError as exc:
        raise ChartSetError(f"cannot read {path}: {exc}") from exc
    if format == "chartset_json":
        return parse_chartset_json(text, source_name=path.stem)
    if format == "obj_uv":
        if texture_size is None:
            raise ChartSetError("OBJ input requires a texture size")
        return parse_obj_uv(text, texture_size, source_name=path.stem)
    raise ChartSetError(f"unknown chart format {format!r}")


def _finish(raw: list[tuple[np.ndarray, np.ndarray]], name: str) -> ChartSet:
    kept = []
    dropped = 0
    for verts, tris in raw:
        if len(tris) == 0 or triangle_areas(verts, tris).sum() <= 0.0:
            dropped += 1
            continue
        kept.append((verts, tris))
    if dropped:
        log.warning("%s: dropped %d zero-area chart(s)", name, dropped)
    if not kept:
        raise ChartSetError(f"{name}: no charts with positive area")
    charts = [Chart(i, v, t) for i, (v, t) in enumerate(kept)]
    return ChartSet(charts, source_name=name, dropped=dropped)


def parse_chartset_json(text: str, source_name: str = "") -> ChartSet:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ChartSetError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("charts"), list):
        raise ChartSetError("expected an object with a 'charts' list")
    entries = doc["charts"]
    ids = [c.get("id") for c in entries]
    if len(set(ids)) != len(ids):
        raise ChartSetError("duplicate chart ids")
    raw = []
    for entry in sorted(entries, key=lambda c: c["id"]):
        verts = np.asarray(entry.get("vertices", []), dtype=np.float64)
        tris = np.asarray(entry.get("triangles", []), dtype=np.int64)
        if verts.ndim != 2 or verts.shape[0] < 3 or verts.shape[1] != 2:
            raise ChartSetError(f"chart {entry['id']}: needs at least 3 2D vertices")
        tris = tris.reshape(-1, 3)
        if len(tris) and (tris.min() < 0 or tris.max() >= len(verts)):
            raise ChartSetError(f"chart {entry['id']}: triangle index out of range")
        raw.append((verts, tris))
    if sorted(ids) != list(range(len(ids))):
        log.warning("chart ids renumbered to be contiguous")
    return _finish(raw, doc.get("name") or source_name)


def parse_obj_uv(text: str, texture_size, source_name: str = "",
                 weld_tolerance: float = 1e-7) -> ChartSet:
    """Split the UV layer of an OBJ into connected islands."""
    tw, th = (texture_size, texture_size) if np.isscalar(texture_size) else texture_size
    uvs = []
    faces = []
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "vt":
            uvs.append((float(parts[1]), float(parts[2])))
        elif parts[0] == "f":
            idx = []
            for token in parts[1:]:
                fields = token.split("/")
                if len(fields) < 2 or not fields[1]:
                    raise ChartSetError("OBJ face without texture coordinates")
                t = int(fields[1])
                idx.append(t - 1 if t > 0 else len(uvs) + t)
            for i in range(1, len(idx) - 1):
                faces.append((idx[0], idx[i], idx[i + 1]))
    if not faces:
        raise ChartSetError("OBJ contains no textured faces")
    uv = np.asarray(uvs, dtype=np.float64)
    tri = np.asarray(faces, dtype=np.int64)
    if tri.min() < 0 or tri.max() >= len(uv):
        raise ChartSetError("OBJ face references a missing texture coordinate")

    # weld coincident UVs, then label islands through shared welded vertices
    keys = np.round(uv / weld_tolerance).astype(np.int64)
    _, weld = np.unique(keys, axis=0, return_inverse=True)
    weld = weld.reshape(-1)
    tri_w = weld[tri]
    parent = np.arange(weld.max() + 1)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b, c in tri_w.tolist():
        ra, rb, rc = find(a), find(b), find(c)
        parent[rb] = ra
        parent[find(rc)] = ra
    roots = np.array([find(t[0]) for t in tri_w.tolist()])

    texel = np.stack([uv[:, 0] * tw, (1.0 - uv[:, 1]) * th], axis=1)
    raw = []
    for root in sorted(set(roots.tolist()), key=lambda r: int(np.argmax(roots == r))):
        island = tri[roots == root]
        used, local = np.unique(island, return_inverse=True)
        raw.append((texel[used], local.reshape(-1, 3)))
    return _finish(raw, source_name)


def dump_chartset_json(charts: ChartSet | list[Chart], name: str = "") -> str:
    items = charts.charts if isinstance(charts, ChartSet) else charts
    if isinstance(charts, ChartSet) and not name:
        name = charts.source_name
    doc = {
        "name": name,
        "charts": [
            {"id": c.id, "vertices": c.vertices.tolist(), "triangles": c.triangles.tolist()}
            for c in items
        ],
    }
    return json.dumps(doc, separators=(",", ":"))


# ---------------------------------------------------------------- result files


def export_result(result: PackResult, path) -> None:
    Path(path).write_text(format_result(result))


def format_result(result: PackResult) -> str:
    if not result.success or result.scale_index is None:
        raise ValueError("only successful packings can be exported")
    lines = [f"scale {result.scale_index}/{result.scale_count}"]
    s = result.stats
    lines.append(f"stats rows {s.rows} knees {s.knees_detected} knee_folds {s.knee_folds}")
    for p in sorted(result.placements, key=lambda p: p.chart_id):
        lines.append(
            f"chart {p.chart_id} rot {p.rotation} rx {int(p.reflect_x)} ry {int(p.reflect_y)} "
            f"tx {p.translation[0]} ty {p.translation[1]} prerot {p.prerotation_angle!r} "
            f"final_scale {p.scale[0]}/{p.scale[1]} mode {p.mode}"
        )
    return "\n".join(lines) + "\n"


def _fraction(token: str) -> tuple[int, int]:
    num, den = token.split("/")
    num, den = int(num), int(den)
    if den <= 0 or num < 0:
        raise ValueError(token)
    return num, den


def import_result(path) -> PackResult:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ResultFormatError(f"cannot read {path}: {exc}") from exc
    return parse_result(text)


def parse_result(text: str) -> PackResult:
    scale = None
    stats = PackStats()
    placements = []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        try:
            if parts[0] == "scale":
                scale = _fraction(parts[1])
            elif parts[0] == "stats":
                kv = dict(zip(parts[1::2], parts[2::2]))
                stats = PackStats(int(kv["rows"]), int(kv["knees"]), int(kv["knee_folds"]))
            elif parts[0] == "chart":
                kv = dict(zip(parts[2::2], parts[3::2]))
                rot = int(kv["rot"])
                if rot not in (0, 90, 180, 270):
                    raise ValueError("rotation")
                placements.append(Placement(
                    chart_id=int(parts[1]),
                    rotation=rot,
                    reflect_x=kv["rx"] == "1",
                    reflect_y=kv["ry"] == "1",
                    translation=(int(kv["tx"]), int(kv["ty"])),
                    prerotation_angle=float(kv["prerot"]),
                    scale=_fraction(kv["final_scale"]),
                    mode=kv.get("mode", "sequential"),
                ))
            else:
                raise ValueError(parts[0])
        except (KeyError, IndexError, ValueError) as exc:
            raise ResultFormatError(f"line {lineno}: malformed ({exc})") from exc
    if scale is None:
        raise ResultFormatError("missing scale line")
    placements.sort(key=lambda p: p.chart_id)
    return PackResult(True, scale[0], scale[1], placements, stats)


# ---------------------------------------------------------------- svg


def chart_color(chart_id: int) -> str:
    hue = (chart_id * 0.6180339887498949) % 1.0
    r, g, b = colorsys.hsv_to_rgb(hue, 0.55, 0.9)
    return f"#{round(r * 255):02x}{round(g * 255):02x}{round(b * 255):02x}"


def render_svg(charts: ChartSet, result: PackResult, spec: AtlasSpec, path=None) -> str:
    """SVG of the packed atlas: one polygon per chart plus the atlas border."""
    if not result.success:
        raise ValueError("only successful packings can be rendered")
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{spec.width}" height="{spec.height}" viewBox="0 0 {spec.width} {spec.height}">',
        f'<rect x="0" y="0" width="{spec.width}" height="{spec.height}" '
        f'fill="none" stroke="#000000" stroke-width="1"/>',
    ]
    for p in sorted(result.placements, key=lambda p: p.chart_id):
        chart = charts.charts[p.chart_id]
        pts = placed_vertices(chart.vertices, p)
        loops = boundary_loops(chart.triangles)
        if loops:
            loop = max(loops, key=lambda lp: polygon_area(pts[lp]))
        else:
            loop = list(range(len(pts)))
        coords = " ".join(f"{float(pts[i, 0])!r},{float(pts[i, 1])!r}" for i in loop)
        out.append(f'<polygon id="chart-{p.chart_id}" points="{coords}" '
                   f'fill="{chart_color(p.chart_id)}" stroke="none"/>')
    out.append("</svg>")
    svg = "\n".join(out) + "\n"
    if path is not None:
        Path(path).write_text(svg)
    return svg

