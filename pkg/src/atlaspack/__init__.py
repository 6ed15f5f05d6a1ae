"""Texture atlas packing with tight chart proxies and knee-aware row folding."""

from .chameleon import chameleon_pack
from .chartset_io import (AtlasSpec, Chart, ChartSet, ChartSetError, PackResult, PackStats,
                          Placement, export_result, import_result, load_chart_set, render_svg)
from .metrics import l2_stretch, validate_atlas
from .packer import pack

__all__ = [
    "AtlasSpec", "Chart", "ChartSet", "ChartSetError", "PackResult", "PackStats", "Placement",
    "chameleon_pack", "export_result", "import_result", "l2_stretch", "load_chart_set", "pack",
    "render_svg", "validate_atlas",
]
