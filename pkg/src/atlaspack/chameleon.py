"""Box-only row packer used as the comparison baseline.

Charts are normalized and sorted like the main packer, but each chart is
represented by its bounding box, rows are never compacted and the fill
direction simply alternates from row to row.
"""

from __future__ import annotations

from .chartset_io import AtlasSpec, ChartSet, PackResult
from .packer import pack


def chameleon_pack(charts: ChartSet, spec: AtlasSpec, jobs: int = 1) -> PackResult:
    """Pack with bounding boxes only, at the largest feasible candidate scale."""
    return pack(charts, spec, variant="chameleon", jobs=jobs)
