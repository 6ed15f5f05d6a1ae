"""Scale search driving the row packer."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .chartset_io import AtlasSpec, ChartSet, PackResult, PackStats, Placement
from .profiles import ProxyArrays, allocate_profiles, fill_compaction, proxy_arrays
from .proxies import ProxyBatch, prerotation_angles, proxy_batch
from .rowpack import Options, State, _pack_prefix, _pack_row, _pack_sequential, _update_knee, new_state

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Variant:
    """Which parts of the method are active."""

    name: str
    tight: bool = True
    compaction: bool = True
    dynamic_direction: bool = True
    knees: bool = True
    orient: bool = True


VARIANTS = {
    "full": Variant("full"),
    "tight_only": Variant("tight_only", dynamic_direction=False, knees=False),
    "balance_only": Variant("balance_only", tight=False, compaction=False, orient=False),
    "chameleon": Variant("chameleon", tight=False, compaction=False, dynamic_direction=False,
                         knees=False, orient=False),
}


@dataclass(eq=False)
class Prepared:
    """Scale-independent data: proxies in packing order."""

    charts: ChartSet
    spec: AtlasSpec
    variant: Variant
    batch: ProxyBatch
    order: np.ndarray
    arrays: ProxyArrays
    heights: np.ndarray
    areas: np.ndarray
    t_opt: float


def prepare(charts: ChartSet, spec: AtlasSpec, variant: str | Variant = "full") -> Prepared:
    v = VARIANTS[variant] if isinstance(variant, str) else variant
    angles = prerotation_angles(charts) if spec.prerotate else None
    batch = proxy_batch(charts.charts, spec.local_aabb_count, angles, orient=v.orient)
    order = batch.order()
    pa = proxy_arrays(batch, order, tight=v.tight)
    return Prepared(
        charts=charts,
        spec=spec,
        variant=v,
        batch=batch,
        order=order,
        arrays=pa,
        heights=pa.height.copy(),
        areas=np.ascontiguousarray(batch.area[order]),
        t_opt=spec.t_opt_for(len(charts)),
    )


@dataclass(eq=False)
class ScaleCandidate:
    index: int
    success: bool
    placements: Optional[list[Placement]] = None
    stats: PackStats = PackStats()
    weighted_scale: float = 0.0
    diagnostics: str = ""


def _options(prep: Prepared, t_opt_px: float) -> Options:
    v = prep.variant
    return Options(
        atlas_w=prep.spec.width,
        atlas_h=prep.spec.height,
        gutter=prep.spec.gutter,
        use_hc=v.compaction,
        dynamic_dir=v.dynamic_direction,
        use_knees=v.knees,
        t_opt_px=float(t_opt_px),
    )


class ScaleRun:
    """Packing state for one candidate scale; rows can be committed one at a time."""

    def __init__(self, prep: Prepared, index: int, t_opt: Optional[float] = None):
        self.prep = prep
        self.index = index
        spec = prep.spec
        n = len(prep.order)
        self.profiles = allocate_profiles(prep.arrays, index, spec.scale_count)
        self.hc = np.zeros(n, np.int64)
        self.a_locked = np.zeros(n, np.bool_)
        self.b_locked = np.zeros(n, np.bool_)
        if prep.variant.compaction:
            fill_compaction(self.profiles, spec.gutter, self.hc, self.a_locked, self.b_locked)
        t = prep.t_opt if t_opt is None else t_opt
        self.options = _options(prep, t * spec.height)
        self.state: State = new_state(n, spec.width)
        self.state.fin_num[:] = index
        self.state.fin_den[:] = spec.scale_count
        self.row_start = 0
        self.switched_at: Optional[int] = None

    @property
    def done(self) -> bool:
        return self.row_start >= len(self.prep.order)

    def step(self) -> int:
        """Commit one sequential row; returns its last chart or a negative failure code."""
        st = self.state
        if st.knee[0] == 1:
            _update_knee(st.knee, st.frontline)
        end = int(_pack_row(self.profiles, self.hc, self.a_locked, self.b_locked,
                            self.prep.heights, self.options, st, self.row_start))
        if end >= 0:
            self.row_start = end + 1
        return end

    def run(self) -> ScaleCandidate:
        st = self.state
        spec = self.prep.spec
        n = len(self.prep.order)
        code = int(_pack_sequential(self.profiles, self.hc, self.a_locked, self.b_locked,
                                    self.prep.heights, self.options, st))
        if code < 0:
            reason = "chart wider than atlas" if code == -1 else "rows overflow the atlas height"
            return ScaleCandidate(self.index, False, diagnostics=reason)
        if code < n:
            self.switched_at = code
            ok = _pack_prefix(self.prep.arrays, self.profiles, self.hc, self.a_locked,
                              self.b_locked, self.options, st, code, self.index, spec.scale_count)
            if not ok:
                return ScaleCandidate(self.index, False, diagnostics="prefix rows overflow")
        return self._candidate()

    def _candidate(self) -> ScaleCandidate:
        st = self.state
        prep = self.prep
        b = prep.batch
        placements: list[Optional[Placement]] = [None] * len(prep.order)
        switch = self.switched_at if self.switched_at is not None else len(prep.order)
        for c, i in enumerate(prep.order.tolist()):
            mirrored = bool(st.mirrored[c]) and prep.variant.tight
            placements[i] = Placement(
                chart_id=i,
                rotation=90 if b.rotated[i] else 0,
                reflect_x=bool(b.reflect_x[i]) != mirrored,
                reflect_y=bool(b.reflect_y[i]),
                translation=(int(st.xs[c]), int(st.ys[c])),
                prerotation_angle=float(b.prerotation[i]),
                scale=(int(st.fin_num[c]), int(st.fin_den[c])),
                mode="prefix" if c >= switch else "sequential",
            )
        final = st.fin_num / st.fin_den
        weighted = float(np.dot(prep.areas, final) / prep.areas.sum())
        stats = PackStats(int(st.counters[0]), int(st.counters[1]), int(st.counters[2]))
        return ScaleCandidate(self.index, True, placements, stats, weighted)


def pack_at_scale(prep: Prepared, index: int, t_opt: Optional[float] = None) -> ScaleCandidate:
    """Evaluate a single candidate scale ``index / scale_count``."""
    return ScaleRun(prep, index, t_opt).run()


def _prunable(prep: Prepared, index: int) -> bool:
    """Scales that provably cannot succeed for a purely sequential packing."""
    spec = prep.spec
    s = index / spec.scale_count
    if float(np.dot(prep.areas, np.full(len(prep.areas), s * s))) > spec.width * spec.height:
        return True
    w = np.ceil(prep.arrays.width * index / spec.scale_count)
    h = np.ceil(prep.arrays.height * index / spec.scale_count)
    return bool(w.max() > spec.width or h.max() > spec.height)


def search(prep: Prepared, jobs: int = 1) -> tuple[Optional[ScaleCandidate], int]:
    """Best candidate over all scales and the number of kernels actually run."""
    spec = prep.spec
    hybrid = prep.t_opt > 0.0
    indices = [i for i in range(spec.scale_count, 0, -1) if hybrid or not _prunable(prep, i)]
    best: Optional[ScaleCandidate] = None
    evaluated = 0
    jobs = max(1, jobs)
    pool = ThreadPoolExecutor(jobs) if jobs > 1 else None
    try:
        pos = 0
        while pos < len(indices):
            batch = indices[pos:pos + jobs]
            pos += jobs
            if best is not None and hybrid:
                batch = [i for i in batch if i / spec.scale_count > best.weighted_scale]
                if not batch:
                    break
            if pool is None:
                results = [pack_at_scale(prep, i) for i in batch]
            else:
                results = list(pool.map(lambda i: pack_at_scale(prep, i), batch))
            evaluated += len(batch)
            for cand in results:  # batch is in decreasing index order
                if not cand.success:
                    continue
                if not hybrid:
                    return cand, evaluated
                if best is None or cand.weighted_scale > best.weighted_scale:
                    best = cand
    finally:
        if pool is not None:
            pool.shutdown()
    return best, evaluated


def _result(prep: Prepared, best: Optional[ScaleCandidate]) -> PackResult:
    spec = prep.spec
    if best is None:
        return PackResult(False, None, spec.scale_count,
                          diagnostics="no candidate scale produced a valid packing")
    return PackResult(True, best.index, spec.scale_count, best.placements, best.stats)


def pack(charts: ChartSet, spec: AtlasSpec, variant: str = "full", jobs: int = 1) -> PackResult:
    """Pack ``charts`` into the atlas at the largest feasible candidate scale."""
    prep = prepare(charts, spec, variant)
    best, evaluated = search(prep, jobs)
    log.debug("%s: evaluated %d scale(s)", variant, evaluated)
    return _result(prep, best)
