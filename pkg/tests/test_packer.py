import math
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atlaspack import chameleon_pack, l2_stretch, pack, validate_atlas
from atlaspack.chartset_io import AtlasSpec, Chart, ChartSet, format_result
from atlaspack.corpus import generate
from atlaspack.geometry import rotate
from atlaspack.packer import ScaleRun, pack_at_scale, prepare, search
from atlaspack.proxies import compute_obb

from conftest import QUAD, chart_set, rect, triangle


def test_small_square_packs_at_full_scale():
    cs = chart_set(rect(10, 10))
    res = pack(cs, AtlasSpec(64, 64))
    assert res.success and res.scale_index == 64
    assert res.placements[0].translation == (0, 0)
    assert l2_stretch(cs, res).l2_stretch == pytest.approx(1.0, abs=1e-9)


def test_large_square_needs_scale_40():
    cs = chart_set(rect(100, 100))
    spec = AtlasSpec(64, 64)
    prep = prepare(cs, spec)
    assert math.ceil(100 * 41 / 64) == 65
    assert not pack_at_scale(prep, 41).success
    assert pack_at_scale(prep, 40).success
    assert pack(cs, spec).scale_index == 40


def test_hopelessly_wide_chart_fails_cleanly():
    cs = chart_set(rect(10_000, 2))
    res = pack(cs, AtlasSpec(64, 64))
    assert math.ceil(10_000 / 64) == 157
    assert not res.success and res.placements == [] and res.scale_index is None
    assert res.diagnostics


def _exhaustive(prep):
    ok = [i for i in range(1, prep.spec.scale_count + 1) if pack_at_scale(prep, i).success]
    return max(ok) if ok else None


@settings(max_examples=15)
@given(st.integers(0, 10_000), st.integers(5, 80), st.sampled_from([(64, 64), (128, 64)]))
def test_search_returns_the_largest_feasible_scale(seed, n, size):
    cs = generate(seed, n, area=size[0] * size[1] * 1.2)
    spec = AtlasSpec(*size)
    prep = prepare(cs, spec)
    best, evaluated = search(prep)
    assert (best.index if best else None) == _exhaustive(prep)
    assert evaluated <= spec.scale_count


@settings(max_examples=25)
@given(st.integers(0, 10_000), st.integers(2, 120), st.integers(0, 2), st.booleans())
def test_packings_are_valid(seed, n, gutter, prerotate):
    cs = generate(seed, n)
    spec = AtlasSpec(256, 256, gutter=gutter, prerotate=prerotate)
    res = pack(cs, spec)
    assert res.success
    report = validate_atlas(cs, res, spec)
    assert report.ok, report


def test_prerotation_is_recorded():
    tilted = Chart(0, rotate(rect(40, 40).vertices, math.pi / 4), QUAD)
    cs = ChartSet([tilted])
    res = pack(cs, AtlasSpec(48, 48, prerotate=True))
    assert res.placements[0].prerotation_angle == pytest.approx(-compute_obb(tilted.vertices).angle)
    plain = pack(cs, AtlasSpec(48, 48))
    assert plain.placements[0].prerotation_angle == 0.0
    assert (res.scale_index, plain.scale_index) == (64, 54)


def test_repeat_and_thread_count_do_not_change_output():
    cs = generate(42, 150)
    spec = AtlasSpec(256, 256)
    a = format_result(pack(cs, spec))
    assert format_result(pack(cs, spec)) == a
    assert format_result(pack(cs, spec, jobs=max(2, os.cpu_count() or 2))) == a
    hybrid = AtlasSpec(256, 256, t_opt_fraction=0.05)
    assert format_result(pack(cs, hybrid, jobs=1)) == format_result(pack(cs, hybrid, jobs=3))


def _row_by_row(prep, index):
    run = ScaleRun(prep, index)
    while not run.done:
        if run.step() < 0:
            return None
    return run._candidate()


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_zero_threshold_equals_plain_sequential(seed):
    cs = generate(seed, 200)
    spec = AtlasSpec(256, 256, t_opt_fraction=0.0)
    prep = prepare(cs, spec)
    res = pack(cs, spec)
    ref = _row_by_row(prep, res.scale_index)
    assert all(p.mode == "sequential" for p in res.placements)
    assert ref.placements == res.placements


def test_hybrid_mode_is_valid_and_marks_prefix_charts():
    cs = generate(9, 400)
    spec = AtlasSpec(256, 256, t_opt_fraction=0.05)
    res = pack(cs, spec)
    assert res.success
    assert validate_atlas(cs, res, spec).ok
    prefix = [p for p in res.placements if p.mode == "prefix"]
    assert prefix
    for p in res.placements:
        assert p.scale[0] / p.scale[1] <= res.scale_value + 1e-12
    for p in res.placements:
        if p.mode == "sequential":
            assert p.scale == (res.scale_index, res.scale_count)


def test_everything_prefix_folded():
    cs = generate(4, 150)
    spec = AtlasSpec(256, 256, t_opt_fraction=1.0)
    res = pack(cs, spec)
    assert res.success and all(p.mode == "prefix" for p in res.placements)
    assert validate_atlas(cs, res, spec).ok


def test_hybrid_winner_maximises_weighted_scale():
    cs = generate(12, 300)
    spec = AtlasSpec(256, 256, t_opt_fraction=0.05)
    prep = prepare(cs, spec)
    best, _ = search(prep)
    scores = [c.weighted_scale for c in (pack_at_scale(prep, i) for i in range(1, 65)) if c.success]
    assert best.weighted_scale == max(scores)


def _footprint(n):
    cs = generate(5, n, area=2.0 * 256 * 256 * n / 500)
    spec = AtlasSpec(512, 512)
    prep = prepare(cs, spec)
    run = ScaleRun(prep, 32)
    arrays = list(prep.arrays[1:-1]) + list(run.profiles) + list(run.state)
    arrays += [run.hc, run.a_locked, run.b_locked]
    return sum(a.nbytes for a in arrays if isinstance(a, np.ndarray))


def test_memory_grows_linearly():
    small, large = _footprint(500), _footprint(1000)
    assert large / small < 2.3


def test_chameleon_single_chart():
    cs = chart_set(rect(10, 10))
    assert chameleon_pack(cs, AtlasSpec(64, 64)).scale_index == 64


def test_chameleon_alternates_rows():
    cs = chart_set(rect(30, 40), rect(30, 38), rect(30, 10), rect(30, 9))
    spec = AtlasSpec(64, 96)
    res = chameleon_pack(cs, spec)
    assert res.scale_index == 64
    by_id = {p.chart_id: p for p in res.placements}
    # the short charts stand upright and the second row starts from the right edge
    assert by_id[0].translation == (0, 0) and by_id[1].translation[1] == 0
    assert by_id[2].translation == (64 - 10, 40)
    assert by_id[3].translation[0] < by_id[2].translation[0]
    assert validate_atlas(cs, res, spec).ok


def test_chameleon_cannot_use_the_triangle_gap():
    pair = chart_set(triangle([[0, 0], [32, 0], [0, 32]]), triangle([[32, 0], [32, 32], [0, 32]]))
    spec = AtlasSpec(48, 32, gutter=0)
    tabi, cham = pack(pair, spec), chameleon_pack(pair, spec)
    assert cham.scale_index <= tabi.scale_index
    assert validate_atlas(pair, cham, spec).ok and validate_atlas(pair, tabi, spec).ok
