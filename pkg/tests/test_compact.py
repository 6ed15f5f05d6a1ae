import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from shapely.affinity import translate
from shapely.geometry import Polygon

from atlaspack.chartset_io import Chart, Placement
from atlaspack.compact import compact_pair, distance_local, distance_obb
from atlaspack.corpus import generate
from atlaspack.geometry import placed_vertices, rotate
from atlaspack.metrics import coverage_mask
from atlaspack.profiles import allocate_profiles, pair_compaction, proxy_arrays
from atlaspack.proxies import Obb, chart_proxy, compute_local_aabbs, proxy_batch

from conftest import QUAD, rect, triangle
from oracles import horizontal_contact

LEFT_TRI = triangle([[0, 0], [8, 0], [0, 8]])
RIGHT_TRI = triangle([[8, 0], [8, 8], [0, 8]])


def _local(chart, k):
    return compute_local_aabbs(chart.vertices, chart.triangles, k)


def test_flush_rectangles():
    a = _local(rect(4, 8), 4)
    assert distance_local(a, a) == 0.0


def test_triangle_pair_k2_gives_4_of_exact_8():
    d = distance_local(_local(LEFT_TRI, 2), _local(RIGHT_TRI, 2))
    assert d == 4.0
    right = RIGHT_TRI.vertices + [8, 0]
    assert horizontal_contact([LEFT_TRI.vertices], [right]) == pytest.approx(8.0)


def test_shorter_right_chart_only_sees_its_rows():
    # left is 8 tall with a notch in its top 3 rows; right is 1.5 tall
    notch = Chart(0, np.array([[0, 0], [2, 0], [2, 3], [6, 3], [6, 8], [0, 8.]]),
                  np.array([[0, 1, 2], [0, 2, 5], [2, 3, 4], [2, 4, 5]]))
    short = rect(2, 1.5)
    d = distance_local(_local(notch, 8), _local(short, 8))
    assert d == pytest.approx(4.0)


def test_obb_flush_boxes():
    a = Obb(0.0, (2.0, 4.0), (2.0, 4.0))
    b = Obb(0.0, (6.0, 4.0), (2.0, 4.0))
    assert distance_obb(a, b) == 0.0


def _slide_oracle(pa, pb, step=0.01, limit=20.0):
    """Largest slide on a fixed grid before the interiors overlap."""
    t = 0.0
    while t <= limit:
        if translate(pb, -(t + step)).intersection(pa).area > 1e-12:
            return t
        t += step
    return limit


def test_obb_diamonds_against_slide_oracle():
    small = Obb(math.pi / 4, (math.sqrt(2) / 2, math.sqrt(2) / 2), (0.5, 0.5))
    big = Obb(math.pi / 4, (math.sqrt(2) * 2, math.sqrt(2)), (1.0, 1.0))
    d = distance_obb(small, big)
    oracle = _slide_oracle(Polygon(small.corners()), Polygon(big.corners()))
    assert d > 0
    assert oracle <= d <= oracle + 0.01 + 1e-9


def test_obb_vertically_disjoint_is_capped():
    a = Obb(0.0, (1.0, 1.0), (1.0, 1.0))
    b = Obb(0.0, (3.0, 5.0), (1.0, 1.0))
    assert distance_obb(a, b, cap=2.0) == 2.0


def test_zero_distance_has_no_locks():
    a, b = chart_proxy(rect(4, 8)), chart_proxy(rect(4, 8, cid=1))
    c = compact_pair(a, b)
    assert c.distance == 0.0 and c.source == "zero"
    assert not c.left_locked and not c.right_locked


def test_triangle_pair_locks_the_right_chart():
    a = chart_proxy(LEFT_TRI, k=2, orient=False)
    b = chart_proxy(RIGHT_TRI, k=2, orient=False)
    c = compact_pair(a, b)
    assert (c.distance, c.source) == (4.0, "local")
    assert c.right_locked


def _diamond(side, cid):
    return Chart(cid, rotate(rect(side, side).vertices, math.pi / 4), QUAD)


@pytest.mark.parametrize("left_side,right_side,locked", [(1, 2, (False, True)),
                                                         (2, 1, (True, False))])
def test_obb_source_locks_lower_corner(left_side, right_side, locked):
    # k=1 makes the local proxy a plain box, so any slide comes from the OBBs
    a = chart_proxy(_diamond(left_side, 0), k=1, orient=False)
    b = chart_proxy(_diamond(right_side, 1), k=1, orient=False)
    c = compact_pair(a, b)
    assert c.source == "obb" and c.distance > 0
    assert (c.left_locked, c.right_locked) == locked


def _pair(seed):
    cs = generate(seed, 2, area=2 * 48.0 * 48.0)
    return cs.charts[0], cs.charts[1]


@given(st.integers(0, 2**31 - 1), st.integers(1, 12))
def test_continuous_distance_is_conservative(seed, k):
    a, b = _pair(seed)
    pa, pb = chart_proxy(a, k), chart_proxy(b, k)
    va = pa.final_vertices(a)
    vb = pb.final_vertices(b) + [pa.width, 0.0]
    exact = horizontal_contact(va[a.triangles], vb[b.triangles])
    c = compact_pair(pa, pb)
    assert c.distance <= exact + 1e-9
    assert c.distance >= 0.0
    if c.distance == 0.0:
        assert not c.left_locked and not c.right_locked


@given(st.integers(0, 2**31 - 1))
def test_symmetry_under_mirroring(seed):
    a, b = _pair(seed)
    # work on upright copies so mirroring commutes with the pose
    a = Chart(0, chart_proxy(a, orient=False).final_vertices(a), a.triangles)
    b = Chart(1, chart_proxy(b, orient=False).final_vertices(b), b.triangles)

    def mirrored(chart, cid):
        v = chart.vertices.copy()
        v[:, 0] = -v[:, 0]
        return Chart(cid, v, chart.triangles)

    pa, pb = chart_proxy(a, 6, orient=False), chart_proxy(b, 6, orient=False)
    ma, mb = chart_proxy(mirrored(b, 0), 6, orient=False), chart_proxy(mirrored(a, 1), 6, orient=False)
    c, m = compact_pair(pa, pb), compact_pair(ma, mb)
    if math.inf in (distance_obb(pa.obb, pb.obb.translated(pa.width, 0.0)),
                    distance_obb(ma.obb, mb.obb.translated(ma.width, 0.0))):
        return  # the no-contact cap is each right chart's own width
    assert m.distance == pytest.approx(c.distance, abs=1e-9)
    if c.source == "local" and m.source == "local":
        assert (m.left_locked, m.right_locked) == (c.right_locked, c.left_locked)


# ---------------------------------------------------------------- texel level


def texel_pair(a, b, num, den, gutter):
    batch = proxy_batch([a, b], 10)
    pa = proxy_arrays(batch, [0, 1])
    prof = allocate_profiles(pa, num, den)
    hc, a_locked, b_locked = pair_compaction(prof, 0, 1, gutter)

    def place(chart, i, x, y):
        p = Placement(i, 90 if batch.rotated[i] else 0, bool(batch.reflect_x[i]),
                      bool(batch.reflect_y[i]), (x, y), 0.0, (num, den))
        return coverage_mask(placed_vertices(chart.vertices, p), chart.triangles)

    step = int(prof.width[0]) + 2 * gutter - int(hc)
    return int(hc), bool(a_locked), bool(b_locked), step, place


def separated(m1, m2, gutter):
    """No two covered texels closer than 2 * gutter + 1 in Chebyshev distance."""
    (a, ax, ay), (b, bx, by) = m1, m2
    r = 2 * gutter
    x0, y0 = min(ax, bx) - r, min(ay, by) - r
    w = max(ax + a.shape[1], bx + b.shape[1]) + r - x0
    h = max(ay + a.shape[0], by + b.shape[0]) + r - y0
    grown = np.zeros((h, w), bool)
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            ys, xs = ay - y0 + dy, ax - x0 + dx
            grown[ys:ys + a.shape[0], xs:xs + a.shape[1]] |= a
    other = np.zeros((h, w), bool)
    other[by - y0:by - y0 + b.shape[0], bx - x0:bx - x0 + b.shape[1]] = b
    return not (grown & other).any()


@given(st.integers(0, 2**31 - 1), st.integers(8, 64), st.integers(0, 2))
def test_texel_compaction_is_conservative(seed, num, gutter):
    a, b = _pair(seed)
    hc, _, _, step, place = texel_pair(a, b, num, 64, gutter)
    assert hc >= 0
    assert separated(place(a, 0, 0, 0), place(b, 1, step, 0), gutter)


@given(st.integers(0, 2**31 - 1), st.integers(16, 64), st.integers(0, 2))
def test_unlocked_chart_may_rise(seed, num, gutter):
    a, b = _pair(seed)
    hc, a_locked, b_locked, step, place = texel_pair(a, b, num, 64, gutter)
    for dy in range(1, 40, 3):
        if not a_locked:
            assert separated(place(a, 0, 0, 0), place(b, 1, step, dy), gutter)
        if not b_locked:
            assert separated(place(a, 0, 0, dy), place(b, 1, step, 0), gutter)
