import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from atlaspack.chartset_io import AtlasSpec, Chart, ChartSet
from atlaspack.corpus import generate
from atlaspack.geometry import posed_vertices, rotate
from atlaspack.proxies import (OrientationFlags, build_proxies, chart_proxy, choose_orientation,
                               compute_aabb, compute_local_aabbs, compute_obb, merge_local_aabbs,
                               normalize_rotation, orientation_areas, pose_all, prerotate,
                               proxy_batch)

from conftest import QUAD, chart_set, rect, triangle
from oracles import chart_polygon, obb_bruteforce, strip_bounds

seeds = st.integers(0, 2**31 - 1)


def random_chart(seed):
    return generate(seed, 1).charts[0]


def test_aabb_examples():
    a = compute_aabb(np.array([[1, 2], [5, 2], [3, 7.]]))
    assert (a.min, a.max) == ((1, 2), (5, 7))
    b = compute_aabb(np.array([[0, 0], [8, 0], [0, 8.]]))
    assert (b.min, b.max) == ((0, 0), (8, 8))
    c = compute_aabb(np.array([[0, 0], [8, 0], [0, 8.]]) + 10)
    assert (c.min, c.max) == ((10, 10), (18, 18))


@pytest.mark.parametrize("w,h,turned", [(10, 4, True), (4, 10, False), (6, 6, False)])
def test_normalize_rotation(w, h, turned):
    out, rotated = normalize_rotation(rect(w, h))
    span = out.vertices.max(axis=0) - out.vertices.min(axis=0)
    assert rotated is turned
    assert span[1] >= span[0]
    assert sorted(span) == sorted([w, h])


def test_square_k2_slices_are_exact():
    sq = rect(8, 8)
    p = compute_local_aabbs(sq.vertices, sq.triangles, 2)
    np.testing.assert_array_equal(p.x_edges, [0, 4, 8])
    np.testing.assert_array_equal(p.x_top, [0, 0])
    np.testing.assert_array_equal(p.x_bottom, [8, 8])
    np.testing.assert_array_equal(p.y_left, [0, 0])
    np.testing.assert_array_equal(p.y_right, [8, 8])
    m = merge_local_aabbs(p)
    np.testing.assert_array_equal(m.x_bottom, p.x_bottom)
    np.testing.assert_array_equal(m.y_right, p.y_right)


def test_right_triangle_k2_slices():
    t = triangle([[0, 0], [8, 0], [0, 8]])
    p = compute_local_aabbs(t.vertices, t.triangles, 2)
    np.testing.assert_array_equal(p.x_top, [0, 0])
    np.testing.assert_array_equal(p.x_bottom, [8, 4])
    np.testing.assert_array_equal(p.y_left, [0, 0])
    # the right boundary for y in [4, 8] is x = 4
    np.testing.assert_array_equal(p.y_right, [8, 4])


def test_k1_is_the_aabb():
    c = random_chart(5)
    p = compute_local_aabbs(c.vertices, c.triangles, 1)
    lo, hi = c.vertices.min(axis=0), c.vertices.max(axis=0)
    assert (p.x_top[0], p.x_bottom[0]) == (lo[1], hi[1])
    assert (p.y_left[0], p.y_right[0]) == (lo[0], hi[0])


@given(seeds, st.integers(1, 12))
def test_slices_match_clipping_oracle(seed, k):
    c = random_chart(seed)
    poly = chart_polygon(c.vertices, c.triangles)
    p = compute_local_aabbs(c.vertices, c.triangles, k, merge=False)
    for j in range(k):
        ref = strip_bounds(poly, p.x_edges[j], p.x_edges[j + 1], axis=0)
        if ref is None:
            assert p.x_empty[j]
        else:
            assert p.x_top[j] == pytest.approx(ref[0], abs=1e-7)
            assert p.x_bottom[j] == pytest.approx(ref[1], abs=1e-7)
        ref = strip_bounds(poly, p.y_edges[j], p.y_edges[j + 1], axis=1)
        if ref is not None:
            assert p.y_left[j] == pytest.approx(ref[0], abs=1e-7)
            assert p.y_right[j] == pytest.approx(ref[1], abs=1e-7)


def _inside_slices(p, pts, tol=1e-6):
    for x, y in pts:
        in_x = any(p.x_edges[j] - tol <= x <= p.x_edges[j + 1] + tol
                   and p.x_top[j] - tol <= y <= p.x_bottom[j] + tol for j in range(p.k))
        in_y = any(p.y_edges[j] - tol <= y <= p.y_edges[j + 1] + tol
                   and p.y_left[j] - tol <= x <= p.y_right[j] + tol for j in range(p.k))
        if not (in_x and in_y):
            return False
    return True


@given(seeds, st.integers(1, 16))
def test_containment(seed, k):
    c = random_chart(seed)
    v = c.vertices
    a = compute_aabb(v)
    assert np.all(v >= np.array(a.min)) and np.all(v <= np.array(a.max))
    merged = compute_local_aabbs(v, c.triangles, k)
    assert _inside_slices(merged, v)
    obb = compute_obb(v)
    u, w = obb.axes()
    d = v - np.array(obb.center)
    assert np.all(np.abs(d @ u) <= obb.half_extents[0] + 1e-6)
    assert np.all(np.abs(d @ w) <= obb.half_extents[1] + 1e-6)
    assert obb.area <= a.area + 1e-9


@given(seeds)
def test_merge_never_loosens(seed):
    c = random_chart(seed)
    raw = compute_local_aabbs(c.vertices, c.triangles, 6, merge=False)
    merged = merge_local_aabbs(raw)
    assert np.all(merged.x_top >= raw.x_top - 1e-12)
    assert np.all(merged.x_bottom <= raw.x_bottom + 1e-12)
    assert np.all(merged.y_left >= raw.y_left - 1e-12)
    assert np.all(merged.y_right <= raw.y_right + 1e-12)
    assert _inside_slices(merged, c.vertices)


@given(seeds)
def test_monotone_tightness_on_nested_slicings(seed):
    c = random_chart(seed)
    area = {k: compute_local_aabbs(c.vertices, c.triangles, k).area() for k in (2, 5, 10)}
    box = compute_aabb(c.vertices).area
    tol = 1e-9 * box
    assert area[10] <= area[5] + tol
    assert area[10] <= area[2] + tol
    assert area[5] <= box + tol and area[2] <= box + tol


def test_obb_axis_aligned_rectangle():
    o = compute_obb(rect(7, 3).vertices)
    assert o.angle == 0.0 and o.area == pytest.approx(21.0)


def test_obb_diamond_and_bar():
    sq = rotate(rect(1, 1).vertices, math.pi / 4)
    o = compute_obb(sq)
    assert o.angle == pytest.approx(4 * math.pi / 16) and o.area == pytest.approx(1.0)
    bar = rotate(rect(20, 0.01).vertices, math.pi / 8)
    o = compute_obb(bar)
    assert o.angle == pytest.approx(2 * math.pi / 16)
    assert min(o.half_extents) == pytest.approx(0.005)
    assert obb_bruteforce(sq)[0] == 4 and obb_bruteforce(bar)[0] == 2


@given(seeds)
def test_obb_is_best_of_candidates(seed):
    v = random_chart(seed).vertices
    j, area = obb_bruteforce(v)
    o = compute_obb(v)
    assert o.area == pytest.approx(area, rel=1e-9)
    assert o.angle == pytest.approx(j * math.pi / 16)


def test_orientation_of_top_left_triangle():
    t = triangle([[0, 0], [8, 0], [0, 8]])
    p = compute_local_aabbs(t.vertices, t.triangles, 2)
    areas = orientation_areas(p)
    assert areas["top"] == 0.0 and areas["bottom"] == 16.0
    assert areas["right"] - areas["left"] == 16.0
    assert choose_orientation(p) == OrientationFlags(False, False)


def test_orientation_of_bottom_right_triangle():
    t = triangle([[8, 0], [8, 8], [0, 8]])
    f = choose_orientation(compute_local_aabbs(t.vertices, t.triangles, 2))
    assert f.reflect_x and f.reflect_y


def test_orientation_of_rectangle():
    r = rect(5, 9)
    p = compute_local_aabbs(r.vertices, r.triangles, 4)
    assert set(orientation_areas(p).values()) == {0.0}
    f = choose_orientation(p)
    assert not f.reflect_x and not f.reflect_y


@given(seeds)
def test_orientation_idempotent(seed):
    c = random_chart(seed)
    proxy = chart_proxy(c)
    again = choose_orientation(proxy.local)
    if again.reflect_x or again.reflect_y:
        a = orientation_areas(proxy.local)
        if again.reflect_y:
            assert a["top"] == pytest.approx(a["bottom"], abs=1e-9)
        else:
            assert a["bottom_left"] == pytest.approx(a["bottom_right"], abs=1e-9)


def test_build_proxies_order():
    cs = chart_set(rect(2, 5), rect(2, 9), rect(2, 7))
    _, order = build_proxies(cs, AtlasSpec(64, 64))
    assert order == [1, 2, 0]
    cs = chart_set(rect(3, 10), rect(6, 10))
    _, order = build_proxies(cs, AtlasSpec(64, 64))
    assert order == [1, 0]


def test_stored_proxy_describes_final_pose():
    t = triangle([[8, 0], [8, 8], [0, 8]])
    proxy = chart_proxy(t, k=2)
    assert proxy.flags.reflect_x and proxy.flags.reflect_y
    final = proxy.final_vertices(t)
    direct = compute_local_aabbs(final, t.triangles, 2)
    for name in ("x_edges", "x_top", "x_bottom", "y_edges", "y_left", "y_right"):
        np.testing.assert_allclose(getattr(proxy.local, name), getattr(direct, name), atol=1e-12)
    # the mirrored right boundary is the original left boundary flipped
    base = proxy.base_local
    np.testing.assert_allclose(proxy.local.y_right, (8 - base.y_left)[::-1])


@given(seeds, st.randoms(use_true_random=False))
def test_proxies_ignore_processing_order(seed, rnd):
    c = random_chart(seed)
    n = len(c.vertices)
    perm = list(range(n))
    rnd.shuffle(perm)
    inv = np.argsort(perm)
    tris = inv[c.triangles]
    tris = tris[rnd.sample(range(len(tris)), len(tris))]
    shuffled = Chart(0, c.vertices[perm], tris)
    a, b = chart_proxy(c), chart_proxy(shuffled)
    for name in ("x_top", "x_bottom", "y_left", "y_right"):
        np.testing.assert_array_equal(getattr(a.local, name), getattr(b.local, name))
    assert a.flags == b.flags and a.obb == b.obb


@given(st.integers(0, 1000), st.integers(1, 40), st.booleans())
def test_batch_pose_matches_single_chart_pose(seed, n, pre):
    cs = generate(seed, n)
    ang = [(-0.3 * i) % 1.0 if pre else 0.0 for i in range(n)]
    bx, by, off, rotated = pose_all(cs.charts, ang)
    for i, c in enumerate(cs):
        v = posed_vertices(c.vertices, ang[i], 90 if rotated[i] else 0)
        np.testing.assert_array_equal(bx[off[i]:off[i + 1]], v[:, 0])
        np.testing.assert_array_equal(by[off[i]:off[i + 1]], v[:, 1])


@given(st.integers(0, 1000), st.integers(2, 30))
def test_batch_equals_one_at_a_time(seed, n):
    cs = generate(seed, n)
    batch = proxy_batch(cs.charts, 10)
    for i, c in enumerate(cs):
        one = proxy_batch([c], 10)
        np.testing.assert_array_equal(batch.x_bottom[i], one.x_bottom[0])
        np.testing.assert_array_equal(batch.y_right[i], one.y_right[0])
        assert batch.reflect_x[i] == one.reflect_x[0]


def test_prerotate():
    axis = chart_set(rect(6, 2))
    out, angles = prerotate(axis)
    assert angles == [0.0]
    np.testing.assert_array_equal(out.charts[0].vertices, axis.charts[0].vertices)
    tilted = Chart(0, rotate(rect(6, 2).vertices, math.pi / 4), QUAD)
    out, angles = prerotate(ChartSet([tilted]))
    assert angles[0] == pytest.approx(-math.pi / 4)
    assert compute_aabb(out.charts[0].vertices).area == pytest.approx(compute_obb(tilted.vertices).area)
