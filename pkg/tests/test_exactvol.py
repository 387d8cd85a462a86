import itertools
import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import ConvexHull

from metricpolytope.core import MetricVector, is_metric
from metricpolytope.errors import CapabilityError, DegenerateError, UnboundedError
from metricpolytope.exactvol import (
    RationalHalfspace,
    RationalPolytope,
    axis_halfspace,
    box_cell,
    build_halfspaces,
    clip,
    enumerate_vertices,
    exact_volume,
    format_rational,
    metric_polytope,
    metric_volume,
    radius,
    volume_of,
)

from oracles import brute_vertices, metric_rows

F = Fraction


@pytest.mark.parametrize("n,count", [(2, 2), (3, 9), (4, 24), (5, 50)])
def test_halfspace_counts(n, count):
    assert len(build_halfspaces(n)) == count


def test_halfspace_orientation():
    hs = build_halfspaces(3)
    assert hs[0].normal == (1, -1, -1) and hs[0].offset == 0
    assert hs[3].normal == (-1, 0, 0) and hs[3].offset == 0
    assert hs[4].normal == (1, 0, 0) and hs[4].offset == 2
    with pytest.raises(ValueError):
        build_halfspaces(3, 2, 2)
    with pytest.raises(ValueError):
        RationalHalfspace((0, 0, 0), 1)


def test_segment_and_cube_vertices():
    assert metric_polytope(2).vertices == [(F(0),), (F(2),)]
    cube = metric_polytope(3, 1, 2)
    assert len(cube.vertices) == 8


def test_m3_vertices_match_brute_force():
    verts = set(metric_polytope(3).vertices)
    assert verts == brute_vertices(*metric_rows(3))
    assert (0, 0, 0) in verts and (2, 2, 2) in verts and (2, 2, 0) in verts
    assert (2, 0, 0) not in verts
    assert len(verts) == 5


def test_clipped_m3_vertices_match_brute_force():
    A, b = metric_rows(3)
    A.append([1, 1, 0])
    b.append(F(5, 2))
    poly = clip(metric_polytope(3), RationalHalfspace((1, 1, 0), F(5, 2)))
    assert set(poly.vertices) == brute_vertices(A, b)


@pytest.mark.parametrize("n", [3, 4])
def test_vertices_are_exact_members(n):
    poly = metric_polytope(n)
    for v in poly.vertices:
        assert is_metric(MetricVector.from_values(list(v), n=n), tol=0).inside
        tight = [h.normal for h in poly.halfspaces if h.value(v) == h.offset]
        assert np.linalg.matrix_rank(np.array(tight, dtype=float)) == poly.dim


def test_m4_vertex_count():
    assert len(metric_polytope(4).vertices) == 19


def test_unbounded_and_empty_inputs():
    half_line = RationalPolytope(1, [RationalHalfspace((-1,), 0)])
    with pytest.raises(UnboundedError):
        enumerate_vertices(half_line)
    empty = RationalPolytope(1, [RationalHalfspace((1,), 0), RationalHalfspace((-1,), -1)])
    with pytest.raises(DegenerateError):
        enumerate_vertices(empty)
    flat = RationalPolytope(2, [
        RationalHalfspace((1, 0), 0), RationalHalfspace((-1, 0), 0),
        RationalHalfspace((0, 1), 1), RationalHalfspace((0, -1), 0),
    ])
    with pytest.raises(DegenerateError):
        enumerate_vertices(flat)


@pytest.mark.parametrize("n,want", [(2, F(2)), (3, F(4)), (4, F(136, 15))])
def test_golden_volumes(n, want):
    assert metric_volume(n) == want


def test_m3_exact_volume_report():
    ev = exact_volume(metric_polytope(3))
    rep = ev.report()
    assert rep["volume"] == "4/1"
    assert rep["vertex_count"] == 5
    assert rep["clips"] == []
    assert ev.elapsed_ms < 1000
    assert json.loads(ev.to_json())["volume_float"] == 4.0


def test_volume_bounds_hold_for_exact_values():
    assert metric_volume(4) <= 4 ** 2
    assert all(metric_volume(n) >= 1 for n in (2, 3, 4))


def test_n5_needs_flag():
    with pytest.raises(CapabilityError):
        metric_volume(5)
    with pytest.raises(CapabilityError):
        metric_volume(6, allow_extended=True)


@pytest.mark.parametrize("bound,want", [(2, F(4)), (0, F(0)), (1, F(3, 2))])
def test_clip_examples(bound, want):
    poly = clip(metric_polytope(3), axis_halfspace(3, (1, 2), "<=", bound))
    assert volume_of(poly) == want
    assert poly.degenerate == (want == 0)
    assert "d_1_2 <= " in poly.clips[0]


def slab_oracle(t):
    # integral over a in [0, t] of the area {(b, c) in [0,2]^2 : |b - c| <= a, b + c >= a}
    t = F(t)
    return 2 * t**2 - F(1, 2) * t**3


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 12), st.integers(1, 6))
def test_clip_consistency(num, den):
    t = min(F(num, den), F(2))
    below = volume_of(clip(metric_polytope(3), axis_halfspace(3, (1, 2), "<=", t)))
    above = volume_of(clip(metric_polytope(3), axis_halfspace(3, (1, 2), ">=", t)))
    assert below + above == 4
    assert below == slab_oracle(t)


def test_flipped_halfspace_complements():
    h = axis_halfspace(3, (2, 3), "<=", F(1, 3))
    assert h.flipped() == axis_halfspace(3, (2, 3), ">=", F(1, 3))


def test_clip_of_degenerate_stays_degenerate():
    poly = clip(metric_polytope(3), axis_halfspace(3, (1, 2), "<=", 0))
    again = clip(poly, axis_halfspace(3, (1, 3), "<=", 1))
    assert again.degenerate and volume_of(again) == 0


@pytest.mark.parametrize("seed", range(3))
def test_additivity_over_box_partition(seed):
    rng = np.random.default_rng(seed)
    cuts = []
    for _ in range(3):
        inner = sorted({F(int(k), 8) for k in rng.integers(1, 16, size=3)})
        cuts.append([F(0)] + inner + [F(2)])
    total = F(0)
    cells = 0
    for idx in itertools.product(*(range(len(c) - 1) for c in cuts)):
        lows = [cuts[e][i] for e, i in enumerate(idx)]
        highs = [cuts[e][i + 1] for e, i in enumerate(idx)]
        total += volume_of(box_cell(3, lows, highs))
        cells += 1
    assert cells <= 64
    assert total == 4


def test_n4_partition_by_one_cut():
    lo = volume_of(box_cell(4, [0] * 6, [1] + [2] * 5))
    hi = volume_of(box_cell(4, [1] + [0] * 5, [2] * 6))
    assert lo + hi == F(136, 15)


@pytest.mark.parametrize("n,clips", [
    (3, [((1, 2), "<=", F(3, 4))]),
    (3, [((1, 2), ">=", F(1, 2)), ((2, 3), "<=", F(3, 2))]),
    (4, [((1, 2), "<=", F(1))]),
    (4, [((1, 4), ">=", F(1, 3)), ((2, 3), "<=", F(5, 4))]),
])
def test_volume_matches_convex_hull(n, clips):
    poly = metric_polytope(n)
    for pair, sense, bound in clips:
        poly = clip(poly, axis_halfspace(n, pair, sense, bound))
    pts = np.array(poly.vertices, dtype=float)
    assert float(volume_of(poly)) == pytest.approx(ConvexHull(pts).volume, rel=1e-9)


def test_radius_values_and_monotone():
    assert radius(2) == 2.0
    assert radius(3) == pytest.approx(4 ** (1 / 3), abs=1e-6)
    assert radius(3) == pytest.approx(1.587401, abs=1e-6)
    assert radius(4) == pytest.approx((136 / 15) ** (1 / 6), rel=1e-12)
    # 30-digit mpmath evaluation of (136/15)^(1/6)
    assert radius(4) == pytest.approx(1.44402465453941, abs=1e-12)
    assert radius(2) > radius(3) > radius(4)


def test_format_rational():
    assert format_rational(F(4)) == "4/1"
    assert format_rational(F(136, 15)) == "136/15"
    assert math.isclose(float(F(136, 15)), 9.0666666, rel_tol=1e-6)
