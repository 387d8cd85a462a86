import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metricpolytope.core import (
    MetricVector,
    PairIndexer,
    box_in_M3_check,
    close_neighbors,
    constraint_table,
    f_quantity,
    is_metric,
    min_distance,
    rank,
    short_pairs,
    triangle_table,
    vectors_from_csv,
    vectors_to_csv,
)


def mv(*vals, n=None):
    return MetricVector.from_values(list(vals), n=n)


@pytest.mark.parametrize("pair,n,want", [((1, 2), 3, 0), ((2, 3), 3, 2), ((1, 4), 5, 2)])
def test_rank_examples(pair, n, want):
    assert rank(*pair, PairIndexer(n)) == want


@pytest.mark.parametrize("n", range(2, 12))
def test_rank_is_lexicographic_bijection(n):
    idx = PairIndexer(n)
    pairs = idx.pairs()
    assert pairs == sorted(pairs)
    assert [idx.rank(i, j) for i, j in pairs] == list(range(idx.dim))
    assert [idx.unrank(k) for k in range(idx.dim)] == pairs
    assert PairIndexer.from_dim(idx.dim) == idx


@pytest.mark.parametrize("bad", [(2, 2), (3, 2), (0, 1), (1, 4)])
def test_rank_rejects_bad_pairs(bad):
    with pytest.raises(ValueError):
        PairIndexer(3).rank(*bad)


def test_index_accepts_either_order():
    idx = PairIndexer(5)
    assert idx.index(4, 2) == idx.rank(2, 4)


def test_too_few_points_or_wrong_length():
    with pytest.raises(ValueError):
        PairIndexer(1)
    with pytest.raises(ValueError):
        PairIndexer.from_dim(4)
    with pytest.raises(ValueError):
        MetricVector(PairIndexer(3), np.ones(4))
    with pytest.raises(ValueError):
        mv(1.0, np.nan, 1.0)


def test_tables_cover_each_triangle_once():
    assert triangle_table(4).shape == (4, 3)
    assert constraint_table(4).shape == (12, 3)
    idx = PairIndexer(4)
    assert triangle_table(4)[0].tolist() == [idx.rank(1, 2), idx.rank(1, 3), idx.rank(2, 3)]
    assert len(constraint_table(2)) == 0


def test_is_metric_examples():
    assert is_metric(mv(1.5, 1.5, 1.5)).inside
    rep = is_metric(mv(2.0, 0.9, 0.9))
    assert not rep.inside
    assert rep.violated_triangles == [(1, 2, 3)]
    assert rep.out_of_box_pairs == []
    assert is_metric(mv(2.0, 1.0, 1.0), tol=0).inside


def test_is_metric_reports_box_violations():
    rep = is_metric(mv(2.5, 1.5, 1.5))
    assert not rep.inside
    assert rep.out_of_box_pairs == [(1, 2)]
    assert rep.violated_triangles == []
    assert not is_metric(mv(-0.1, 1, 1)).inside


def test_is_metric_exact_with_fractions():
    third = Fraction(1, 3)
    d = mv(2 * third, third, third)
    assert is_metric(d, tol=0).inside
    d = mv(2 * third + Fraction(1, 10**30), third, third)
    assert not is_metric(d, tol=0).inside


def test_is_metric_tolerance_absorbs_rounding():
    d = mv(2.0 + 1e-13, 1.0, 1.0)
    assert not is_metric(d, tol=0).inside
    assert is_metric(d).out_of_box_pairs == []
    assert is_metric(mv(1.0 + 2e-13, 0.5, 0.5)).inside


def brute_is_metric(vec, tol=0.0):
    m = vec.matrix()
    n = vec.n
    for i, j, k in itertools.permutations(range(n), 3):
        if m[i, j] > m[i, k] + m[k, j] + tol:
            return False
    return bool(np.all(vec.values >= -tol) and np.all(vec.values <= 2 + tol))


@settings(max_examples=300, deadline=None)
@given(st.integers(3, 6).flatmap(lambda n: st.tuples(st.just(n), st.lists(
    st.sampled_from([0.0, 0.25, 0.5, 1.0, 1.25, 1.5, 2.0]), min_size=n * (n - 1) // 2, max_size=n * (n - 1) // 2))))
def test_is_metric_matches_brute_force(case):
    n, vals = case
    d = mv(*vals, n=n)
    assert is_metric(d, tol=0).inside == brute_is_metric(d)


def test_f_quantity_examples():
    assert f_quantity(mv(0.3, 0.2, 1.9), []) == 1.0
    assert f_quantity(mv(1.5, 1.5, 1.5), [1]) == 3.0
    assert f_quantity(mv(0.5, 1.0, 2.0), [1, 2]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        f_quantity(mv(1, 1, 1), [4])


def test_short_pairs_and_neighbors():
    assert short_pairs(mv(1.5, 1.5, 1.5), 1.0) == set()
    assert short_pairs(mv(0.5, 1.5, 1.5), 1.0) == {(1, 2)}
    assert short_pairs(mv(0.5, 0.9, 1.5), 1.0) == {(1, 2), (1, 3)}
    assert close_neighbors(mv(1.5, 1.5, 1.5), 1, 1) == set()
    assert close_neighbors(mv(0.5, 1.5, 1.5), 1, 1) == {2}
    assert close_neighbors(mv(*[0.5] * 6), 2, 1) == {1, 3, 4}


def test_min_distance_examples():
    assert min_distance(mv(1.5, 1.5, 1.5)) == 1.5
    assert min_distance(mv(0.2, 1.0, 1.1)) == 0.2
    assert min_distance(mv(*[2.0] * 6)) == 2.0


def test_box_in_M3_examples():
    assert box_in_M3_check((1, 1, 1), (2, 2, 2)) == (True, 1.0)
    assert box_in_M3_check((0.5, 0.5, 0.5), (1.5, 1.5, 1.5)) == (False, 1.0)
    ok, vol = box_in_M3_check((1, 1, 1), (2, 2, 1.9))
    assert ok and vol == pytest.approx(0.9)
    with pytest.raises(ValueError):
        box_in_M3_check((1, 1, 1), (0, 2, 2))


def grid_box_inside(a, b, steps=5):
    axes = [np.linspace(lo, hi, steps) for lo, hi in zip(a, b)]
    return all(is_metric(mv(*p), tol=1e-12).inside for p in itertools.product(*axes))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from([0, 0.25, 0.5, 0.75, 1, 1.25, 1.5, 1.75, 2]), min_size=6, max_size=6))
def test_box_in_M3_agrees_with_grid_oracle(ends):
    a = [min(ends[k], ends[k + 3]) for k in range(3)]
    b = [max(ends[k], ends[k + 3]) for k in range(3)]
    ok, vol = box_in_M3_check(a, b)
    assert ok == grid_box_inside(a, b)
    assert vol == pytest.approx(np.prod(np.subtract(b, a)))


def test_unit_cube_box_is_the_largest_contained_box():
    # among boxes on a 1/4 grid inside M3, [1,2]^3 has the largest volume and is the only one attaining it
    grid = [k / 4 for k in range(9)]
    best, winners = 0.0, []
    for lo in itertools.product(grid, repeat=3):
        for hi in itertools.product(grid, repeat=3):
            if any(h <= l for l, h in zip(lo, hi)):
                continue
            ok, vol = box_in_M3_check(lo, hi)
            if not ok:
                continue
            if vol > best + 1e-12:
                best, winners = vol, [(lo, hi)]
            elif abs(vol - best) <= 1e-12:
                winners.append((lo, hi))
    assert best == 1.0
    assert winners == [((1, 1, 1), (2, 2, 2))]


@settings(max_examples=50, deadline=None)
@given(st.integers(3, 7).flatmap(lambda n: st.tuples(
    st.permutations(range(1, n + 1)),
    st.lists(st.floats(0, 2), min_size=n * (n - 1) // 2, max_size=n * (n - 1) // 2),
)))
def test_relabeling_invariance(case):
    perm, vals = case
    d = mv(*vals, n=len(perm))
    p = d.permuted(perm)
    assert is_metric(p).inside == is_metric(d).inside
    assert min_distance(p) == min_distance(d)
    for t in (0.5, 1.0, 1.5):
        assert len(short_pairs(p, t)) == len(short_pairs(d, t))
    assert sorted(p.values) == sorted(d.values)


@pytest.mark.parametrize("n", range(3, 11))
def test_cube_containment(n):
    rng = np.random.default_rng(n)
    dim = n * (n - 1) // 2
    pts = rng.uniform(1, 2, size=(10**4, dim))
    pts[0] = 1.0
    pts[1] = 2.0
    cons = constraint_table(n)
    excess = pts[:, cons[:, 0]] - pts[:, cons[:, 1]] - pts[:, cons[:, 2]]
    assert np.all(excess <= 0)
    for row in pts[:50]:
        assert is_metric(MetricVector(PairIndexer(n), row), tol=0).inside


def test_json_round_trip_float_and_exact():
    d = mv(0.5, 1.25, 2.0)
    assert np.array_equal(MetricVector.from_json(d.to_json()).values, d.values)
    q = mv(Fraction(1, 3), Fraction(2, 3), Fraction(1))
    back = MetricVector.from_json(q.to_json())
    assert list(back.values) == list(q.values)
    assert '"1/3"' in q.to_json()


def test_csv_round_trip():
    rows = np.array([[0.1, 0.2, 0.3], [1 / 3, 1.0, 2.0]])
    text = vectors_to_csv(rows, 3)
    assert text.splitlines()[0] == "d_1_2,d_1_3,d_2_3"
    back = vectors_from_csv(text)
    assert np.array_equal(np.array([v.values for v in back]), rows)
    with pytest.raises(ValueError):
        vectors_from_csv("a,b,c\n1,2,3\n")


def test_matrix_and_getitem():
    d = mv(0.5, 1.0, 1.5)
    m = d.matrix()
    assert m[0, 1] == m[1, 0] == 0.5
    assert m[1, 2] == 1.5
    assert d[3, 2] == 1.5
