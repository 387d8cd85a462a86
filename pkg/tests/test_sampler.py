import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metricpolytope.core import MetricVector, is_metric, vectors_from_csv
from metricpolytope.errors import InfeasibleStateError
from metricpolytope.estimators import default_schedule, multilevel_volume
from metricpolytope.sampler import (
    ChainConfig,
    MetricConstraints,
    chord,
    default_delta,
    hit_and_run,
    local_lemma_experiment,
    triple_violation_mc,
    triple_violation_prob,
)

from oracles import bisect_chord


def test_chord_axis_direction():
    lo, hi = chord(MetricVector.from_values([1.5, 1.5, 1.5]), np.array([1.0, 0, 0]))
    assert lo == pytest.approx(-1.5)
    assert hi == pytest.approx(0.5)


def test_chord_diagonal_direction():
    u = np.ones(3) / math.sqrt(3)
    lo, hi = chord(np.full(3, 1.5), u)
    assert hi == pytest.approx(0.5 * math.sqrt(3))
    assert lo == pytest.approx(-1.5 * math.sqrt(3))


def test_chord_explicit_halfspaces_agree():
    cons = MetricConstraints(4)
    rng = np.random.default_rng(3)
    x = np.full(6, 1.2) + rng.uniform(-0.1, 0.1, 6)
    u = rng.standard_normal(6)
    assert chord(x, u, cons) == pytest.approx(chord(x, u, cons.as_matrix()))


def test_chord_rejects_bad_inputs():
    with pytest.raises(InfeasibleStateError):
        chord(np.array([2.0, 0.5, 0.5]), np.array([1.0, 0, 0]))
    with pytest.raises(ValueError):
        chord(np.full(3, 1.5), np.zeros(3))


@settings(max_examples=60, deadline=None)
@given(
    st.integers(3, 6),
    st.integers(0, 2**32 - 1),
    st.sampled_from([(0.0, 2.0), (0.5, 2.0), (1.0, 2.0), (0.25, 1.75)]),
)
def test_chord_matches_bisection(n, seed, box):
    cons = MetricConstraints(n, *box)
    dim = cons.dim
    rng = np.random.default_rng(seed)
    # start at a point inside by shrinking a random point toward the box center
    x = np.full(dim, 0.5 * sum(box)) if box != (0.0, 2.0) else np.full(dim, 1.5)
    y = rng.uniform(*box, dim)
    for s in (1.0, 0.5, 0.25, 0.1, 0.0):
        z = x + s * (y - x)
        if cons.contains(z, tol=0):
            break
    u = rng.standard_normal(dim)
    lo, hi = chord(z, u, cons)

    def inside(p):
        return cons.contains(p, tol=0)

    assert hi == pytest.approx(bisect_chord(z, u, inside), abs=1e-9)
    assert -lo == pytest.approx(bisect_chord(z, -u, inside), abs=1e-9)
    for t in (lo, hi):
        if box == (0.0, 2.0):
            assert is_metric(MetricVector.from_values(z + t * u, n=n), 1e-9).inside
        assert cons.contains(z + t * u, tol=1e-9)


def test_config_defaults_and_validation():
    cfg = ChainConfig(4)
    assert cfg.burn_in == 300 and cfg.thinning == 30
    for bad in (dict(box_low=2.0, box_high=1.0), dict(thinning=0), dict(chains=0),
                dict(direction="ball"), dict(seed=-1), dict(seed=2**64)):
        with pytest.raises(ValueError):
            ChainConfig(3, **bad)


@pytest.mark.parametrize("direction", ["sphere", "coordinate"])
def test_same_seed_same_samples(direction):
    cfg = ChainConfig(4, seed=11, chains=3, direction=direction)
    a = hit_and_run(cfg, 500)
    b = hit_and_run(cfg, 500, workers=3)
    assert np.array_equal(a.samples, b.samples)
    assert np.array_equal(a.chain_ids, b.chain_ids)
    c = hit_and_run(ChainConfig(4, seed=12, chains=3, direction=direction), 500)
    assert not np.array_equal(a.samples, c.samples)


@pytest.mark.parametrize("direction", ["sphere", "coordinate"])
def test_samples_stay_inside(direction):
    batch = hit_and_run(ChainConfig(6, seed=1, chains=2, direction=direction), 2000)
    cons = MetricConstraints(6)
    assert batch.samples.shape == (2000, 15)
    assert all(cons.contains(x, tol=1e-9) for x in batch.samples)
    assert batch.chain_diagnostics["chain_lengths"] == [1000, 1000]


def test_clipped_box_samples_respect_box():
    batch = hit_and_run(ChainConfig(4, box_low=0.6, seed=2), 1000)
    assert batch.samples.min() >= 0.6 - 1e-12


@pytest.mark.parametrize("n", [3, 5])
def test_unit_cube_box_is_uniform(n):
    batch = hit_and_run(ChainConfig(n, box_low=1.0, seed=5, chains=4), 8000)
    means = batch.samples.mean(axis=0)
    se = math.sqrt(1 / 12 / len(batch))
    # thinned chain on a cube; allow for residual autocorrelation
    assert np.all(np.abs(means - 1.5) <= 3 * se * 2)
    assert batch.samples.min() >= 1.0 and batch.samples.max() <= 2.0


def test_segment_is_uniform():
    batch = hit_and_run(ChainConfig(2, seed=3), 20000)
    assert batch.samples.mean() == pytest.approx(1.0, abs=0.03)
    assert np.mean(batch.samples < 0.5) == pytest.approx(0.25, abs=0.02)


@pytest.mark.parametrize("direction", ["sphere", "coordinate"])
def test_n3_marginal_matches_exact_slab(direction):
    # exact P(d12 < 1) = (3/2) / 4
    batch = hit_and_run(ChainConfig(3, seed=21, chains=4, direction=direction), 40000)
    assert np.mean(batch.samples[:, 0] < 1.0) == pytest.approx(0.375, abs=0.015)


def test_csv_and_sidecar():
    batch = hit_and_run(ChainConfig(3, seed=4), 10)
    back = vectors_from_csv(batch.to_csv())
    assert np.array_equal(np.array([v.values for v in back]), batch.samples)
    side = json.loads(json.dumps(batch.sidecar()))
    assert side["config"]["seed"] == 4 and side["config"]["burn_in"] == 150
    assert len(batch.vectors()) == 10
    assert [len(c) for c in batch.chains()] == [10]


def test_zero_count_batch():
    assert len(hit_and_run(ChainConfig(3), 0)) == 0
    with pytest.raises(ValueError):
        hit_and_run(ChainConfig(3), -1)


@pytest.mark.parametrize("delta,want", [(0.0, 0.0), (0.25, 0.032), (1.0, 0.5)])
def test_triple_violation_closed_form(delta, want):
    assert triple_violation_prob(delta) == pytest.approx(want, abs=1e-15)


@pytest.mark.parametrize("delta", [0.25, 1.0])
def test_triple_violation_monte_carlo(delta):
    p, se = triple_violation_mc(delta, 400000, seed=9)
    assert abs(p - triple_violation_prob(delta)) <= 4 * se


def test_triple_violation_rejects_bad_delta():
    with pytest.raises(ValueError):
        triple_violation_prob(1.5)


def test_local_lemma_single_triangle():
    res = local_lemma_experiment(3, 0.5, 10**5, seed=1)
    assert res.p_hat == pytest.approx(1 - 0.5 / 3.375, abs=0.004)
    assert 0 <= res.accepted <= res.trials
    assert res.p_hat == res.accepted / res.trials
    assert res.log_volume_lower_bound == pytest.approx(3 * math.log(1.5) + math.log(res.p_hat))


def test_local_lemma_tiny_delta_accepts_everything():
    res = local_lemma_experiment(7, 1e-9, 5000, seed=2)
    assert res.p_hat == 1.0


def test_local_lemma_validation_and_json():
    with pytest.raises(ValueError):
        local_lemma_experiment(4, 1.0, 10)
    with pytest.raises(ValueError):
        local_lemma_experiment(4, 0.2, 0)
    res = local_lemma_experiment(4, 0.2, 1000, seed=3)
    obj = json.loads(res.to_json())
    assert obj["n"] == 4 and obj["trials"] == 1000
    assert default_delta(4) == 0.25


def test_local_lemma_bound_consistent_at_n9():
    res = local_lemma_experiment(9, 1 / 6, 10**6, seed=5)
    assert res.p_hat > 0 and res.bound_defined
    est = multilevel_volume(default_schedule(9, 1500, seed=6), direction="coordinate", chains=2)
    rej_se = math.sqrt((1 - res.p_hat) / (res.p_hat * res.trials))
    assert res.log_volume_lower_bound <= est.value + 3 * math.hypot(est.std_error, rej_se)
    assert est.value >= 0 - 3 * est.std_error
