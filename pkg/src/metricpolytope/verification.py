"""Named verification suites with machine-readable pass/fail reports.

Each suite returns ``{"suite", "passed", "checks": [...]}`` where every check
carries its measured values.  Sample sizes default to the reference settings
and can be scaled down through ``samples`` for quick runs.
"""
from __future__ import annotations

import math
from fractions import Fraction
from itertools import product

import numpy as np
from scipy import stats

from .core import PairIndexer
from .discrete import count_discrete, sandwich_check, supersaturation_check
from .estimators import (
    check_removal_bound,
    default_schedule,
    exact_removal_lhs,
    multilevel_volume,
    prob_distance_below,
    tail_table,
)
from .exactvol import box_cell, format_rational, metric_volume, radius, volume_of
from .sampler import ChainConfig, default_delta, hit_and_run, local_lemma_experiment, triple_violation_mc, triple_violation_prob

__all__ = ["SUITES", "run_suite", "octant_masses", "chi_square_octants"]

GOLDEN = {3: Fraction(4), 4: Fraction(136, 15)}


def _check(name, passed, **measured):
    return {"name": name, "passed": bool(passed), **measured}


def _report(suite, checks, **extra):
    return {"suite": suite, "passed": all(c["passed"] for c in checks), "checks": checks, **extra}


def radius_monotone(**_):
    r = {n: radius(n) for n in (2, 3, 4)}
    checks = [
        _check("r2 >= r3", r[2] >= r[3], r2=r[2], r3=r[3], strict=r[2] > r[3]),
        _check("r3 >= r4", r[3] >= r[4], r3=r[3], r4=r[4], strict=r[3] > r[4]),
    ]
    return _report("radius-monotone", checks, radii={str(k): v for k, v in r.items()})


def exact_golden(**_):
    checks = []
    for n, want in GOLDEN.items():
        got = metric_volume(n)
        checks.append(_check(f"Vol(M_{n})", got == want, volume=format_rational(got), expected=format_rational(want)))
    return _report("exact-golden", checks)


def octant_masses() -> dict[tuple[int, ...], Fraction]:
    """Exact probability of each cell ``{d_e < 1}`` / ``{d_e >= 1}`` under the uniform law on 3 points."""
    total = metric_volume(3)
    masses = {}
    for cell in product((0, 1), repeat=3):
        lows = [1 if c else 0 for c in cell]
        highs = [2 if c else 1 for c in cell]
        masses[cell] = volume_of(box_cell(3, lows, highs)) / total
    return masses


def chi_square_octants(samples: np.ndarray) -> dict:
    masses = octant_masses()
    cells = (samples >= 1.0).astype(int)
    codes = cells[:, 0] * 4 + cells[:, 1] * 2 + cells[:, 2]
    observed = np.bincount(codes, minlength=8)
    expected = np.array([float(masses[c]) for c in product((0, 1), repeat=3)]) * len(samples)
    stat = float(np.sum((observed - expected) ** 2 / expected))
    return {
        "statistic": stat,
        "dof": 7,
        "p_value": float(stats.chi2.sf(stat, 7)),
        "observed": observed.tolist(),
        "expected": expected.tolist(),
    }


def sampler_uniformity(samples=10**5, seed=0, workers=None, **_):
    batch = hit_and_run(ChainConfig(3, seed=seed), samples, workers=workers)
    chi = chi_square_octants(batch.samples)
    tail = prob_distance_below(3, 1.0, batch)
    checks = [
        _check("chi-square over octants not rejected at 1e-3", chi["p_value"] >= 1e-3, **chi),
        _check("P(d12 < 1) = 0.375 +- 0.01", abs(tail.value - 0.375) <= 0.01, estimate=tail.value, std_error=tail.std_error),
    ]
    return _report("sampler-uniformity", checks, n_samples=samples, seed=seed)


def tail_batches(ns=(4, 8, 16, 32), samples=2 * 10**4, seed=0, chains=4, workers=None):
    """Full-box batches used by the tail and minimum-distance checks."""
    return {
        n: hit_and_run(ChainConfig(n, seed=seed + n, chains=chains, direction="coordinate"), samples, workers=workers)
        for n in ns
    }


def tail_scaling(samples=2 * 10**4, seed=0, workers=None, batches=None, **_):
    batches = batches or tail_batches(samples=samples, seed=seed, workers=workers)
    rows = tail_table(batches, 1.0)
    checks = [
        _check(f"P(d12<1) at n={a['n']} > n={b['n']}", a["p_hat"] > b["p_hat"], left=a["p_hat"], right=b["p_hat"])
        for a, b in zip(rows, rows[1:])
    ]
    return _report("tail-scaling", checks, table=rows)


def sandwich(**_):
    checks = []
    for n, M in product((2, 3, 4), (2, 4)):
        rep = sandwich_check(n, M, metric_volume(n))
        checks.append(_check(
            f"sandwich n={n} M={M}", rep["lower_holds"] and rep["upper_holds"],
            lower=format_rational(rep["lower"]), count=str(rep["count"]), upper=format_rational(rep["upper"]),
        ))
    for n in range(2, 7):
        c = count_discrete(n, 2)
        want = 2 ** PairIndexer(n).dim
        checks.append(_check(f"|M_{n}^2| = 2^C(n,2)", c == want, count=str(c), expected=str(want)))
    return _report("sandwich", checks)


def supersaturation(samples=10**4, seed=0, **_):
    rep = dict(supersaturation_check(16, 1, samples, seed))
    ok = rep.pop("passed")
    return _report("supersaturation", [_check("M=16 m=1 every trial has >= 1 non-metric triple", ok, **rep)])


def removal_bound(samples=10**5, seed=0, workers=None, **_):
    lhs3 = exact_removal_lhs(3, Fraction(1, 4))
    rep3 = check_removal_bound(3, 0.25, None, (metric_volume(3), metric_volume(2)), exact_lhs=lhs3)
    batch = hit_and_run(ChainConfig(4, seed=seed, chains=4), samples, workers=workers)
    rep4 = check_removal_bound(4, 0.1, batch, (metric_volume(4), metric_volume(3)))
    checks = [
        _check("n=3 alpha=1/4 exact", rep3["holds"], lhs=format_rational(lhs3), rhs=rep3["rhs"]),
        _check("n=4 alpha=0.1 within 3 SE", rep4["holds_within_3se"], lhs=rep4["lhs"],
               lhs_std_error=rep4["lhs_std_error"], rhs=rep4["rhs"]),
    ]
    return _report("removal-bound", checks)


def local_lemma_consistency(samples=10**6, seed=0, workers=None, level_samples=2 * 10**4, estimates=None, **_):
    """Rejection lower bound versus the multilevel estimate, plus the triple formula."""
    checks = []
    for n in (4, 5, 6):
        rej = local_lemma_experiment(n, default_delta(n), samples, seed + n)
        if estimates and n in estimates:
            est = estimates[n]
        else:
            est = multilevel_volume(default_schedule(n, level_samples, seed + 100 + n), direction="coordinate", workers=workers)
        rej_se = math.sqrt((1 - rej.p_hat) / (rej.p_hat * rej.trials)) if rej.accepted else math.inf
        joint = math.sqrt(est.std_error**2 + rej_se**2)
        checks.append(_check(
            f"lower bound <= estimate + 3 SE at n={n}",
            rej.log_volume_lower_bound <= est.value + 3 * joint,
            delta=rej.delta, p_hat=rej.p_hat, log_lower_bound=rej.log_volume_lower_bound,
            log_volume_estimate=est.value, joint_std_error=joint,
        ))
    p, se = triple_violation_mc(0.25, samples, seed)
    exact = triple_violation_prob(0.25)
    checks.append(_check("triple violation at delta=0.25 within 0.002 of 0.032", abs(p - 0.032) <= 0.002,
                         monte_carlo=p, std_error=se, closed_form=exact))
    return _report("local-lemma-consistency", checks)


SUITES = {
    "radius-monotone": radius_monotone,
    "exact-golden": exact_golden,
    "sampler-uniformity": sampler_uniformity,
    "tail-scaling": tail_scaling,
    "sandwich": sandwich,
    "supersaturation": supersaturation,
    "removal-bound": removal_bound,
    "local-lemma-consistency": local_lemma_consistency,
}


def run_suite(name: str, **kwargs) -> dict:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    kwargs = {k: v for k, v in kwargs.items() if v is not None}
    return SUITES[name](**kwargs)
