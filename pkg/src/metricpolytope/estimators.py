"""Monte Carlo estimates over the metric polytope.

Volume comes from a multilevel ratio estimator anchored at the cube
``[1, 2]^dim`` (volume exactly 1, and inside the polytope).  Level ``t``
samples the polytope clipped to ``[a_{t+1}, 2]^dim`` and records the fraction
of samples already inside ``[a_t, 2]^dim``; the log volume is minus the sum
of the log fractions.

Chain output is autocorrelated, so standard errors use batch means computed
within each chain.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy import special, stats

from .core import PairIndexer
from .errors import RefineScheduleError
from .exactvol import axis_halfspace, clip, metric_polytope, volume_of
from .sampler import ChainConfig, SampleBatch, hit_and_run

__all__ = [
    "EstimateCI",
    "LevelSchedule",
    "batch_means_se",
    "default_schedule",
    "refine_schedule",
    "multilevel_volume",
    "prob_distance_below",
    "prob_pair_below",
    "min_distance_cdf",
    "entropy_1d",
    "check_removal_bound",
    "exact_removal_lhs",
    "log_volume_bounds",
    "tail_table",
    "rows_to_csv",
]

DEFAULT_CONFIDENCE = 0.99
# the minimum-distance exponent the proof achieves
MIN_DISTANCE_EXPONENT = 1.0 / 30.0


@dataclass
class EstimateCI:
    value: float
    std_error: float
    ci_low: float
    ci_high: float
    confidence: float
    n_samples: int
    details: dict = field(default_factory=dict, repr=False)

    @classmethod
    def normal(cls, value, std_error, n_samples, confidence=DEFAULT_CONFIDENCE, **details):
        if std_error < 0:
            raise ValueError("standard error must be nonnegative")
        z = stats.norm.ppf(0.5 + confidence / 2)
        return cls(float(value), float(std_error), float(value - z * std_error),
                   float(value + z * std_error), confidence, int(n_samples), details)

    def as_dict(self) -> dict:
        return {
            "estimate": self.value,
            "std_error": self.std_error,
            "ci": [self.ci_low, self.ci_high],
            "confidence": self.confidence,
            "n_samples": self.n_samples,
        }


def batch_means_se(series: np.ndarray, chain_ids: np.ndarray | None = None) -> float:
    """Standard error of the mean of ``series`` by nonoverlapping batch means.

    Batches never straddle two chains; each chain of length ``L`` is cut into
    batches of ``floor(sqrt(L))``.  Falls back to the iid formula when there
    are too few batches.
    """
    series = np.asarray(series, dtype=float)
    total = len(series)
    if total < 2:
        return 0.0
    if chain_ids is None:
        chain_ids = np.zeros(total, dtype=np.int64)
    means = []
    sizes = []
    for c in np.unique(chain_ids):
        s = series[chain_ids == c]
        b = max(1, math.isqrt(len(s)))
        k = len(s) // b
        if k == 0:
            continue
        means.append(s[: k * b].reshape(k, b).mean(axis=1))
        sizes.append(np.full(k, b))
    means = np.concatenate(means)
    sizes = np.concatenate(sizes)
    if len(means) < 2:
        return float(series.std(ddof=1) / math.sqrt(total))
    grand = series.mean()
    # batch variance scaled to one observation, then to the mean of all
    var_one = float(np.sum(sizes * (means - grand) ** 2) / (len(means) - 1))
    return math.sqrt(var_one / total)


def _mean_ci(series, chain_ids, confidence, **details) -> EstimateCI:
    series = np.asarray(series, dtype=float)
    value = math.fsum(series) / len(series)
    return EstimateCI.normal(value, batch_means_se(series, chain_ids), len(series), confidence, **details)


# -- multilevel volume ------------------------------------------------------


@dataclass
class LevelSchedule:
    n: int
    thresholds: tuple[float, ...]
    samples_per_level: int = 10**5
    seed: int = 0

    def __post_init__(self):
        th = tuple(float(a) for a in self.thresholds)
        if len(th) < 2 or th[0] != 1.0 or th[-1] != 0.0:
            raise ValueError("thresholds must run from exactly 1 down to exactly 0")
        if any(b >= a for a, b in zip(th, th[1:])):
            raise ValueError("thresholds must be strictly decreasing")
        if self.samples_per_level < 2:
            raise ValueError("need at least two samples per level")
        self.thresholds = th

    @property
    def levels(self) -> int:
        return len(self.thresholds) - 1


def default_schedule(n: int, samples_per_level: int = 10**5, seed: int = 0, levels: int | None = None) -> LevelSchedule:
    """Equally spaced thresholds ``1 - t/T``, ``T = dim`` unless given."""
    T = levels if levels is not None else PairIndexer(n).dim
    th = [1.0 - t / T for t in range(T)] + [0.0]
    return LevelSchedule(n, tuple(th), samples_per_level, seed)


def refine_schedule(schedule: LevelSchedule, level: int) -> LevelSchedule:
    """Halve the step of one level by inserting its midpoint."""
    th = list(schedule.thresholds)
    th.insert(level + 1, 0.5 * (th[level] + th[level + 1]))
    return replace(schedule, thresholds=tuple(th))


def _derived_seed(seed: int, *path: int) -> int:
    words = np.random.SeedSequence([int(seed), *path]).generate_state(2, dtype=np.uint32)
    return int(words[0]) | (int(words[1]) << 32)


def multilevel_volume(
    schedule: LevelSchedule,
    chains: int = 4,
    direction: str = "sphere",
    burn_in: int | None = None,
    thinning: int | None = None,
    workers: int | None = None,
    confidence: float = DEFAULT_CONFIDENCE,
    adaptive: bool = False,
) -> EstimateCI:
    """Estimate ``log Vol`` of the metric polytope on ``schedule.n`` points.

    The returned estimate's ``details["levels"]`` lists each level's box,
    accepted fraction and its standard error.
    """
    while True:
        try:
            return _multilevel(schedule, chains, direction, burn_in, thinning, workers, confidence)
        except RefineScheduleError as err:
            if not adaptive:
                raise
            schedule = refine_schedule(schedule, err.level)


def _multilevel(schedule, chains, direction, burn_in, thinning, workers, confidence):
    th = schedule.thresholds
    log_vol_terms = []
    var_terms = []
    levels = []
    for t in range(schedule.levels):
        upper, lower = th[t], th[t + 1]
        cfg = ChainConfig(
            schedule.n, box_low=lower, box_high=2.0, burn_in=burn_in, thinning=thinning,
            seed=_derived_seed(schedule.seed, t), chains=chains, direction=direction,
        )
        batch = hit_and_run(cfg, schedule.samples_per_level, workers=workers)
        hit = np.all(batch.samples >= upper, axis=1).astype(float)
        frac = math.fsum(hit) / len(hit)
        if frac == 0.0:
            raise RefineScheduleError(
                f"level {t} (box [{lower:g}, 2], target [{upper:g}, 2]) accepted no samples; refine the schedule",
                level=t,
            )
        se = batch_means_se(hit, batch.chain_ids)
        log_vol_terms.append(-math.log(frac))
        var_terms.append((se / frac) ** 2)
        levels.append({"box_low": lower, "target_low": upper, "fraction": frac, "std_error": se})
    value = math.fsum(log_vol_terms)
    se = math.sqrt(math.fsum(var_terms))
    return EstimateCI.normal(
        value, se, schedule.levels * schedule.samples_per_level, confidence,
        levels=levels, thresholds=list(th), seed=schedule.seed,
    )


def log_volume_bounds(n: int) -> tuple[float, float]:
    """Elementary bounds on ``log Vol``: the unit cube inside, and ``4^(dim/3)``."""
    dim = PairIndexer(n).dim
    upper = dim * math.log(2.0) if n < 3 else dim / 3.0 * math.log(4.0)
    return 0.0, upper


# -- distance statistics ----------------------------------------------------


def _require_full_box(batch: SampleBatch):
    if len(batch) == 0:
        raise ValueError("empty sample batch")
    cfg = batch.config
    if cfg.box_low != 0.0 or cfg.box_high != 2.0:
        raise ValueError("batch must be drawn on the full box [0, 2]")


def prob_distance_below(n: int, t: float, batch: SampleBatch, confidence: float = DEFAULT_CONFIDENCE) -> EstimateCI:
    """``P(d_12 < t)`` pooled over all pairs, which share one distribution by symmetry."""
    _require_full_box(batch)
    if batch.n != n:
        raise ValueError(f"batch has n={batch.n}, expected {n}")
    per_sample = (batch.samples < t).mean(axis=1)
    return _mean_ci(per_sample, batch.chain_ids, confidence)


def prob_pair_below(batch: SampleBatch, pair: tuple[int, int], t: float, confidence: float = DEFAULT_CONFIDENCE) -> EstimateCI:
    """Single-pair version of :func:`prob_distance_below`."""
    _require_full_box(batch)
    k = PairIndexer(batch.n).index(*pair)
    return _mean_ci(batch.samples[:, k] < t, batch.chain_ids, confidence)


def min_distance_cdf(n: int, thresholds: Sequence[float], batch: SampleBatch, confidence: float = DEFAULT_CONFIDENCE) -> list[EstimateCI]:
    _require_full_box(batch)
    if batch.n != n:
        raise ValueError(f"batch has n={batch.n}, expected {n}")
    mins = batch.samples.min(axis=1)
    return [_mean_ci(mins <= th, batch.chain_ids, confidence, threshold=float(th)) for th in thresholds]


def tail_table(batches: dict[int, SampleBatch], t: float = 1.0) -> list[dict]:
    """Rows ``n, p_hat, std_error, sqrt(n) * p_hat`` for a sweep over ``n``."""
    rows = []
    for n in sorted(batches):
        est = prob_distance_below(n, t, batches[n])
        rows.append({
            "n": n,
            "threshold": t,
            "p_hat": est.value,
            "std_error": est.std_error,
            "sqrt_n_p_hat": math.sqrt(n) * est.value,
            "n_samples": est.n_samples,
        })
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


# -- entropy ----------------------------------------------------------------


def _spacing_entropy(x: np.ndarray) -> float:
    """m-spacing entropy with ``m = floor(sqrt(N))``, corrected to be unbiased on uniforms.

    Each term is ``log(N / (2m) * (X_(i+m) - X_(i-m)))`` with indices clamped
    to ``[1, N]``; subtracting the expectation of the same expression for
    uniform order statistics (a digamma sum) removes the boundary and
    small-window bias.
    """
    x = np.sort(np.asarray(x, dtype=float))
    N = len(x)
    m = math.isqrt(N)
    i = np.arange(N)
    upper = np.minimum(i + m, N - 1)
    lower = np.maximum(i - m, 0)
    gaps = x[upper] - x[lower]
    if np.any(gaps <= 0):
        raise ValueError("samples have ties within a spacing window")
    raw = np.log(N / (2 * m) * gaps)
    width = upper - lower  # spacing of uniform order stats ~ Beta(width, N + 1 - width)
    bias = np.log(N / (2 * m)) + special.digamma(width) - special.digamma(N + 1)
    return math.fsum(raw - bias) / N


def entropy_1d(samples: Sequence[float], groups: int = 10, confidence: float = DEFAULT_CONFIDENCE) -> EstimateCI:
    """Differential entropy (nats) of a one-dimensional sample.

    The standard error comes from ``groups`` interleaved subsamples, each
    estimated separately.
    """
    x = np.asarray(samples, dtype=float).ravel()
    N = len(x)
    if N < 100:
        raise ValueError("need at least 100 samples")
    value = _spacing_entropy(x)
    k = groups if N // groups >= 100 else max(2, N // 100)
    subs = [_spacing_entropy(x[g::k]) for g in range(k)]
    se = float(np.std(subs, ddof=1) / math.sqrt(k))
    return EstimateCI.normal(value, se, N, confidence, window=math.isqrt(N))


# -- removal bound ----------------------------------------------------------


def exact_removal_lhs(n: int, alpha) -> Fraction:
    """Exact volume of ``{d : min d_ij <= alpha}``, by inclusion-exclusion over clips."""
    alpha = Fraction(alpha)
    base = metric_polytope(n)
    pairs = PairIndexer(n).pairs()
    total = Fraction(0)
    for size in range(1, len(pairs) + 1):
        sign = 1 if size % 2 else -1
        for subset in combinations(pairs, size):
            poly = base
            for p in subset:
                poly = clip(poly, axis_halfspace(n, p, "<=", alpha))
                if poly.degenerate:
                    break
            total += sign * volume_of(poly)
    return total


def check_removal_bound(n: int, alpha: float, batch: SampleBatch | None, vols: tuple, exact_lhs=None) -> dict:
    """Compare ``Vol{min d <= alpha}`` with ``C(n,2) (2 alpha)^(n-2) Vol(M_{n-1})``.

    ``vols`` is ``(Vol(M_n), Vol(M_{n-1}))``.  The left side is
    ``P(min <= alpha) * Vol(M_n)`` estimated from ``batch`` unless
    ``exact_lhs`` is supplied.
    """
    if not 0 < alpha <= 0.5:
        raise ValueError("alpha must lie in (0, 1/2]")
    vol_n, vol_prev = (float(v) for v in vols)
    dim = PairIndexer(n).dim
    rhs = dim * (2 * float(alpha)) ** (n - 2) * vol_prev
    if exact_lhs is not None:
        lhs = float(exact_lhs)
        return {"n": n, "alpha": float(alpha), "lhs": lhs, "lhs_std_error": 0.0, "rhs": rhs,
                "exact": True, "holds": bool(Fraction(exact_lhs) <= Fraction(rhs))}
    if batch is None:
        raise ValueError("need a sample batch or an exact left side")
    (p,) = min_distance_cdf(n, [alpha], batch)
    lhs = p.value * vol_n
    lhs_se = p.std_error * vol_n
    half = 0.5 * (p.ci_high - p.ci_low) * vol_n
    rel = half / lhs if lhs > 0 else 0.0
    return {
        "n": n, "alpha": float(alpha), "lhs": lhs, "lhs_std_error": lhs_se, "rhs": rhs, "exact": False,
        "holds": bool(lhs <= rhs * (1 + 3 * rel)),
        "holds_within_3se": bool(lhs - 3 * lhs_se <= rhs),
    }
