"""Uniform sampling from the metric polytope.

Two samplers:

* hit-and-run over the triangle inequalities, optionally clipped to a box
  ``[box_low, box_high]`` per coordinate;
* the product-measure rejection experiment: iid coordinates uniform on
  ``[1 - delta, 2]``, accepted when they form a metric.

Each chain draws from its own ``PCG64`` stream seeded by ``(seed, chain)``.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from .core import DIAMETER, MetricVector, PairIndexer, constraint_table, vectors_to_csv
from .errors import DegenerateError, InfeasibleStateError

__all__ = [
    "ChainConfig",
    "SampleBatch",
    "RejectionResult",
    "MetricConstraints",
    "chain_rng",
    "chord",
    "chord_halfspaces",
    "hit_and_run",
    "triple_violation_prob",
    "triple_violation_mc",
    "local_lemma_experiment",
    "default_delta",
]

DIRECTIONS = ("sphere", "coordinate")
# cap on pre-drawn random numbers per block
_BLOCK_FLOATS = 1 << 21


def chain_rng(seed: int, chain: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(chain)])))


@dataclass(frozen=True)
class MetricConstraints:
    """Triangle inequalities on ``n`` points plus the box ``[low, high]^dim``."""

    n: int
    low: float = 0.0
    high: float = float(DIAMETER)

    @property
    def dim(self) -> int:
        return PairIndexer(self.n).dim

    @property
    def table(self) -> np.ndarray:
        return constraint_table(self.n)

    def as_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """Dense ``(A, b)`` with ``A x <= b``: triangle rows, then box rows."""
        dim = self.dim
        cons = self.table
        rows = np.zeros((len(cons) + 2 * dim, dim))
        r = np.arange(len(cons))
        rows[r, cons[:, 0]] = 1.0
        rows[r, cons[:, 1]] -= 1.0
        rows[r, cons[:, 2]] -= 1.0
        eye = np.eye(dim)
        rows[len(cons):len(cons) + dim] = -eye
        rows[len(cons) + dim:] = eye
        b = np.concatenate([np.zeros(len(cons)), np.full(dim, -self.low), np.full(dim, self.high)])
        return rows, b

    def strictly_inside(self, x: np.ndarray) -> bool:
        cons = self.table
        if np.any(x <= self.low) or np.any(x >= self.high):
            return False
        if len(cons) and np.any(x[cons[:, 0]] >= x[cons[:, 1]] + x[cons[:, 2]]):
            return False
        return True

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        cons = self.table
        if np.any(x < self.low - tol) or np.any(x > self.high + tol):
            return False
        return not (len(cons) and np.any(x[cons[:, 0]] > x[cons[:, 1]] + x[cons[:, 2]] + tol))


def chord_halfspaces(x: np.ndarray, u: np.ndarray, A: np.ndarray, b: np.ndarray, tol: float = 1e-12):
    """Largest interval ``[t_lo, t_hi]`` with ``A (x + t u) <= b``."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if not np.any(u):
        raise ValueError("direction must be nonzero")
    slack = b - A @ x
    if np.any(slack < -tol):
        raise InfeasibleStateError("point lies outside the constraint set")
    slack = np.maximum(slack, 0.0)
    au = A @ u
    pos = au > 0
    neg = au < 0
    t_hi = np.min(slack[pos] / au[pos]) if pos.any() else np.inf
    t_lo = np.max(slack[neg] / au[neg]) if neg.any() else -np.inf
    return float(t_lo), float(t_hi)


def chord(d: MetricVector | np.ndarray, u: np.ndarray, halfspaces: MetricConstraints | tuple | None = None):
    """Feasible segment of the line ``d + t u``.

    ``halfspaces`` is either a :class:`MetricConstraints` (default: the full
    box ``[0, 2]``) or an explicit ``(A, b)`` pair.
    """
    x = d.values.astype(float) if isinstance(d, MetricVector) else np.asarray(d, dtype=float)
    if halfspaces is None:
        halfspaces = MetricConstraints(PairIndexer.from_dim(len(x)).n)
    if isinstance(halfspaces, MetricConstraints):
        if not halfspaces.contains(x, tol=1e-12):
            raise InfeasibleStateError("point lies outside the constraint set")
        u = np.asarray(u, dtype=float)
        if not np.any(u):
            raise ValueError("direction must be nonzero")
        return _kernels.sphere_chord(x, u, halfspaces.table, float(halfspaces.low), float(halfspaces.high))
    A, b = halfspaces
    return chord_halfspaces(x, u, np.asarray(A, dtype=float), np.asarray(b, dtype=float))


@dataclass
class ChainConfig:
    """Hit-and-run settings; ``burn_in`` and ``thinning`` default to 50 and 5 times dim."""

    n: int
    box_low: float = 0.0
    box_high: float = float(DIAMETER)
    burn_in: int | None = None
    thinning: int | None = None
    seed: int = 0
    chains: int = 1
    direction: str = "sphere"

    def __post_init__(self):
        dim = PairIndexer(self.n).dim
        if self.burn_in is None:
            self.burn_in = 50 * dim
        if self.thinning is None:
            self.thinning = 5 * dim
        if not self.box_low < self.box_high:
            raise ValueError("box_low must be below box_high")
        if self.burn_in < 0 or self.thinning < 1 or self.chains < 1:
            raise ValueError("need burn_in >= 0, thinning >= 1, chains >= 1")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def dim(self) -> int:
        return PairIndexer(self.n).dim


@dataclass
class SampleBatch:
    config: ChainConfig
    samples: np.ndarray
    chain_ids: np.ndarray
    chain_diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.samples)

    @property
    def n(self) -> int:
        return self.config.n

    def vectors(self) -> list[MetricVector]:
        idx = PairIndexer(self.config.n)
        return [MetricVector(idx, row.copy()) for row in self.samples]

    def chains(self):
        """Per-chain views of the samples, in chain order."""
        return [self.samples[self.chain_ids == c] for c in range(self.config.chains)]

    def to_csv(self) -> str:
        return vectors_to_csv(self.samples, self.config.n)

    def sidecar(self) -> dict:
        return {"config": asdict(self.config), "diagnostics": self.chain_diagnostics}


def _start_point(cons: MetricConstraints) -> np.ndarray:
    dim = cons.dim
    center = 0.5 * (cons.low + cons.high)
    candidates = [center, max(cons.low, 1.5), min(max(center, 1.0), cons.high)]
    for c in candidates:
        x = np.full(dim, float(c))
        if cons.strictly_inside(x):
            return x
    raise DegenerateError(f"no interior start point for box [{cons.low}, {cons.high}]")


def _run_chain(config: ChainConfig, chain: int, count: int, x0: np.ndarray):
    cons = MetricConstraints(config.n, config.box_low, config.box_high)
    dim = cons.dim
    rng = chain_rng(config.seed, chain)
    x = x0.copy()
    out = np.empty((count, dim))
    total = config.burn_in + count * config.thinning
    per_step = dim if config.direction == "sphere" else 2
    block = max(256, _BLOCK_FLOATS // per_step)
    low, high = float(config.box_low), float(config.box_high)
    if config.direction == "coordinate":
        idx = PairIndexer(config.n)
        pairs = np.array(idx.pairs(), dtype=np.int64) - 1
        index = np.zeros((config.n, config.n), dtype=np.int64)
        index[pairs[:, 0], pairs[:, 1]] = np.arange(dim)
        index[pairs[:, 1], pairs[:, 0]] = np.arange(dim)
    pos = 0
    flat = 0
    step = 0
    while step < total:
        m = min(block, total - step)
        if config.direction == "sphere":
            normals = rng.standard_normal((m, dim))
            uniforms = rng.random(m)
            pos, f = _kernels.run_sphere(
                x, normals, uniforms, cons.table, low, high, step, config.burn_in, config.thinning, out, pos
            )
        else:
            coords = rng.integers(0, dim, size=m)
            uniforms = rng.random(m)
            pos, f = _kernels.run_coordinate(
                x, coords, uniforms, pairs[:, 0].copy(), pairs[:, 1].copy(), index,
                low, high, step, config.burn_in, config.thinning, out, pos,
            )
        flat += f
        step += m
    return out[:pos], {"steps": int(total), "zero_length_chords": int(flat)}


def hit_and_run(config: ChainConfig, count: int, workers: int | None = None) -> SampleBatch:
    """Draw ``count`` thinned samples, split as evenly as possible over the chains.

    Output depends only on ``config`` and ``count``, not on ``workers``.
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    cons = MetricConstraints(config.n, config.box_low, config.box_high)
    x0 = _start_point(cons)
    k = config.chains
    sizes = [count // k + (1 if c < count % k else 0) for c in range(k)]
    jobs = [(config, c, sizes[c], x0) for c in range(k)]
    if workers is None or workers <= 1 or k == 1:
        results = [_run_chain(*job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda job: _run_chain(*job), jobs))
    samples = np.concatenate([r[0] for r in results]) if results else np.empty((0, cons.dim))
    chain_ids = np.concatenate([np.full(len(r[0]), c, dtype=np.int64) for c, r in enumerate(results)])
    diag = {
        "chain_lengths": sizes,
        "steps_per_chain": [r[1]["steps"] for r in results],
        "zero_length_chords": sum(r[1]["zero_length_chords"] for r in results),
        "accepted_moves_fraction": 1.0,
    }
    if len(samples):
        diag["coordinate_mean"] = samples.mean(axis=0).tolist()
        diag["coordinate_variance"] = samples.var(axis=0).tolist()
    return SampleBatch(config, samples, chain_ids, diag)


# -- product-measure rejection ----------------------------------------------


def default_delta(n: int) -> float:
    return 1.0 / (2.0 * math.sqrt(n))


def triple_violation_prob(delta: float) -> float:
    """Chance that three iid uniforms on ``[1 - delta, 2]`` fail the triangle inequality."""
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    return 4.0 * delta**3 / (1.0 + delta) ** 3


def triple_violation_mc(delta: float, trials: int, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo estimate (and its standard error) of :func:`triple_violation_prob`."""
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    rng = chain_rng(seed)
    bad = 0
    done = 0
    while done < trials:
        m = min(trials - done, 1 << 20)
        x = rng.uniform(1.0 - delta, 2.0, size=(m, 3))
        srt = np.sort(x, axis=1)
        bad += int(np.count_nonzero(srt[:, 2] > srt[:, 0] + srt[:, 1]))
        done += m
    p = bad / trials
    return p, math.sqrt(p * (1 - p) / trials)


@dataclass
class RejectionResult:
    n: int
    delta: float
    trials: int
    accepted: int
    p_hat: float
    log_volume_lower_bound: float
    bound_defined: bool = True

    def to_json(self) -> str:
        obj = asdict(self)
        obj["p_hat"] = float(f"{self.p_hat:.6g}")
        if not self.bound_defined:
            obj["log_volume_lower_bound"] = "-inf"
        return json.dumps(obj)


def local_lemma_experiment(n: int, delta: float | None = None, trials: int = 10**5, seed: int = 0) -> RejectionResult:
    """Fraction of iid ``U[1 - delta, 2]`` distance vectors that are metrics.

    Scaled by the box volume ``(1 + delta)^dim`` this lower-bounds the volume
    of the metric polytope; ``log_volume_lower_bound`` is that bound's log.
    """
    if delta is None:
        delta = default_delta(n)
    if trials < 1:
        raise ValueError("trials must be positive")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    dim = PairIndexer(n).dim
    cons = constraint_table(n)
    rng = chain_rng(seed)
    chunk = max(1, _BLOCK_FLOATS // dim)
    accepted = 0
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        x = rng.uniform(1.0 - delta, 2.0, size=(m, dim))
        accepted += int(_kernels.count_inside(x, cons)) if len(cons) else m
        done += m
    p_hat = accepted / trials
    if accepted:
        bound = dim * math.log1p(delta) + math.log(p_hat)
        return RejectionResult(n, delta, trials, accepted, p_hat, bound, True)
    return RejectionResult(n, delta, trials, accepted, p_hat, -math.inf, False)
