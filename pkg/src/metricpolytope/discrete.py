"""Integer-valued metric spaces with distances in ``{1, ..., M}``.

Counting is by backtracking: points are added one at a time and the distances
from the new point ``k`` to the earlier points ``1..k-1`` are assigned in
order.  Once ``d_kj`` is fixed, every later edge ``d_kj'`` is confined to
``[|d_kj - d_jj'|, d_kj + d_jj']``, so each triangle is enforced exactly
when its last edge is placed.  The final edge is counted by the width of its
interval instead of being branched on.
"""
from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import MetricVector, PairIndexer, constraint_table, triangle_table
from .errors import BudgetExceeded, CapacityError
from .sampler import chain_rng

__all__ = [
    "DiscreteSpace",
    "HypergraphStats",
    "count_discrete",
    "count_discrete_report",
    "enumerate_discrete",
    "ceiling_map",
    "sandwich_check",
    "non_metric",
    "non_metric_triples",
    "hypergraph_stats",
    "vertex_degrees",
    "codegree",
    "supersaturation_count",
    "supersaturation_check",
    "even_ratio",
]


@dataclass(frozen=True)
class DiscreteSpace:
    indexer: PairIndexer
    values: tuple[int, ...]
    M: int

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        if len(vals) != self.indexer.dim:
            raise ValueError(f"expected {self.indexer.dim} values, got {len(vals)}")
        if any(v < 1 or v > self.M for v in vals):
            raise ValueError(f"values must lie in 1..{self.M}")
        object.__setattr__(self, "values", vals)

    def is_valid(self) -> bool:
        cons = constraint_table(self.indexer.n)
        x = np.array(self.values)
        return not (len(cons) and np.any(x[cons[:, 0]] > x[cons[:, 1]] + x[cons[:, 2]]))

    def csv_row(self) -> str:
        return ",".join(str(v) for v in self.values)


# -- backtracking ----------------------------------------------------------


class _Search:
    """Point-by-point backtracking over distance matrices."""

    def __init__(self, n: int, M: int, budget: int | None, collect: bool = False):
        self.n, self.M, self.budget = n, M, budget
        self.D = [[0] * n for _ in range(n)]
        self.nodes = 0
        self.collect = collect
        self.found: list[list[list[int]]] = []
        self.count = 0

    def _tick(self):
        self.nodes += 1
        if self.budget is not None and self.nodes > self.budget:
            raise BudgetExceeded(
                f"node budget {self.budget} exhausted", nodes_explored=self.nodes, partial=self.count
            )

    def extend(self, k: int) -> int:
        """Number of completions once points ``0..k-1`` are fully placed."""
        if k == self.n:
            if self.collect:
                self.found.append([row[:] for row in self.D])
            self.count += 1
            return 1
        lo = [1] * k
        hi = [self.M] * k
        return self._edge(k, 0, lo, hi)

    def _edge(self, k: int, j: int, lo: list[int], hi: list[int]) -> int:
        D = self.D
        last_edge = j == k - 1
        if last_edge and k == self.n - 1 and not self.collect:
            self._tick()
            width = hi[j] - lo[j] + 1
            self.count += width
            return width
        total = 0
        row_j = D[j]
        for v in range(lo[j], hi[j] + 1):
            self._tick()
            D[k][j] = D[j][k] = v
            if last_edge:
                total += self.extend(k + 1)
                continue
            new_lo = lo[:]
            new_hi = hi[:]
            ok = True
            for j2 in range(j + 1, k):
                dj = row_j[j2]
                a = v - dj if v >= dj else dj - v
                if a > new_lo[j2]:
                    new_lo[j2] = a
                b = v + dj
                if b < new_hi[j2]:
                    new_hi[j2] = b
                if new_lo[j2] > new_hi[j2]:
                    ok = False
                    break
            if ok:
                total += self._edge(k, j + 1, new_lo, new_hi)
        D[k][j] = D[j][k] = 0
        return total

    def run(self, first_values: Sequence[int] | None = None) -> int:
        if self.n == 2 and not self.collect:
            self._tick()
            self.count = len(first_values) if first_values is not None else self.M
            return self.count
        values = first_values if first_values is not None else range(1, self.M + 1)
        total = 0
        for v in values:
            self._tick()
            self.D[0][1] = self.D[1][0] = v
            total += self.extend(2)
        return total


def _count_slice(args):
    n, M, values, budget = args
    s = _Search(n, M, budget)
    total = s.run(values)
    return total, s.nodes


def count_discrete_report(n: int, M: int, node_budget: int | None = None, workers: int | None = None) -> dict:
    """Exact count plus the number of search nodes visited."""
    if n < 2 or M < 1:
        raise ValueError("need n >= 2 and M >= 1")
    if workers and workers > 1 and M > 1:
        chunks = [list(range(1, M + 1))[w::workers] for w in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_count_slice, [(n, M, c, node_budget) for c in chunks if c]))
        count = sum(p[0] for p in parts)
        nodes = sum(p[1] for p in parts)
    else:
        s = _Search(n, M, node_budget)
        count = s.run()
        nodes = s.nodes
    return {"n": n, "M": M, "count": count, "nodes_explored": nodes}


def count_discrete(n: int, M: int, node_budget: int | None = None, workers: int | None = None) -> int:
    """Number of metrics on ``n`` points with all distances in ``{1, ..., M}``."""
    return count_discrete_report(n, M, node_budget, workers)["count"]


def enumerate_discrete(n: int, M: int, cap: int = 10**5) -> list[DiscreteSpace]:
    """All such metrics, sorted lexicographically by their flat value vectors."""
    total = count_discrete(n, M)
    if total > cap:
        raise CapacityError(f"{total} spaces exceed cap {cap}", count=total)
    idx = PairIndexer(n)
    s = _Search(n, M, None, collect=True)
    if n == 2:
        flats = [(v,) for v in range(1, M + 1)]
    else:
        s.run()
        pairs = idx.pairs()
        flats = [tuple(D[i - 1][j - 1] for i, j in pairs) for D in s.found]
    return [DiscreteSpace(idx, f, M) for f in sorted(flats)]


def ceiling_map(d: MetricVector, M: int) -> DiscreteSpace:
    """Round ``M d / 2`` up coordinatewise; metrics go to integer metrics."""
    x = np.asarray(d.values, dtype=float)
    if np.any(x <= 0):
        raise ValueError("all distances must be positive")
    if np.any(x > 2):
        raise ValueError("distances must not exceed 2")
    out = DiscreteSpace(d.indexer, tuple(int(v) for v in np.ceil(M * x / 2)), M)
    if not out.is_valid():
        raise ValueError("image violates a triangle inequality; input is not a metric")
    return out


def sandwich_check(n: int, M: int, vol) -> dict:
    """Compare ``|M_n^M|`` against ``(M/2)^dim Vol`` and ``(M/2 + 1)^dim Vol``."""
    vol = Fraction(vol)
    dim = PairIndexer(n).dim
    count = count_discrete(n, M)
    lhs = Fraction(M, 2) ** dim * vol
    rhs = (Fraction(M, 2) + 1) ** dim * vol
    return {
        "n": n,
        "M": M,
        "lower": lhs,
        "count": count,
        "upper": rhs,
        "lower_holds": lhs <= count,
        "upper_holds": count <= rhs,
    }


def even_ratio(n: int, M: int) -> Fraction:
    """``|M_n^M| / (M/2 + 1)^dim``."""
    dim = PairIndexer(n).dim
    return Fraction(count_discrete(n, M)) / (Fraction(M, 2) + 1) ** dim


# -- hypergraph of non-metric triangles --------------------------------------


def non_metric(a: int, b: int, c: int) -> bool:
    """True when the largest value exceeds the sum of the other two."""
    return a + b < c or a + c < b or b + c < a


def non_metric_triples(M: int) -> np.ndarray:
    """All ordered non-metric triples in ``[M]^3`` as rows."""
    v = np.arange(1, M + 1)
    a, b, c = np.meshgrid(v, v, v, indexing="ij")
    mask = (a + b < c) | (a + c < b) | (b + c < a)
    return np.stack([a[mask], b[mask], c[mask]], axis=1)


@dataclass
class HypergraphStats:
    n: int
    M: int
    vertex_count: int
    edge_count: int
    delta1: int
    delta2: int
    delta3: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _edges(n: int, M: int, budget: int):
    tri = triangle_table(n)
    trip = non_metric_triples(M)
    total = len(tri) * len(trip)
    if total > budget:
        raise BudgetExceeded(f"{total} edges exceed budget {budget}", nodes_explored=0, partial=total)
    # vertex id = pair_index * M + (value - 1)
    ids = tri[:, None, :] * M + (trip[None, :, :] - 1)
    return ids.reshape(-1, 3)


def vertex_degrees(n: int, M: int, budget: int = 10**6) -> np.ndarray:
    """Degree of every vertex ``(pair, value)``, shape ``(dim, M)``."""
    dim = PairIndexer(n).dim
    edges = _edges(n, M, budget)
    deg = np.bincount(edges.ravel(), minlength=dim * M)
    return deg.reshape(dim, M)


def hypergraph_stats(n: int, M: int, budget: int = 10**6) -> HypergraphStats:
    """Edge count and maximum co-degrees, by enumerating every edge."""
    if n < 3:
        raise ValueError("need n >= 3")
    dim = PairIndexer(n).dim
    edges = _edges(n, M, budget)
    if len(edges) == 0:
        return HypergraphStats(n, M, dim * M, 0, 0, 0, 0)
    deg = np.bincount(edges.ravel(), minlength=dim * M)
    srt = np.sort(edges, axis=1)
    pair_keys = np.concatenate([
        srt[:, 0] * (dim * M) + srt[:, 1],
        srt[:, 0] * (dim * M) + srt[:, 2],
        srt[:, 1] * (dim * M) + srt[:, 2],
    ])
    _, pair_counts = np.unique(pair_keys, return_counts=True)
    _, triple_counts = np.unique(srt, axis=0, return_counts=True)
    return HypergraphStats(
        n, M, dim * M, len(edges), int(deg.max()), int(pair_counts.max()), int(triple_counts.max())
    )


def codegree(n: int, M: int, vertices: Sequence[tuple[tuple[int, int], int]], budget: int = 10**6) -> int:
    """Number of edges containing all the given ``((i, j), value)`` vertices."""
    idx = PairIndexer(n)
    wanted = {idx.index(*pair) * M + (v - 1) for pair, v in vertices}
    edges = _edges(n, M, budget)
    return sum(1 for e in edges if wanted <= set(e.tolist()))


# -- local supersaturation -----------------------------------------------------


def _extremes(S: Sequence[int], m: int) -> np.ndarray:
    s = np.unique(np.asarray(S, dtype=np.int64))
    if len(s) <= 2 * m:
        return s
    return np.concatenate([s[:m], s[-m:]])


def supersaturation_count(A, B, C, m: int) -> int:
    """Non-metric triples in ``A' x B' x C'`` where ``X'`` keeps the ``m`` smallest and largest of ``X``."""
    a = _extremes(A, m)[:, None, None]
    b = _extremes(B, m)[None, :, None]
    c = _extremes(C, m)[None, None, :]
    return int(np.count_nonzero((a + b < c) | (a + c < b) | (b + c < a)))


def supersaturation_check(M: int, m: int, trials: int, seed: int = 0) -> dict:
    """Random search for a counterexample to the local supersaturation bound.

    Draws triples of subsets of ``[M]`` whose sizes multiply to at least
    ``(M/2 + 2m)^3`` and records the fewest non-metric triples seen.
    """
    if M < 16 or M % 2:
        raise ValueError("M must be even and at least 16")
    if m < 1 or trials < 1:
        raise ValueError("need m >= 1 and trials >= 1")
    threshold = (M // 2 + 2 * m) ** 3
    if M**3 < threshold:
        raise ValueError(f"no subsets of [{M}] reach size product {threshold}")
    rng = chain_rng(seed)
    worst = None
    worst_sets = None
    for _ in range(trials):
        while True:
            sizes = rng.integers(1, M + 1, size=3)
            if int(np.prod(sizes)) >= threshold:
                break
        sets = [np.sort(rng.choice(M, size=int(s), replace=False) + 1) for s in sizes]
        found = supersaturation_count(*sets, m)
        if worst is None or found < worst:
            worst = found
            worst_sets = [s.tolist() for s in sets]
    return {
        "M": M,
        "m": m,
        "trials": trials,
        "required": m**3,
        "min_count": worst,
        "passed": worst >= m**3,
        "worst_case": worst_sets,
        "seed": seed,
    }


def count_json(report: dict) -> str:
    out = dict(report)
    out["count"] = str(report["count"])
    return json.dumps(out)
