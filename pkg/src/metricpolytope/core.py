"""Pair indexing, distance vectors and membership in the metric polytope.

Points are labelled ``1..n``.  A distance assignment on ``n`` points is a flat
vector over the ``n(n-1)/2`` unordered pairs ``{i, j}`` taken in
lexicographic order ``(1,2), (1,3), ..., (1,n), (2,3), ..., (n-1,n)``.

Membership is tested against the closed polytope: every distance in
``[0, 2]`` and every triangle inequality satisfied.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DEFAULT_TOL",
    "PairIndexer",
    "MetricVector",
    "MembershipReport",
    "rank",
    "triangle_table",
    "constraint_table",
    "is_metric",
    "f_quantity",
    "short_pairs",
    "close_neighbors",
    "min_distance",
    "box_in_M3_check",
    "csv_header",
    "vectors_to_csv",
    "vectors_from_csv",
]

DEFAULT_TOL = 1e-12
DIAMETER = 2


@dataclass(frozen=True)
class PairIndexer:
    """Bijection between unordered pairs of ``[n]`` and ``0..dim-1``."""

    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 2:
            raise ValueError(f"need at least 2 points, got n={self.n!r}")

    @property
    def dim(self) -> int:
        return self.n * (self.n - 1) // 2

    @classmethod
    def from_dim(cls, dim: int) -> "PairIndexer":
        n = (1 + math.isqrt(1 + 8 * dim)) // 2
        if n * (n - 1) // 2 != dim:
            raise ValueError(f"{dim} is not a triangular number")
        return cls(n)

    def rank(self, i: int, j: int) -> int:
        n = self.n
        if not (1 <= i < j <= n):
            raise ValueError(f"pair ({i}, {j}) invalid for n={n}; need 1 <= i < j <= n")
        return (i - 1) * (2 * n - i) // 2 + (j - i - 1)

    def index(self, i: int, j: int) -> int:
        """Like :meth:`rank` but accepts the pair in either order."""
        if i > j:
            i, j = j, i
        return self.rank(i, j)

    def unrank(self, idx: int) -> tuple[int, int]:
        if not 0 <= idx < self.dim:
            raise ValueError(f"index {idx} out of range for dim={self.dim}")
        i = 1
        row = self.n - 1
        while idx >= row:
            idx -= row
            i += 1
            row -= 1
        return i, i + 1 + idx

    def pairs(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(1, self.n) for j in range(i + 1, self.n + 1)]


def rank(i: int, j: int, indexer: PairIndexer) -> int:
    return indexer.rank(i, j)


@lru_cache(maxsize=64)
def triangle_table(n: int) -> np.ndarray:
    """Edge indices of every triangle ``a < b < c`` as rows ``(ab, ac, bc)``."""
    idx = PairIndexer(n)
    rows = [
        (idx.rank(a, b), idx.rank(a, c), idx.rank(b, c))
        for a in range(1, n + 1)
        for b in range(a + 1, n + 1)
        for c in range(b + 1, n + 1)
    ]
    out = np.array(rows, dtype=np.int64).reshape(-1, 3)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=64)
def constraint_table(n: int) -> np.ndarray:
    """All triangle constraints as rows ``(long, s1, s2)``: ``x[long] <= x[s1] + x[s2]``.

    Three rows per triangle, one for each choice of the long edge.
    """
    tri = triangle_table(n)
    if len(tri) == 0:
        out = np.zeros((0, 3), dtype=np.int64)
    else:
        ab, ac, bc = tri[:, 0], tri[:, 1], tri[:, 2]
        out = np.concatenate(
            [np.stack([ab, ac, bc], 1), np.stack([ac, ab, bc], 1), np.stack([bc, ab, ac], 1)]
        )
    out.setflags(write=False)
    return out


@lru_cache(maxsize=64)
def _constraint_witness(n: int) -> np.ndarray:
    """For each row of :func:`constraint_table`, the ordered triple ``(i, j, k)``."""
    rows = []
    for pos in range(3):
        for a in range(1, n + 1):
            for b in range(a + 1, n + 1):
                for c in range(b + 1, n + 1):
                    rows.append([(a, b, c), (a, c, b), (b, c, a)][pos])
    return np.array(rows, dtype=np.int64).reshape(-1, 3)


@dataclass(frozen=True)
class MetricVector:
    """A distance assignment on the pairs of ``[n]`` in flat-index order.

    ``values`` may be a float array or an object array of ``Fraction`` for
    exact work.
    """

    indexer: PairIndexer
    values: np.ndarray

    def __post_init__(self):
        vals = self.values
        if not isinstance(vals, np.ndarray):
            vals = np.asarray(vals)
        if vals.dtype.kind not in "fO":
            vals = vals.astype(float)
        if vals.shape != (self.indexer.dim,):
            raise ValueError(
                f"expected {self.indexer.dim} values for n={self.indexer.n}, got shape {vals.shape}"
            )
        if vals.dtype.kind == "f" and not np.all(np.isfinite(vals)):
            raise ValueError("distances must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_values(cls, values: Sequence, n: int | None = None) -> "MetricVector":
        vals = np.asarray(values)
        if vals.dtype.kind == "O" or any(isinstance(v, Fraction) for v in vals.ravel()[:1]):
            vals = np.array([Fraction(v) for v in values], dtype=object)
        indexer = PairIndexer(n) if n is not None else PairIndexer.from_dim(len(vals))
        return cls(indexer, vals)

    @property
    def n(self) -> int:
        return self.indexer.n

    def __getitem__(self, pair: tuple[int, int]):
        return self.values[self.indexer.index(*pair)]

    def matrix(self, diagonal=0.0) -> np.ndarray:
        n = self.n
        dtype = object if self.values.dtype.kind == "O" else float
        m = np.full((n, n), diagonal, dtype=dtype)
        iu = np.triu_indices(n, 1)
        m[iu] = self.values
        m[(iu[1], iu[0])] = self.values
        return m

    def permuted(self, perm: Sequence[int]) -> "MetricVector":
        """Relabel points: point ``p`` becomes ``perm[p-1]`` (1-based permutation)."""
        if sorted(perm) != list(range(1, self.n + 1)):
            raise ValueError(f"not a permutation of 1..{self.n}")
        new = np.empty_like(self.values)
        for idx, (i, j) in enumerate(self.indexer.pairs()):
            new[self.indexer.index(perm[i - 1], perm[j - 1])] = self.values[idx]
        return MetricVector(self.indexer, new)

    def to_json(self) -> str:
        vals = [
            f"{v.numerator}/{v.denominator}" if isinstance(v, Fraction) else float(v)
            for v in self.values
        ]
        return json.dumps({"n": self.n, "values": vals})

    @classmethod
    def from_json(cls, text: str) -> "MetricVector":
        obj = json.loads(text)
        vals = obj["values"]
        if any(isinstance(v, str) for v in vals):
            return cls.from_values([Fraction(v) for v in vals], n=obj["n"])
        return cls.from_values(vals, n=obj["n"])


@dataclass
class MembershipReport:
    inside: bool
    violated_triangles: list[tuple[int, int, int]] = field(default_factory=list)
    out_of_box_pairs: list[tuple[int, int]] = field(default_factory=list)


def is_metric(d: MetricVector, tol: float = DEFAULT_TOL) -> MembershipReport:
    """Check ``d`` against the closed metric polytope.

    A violated triangle ``(i, j, k)`` means ``d_ij > d_ik + d_kj + tol``.
    Pass ``tol=0`` with ``Fraction`` values for an exact test.
    """
    x = d.values
    low = x < -tol
    high = x > DIAMETER + tol
    bad_pairs = np.flatnonzero(low | high)
    out_of_box = [d.indexer.unrank(int(k)) for k in bad_pairs]

    cons = constraint_table(d.n)
    violated: list[tuple[int, int, int]] = []
    if len(cons):
        excess = x[cons[:, 0]] - x[cons[:, 1]] - x[cons[:, 2]]
        hits = np.flatnonzero(excess > tol)
        if len(hits):
            wit = _constraint_witness(d.n)
            violated = [tuple(int(v) for v in wit[h]) for h in hits]
    return MembershipReport(not violated and not out_of_box, violated, out_of_box)


def _check_points(points: Iterable[int], n: int) -> list[int]:
    pts = list(points)
    for p in pts:
        if not 1 <= p <= n:
            raise ValueError(f"point index {p} outside 1..{n}")
    return pts


def f_quantity(d: MetricVector, A: Iterable[int]) -> float:
    """Product over ``i`` in ``A`` of twice the distance from ``i`` to its nearest point."""
    pts = _check_points(A, d.n)
    if not pts:
        return 1.0
    m = d.matrix(diagonal=np.inf)
    nearest = m.min(axis=1)
    return float(np.prod([2 * nearest[i - 1] for i in pts]))


def short_pairs(d: MetricVector, threshold: float) -> set[tuple[int, int]]:
    """Pairs whose distance is strictly below ``threshold``."""
    return {d.indexer.unrank(int(k)) for k in np.flatnonzero(d.values < threshold)}


def close_neighbors(d: MetricVector, i: int, threshold: float) -> set[int]:
    _check_points([i], d.n)
    return {j for j in range(1, d.n + 1) if j != i and d[i, j] < threshold}


def min_distance(d: MetricVector) -> float:
    return float(np.min(d.values))


def box_in_M3_check(a: Sequence[float], b: Sequence[float]) -> tuple[bool, float]:
    """Is the box ``prod [a_i, b_i]`` inside the closure of the 3-point polytope?

    Only the extreme corner of each triangle inequality needs checking:
    coordinate ``i`` at its top ``b_i`` against the other two at their bottoms.
    Returns the containment flag and the box volume.
    """
    if len(a) != 3 or len(b) != 3:
        raise ValueError("expected three intervals")
    for lo, hi in zip(a, b):
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
    contained = (
        b[0] <= a[1] + a[2]
        and b[1] <= a[0] + a[2]
        and b[2] <= a[0] + a[1]
        and min(a) >= 0
        and max(b) <= DIAMETER
    )
    volume = (b[0] - a[0]) * (b[1] - a[1]) * (b[2] - a[2])
    return bool(contained), float(volume)


# -- serialization ---------------------------------------------------------


def csv_header(n: int) -> list[str]:
    return [f"d_{i}_{j}" for i, j in PairIndexer(n).pairs()]


def vectors_to_csv(rows: np.ndarray | Sequence[MetricVector], n: int, fmt: str = "%.17g") -> str:
    """One row per distance vector, header ``d_1_2,d_1_3,...``."""
    if not isinstance(rows, np.ndarray):
        rows = np.array([r.values for r in rows], dtype=float)
    buf = io.StringIO()
    buf.write(",".join(csv_header(n)) + "\n")
    if len(rows):
        np.savetxt(buf, np.asarray(rows, dtype=float), delimiter=",", fmt=fmt)
    return buf.getvalue()


def vectors_from_csv(text: str) -> list[MetricVector]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    indexer = PairIndexer.from_dim(len(header))
    if header != csv_header(indexer.n):
        raise ValueError("unexpected CSV header")
    return [MetricVector(indexer, np.array([float(v) for v in row])) for row in reader if row]
