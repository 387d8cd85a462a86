"""Exact volumes of small metric polytopes in rational arithmetic.

The pipeline is halfspaces -> vertices (double description on the
homogenized cone, integer arithmetic) -> volume by recursive facet
decomposition.  A facet ``{a.x = b}`` of an ``m``-dimensional body seen from
an interior point ``p`` contributes a pyramid of volume
``(b - a.p) / |a_k| * vol'(F) / m``, where ``vol'`` is the volume of the
facet projected along coordinate ``k`` (the largest entry of ``a``).  The
projected facet is again a polytope, one dimension lower, whose vertices are
the tight vertices of the parent, so the face lattice is computed once.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

from .core import DIAMETER, PairIndexer, constraint_table
from .errors import CapabilityError, DegenerateError, UnboundedError

__all__ = [
    "RationalHalfspace",
    "RationalPolytope",
    "ExactVolume",
    "build_halfspaces",
    "metric_polytope",
    "axis_halfspace",
    "enumerate_vertices",
    "exact_volume",
    "clip",
    "radius",
    "volume_of",
    "format_rational",
    "box_cell",
    "metric_volume",
]

EXACT_LIMIT = 4
EXTENDED_LIMIT = 5


def format_rational(q: Fraction) -> str:
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class RationalHalfspace:
    """``{x : normal . x <= offset}``."""

    normal: tuple[Fraction, ...]
    offset: Fraction

    def __post_init__(self):
        normal = tuple(Fraction(c) for c in self.normal)
        if not any(normal):
            raise ValueError("halfspace normal must be nonzero")
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", Fraction(self.offset))

    def value(self, x: Sequence) -> Fraction:
        return sum((c * v for c, v in zip(self.normal, x) if c), Fraction(0))

    def contains(self, x: Sequence) -> bool:
        return self.value(x) <= self.offset

    def describe(self, indexer: PairIndexer | None = None) -> str:
        terms = []
        for k, c in enumerate(self.normal):
            if c:
                name = "d_%d_%d" % indexer.unrank(k) if indexer else f"x{k}"
                terms.append(f"{'+' if c > 0 else '-'}{format_rational(abs(c))}*{name}")
        return " ".join(terms) + f" <= {format_rational(self.offset)}"

    def flipped(self) -> "RationalHalfspace":
        """The opposite closed halfspace ``normal . x >= offset``."""
        return RationalHalfspace(tuple(-c for c in self.normal), -self.offset)


def axis_halfspace(n: int, pair: tuple[int, int], sense: str, bound) -> RationalHalfspace:
    """``d_ij <= bound`` (``sense='<='``) or ``d_ij >= bound`` (``'>='``)."""
    idx = PairIndexer(n)
    normal = [Fraction(0)] * idx.dim
    k = idx.index(*pair)
    bound = Fraction(bound)
    if sense == "<=":
        normal[k] = Fraction(1)
        return RationalHalfspace(tuple(normal), bound)
    if sense == ">=":
        normal[k] = Fraction(-1)
        return RationalHalfspace(tuple(normal), -bound)
    raise ValueError(f"sense must be '<=' or '>=', got {sense!r}")


def build_halfspaces(n: int, box_low=0, box_high=DIAMETER) -> list[RationalHalfspace]:
    """Triangle inequalities of ``n`` points followed by the box ``[low, high]``."""
    box_low, box_high = Fraction(box_low), Fraction(box_high)
    if box_low >= box_high:
        raise ValueError("box_low must be below box_high")
    dim = PairIndexer(n).dim
    out = []
    zero, one = Fraction(0), Fraction(1)
    for long_, s1, s2 in constraint_table(n):
        normal = [zero] * dim
        normal[long_], normal[s1], normal[s2] = one, -one, -one
        out.append(RationalHalfspace(tuple(normal), zero))
    for k in range(dim):
        lo = [zero] * dim
        lo[k] = -one
        out.append(RationalHalfspace(tuple(lo), -box_low))
        hi = [zero] * dim
        hi[k] = one
        out.append(RationalHalfspace(tuple(hi), box_high))
    return out


@dataclass
class RationalPolytope:
    dim: int
    halfspaces: list[RationalHalfspace]
    interior_point: tuple[Fraction, ...] | None = None
    vertices: list[tuple[Fraction, ...]] | None = None
    degenerate: bool = False
    clips: list[str] = field(default_factory=list)
    n: int | None = None

    def contains(self, x: Sequence) -> bool:
        return all(h.contains(x) for h in self.halfspaces)


def metric_polytope(n: int, box_low=0, box_high=DIAMETER, enumerate_now: bool = True) -> RationalPolytope:
    """The metric polytope on ``n`` points clipped to ``[box_low, box_high]``."""
    dim = PairIndexer(n).dim
    poly = RationalPolytope(dim, build_halfspaces(n, box_low, box_high), n=n)
    center = Fraction(3, 2)
    if Fraction(box_low) < center < Fraction(box_high):
        poly.interior_point = (center,) * dim
    if Fraction(box_low) != 0 or Fraction(box_high) != DIAMETER:
        poly.clips.append(f"box [{format_rational(Fraction(box_low))}, {format_rational(Fraction(box_high))}]")
    if enumerate_now:
        _refresh(poly)
    return poly


# -- vertex enumeration ----------------------------------------------------


def _integer_row(h: RationalHalfspace) -> tuple[int, ...]:
    """Homogenized row ``(a, -b)`` scaled to coprime integers."""
    coeffs = list(h.normal) + [-h.offset]
    den = 1
    for c in coeffs:
        den = den * c.denominator // math.gcd(den, c.denominator)
    ints = [int(c * den) for c in coeffs]
    return _primitive(ints)


def _primitive(v: Sequence[int]) -> tuple[int, ...]:
    g = 0
    for c in v:
        g = math.gcd(g, c)
    if g > 1:
        return tuple(c // g for c in v)
    return tuple(v)


def _dot(r: Sequence[int], y: Sequence[int]) -> int:
    return sum(a * b for a, b in zip(r, y) if a)


def _pick_basis(rows: list[tuple[int, ...]], width: int) -> list[int]:
    """Indices of ``width`` linearly independent rows, greedily in order."""
    basis: list[list[Fraction]] = []  # echelon form, pivot column stored alongside
    pivots: list[int] = []
    chosen: list[int] = []
    for idx, row in enumerate(rows):
        v = [Fraction(c) for c in row]
        for b, p in zip(basis, pivots):
            if v[p]:
                f = v[p] / b[p]
                v = [x - f * y for x, y in zip(v, b)]
        piv = next((k for k, c in enumerate(v) if c), None)
        if piv is None:
            continue
        basis.append(v)
        pivots.append(piv)
        chosen.append(idx)
        if len(chosen) == width:
            break
    return chosen


def _solve_columns(mat: list[tuple[int, ...]]) -> list[tuple[int, ...]]:
    """Columns of ``-mat^{-1}``, each scaled to a primitive integer vector."""
    size = len(mat)
    aug = [[Fraction(c) for c in row] + [Fraction(int(i == j)) for j in range(size)] for i, row in enumerate(mat)]
    for col in range(size):
        piv = next(r for r in range(col, size) if aug[r][col])
        aug[col], aug[piv] = aug[piv], aug[col]
        pv = aug[col][col]
        aug[col] = [x / pv for x in aug[col]]
        for r in range(size):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
    inv = [row[size:] for row in aug]
    cols = []
    for j in range(size):
        col = [-inv[i][j] for i in range(size)]
        den = 1
        for c in col:
            den = den * c.denominator // math.gcd(den, c.denominator)
        cols.append(_primitive([int(c * den) for c in col]))
    return cols


def _double_description(rows: list[tuple[int, ...]]) -> list[tuple[int, ...]]:
    """Extreme rays of the pointed cone ``{y : r . y <= 0 for r in rows}``."""
    width = len(rows[0])
    basis = _pick_basis(rows, width)
    if len(basis) < width:
        raise UnboundedError("constraint system has a lineality space; the polytope is unbounded")
    rays = _solve_columns([rows[i] for i in basis])
    # zero set of each ray as a bitmask over processed row indices
    zero = []
    for k in range(width):
        z = 0
        for pos, ri in enumerate(basis):
            if pos != k:
                z |= 1 << ri
        zero.append(z)

    processed = set(basis)
    for ri, row in enumerate(rows):
        if ri in processed:
            continue
        processed.add(ri)
        vals = [_dot(row, y) for y in rays]
        pos = [k for k, v in enumerate(vals) if v > 0]
        neg = [k for k, v in enumerate(vals) if v < 0]
        keep = [k for k, v in enumerate(vals) if v <= 0]
        bit = 1 << ri
        new_rays = [rays[k] for k in keep]
        new_zero = [zero[k] | bit if vals[k] == 0 else zero[k] for k in keep]
        for p in pos:
            for q in neg:
                common = zero[p] & zero[q]
                if common.bit_count() < width - 2:
                    continue
                adjacent = True
                for k in range(len(rays)):
                    if k != p and k != q and (zero[k] & common) == common:
                        adjacent = False
                        break
                if not adjacent:
                    continue
                vp, vq = vals[p], vals[q]
                combo = [vp * b - vq * a for a, b in zip(rays[p], rays[q])]
                new_rays.append(_primitive(combo))
                new_zero.append(common | bit)
        rays, zero = new_rays, new_zero
    return rays


def enumerate_vertices(poly: RationalPolytope) -> list[tuple[Fraction, ...]]:
    """All vertices of a bounded polytope, exact and duplicate-free.

    Raises ``UnboundedError`` for unbounded input and ``DegenerateError`` when
    the polytope is empty or lower dimensional.
    """
    rows = [_integer_row(h) for h in poly.halfspaces]
    t_row = tuple([0] * poly.dim + [-1])
    rays = _double_description(rows + [t_row])
    verts = set()
    for y in rays:
        t = y[-1]
        if t == 0:
            if any(y):
                raise UnboundedError("polytope has a recession direction")
            continue
        verts.add(tuple(Fraction(c, t) for c in y[:-1]))
    if not verts:
        raise DegenerateError("polytope is empty")
    out = sorted(verts)
    if _affine_rank(out) < poly.dim:
        raise DegenerateError("polytope has empty interior")
    return out


def _affine_rank(points: Sequence[Sequence[Fraction]]) -> int:
    if len(points) <= 1:
        return 0
    base = points[0]
    rows = [[a - b for a, b in zip(p, base)] for p in points[1:]]
    rank = 0
    ncols = len(base)
    for col in range(ncols):
        piv = next((r for r in range(rank, len(rows)) if rows[r][col]), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        pv = rows[rank][col]
        for r in range(rank + 1, len(rows)):
            if rows[r][col]:
                f = rows[r][col] / pv
                rows[r] = [x - f * y for x, y in zip(rows[r], rows[rank])]
        rank += 1
    return rank


def _refresh(poly: RationalPolytope) -> None:
    try:
        poly.vertices = enumerate_vertices(poly)
    except DegenerateError:
        poly.vertices = []
        poly.degenerate = True
        poly.interior_point = None
        return
    poly.degenerate = False
    if poly.interior_point is None or not all(h.value(poly.interior_point) < h.offset for h in poly.halfspaces):
        poly.interior_point = _centroid(poly.vertices)


def _centroid(points):
    k = len(points)
    return tuple(sum(col, Fraction(0)) / k for col in zip(*points))


def clip(poly: RationalPolytope, h: RationalHalfspace, indexer: PairIndexer | None = None) -> RationalPolytope:
    """Intersect with one more halfspace and refresh the vertex set.

    An empty or flat intersection comes back with ``degenerate=True``.
    """
    if len(h.normal) != poly.dim:
        raise ValueError("halfspace dimension mismatch")
    if indexer is None and poly.n is not None:
        indexer = PairIndexer(poly.n)
    out = replace(
        poly,
        halfspaces=list(poly.halfspaces) + [h],
        vertices=None,
        clips=list(poly.clips) + [h.describe(indexer)],
    )
    if poly.degenerate:
        out.vertices = []
        return out
    if poly.vertices is not None and all(h.contains(v) for v in poly.vertices):
        # redundant constraint: nothing changes geometrically
        out.vertices = list(poly.vertices)
        if out.interior_point is not None and not h.value(out.interior_point) < h.offset:
            out.interior_point = _centroid(out.vertices)
        return out
    _refresh(out)
    return out


# -- volume ----------------------------------------------------------------


@dataclass
class ExactVolume:
    value: Fraction
    n: int | None
    clip_description: str = ""
    vertex_count: int = 0
    elapsed_ms: float = 0.0

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("volume cannot be negative")

    def report(self) -> dict:
        return {
            "n": self.n,
            "clips": [c for c in self.clip_description.split("; ") if c],
            "volume": format_rational(self.value),
            "volume_float": float(self.value),
            "vertex_count": self.vertex_count,
            "elapsed_ms": round(self.elapsed_ms, 3),
        }

    def to_json(self) -> str:
        return json.dumps(self.report())


class _FaceVolumes:
    """Projected volumes of faces, memoized on (vertex set, kept coordinates).

    Both the vertex set of a face and the coordinate projection are
    independent of the path through the face lattice, so the memo is shared
    across all facets.
    """

    def __init__(self, vertices, halfspaces):
        self.vertices = vertices
        self.memo: dict = {}
        self.rank_memo: dict = {}
        self.tight = []
        for h in halfspaces:
            mask = 0
            for vi, v in enumerate(vertices):
                if h.value(v) == h.offset:
                    mask |= 1 << vi
            self.tight.append(mask)

    def members(self, mask: int) -> list[int]:
        out = []
        vi = 0
        while mask:
            if mask & 1:
                out.append(vi)
            mask >>= 1
            vi += 1
        return out

    def rank(self, mask: int) -> int:
        r = self.rank_memo.get(mask)
        if r is None:
            r = _affine_rank([self.vertices[i] for i in self.members(mask)])
            self.rank_memo[mask] = r
        return r

    def volume(self, mask: int, coords: tuple[int, ...], planes: list[tuple[int, tuple, Fraction]]) -> Fraction:
        key = (mask, coords)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        members = self.members(mask)
        m = len(coords)
        pts = [tuple(self.vertices[i][c] for c in coords) for i in members]
        if m == 1:
            vals = [p[0] for p in pts]
            result = max(vals) - min(vals)
            self.memo[key] = result
            return result
        center = _centroid(pts)
        seen = set()
        total = Fraction(0)
        for pi, (hidx, a, b) in enumerate(planes):
            facet = mask & self.tight[hidx]
            if facet in seen or facet.bit_count() < m:
                continue
            seen.add(facet)
            if self.rank(facet) != m - 1:
                continue
            height = b - sum((x * y for x, y in zip(a, center) if x), Fraction(0))
            if height == 0:
                continue
            k = max(range(m), key=lambda j: (abs(a[j]), -j))
            ak = a[k]
            sub_planes = []
            for qi, (hq, aq, bq) in enumerate(planes):
                if qi == pi:
                    continue
                f = aq[k] / ak
                if f:
                    na = tuple(x - f * y for j, (x, y) in enumerate(zip(aq, a)) if j != k)
                    nb = bq - f * b
                else:
                    na = aq[:k] + aq[k + 1:]
                    nb = bq
                if any(na):
                    sub_planes.append((hq, na, nb))
            sub_coords = coords[:k] + coords[k + 1:]
            total += height / abs(ak) * self.volume(facet, sub_coords, sub_planes)
        result = total / m
        self.memo[key] = result
        return result


def volume_of(poly: RationalPolytope) -> Fraction:
    if poly.vertices is None:
        _refresh(poly)
    if poly.degenerate or not poly.vertices:
        return Fraction(0)
    faces = _FaceVolumes(poly.vertices, poly.halfspaces)
    full = (1 << len(poly.vertices)) - 1
    planes = [(i, h.normal, h.offset) for i, h in enumerate(poly.halfspaces)]
    return faces.volume(full, tuple(range(poly.dim)), planes)


def exact_volume(poly: RationalPolytope) -> ExactVolume:
    """Exact rational volume; zero for an empty or flat polytope."""
    start = time.perf_counter()
    value = volume_of(poly)
    elapsed = (time.perf_counter() - start) * 1000
    return ExactVolume(
        value=value,
        n=poly.n,
        clip_description="; ".join(poly.clips),
        vertex_count=len(poly.vertices or []),
        elapsed_ms=elapsed,
    )


def box_cell(n: int, lows: Sequence, highs: Sequence) -> RationalPolytope:
    """The metric polytope intersected with the box ``prod [lows[e], highs[e]]``."""
    idx = PairIndexer(n)
    if len(lows) != idx.dim or len(highs) != idx.dim:
        raise ValueError("need one bound per pair")
    poly = metric_polytope(n)
    for k, (lo, hi) in enumerate(zip(lows, highs)):
        pair = idx.unrank(k)
        if Fraction(lo) > 0:
            poly = clip(poly, axis_halfspace(n, pair, ">=", lo))
        if Fraction(hi) < DIAMETER:
            poly = clip(poly, axis_halfspace(n, pair, "<=", hi))
        if poly.degenerate:
            break
    return poly


def metric_volume(n: int, allow_extended: bool = False) -> Fraction:
    if n < 2:
        raise ValueError("n must be at least 2")
    limit = EXTENDED_LIMIT if allow_extended else EXACT_LIMIT
    if n > limit:
        raise CapabilityError(
            f"exact volume supported for n <= {limit}; use the Monte Carlo estimators for n={n}"
        )
    return volume_of(metric_polytope(n))


def radius(n: int, allow_extended: bool = False) -> float:
    """``Vol^(1/dim)`` of the metric polytope on ``n`` points, from the exact volume."""
    vol = metric_volume(n, allow_extended)
    dim = PairIndexer(n).dim
    # log of a big rational without overflowing floats
    log_vol = math.log(vol.numerator) - math.log(vol.denominator)
    return math.exp(log_vol / dim)
