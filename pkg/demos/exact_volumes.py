"""
Exact volumes of small metric polytopes
=======================================

Distance vectors on three or four points that obey every triangle
inequality (and stay below 2) form a polytope.  For so few points its
volume can be computed exactly with rational arithmetic.
"""
from fractions import Fraction

from metricpolytope import (
    axis_halfspace,
    clip,
    exact_volume,
    metric_polytope,
    radius,
    volume_of,
)

# %%
# Build the polytope for three points and list its vertices.
poly = metric_polytope(3)
print("vertices of M_3:")
for v in poly.vertices:
    print("  ", tuple(str(c) for c in v))

ev = exact_volume(poly)
print("Vol(M_3) =", ev.report()["volume"])

# %%
# Slicing with an extra halfspace gives the exact distribution of one
# coordinate under the uniform measure.
for t in (Fraction(1, 2), Fraction(1), Fraction(3, 2)):
    below = volume_of(clip(poly, axis_halfspace(3, (1, 2), "<=", t)))
    print(f"P(d12 <= {t}) = {below / 4} = {float(below / 4):.4f}")

# %%
# Four points take about a second.
ev4 = exact_volume(metric_polytope(4))
print("Vol(M_4) =", ev4.report()["volume"], f"({ev4.vertex_count} vertices, {ev4.elapsed_ms:.0f} ms)")

# %%
# The per-coordinate scale Vol^(1/dim) shrinks as points are added.
for n in (2, 3, 4):
    print(f"r_{n} = {radius(n):.6f}")
