"""
Counting integer metric spaces
==============================

Restrict every distance to the integers 1..M.  A backtracking search
counts the valid assignments exactly.  Rescaled, the counts bracket the
continuous volume.
"""
from metricpolytope import (
    count_discrete,
    hypergraph_stats,
    metric_volume,
    sandwich_check,
    supersaturation_check,
)

# %%
# With values in {1, 2} nothing can go wrong, so every assignment counts.
for n in range(2, 6):
    print(f"|M_{n}^2| = {count_discrete(n, 2)}")

# %%
# Larger ranges: (M/2)^dim Vol <= count <= (M/2 + 1)^dim Vol.
for M in (2, 4, 8):
    rep = sandwich_check(4, M, metric_volume(4))
    print(f"M={M}: {float(rep['lower']):.0f} <= {rep['count']} <= {float(rep['upper']):.0f}")

# %%
# Non-metric triangles as a 3-uniform hypergraph on (pair, value) vertices.
s = hypergraph_stats(4, 6)
print(f"edges={s.edge_count}  max degree={s.delta1}  max co-degree={s.delta2}")

# %%
# Large value sets cannot avoid non-metric triples.
rep = supersaturation_check(16, 1, 2000, seed=0)
print("fewest non-metric triples seen:", rep["min_count"])
