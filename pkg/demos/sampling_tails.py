"""
Sampling random metric spaces
=============================

Hit-and-run draws (approximately) uniform points of the metric polytope.
With those samples we estimate the log-volume level by level, and look at
how often a distance falls below 1 as the number of points grows.
"""
import math

from metricpolytope import (
    ChainConfig,
    default_schedule,
    hit_and_run,
    min_distance_cdf,
    multilevel_volume,
    tail_table,
)

# %%
# Three points: the exact answer for P(d12 < 1) is 3/8.
batch = hit_and_run(ChainConfig(3, seed=1, chains=4), 20000)
print("P(d12 < 1) ~", (batch.samples[:, 0] < 1).mean())

# %%
# Log-volume from a chain of shrinking boxes [a, 2]^dim, a = 1 down to 0.
est = multilevel_volume(default_schedule(4, 20000, seed=2))
print(f"log Vol(M_4) ~ {est.value:.4f} +- {est.std_error:.4f}  (exact {math.log(136 / 15):.4f})")

# %%
# Lower tail across n.  Coordinate moves keep each step cheap at large n.
batches = {
    n: hit_and_run(ChainConfig(n, seed=10 + n, chains=4, direction="coordinate"), 5000)
    for n in (4, 8, 16)
}
for row in tail_table(batches):
    print(f"n={row['n']:>2}  p={row['p_hat']:.4f}  sqrt(n)*p={row['sqrt_n_p_hat']:.3f}")

# %%
# More points leave more room for one short distance.
for n, b in batches.items():
    (p,) = min_distance_cdf(n, [0.8], b)
    print(f"n={n:>2}  P(min d <= 0.8) ~ {p.value:.3f}")
