"""
Cluster priors and Bayesian reweighting
=======================================

Images in the same visual cluster tend to share species. The prior of a
cluster is the smoothed mean of its images' probability vectors; a tile
from a region dominated by that cluster gets its probabilities
multiplied by the prior and renormalized. Votes move toward species the
cluster has actually seen.
"""

import numpy as np

from floratile import estimate_priors, reweight

# six images over four species, already renormalized to unit mass.
# cluster 0 favors species 0/1, cluster 1 favors species 2/3.
image_vectors = np.array([
    [0.70, 0.25, 0.05, 0.00],
    [0.60, 0.35, 0.00, 0.05],
    [0.65, 0.30, 0.05, 0.00],
    [0.05, 0.00, 0.55, 0.40],
    [0.00, 0.10, 0.60, 0.30],
    [0.05, 0.05, 0.50, 0.40],
])
assignments = [0, 0, 0, 1, 1, 1]

priors = estimate_priors(image_vectors, assignments, k=2, epsilon=1e-6)
for c in range(2):
    print(f"cluster {c} prior:", np.round(priors.priors[c], 3))

# an ambiguous tile: equal mass on one species from each cluster.
# the cluster-0 prior pushes it toward species 0.
tile = [(0, 0.5), (2, 0.5)]
for c in range(2):
    out = reweight(tile, priors.priors[c])
    print(f"tile {tile} under cluster-{c} prior ->",
          [(i, round(p, 3)) for i, p in out])

# a uniform prior is a no-op apart from renormalization: the ranking
# (and here the values) come back unchanged
uniform = np.full(4, 0.25)
print("uniform prior ->", reweight(tile, uniform))
