"""K-Means over projected points, region cluster maps, and Bayesian priors.

Clusters come from k-means++ seeding plus Lloyd iterations. Each region maps
to the cluster holding the majority of its images. Per-cluster priors are
the smoothed mean of the per-image class-probability vectors in a cluster,
and reweighting multiplies a tile's sparse probabilities by that prior
before renormalizing over the tile's support.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import InputError, InvariantViolation

_CONVERGENCE_TOL = 1e-6
_MAX_LLOYD_ITERS = 300
_PRIOR_SUM_TOL = 1e-9
_VECTOR_SUM_TOL = 1e-6


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    inertia_history: List[float] = field(default_factory=list)

    def __post_init__(self):
        self.centroids = np.asarray(self.centroids, dtype=np.float64)
        self.assignments = np.asarray(self.assignments, dtype=np.int64)
        if self.centroids.shape[0] != self.k:
            raise InvariantViolation(f"{self.centroids.shape[0]} centroids for k={self.k}")
        if not np.all(np.isfinite(self.centroids)):
            raise InvariantViolation("centroids contain non-finite values")
        if self.assignments.size and (self.assignments.min() < 0 or self.assignments.max() >= self.k):
            raise InvariantViolation("assignment outside 0..k-1")


@dataclass
class ClusterPriors:
    """Row c is the probability vector P(y | cluster c) over all species."""

    priors: np.ndarray

    def __post_init__(self):
        self.priors = np.asarray(self.priors, dtype=np.float64)
        if self.priors.ndim != 2:
            raise InputError(f"priors must be k x S, got shape {self.priors.shape}")
        if np.any(self.priors < 0):
            raise InvariantViolation("priors must be non-negative")
        sums = self.priors.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > _PRIOR_SUM_TOL):
            raise InvariantViolation(f"prior rows must sum to 1 +/- {_PRIOR_SUM_TOL}")

    @property
    def k(self) -> int:
        return self.priors.shape[0]

    @property
    def n_species(self) -> int:
        return self.priors.shape[1]


def _assign(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)


def _inertia(points: np.ndarray, centroids: np.ndarray, assign: np.ndarray) -> float:
    return float(((points - centroids[assign]) ** 2).sum())


def _plusplus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centroids[c] = points[idx]
        d2 = np.minimum(d2, ((points - centroids[c]) ** 2).sum(axis=1))
    return centroids


def kmeans(points: np.ndarray, k: int, seed: int) -> ClusterModel:
    """Lloyd's algorithm with k-means++ seeding.

    Iterates until the largest centroid displacement drops below 1e-6 or
    300 iterations pass. An emptied cluster is re-seeded to the point
    farthest from its stale centroid. Inertia is checked to be
    non-increasing every iteration.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise InputError(f"points must be n x m, got shape {points.shape}")
    n = points.shape[0]
    if k < 1:
        raise InputError("k must be >= 1")
    if n < k:
        raise InputError(f"cannot form {k} clusters from {n} points")

    rng = np.random.default_rng(seed)
    centroids = _plusplus_init(points, k, rng)
    history: List[float] = []
    assign = _assign(points, centroids)

    for _ in range(_MAX_LLOYD_ITERS):
        assign = _assign(points, centroids)
        inertia = _inertia(points, centroids, assign)
        if history and inertia > history[-1] * (1 + 1e-12) + 1e-12:
            raise InvariantViolation("k-means inertia increased between Lloyd iterations")
        history.append(inertia)

        new_centroids = centroids.copy()
        for c in range(k):
            members = points[assign == c]
            if members.shape[0] > 0:
                new_centroids[c] = members.mean(axis=0)
            else:
                far = ((points - centroids[c]) ** 2).sum(axis=1).argmax()
                new_centroids[c] = points[far]
        displacement = np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max()
        centroids = new_centroids
        if displacement < _CONVERGENCE_TOL:
            break

    assign = _assign(points, centroids)
    final_inertia = _inertia(points, centroids, assign)
    if history and final_inertia > history[-1] * (1 + 1e-12) + 1e-12:
        raise InvariantViolation("k-means inertia increased at final assignment")
    history.append(final_inertia)
    return ClusterModel(
        k=k,
        centroids=centroids,
        assignments=assign,
        inertia=final_inertia,
        inertia_history=history,
    )


def dominant_cluster(assignments: Sequence[int], regions: Sequence[str]) -> Dict[str, int]:
    """Map each region to the cluster holding most of its images (ties: lower id)."""
    if len(assignments) != len(regions):
        raise InputError(f"{len(assignments)} assignments for {len(regions)} region labels")
    counts: Dict[str, Dict[int, int]] = {}
    for cluster, region in zip(assignments, regions):
        per = counts.setdefault(region, {})
        per[int(cluster)] = per.get(int(cluster), 0) + 1
    return {
        region: min(per, key=lambda c: (-per[c], c))
        for region, per in counts.items()
    }


def estimate_priors(
    image_probs: np.ndarray,
    assignments: Sequence[int],
    k: int,
    epsilon: float = 1e-6,
    n_species: int | None = None,
) -> ClusterPriors:
    """Smoothed per-cluster mean of image-level probability vectors.

    Every input row must already sum to one; rows are the per-image mean of
    that image's (renormalized) tile vectors. A cluster with no images gets
    a uniform prior.
    """
    vectors = np.asarray(image_probs, dtype=np.float64)
    if vectors.ndim != 2:
        raise InputError(f"image probability vectors must be n x S, got {vectors.shape}")
    if n_species is not None and vectors.shape[1] != n_species:
        raise InputError(f"vectors have {vectors.shape[1]} species, catalog has {n_species}")
    if epsilon < 0:
        raise InputError("epsilon must be >= 0")
    assignments = np.asarray(assignments, dtype=np.int64)
    if assignments.shape[0] != vectors.shape[0]:
        raise InputError(f"{assignments.shape[0]} assignments for {vectors.shape[0]} vectors")
    sums = vectors.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > _VECTOR_SUM_TOL)
    if bad.size:
        raise InvariantViolation(
            f"image vector {bad[0]} sums to {sums[bad[0]]!r}; expected 1 +/- {_VECTOR_SUM_TOL}"
        )

    n_sp = vectors.shape[1]
    priors = np.empty((k, n_sp))
    for c in range(k):
        members = vectors[assignments == c]
        if members.shape[0] == 0:
            priors[c] = 1.0 / n_sp
            continue
        row = members.mean(axis=0) + epsilon
        priors[c] = row / row.sum()
    return ClusterPriors(priors=priors)


def reweight(tile_probs, prior: np.ndarray):
    """Multiply sparse tile probabilities by the prior and renormalize.

    The output keeps the input entry order and support; smoothing in the
    prior guarantees a non-empty result.
    """
    prior = np.asarray(prior, dtype=np.float64)
    if abs(float(prior.sum()) - 1.0) > _PRIOR_SUM_TOL:
        raise InvariantViolation(f"prior sums to {float(prior.sum())!r}; expected 1 +/- {_PRIOR_SUM_TOL}")
    if not tile_probs:
        return []
    weighted = []
    for idx, prob in tile_probs:
        if not 0 <= idx < prior.shape[0]:
            raise InputError(f"dense index {idx} outside prior of size {prior.shape[0]}")
        weighted.append((int(idx), float(prob) * float(prior[idx])))
    total = sum(wp for _, wp in weighted)
    if total <= 0.0:
        raise InvariantViolation("reweighted mass is zero; prior must be epsilon-smoothed")
    return [(idx, wp / total) for idx, wp in weighted]
