"""Pairwise-controlled 2-D projection of image embeddings, from scratch.

The projector builds three pair sets over the input points:

* near pairs: per anchor, the nearest neighbors under a locally scaled
  squared distance d2/(sigma_i * sigma_j), where sigma is the mean distance
  to the anchor's 4th-6th nearest neighbors;
* mid-near pairs: per anchor, sample six distinct other points and keep the
  second closest (captures global structure);
* further pairs: per anchor, uniform samples outside the near set
  (repulsion).

The 2-D layout minimizes, with dt = ||y_i - y_j||^2 + 1,

    w_nb * dt/(10 + dt)  +  w_mn * dt/(10000 + dt)  +  w_fp * 1/(1 + dt)

summed over the respective pair sets, using adaptive-moment gradient
descent under a three-phase weight schedule: the mid-near weight anneals
1000 -> 3 in phase one, holds at 3 in phase two, and drops to 0 in phase
three while the near weight relaxes from 2 to 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .errors import InputError

_SIGMA_FLOOR = 1e-10
_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-7
_PCA_INIT_SCALE = 0.01
_RANDOM_INIT_SCALE = 1e-4
_PCA_TARGET_DIM = 100


@dataclass
class EmbeddingMatrix:
    """Per-image embedding rows with aligned image identifiers."""

    image_ids: List[str]
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise InputError(f"embedding data must be 2-D, got shape {self.data.shape}")
        n = self.data.shape[0]
        if n < 2:
            raise InputError("need at least two embeddings")
        if len(self.image_ids) != n:
            raise InputError(f"{len(self.image_ids)} image ids for {n} embedding rows")
        if len(set(self.image_ids)) != n:
            raise InputError("image ids must be unique")
        if not np.all(np.isfinite(self.data)):
            raise InputError("embedding data contains non-finite values")


@dataclass
class PairSets:
    """Index pairs (i, j) for the three loss terms, shape (m, 2) each."""

    near: np.ndarray
    mid_near: np.ndarray
    further: np.ndarray

    def __post_init__(self):
        for name in ("near", "mid_near", "further"):
            arr = np.asarray(getattr(self, name), dtype=np.int64).reshape(-1, 2)
            setattr(self, name, arr)


@dataclass(frozen=True)
class ProjectorConfig:
    n_neighbors: int = 10
    mn_ratio: float = 0.5
    fp_ratio: float = 2.0
    phase_iters: Tuple[int, int, int] = (100, 100, 250)
    learning_rate: float = 1.0
    seed: int = 42

    def __post_init__(self):
        if self.n_neighbors < 1:
            raise InputError("n_neighbors must be >= 1")
        if self.mn_ratio < 0 or self.fp_ratio < 0:
            raise InputError("pair ratios must be >= 0")
        if len(self.phase_iters) != 3 or any(it < 0 for it in self.phase_iters):
            raise InputError("phase_iters must be three non-negative integers")


@dataclass
class Projection:
    image_ids: List[str]
    points: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.shape != (len(self.image_ids), 2):
            raise InputError(f"projection points must be n x 2, got {self.points.shape}")
        if not np.all(np.isfinite(self.points)):
            raise InputError("projection contains non-finite values")


def preprocess(X: EmbeddingMatrix) -> EmbeddingMatrix:
    """Mean-center columns; above 100 dimensions, keep the top-100 PCs."""
    data = X.data - X.data.mean(axis=0)
    if data.shape[1] > _PCA_TARGET_DIM:
        # economy SVD of the centered matrix == eigendecomposition of the covariance
        _, _, vt = np.linalg.svd(data, full_matrices=False)
        data = data @ vt[:_PCA_TARGET_DIM].T
    return EmbeddingMatrix(list(X.image_ids), data)


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def _pairwise_sq_dists(data: np.ndarray) -> np.ndarray:
    norms = (data * data).sum(axis=1)
    d2 = norms[:, None] + norms[None, :] - 2.0 * (data @ data.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def _local_scales(dist: np.ndarray) -> np.ndarray:
    """sigma_i = mean distance to the 4th-6th nearest neighbors, floored.

    With fewer than four other points the mean over all available
    neighbors is used instead.
    """
    n = dist.shape[0]
    masked = dist.copy()
    np.fill_diagonal(masked, np.inf)
    ordered = np.sort(masked, axis=1)[:, : n - 1]
    if n - 1 >= 4:
        band = ordered[:, 3 : min(6, n - 1)]
    else:
        band = ordered
    sig = band.mean(axis=1)
    return np.maximum(sig, _SIGMA_FLOOR)


def build_pairs(data: np.ndarray, cfg: ProjectorConfig, rng: np.random.Generator) -> PairSets:
    """Construct near, mid-near, and further pairs for the loss."""
    data = np.asarray(data, dtype=np.float64)
    n = data.shape[0]
    if n <= cfg.n_neighbors:
        raise InputError(f"need more than n_neighbors={cfg.n_neighbors} points, got {n}")

    d2 = _pairwise_sq_dists(data)
    dist = np.sqrt(d2)
    sig = _local_scales(dist)
    scaled = d2 / np.outer(sig, sig)
    np.fill_diagonal(scaled, np.inf)

    order = np.argsort(scaled, axis=1, kind="stable")
    near_idx = order[:, : cfg.n_neighbors]
    near = np.empty((n * cfg.n_neighbors, 2), dtype=np.int64)
    near[:, 0] = np.repeat(np.arange(n), cfg.n_neighbors)
    near[:, 1] = near_idx.reshape(-1)

    n_mn = _round_half_up(cfg.n_neighbors * cfg.mn_ratio)
    n_fp = _round_half_up(cfg.n_neighbors * cfg.fp_ratio)

    mid_pairs = []
    sample_size = min(6, n - 1)
    for i in range(n):
        for _ in range(n_mn):
            drawn = rng.choice(n - 1, size=sample_size, replace=False)
            drawn = drawn + (drawn >= i)  # skip the anchor
            ranks = np.argsort(d2[i, drawn], kind="stable")
            pick = drawn[ranks[1]] if sample_size >= 2 else drawn[ranks[0]]
            mid_pairs.append((i, int(pick)))

    far_pairs = []
    for i in range(n):
        if n_fp == 0:
            continue
        blocked = np.zeros(n, dtype=bool)
        blocked[i] = True
        blocked[near_idx[i]] = True
        eligible = np.flatnonzero(~blocked)
        if eligible.size == 0:
            continue
        count = min(n_fp, eligible.size)
        drawn = rng.choice(eligible, size=count, replace=False)
        for j in drawn:
            far_pairs.append((i, int(j)))

    return PairSets(
        near=near,
        mid_near=np.asarray(mid_pairs, dtype=np.int64).reshape(-1, 2),
        further=np.asarray(far_pairs, dtype=np.int64).reshape(-1, 2),
    )


def _pair_term(Y, pairs, denom, attract, weight, grad):
    """Accumulate one loss term and its exact gradient. Returns the loss."""
    if pairs.shape[0] == 0 or weight == 0.0:
        return 0.0
    I, J = pairs[:, 0], pairs[:, 1]
    diff = Y[I] - Y[J]
    dt = (diff * diff).sum(axis=1) + 1.0
    if attract:
        loss = weight * (dt / (denom + dt)).sum()
        coef = weight * 2.0 * denom / (denom + dt) ** 2
    else:
        loss = weight * (1.0 / (1.0 + dt)).sum()
        coef = -weight * 2.0 / (1.0 + dt) ** 2
    contrib = coef[:, None] * diff
    np.add.at(grad, I, contrib)
    np.add.at(grad, J, -contrib)
    return float(loss)


def loss_and_grad(Y: np.ndarray, pairs: PairSets, w: Tuple[float, float, float]):
    """Loss and analytic gradient of the three-term pairwise objective."""
    Y = np.asarray(Y, dtype=np.float64)
    w_nb, w_mn, w_fp = w
    grad = np.zeros_like(Y)
    loss = 0.0
    loss += _pair_term(Y, pairs.near, 10.0, True, w_nb, grad)
    loss += _pair_term(Y, pairs.mid_near, 10000.0, True, w_mn, grad)
    loss += _pair_term(Y, pairs.further, 1.0, False, w_fp, grad)
    return loss, grad


def phase_weights(t: int, cfg: ProjectorConfig) -> Tuple[float, float, float]:
    """(near, mid-near, further) weights at iteration t of the schedule."""
    p1, p2, _ = cfg.phase_iters
    if t < p1:
        frac = t / p1
        return 2.0, 1000.0 * (1.0 - frac) + 3.0 * frac, 1.0
    if t < p1 + p2:
        return 2.0, 3.0, 1.0
    return 1.0, 0.0, 1.0


def _initial_layout(data: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """First two principal components scaled down; Gaussian fallback when
    the data has fewer than two directions of variance."""
    n = data.shape[0]
    centered = data - data.mean(axis=0)
    u, s, _ = np.linalg.svd(centered, full_matrices=False)
    tol = max(s[0] if s.size else 0.0, 1.0) * 1e-12
    if s.size >= 2 and s[1] > tol:
        return u[:, :2] * s[:2] * _PCA_INIT_SCALE
    return rng.normal(size=(n, 2)) * _RANDOM_INIT_SCALE


def fit(X: EmbeddingMatrix, cfg: ProjectorConfig = ProjectorConfig()) -> Projection:
    """Project embeddings to 2-D.

    Deterministic for a fixed seed in single-threaded execution. Runs
    preprocessing, pair construction, and sum(phase_iters) optimizer steps.
    """
    prepped = preprocess(X)
    rng = np.random.default_rng(cfg.seed)
    pairs = build_pairs(prepped.data, cfg, rng)
    Y = _initial_layout(prepped.data, rng)

    m = np.zeros_like(Y)
    v = np.zeros_like(Y)
    total = sum(cfg.phase_iters)
    for t in range(total):
        w = phase_weights(t, cfg)
        _, grad = loss_and_grad(Y, pairs, w)
        m = _ADAM_BETA1 * m + (1.0 - _ADAM_BETA1) * grad
        v = _ADAM_BETA2 * v + (1.0 - _ADAM_BETA2) * grad * grad
        m_hat = m / (1.0 - _ADAM_BETA1 ** (t + 1))
        v_hat = v / (1.0 - _ADAM_BETA2 ** (t + 1))
        Y = Y - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + _ADAM_EPS)

    return Projection(list(X.image_ids), Y)
