"""Deterministic synthetic dataset generator for end-to-end pipeline tests.

The generated world mirrors the deployment domain shift the pipeline is
built for: every tile of a quadrat image is dominated by a single species,
while the quadrat as a whole carries a multi-species label set. Species are
organised into per-region pools, region identity is recoverable from the
embedding geometry (one Gaussian blob per region), and a tunable noise knob
injects three calibrated error mechanisms:

* smear: probability mass leaks from each tile's dominant species into
  junk species that never repeat within an image, so they stay below the
  vote threshold;
* confusers: per-image vagrant species planted in enough tiles to pass the
  vote threshold, producing controlled false positives;
* misses: a truth species is occasionally starved down to a single tile,
  producing controlled false negatives.

At noise 0 every mechanism is off and a tiling-mode run recovers the exact
ground truth. The full-image (1x1 grid) prediction is generated with a
weaker truth-to-junk mass ratio, so aggregating tiles beats the single
full-image vector, which in turn beats the frequency baseline.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .catalog import RegionRegistry, SpeciesCatalog
from .errors import InputError
from .geo import GeoRegion, Observation
from .metrics import GroundTruth
from .projection import EmbeddingMatrix
from .voting import TilePrediction
from . import io as fio

# Mass kept by a tile's dominant species is 1 - SMEAR_SCALE * noise.
SMEAR_SCALE = 0.3
# Confusers per image: round(CONFUSER_SCALE * noise).
CONFUSER_SCALE = 2.0
# Tiles planted per confuser; two are enough to pass the default vote gate.
CONFUSER_TILES = 2
# Probability that one truth species is starved to a single tile.
MISS_SCALE = 0.6
# Truth mass share of the full-image vector is IMG_TRUTH_BASE - IMG_TRUTH_DROP * noise.
IMG_TRUTH_BASE = 0.55
IMG_TRUTH_DROP = 0.25
# Sparse support of the full-image record.
IMG_SUPPORT = 20

_LAND_POLYGON = ((42.0, 0.0), (47.0, 0.0), (47.0, 8.0), (42.0, 8.0))
_REFERENCE_POINT = (44.0, 4.0)


@dataclass(frozen=True)
class SynthSpec:
    """Generator parameters; see the acceptance fixture for the defaults."""

    n_images: int = 100
    grid_rows: int = 4
    grid_cols: int = 4
    n_species: int = 50
    n_clusters: int = 3
    noise: float = 0.5
    separation: float = 8.0
    embed_dim: int = 64
    transect_size: int = 8

    def __post_init__(self):
        if self.n_images < 1:
            raise InputError("n_images must be >= 1")
        if self.grid_rows < 1 or self.grid_cols < 1:
            raise InputError("grid must be at least 1x1")
        if not (0.0 <= self.noise <= 1.0):
            raise InputError(f"noise must lie in [0, 1], got {self.noise}")
        if self.n_clusters < 1 or self.n_clusters > 26:
            raise InputError("n_clusters must lie in 1..26")
        if self.n_clusters > self.embed_dim:
            raise InputError("need embed_dim >= n_clusters for blob placement")
        if self.transect_size < 1:
            raise InputError("transect_size must be >= 1")
        n_tiles = self.grid_rows * self.grid_cols
        if n_tiles < 6:
            raise InputError("need at least 6 tiles so every truth species gets two")
        n_confusers = int(round(CONFUSER_SCALE * self.noise))
        worst_junk = 2 * n_tiles
        worst_truth = self.max_truth_species
        if self.n_species < worst_truth + n_confusers + worst_junk:
            raise InputError(
                f"n_species={self.n_species} too small: need >= "
                f"{worst_truth + n_confusers + worst_junk} for unique junk species"
            )
        n_vagrant = max(n_confusers + 1, self.n_species // 4)
        pool_size = (self.n_species - n_vagrant) // self.n_clusters
        if pool_size < worst_truth:
            raise InputError("species pools too small for the truth-set size range")

    @property
    def n_tiles(self) -> int:
        return self.grid_rows * self.grid_cols

    @property
    def max_truth_species(self) -> int:
        return min(6, self.n_tiles // 2)

    @property
    def min_truth_species(self) -> int:
        return min(3, self.max_truth_species)

    @property
    def n_vagrant(self) -> int:
        n_confusers = int(round(CONFUSER_SCALE * self.noise))
        return max(n_confusers + 1, self.n_species // 4)


@dataclass
class SynthBundle:
    """In-memory synthetic dataset; ``write_bundle`` serializes it."""

    spec: SynthSpec
    seed: int
    catalog: SpeciesCatalog
    registry: RegionRegistry
    pools: List[np.ndarray]
    vagrants: np.ndarray
    training_counts: Dict[int, int]
    quadrat_ids: List[str]
    image_regions: List[str]
    cluster_labels: List[int]
    truth: GroundTruth
    embeddings: EmbeddingMatrix
    tile_predictions: List[TilePrediction]
    image_predictions: List[TilePrediction]
    observations: List[Observation]
    geo_regions: List[GeoRegion]
    manifest: dict = field(default_factory=dict)


def _region_names(n: int) -> List[str]:
    return [f"SYN-{letter}{letter}" for letter in string.ascii_uppercase[:n]]


def _allocate_tiles(rng, n_tiles: int, truth: np.ndarray, missed: int | None) -> List[int]:
    """One dominant species per tile; every non-missed species gets >= 2 tiles."""
    counts = {int(s): 0 for s in truth}
    slots = n_tiles
    if missed is not None:
        counts[missed] = 1
        slots -= 1
    active = [int(s) for s in truth if int(s) != missed]
    base, extra = divmod(slots, len(active))
    order = rng.permutation(len(active))
    for pos, idx in enumerate(order):
        counts[active[idx]] = base + (1 if pos < extra else 0)
    assignment = [s for s, c in counts.items() for _ in range(c)]
    rng.shuffle(assignment)
    return assignment


def _tile_record(image_id, row, col, entries) -> TilePrediction:
    return TilePrediction(image_id=image_id, row=row, col=col, probs=entries, complete=True)


def generate(spec: SynthSpec, seed: int) -> SynthBundle:
    """Build the full bundle from one seeded RNG; same seed, same bundle."""
    rng = np.random.default_rng(seed)
    smear = SMEAR_SCALE * spec.noise
    n_confusers = int(round(CONFUSER_SCALE * spec.noise))
    miss_rate = MISS_SCALE * spec.noise
    n_tiles = spec.n_tiles

    species_ids = [101 + 7 * i for i in range(spec.n_species)]
    catalog = SpeciesCatalog(species_ids)

    shuffled = rng.permutation(spec.n_species)
    vagrants = np.sort(shuffled[: spec.n_vagrant])
    pooled = shuffled[spec.n_vagrant :]
    pools = [np.sort(pooled[c :: spec.n_clusters]) for c in range(spec.n_clusters)]

    freq_order = rng.permutation(spec.n_species)
    training_counts = {}
    for rank, dense in enumerate(freq_order):
        training_counts[species_ids[int(dense)]] = max(1, 2000 // (rank + 1))
    training_counts = {sid: training_counts[sid] for sid in species_ids}

    region_names = _region_names(spec.n_clusters)
    registry = RegionRegistry(regions=tuple(region_names))

    quadrat_ids: List[str] = []
    image_regions: List[str] = []
    cluster_labels: List[int] = []
    truth_sets: Dict[str, frozenset] = {}
    transects: Dict[str, str] = {}
    embeddings = np.empty((spec.n_images, spec.embed_dim))
    tile_preds: List[TilePrediction] = []
    image_preds: List[TilePrediction] = []
    per_region_count = [0] * spec.n_clusters

    lo = spec.min_truth_species
    hi = spec.max_truth_species
    for i in range(spec.n_images):
        c = i % spec.n_clusters
        region = region_names[c]
        t_idx = per_region_count[c] // spec.transect_size
        per_region_count[c] += 1
        quadrat_id = f"{region}-T{t_idx:02d}-Q{i:04d}"
        quadrat_ids.append(quadrat_id)
        image_regions.append(region)
        cluster_labels.append(c)
        transects[quadrat_id] = f"{region}-T{t_idx:02d}"

        center = np.zeros(spec.embed_dim)
        center[c] = spec.separation
        embeddings[i] = center + rng.normal(0.0, 1.0, spec.embed_dim)

        n_truth = int(rng.integers(lo, hi + 1))
        truth_dense = rng.choice(pools[c], size=n_truth, replace=False)
        truth_sets[quadrat_id] = frozenset(species_ids[int(s)] for s in truth_dense)

        missed = None
        if n_truth > lo and rng.random() < miss_rate:
            missed = int(truth_dense[rng.integers(n_truth)])

        dominants = _allocate_tiles(rng, n_tiles, truth_dense, missed)

        confuser_pool = vagrants[~np.isin(vagrants, truth_dense)]
        confusers = rng.choice(confuser_pool, size=n_confusers, replace=False) if n_confusers else np.empty(0, int)
        flip_tiles: Dict[int, int] = {}
        if n_confusers:
            chosen = rng.choice(n_tiles, size=min(n_tiles, CONFUSER_TILES * n_confusers), replace=False)
            for pos, tile in enumerate(chosen):
                flip_tiles[int(tile)] = int(confusers[pos % n_confusers])

        blocked = set(int(s) for s in truth_dense) | set(int(c_) for c_ in confusers)
        junk_pool = [s for s in rng.permutation(spec.n_species) if int(s) not in blocked]
        junk_iter = iter(int(s) for s in junk_pool)

        for tile in range(n_tiles):
            row, col = divmod(tile, spec.grid_cols)
            dom = dominants[tile]
            if smear == 0.0:
                entries = [(dom, 1.0)]
            elif tile in flip_tiles:
                entries = [
                    (flip_tiles[tile], 1.0 - smear),
                    (dom, 0.6 * smear),
                    (next(junk_iter), 0.4 * smear),
                ]
            else:
                entries = [
                    (dom, 1.0 - smear),
                    (next(junk_iter), 0.6 * smear),
                    (next(junk_iter), 0.4 * smear),
                ]
            tile_preds.append(_tile_record(quadrat_id, row, col, entries))

        truth_share = IMG_TRUTH_BASE - IMG_TRUTH_DROP * spec.noise
        truth_w = truth_share * rng.dirichlet(np.full(n_truth, 8.0))
        n_junk_img = min(25, spec.n_species - n_truth)
        junk_species = rng.choice(
            [s for s in range(spec.n_species) if s not in set(int(x) for x in truth_dense)],
            size=n_junk_img,
            replace=False,
        )
        junk_w = (1.0 - truth_share) * rng.dirichlet(np.full(n_junk_img, 1.5))
        dense_entries = list(zip((int(s) for s in truth_dense), truth_w))
        dense_entries += list(zip((int(s) for s in junk_species), junk_w))
        dense_entries.sort(key=lambda e: (-e[1], e[0]))
        image_preds.append(
            TilePrediction(
                image_id=quadrat_id,
                row=0,
                col=0,
                probs=[(s, float(p)) for s, p in dense_entries[:IMG_SUPPORT]],
                complete=False,
            )
        )

    observations: List[Observation] = []
    vagrant_set = set(int(v) for v in vagrants)
    for dense, sid in enumerate(species_ids):
        offshore = dense in vagrant_set and (sorted(vagrant_set).index(dense) % 2 == 1)
        n_obs = 1 + int(rng.integers(0, 3))
        for _ in range(n_obs):
            if offshore:
                lat = float(rng.uniform(50.0, 60.0))
                lon = float(rng.uniform(20.0, 30.0))
            else:
                lat = float(rng.uniform(42.5, 46.5))
                lon = float(rng.uniform(0.5, 7.5))
            observations.append(Observation(species_id=sid, lat=lat, lon=lon))

    geo_regions = [GeoRegion(name="SYN-LAND", polygon=_LAND_POLYGON)]
    truth = GroundTruth(truth=truth_sets, transects=transects)
    emb = EmbeddingMatrix(image_ids=list(quadrat_ids), data=embeddings)

    manifest = {
        "seed": seed,
        "parameters": {
            "n_images": spec.n_images,
            "grid": f"{spec.grid_rows}x{spec.grid_cols}",
            "n_species": spec.n_species,
            "n_clusters": spec.n_clusters,
            "noise": spec.noise,
            "separation": spec.separation,
            "embed_dim": spec.embed_dim,
            "transect_size": spec.transect_size,
        },
        "regions": region_names,
        "reference_point": list(_REFERENCE_POINT),
        "files": [
            "catalog.csv",
            "regions.txt",
            "geo_regions.json",
            "observations.csv",
            "training_counts.csv",
            "embeddings.ndjson",
            "tile_predictions.ndjson",
            "image_predictions.ndjson",
            "truth.csv",
            "labels.csv",
        ],
    }

    return SynthBundle(
        spec=spec,
        seed=seed,
        catalog=catalog,
        registry=registry,
        pools=pools,
        vagrants=vagrants,
        training_counts=training_counts,
        quadrat_ids=quadrat_ids,
        image_regions=image_regions,
        cluster_labels=cluster_labels,
        truth=truth,
        embeddings=emb,
        tile_predictions=tile_preds,
        image_predictions=image_preds,
        observations=observations,
        geo_regions=geo_regions,
        manifest=manifest,
    )


def write_bundle(bundle: SynthBundle, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(bundle.manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    fio.write_catalog(out / "catalog.csv", bundle.catalog)
    fio.write_region_registry(out / "regions.txt", bundle.registry)
    fio.write_geo_regions(out / "geo_regions.json", bundle.geo_regions)
    fio.write_observations(out / "observations.csv", bundle.observations)
    fio.write_training_counts(out / "training_counts.csv", bundle.training_counts)
    fio.write_embeddings(out / "embeddings.ndjson", bundle.embeddings)
    fio.write_tile_predictions(out / "tile_predictions.ndjson", bundle.tile_predictions)
    fio.write_tile_predictions(out / "image_predictions.ndjson", bundle.image_predictions)
    fio.write_ground_truth(out / "truth.csv", bundle.truth)
    with open(out / "labels.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("image_id,cluster\n")
        for image_id, label in zip(bundle.quadrat_ids, bundle.cluster_labels):
            fh.write(f"{image_id},{label}\n")
    return out
