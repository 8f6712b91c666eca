"""End-to-end pipeline: predictions in, ranked label sets and scores out.

Three mutually exclusive modes share one aggregation code path:

* ``baseline``   predicts the k globally most frequent training species
  for every quadrat (a constant predictor);
* ``no-tiling``  consumes a single full-image prediction per quadrat
  (a 1x1 grid) and keeps its top 20 species;
* ``tiling``     consumes one prediction per grid cell and aggregates
  them by majority vote.

Geolocation masking and cluster-prior reweighting are independent,
composable transforms applied to the prediction stream before voting,
in that order. Every stage is a pure function of its inputs plus the
run seed, so a single-threaded run is bitwise reproducible.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .catalog import RegionRegistry, SpeciesCatalog, load_catalog, parse_region
from .clustering import ClusterModel, ClusterPriors, dominant_cluster, estimate_priors, kmeans, reweight
from .errors import InputError, InvariantViolation
from .geo import DEFAULT_REFERENCE_POINT, SpeciesMask, apply_mask, build_mask, nearest_per_species
from .io import (
    SubmissionRow,
    group_by_image,
    read_geo_regions,
    read_ground_truth,
    read_observations,
    read_region_registry,
    read_tile_predictions,
    read_training_counts,
    write_assignments,
    write_priors,
    write_projection,
    write_region_cluster_map,
    write_score_report,
    write_species_mask,
    write_submission,
    write_tile_predictions,
)
from .metrics import ScoreReport, final_score
from .projection import EmbeddingMatrix, Projection, ProjectorConfig, fit
from .tiling import GridSpec
from .voting import TilePrediction, naive_baseline, select_labels, tally_votes

MODES = ("baseline", "no-tiling", "tiling")

# Aggregation presets per mode: (grid, k per tile, min votes, max labels).
# tiling follows the best ablation row (top-9 votes over a 4x4 grid);
# no-tiling keeps the top 20 species of the single full-image vector.
MODE_PRESETS: Dict[str, Tuple[GridSpec, int, int, int]] = {
    "tiling": (GridSpec(4, 4), 9, 2, 10),
    "no-tiling": (GridSpec(1, 1), 20, 1, 20),
}
DEFAULT_BASELINE_K = 10
BASELINE_K_PRESETS = (5, 10, 25)


@dataclass(frozen=True)
class GeoOptions:
    enabled: bool = False
    reference: Tuple[float, float] = DEFAULT_REFERENCE_POINT
    observations_path: Optional[str] = None
    regions_path: Optional[str] = None

    def __post_init__(self):
        if self.enabled and (self.observations_path is None or self.regions_path is None):
            raise InputError("geo filtering needs --observations and --geo-regions")


@dataclass(frozen=True)
class PriorsOptions:
    enabled: bool = False
    k: int = 3
    epsilon: float = 1e-6
    embeddings_path: Optional[str] = None

    def __post_init__(self):
        if self.k < 1:
            raise InputError("priors k must be >= 1")
        if self.epsilon <= 0:
            raise InputError("priors epsilon must be positive")
        if self.enabled and self.embeddings_path is None:
            raise InputError("prior reweighting needs --embeddings")


@dataclass(frozen=True)
class RunConfig:
    catalog_path: str
    predictions_path: str
    out_dir: str
    mode: str = "tiling"
    grid: Optional[GridSpec] = None
    k_per_tile: Optional[int] = None
    min_votes: Optional[int] = None
    max_labels: Optional[int] = None
    baseline_k: int = DEFAULT_BASELINE_K
    registry_path: Optional[str] = None
    training_counts_path: Optional[str] = None
    truth_path: Optional[str] = None
    geo: GeoOptions = field(default_factory=GeoOptions)
    priors: PriorsOptions = field(default_factory=PriorsOptions)
    seed: int = 42
    threads: int = 1
    keep_intermediates: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise InputError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "baseline":
            if self.baseline_k < 1:
                raise InputError("baseline k must be >= 1")
            if self.geo.enabled or self.priors.enabled:
                raise InputError("geo and priors do not apply to the baseline mode")
            if self.training_counts_path is None:
                raise InputError("baseline mode needs --training-counts")
        if self.priors.enabled and self.registry_path is None:
            raise InputError("prior reweighting needs a region registry")
        if self.threads < 1:
            raise InputError("threads must be >= 1")

    def resolved(self) -> "RunConfig":
        """Fill unset aggregation knobs from the mode preset."""
        if self.mode == "baseline":
            return self
        grid, k, mv, ml = MODE_PRESETS[self.mode]
        return replace(
            self,
            grid=self.grid or grid,
            k_per_tile=self.k_per_tile if self.k_per_tile is not None else k,
            min_votes=self.min_votes if self.min_votes is not None else mv,
            max_labels=self.max_labels if self.max_labels is not None else ml,
        )


@dataclass
class RunResult:
    submission: List[SubmissionRow]
    report: Optional[ScoreReport]
    submission_path: Path
    report_path: Optional[Path]


# --- stage functions (shared by `run` and the per-stage CLI commands) ----

def validate_grid(grouped: Mapping[str, Sequence[TilePrediction]], grid: GridSpec):
    """Every tile must sit inside the grid; no duplicate cells per image."""
    for image_id, tiles in grouped.items():
        seen = set()
        for t in tiles:
            if t.row >= grid.rows or t.col >= grid.cols:
                raise InputError(
                    f"tile ({t.row},{t.col}) of {image_id!r} outside {grid.rows}x{grid.cols} grid"
                )
            if (t.row, t.col) in seen:
                raise InputError(f"duplicate tile ({t.row},{t.col}) for {image_id!r}")
            seen.add((t.row, t.col))


def image_probability_vectors(
    grouped: Mapping[str, Sequence[TilePrediction]], n_species: int
) -> Tuple[List[str], np.ndarray]:
    """Dense per-image distributions: renormalize each tile, then average.

    Tile records are sparse and need not sum to one (a top-k slice does
    not), so each tile is renormalized before entering the mean; the
    resulting rows sum to one exactly as the prior estimator requires.
    """
    ids = list(grouped)
    vectors = np.zeros((len(ids), n_species))
    for r, image_id in enumerate(ids):
        tiles = grouped[image_id]
        for t in tiles:
            total = sum(p for _, p in t.probs)
            for idx, p in t.probs:
                if idx >= n_species:
                    raise InputError(
                        f"species index {idx} in {image_id!r} exceeds catalog size {n_species}"
                    )
                vectors[r, idx] += p / total
        vectors[r] /= len(tiles)
    return ids, vectors


def compute_geo_mask(options: GeoOptions, catalog: SpeciesCatalog) -> SpeciesMask:
    observations = read_observations(options.observations_path)
    regions = read_geo_regions(options.regions_path)
    nearest = nearest_per_species(observations, options.reference)
    return build_mask(nearest, regions, catalog)


def apply_geo_mask(
    grouped: Dict[str, List[TilePrediction]], mask: SpeciesMask
) -> Dict[str, List[TilePrediction]]:
    """Filter every tile through the mask; tiles losing all species drop out."""
    out: Dict[str, List[TilePrediction]] = {}
    for image_id, tiles in grouped.items():
        kept: List[TilePrediction] = []
        for t in tiles:
            filtered = apply_mask(t.probs, mask, renormalize=True)
            if filtered:
                kept.append(TilePrediction(t.image_id, t.row, t.col, filtered, complete=False))
        if not kept:
            raise InvariantViolation(
                f"geolocation mask removed every species of every tile of {image_id!r}"
            )
        out[image_id] = kept
    return out


@dataclass
class PriorsArtifacts:
    projection: Projection
    model: ClusterModel
    region_map: Dict[str, int]
    priors: ClusterPriors


def compute_priors_artifacts(
    embeddings: EmbeddingMatrix,
    grouped: Mapping[str, Sequence[TilePrediction]],
    registry: RegionRegistry,
    catalog: SpeciesCatalog,
    options: PriorsOptions,
    seed: int,
) -> PriorsArtifacts:
    """Project embeddings, cluster them, map regions to dominant clusters,
    and estimate one species prior per cluster from the prediction stream."""
    projection = fit(embeddings, ProjectorConfig(seed=seed))
    model = kmeans(projection.points, options.k, seed=seed)

    regions = [parse_region(image_id, registry) for image_id in embeddings.image_ids]
    region_map = dominant_cluster(model.assignments, regions)

    cluster_of_image = {
        image_id: int(model.assignments[i]) for i, image_id in enumerate(embeddings.image_ids)
    }
    ids, vectors = image_probability_vectors(grouped, len(catalog))
    missing = [i for i in ids if i not in cluster_of_image]
    if missing:
        raise InputError(f"no embedding for predicted image(s): {missing[:5]}")
    assignments = [cluster_of_image[i] for i in ids]
    priors = estimate_priors(
        vectors, assignments, options.k, epsilon=options.epsilon, n_species=len(catalog)
    )
    return PriorsArtifacts(projection=projection, model=model, region_map=region_map, priors=priors)


def apply_priors(
    grouped: Dict[str, List[TilePrediction]],
    priors: ClusterPriors,
    region_map: Mapping[str, int],
    registry: RegionRegistry,
) -> Dict[str, List[TilePrediction]]:
    """Reweight every tile by the prior of its region's dominant cluster."""
    out: Dict[str, List[TilePrediction]] = {}
    for image_id, tiles in grouped.items():
        region = parse_region(image_id, registry)
        if region not in region_map:
            raise InputError(f"region {region!r} has no dominant cluster in the map")
        prior = priors.priors[region_map[region]]
        out[image_id] = [
            TilePrediction(t.image_id, t.row, t.col, reweight(t.probs, prior), complete=False)
            for t in tiles
        ]
    return out


def _aggregate_one(
    image_id: str,
    tiles: Sequence[TilePrediction],
    catalog: SpeciesCatalog,
    k: int,
    min_votes: int,
    max_labels: int,
) -> SubmissionRow:
    tally = tally_votes(tiles, k)
    labels = select_labels(tally, min_votes=min_votes, max_labels=max_labels)
    return SubmissionRow(
        quadrat_id=image_id, species_ids=tuple(catalog.species_id(i) for i in labels)
    )


def aggregate_predictions(
    grouped: Mapping[str, Sequence[TilePrediction]],
    catalog: SpeciesCatalog,
    k: int,
    min_votes: int,
    max_labels: int,
    threads: int = 1,
) -> List[SubmissionRow]:
    """One submission row per image, sorted by quadrat id.

    Aggregation is pure per image, so the thread count cannot change the
    result; it only changes wall time on large runs.
    """
    ids = sorted(grouped)
    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(
                pool.map(
                    lambda i: _aggregate_one(i, grouped[i], catalog, k, min_votes, max_labels),
                    ids,
                )
            )
    else:
        rows = [_aggregate_one(i, grouped[i], catalog, k, min_votes, max_labels) for i in ids]
    return rows


def score_submission(
    rows: Sequence[SubmissionRow], truth_path: str, transect_map: Optional[Mapping[str, str]] = None
) -> ScoreReport:
    truth = read_ground_truth(truth_path, transect_map=transect_map)
    predictions = {row.quadrat_id: set(row.species_ids) for row in rows}
    return final_score(predictions, truth)


# --- the one-shot runner -------------------------------------------------

def run(config: RunConfig) -> RunResult:
    config = config.resolved()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    catalog = load_catalog(config.catalog_path)

    if config.mode == "baseline":
        counts = read_training_counts(config.training_counts_path)
        labels = naive_baseline(counts, config.baseline_k)
        preds = read_tile_predictions(config.predictions_path)
        quadrats = sorted(group_by_image(preds))
        rows = [SubmissionRow(quadrat_id=q, species_ids=tuple(labels)) for q in quadrats]
    else:
        preds = read_tile_predictions(config.predictions_path)
        grouped = group_by_image(preds)
        validate_grid(grouped, config.grid)

        if config.geo.enabled:
            mask = compute_geo_mask(config.geo, catalog)
            if config.keep_intermediates:
                write_species_mask(out_dir / "mask.csv", mask, catalog)
            grouped = apply_geo_mask(grouped, mask)
            if config.keep_intermediates:
                write_tile_predictions(out_dir / "masked_predictions.ndjson", _flatten(grouped))

        if config.priors.enabled:
            registry = read_region_registry(config.registry_path)
            from .io import read_embeddings

            embeddings = read_embeddings(config.priors.embeddings_path)
            artifacts = compute_priors_artifacts(
                embeddings, grouped, registry, catalog, config.priors, config.seed
            )
            if config.keep_intermediates:
                write_projection(out_dir / "projection.csv", artifacts.projection)
                write_assignments(
                    out_dir / "assignments.csv",
                    embeddings.image_ids,
                    artifacts.model.assignments,
                )
                write_region_cluster_map(out_dir / "region_clusters.csv", artifacts.region_map)
                write_priors(out_dir / "priors.ndjson", artifacts.priors)
            grouped = apply_priors(grouped, artifacts.priors, artifacts.region_map, registry)
            if config.keep_intermediates:
                write_tile_predictions(
                    out_dir / "reweighted_predictions.ndjson", _flatten(grouped)
                )

        rows = aggregate_predictions(
            grouped,
            catalog,
            config.k_per_tile,
            config.min_votes,
            config.max_labels,
            threads=config.threads,
        )

    submission_path = out_dir / "submission.csv"
    write_submission(submission_path, rows)

    report = None
    report_path = None
    if config.truth_path:
        report = score_submission(rows, config.truth_path)
        report_path = out_dir / "score_report.json"
        write_score_report(report_path, report)

    return RunResult(
        submission=rows, report=report, submission_path=submission_path, report_path=report_path
    )


def _flatten(grouped: Mapping[str, Sequence[TilePrediction]]) -> List[TilePrediction]:
    return [t for tiles in grouped.values() for t in tiles]
