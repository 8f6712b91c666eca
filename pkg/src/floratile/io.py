"""Readers and writers for every file format the pipeline speaks.

All floats are serialized with ``repr`` (via json), which round-trips
float64 exactly; all text is UTF-8 with LF line endings. Schema violations
raise InputError with file and line diagnostics.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

import numpy as np

from .catalog import RegionRegistry, SpeciesCatalog
from .errors import InputError
from .geo import GeoRegion, Observation, SpeciesMask
from .metrics import GroundTruth, ScoreReport
from .projection import EmbeddingMatrix, Projection
from .clustering import ClusterPriors
from .voting import TilePrediction


def _open_read(path):
    path = Path(path)
    if not path.exists():
        raise InputError(f"{path}: file not found")
    try:
        return open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc


def _fmt_float(x: float) -> str:
    return repr(float(x))


# --- species catalog ----------------------------------------------------

def write_catalog(path, catalog: SpeciesCatalog):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("species_id\n")
        for sid in catalog.species_ids:
            fh.write(f"{sid}\n")


# --- region registry ---------------------------------------------------

def read_region_registry(path) -> RegionRegistry:
    with _open_read(path) as fh:
        names = [line.strip() for line in fh if line.strip()]
    if not names:
        raise InputError(f"{path}: region registry is empty")
    try:
        return RegionRegistry(regions=tuple(names))
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


def write_region_registry(path, registry: RegionRegistry):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for name in registry:
            fh.write(name + "\n")


# --- transect map ------------------------------------------------------

def read_transect_map(path) -> Dict[str, str]:
    out: Dict[str, str] = {}
    with _open_read(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["quadrat_id", "transect_id"]:
            raise InputError(f"{path}:1: expected header 'quadrat_id,transect_id'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2 or not row[0] or not row[1]:
                raise InputError(f"{path}:{lineno}: expected 'quadrat_id,transect_id'")
            if row[0] in out:
                raise InputError(f"{path}:{lineno}: duplicate quadrat_id {row[0]!r}")
            out[row[0]] = row[1]
    return out


# --- tile predictions (NDJSON) -----------------------------------------

def read_tile_predictions(path) -> List[TilePrediction]:
    preds: List[TilePrediction] = []
    with _open_read(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            try:
                preds.append(
                    TilePrediction(
                        image_id=rec["image_id"],
                        row=int(rec["row"]),
                        col=int(rec["col"]),
                        probs=[(int(i), float(p)) for i, p in rec["probs"]],
                        complete=bool(rec.get("complete", False)),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise InputError(f"{path}:{lineno}: bad tile prediction record ({exc})") from None
            except InputError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
    if not preds:
        raise InputError(f"{path}: no tile prediction records")
    return preds


def write_tile_predictions(path, preds: Iterable[TilePrediction]):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in preds:
            rec = {
                "image_id": p.image_id,
                "row": p.row,
                "col": p.col,
                "probs": [[idx, prob] for idx, prob in p.probs],
            }
            if p.complete:
                rec["complete"] = True
            fh.write(json.dumps(rec) + "\n")


def group_by_image(preds: Sequence[TilePrediction]) -> Dict[str, List[TilePrediction]]:
    """Group tiles by image, preserving first-appearance order."""
    grouped: Dict[str, List[TilePrediction]] = {}
    for p in preds:
        grouped.setdefault(p.image_id, []).append(p)
    return grouped


# --- observations ------------------------------------------------------

def read_observations(path) -> List[Observation]:
    out: List[Observation] = []
    with _open_read(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["species_id", "lat", "lon"]:
            raise InputError(f"{path}:1: expected header 'species_id,lat,lon'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise InputError(f"{path}:{lineno}: expected 'species_id,lat,lon'")
            try:
                out.append(Observation(species_id=int(row[0]), lat=float(row[1]), lon=float(row[2])))
            except ValueError:
                raise InputError(f"{path}:{lineno}: malformed observation {row!r}") from None
            except InputError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
    return out


def write_observations(path, observations: Iterable[Observation]):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("species_id,lat,lon\n")
        for o in observations:
            fh.write(f"{o.species_id},{_fmt_float(o.lat)},{_fmt_float(o.lon)}\n")


# --- geographic regions (polygons) -------------------------------------

def read_geo_regions(path) -> List[GeoRegion]:
    with _open_read(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(data, list) or not data:
        raise InputError(f"{path}: expected a non-empty JSON list of regions")
    regions = []
    for i, rec in enumerate(data):
        try:
            regions.append(GeoRegion(name=rec["name"], polygon=tuple((v[0], v[1]) for v in rec["polygon"])))
        except (KeyError, TypeError, IndexError) as exc:
            raise InputError(f"{path}: region #{i}: bad record ({exc})") from None
        except InputError as exc:
            raise InputError(f"{path}: region #{i}: {exc}") from None
    return regions


def write_geo_regions(path, regions: Iterable[GeoRegion]):
    payload = [{"name": r.name, "polygon": [[lat, lon] for lat, lon in r.polygon]} for r in regions]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


# --- species mask ------------------------------------------------------

def write_species_mask(path, mask: SpeciesMask, catalog: SpeciesCatalog):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("species_id,allowed\n")
        for i, sid in enumerate(catalog.species_ids):
            fh.write(f"{sid},{1 if mask.allowed[i] else 0}\n")


def read_species_mask(path, catalog: SpeciesCatalog) -> SpeciesMask:
    allowed = np.zeros(len(catalog), dtype=bool)
    seen = np.zeros(len(catalog), dtype=bool)
    with _open_read(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["species_id", "allowed"]:
            raise InputError(f"{path}:1: expected header 'species_id,allowed'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise InputError(f"{path}:{lineno}: expected 'species_id,allowed'")
            try:
                idx = catalog.dense_index(int(row[0]))
                flag = int(row[1])
            except (ValueError, InputError):
                raise InputError(f"{path}:{lineno}: malformed mask row {row!r}") from None
            if flag not in (0, 1):
                raise InputError(f"{path}:{lineno}: allowed must be 0 or 1")
            allowed[idx] = bool(flag)
            seen[idx] = True
    if not seen.all():
        raise InputError(f"{path}: mask does not cover every catalog species")
    return SpeciesMask(allowed=allowed, allowed_count=int(allowed.sum()))


# --- embeddings --------------------------------------------------------

def read_embeddings(path) -> EmbeddingMatrix:
    ids: List[str] = []
    rows: List[List[float]] = []
    width = None
    with _open_read(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                ids.append(rec["image_id"])
                vec = [float(x) for x in rec["vector"]]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise InputError(f"{path}:{lineno}: bad embedding record ({exc})") from None
            if width is None:
                width = len(vec)
            elif len(vec) != width:
                raise InputError(f"{path}:{lineno}: vector length {len(vec)} != {width}")
            rows.append(vec)
    if not rows:
        raise InputError(f"{path}: no embedding records")
    try:
        return EmbeddingMatrix(image_ids=ids, data=np.asarray(rows))
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


def write_embeddings(path, emb: EmbeddingMatrix):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for image_id, row in zip(emb.image_ids, emb.data):
            fh.write(json.dumps({"image_id": image_id, "vector": [float(x) for x in row]}) + "\n")


# --- projection --------------------------------------------------------

def write_projection(path, projection: Projection):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("image_id,x,y\n")
        for image_id, (x, y) in zip(projection.image_ids, projection.points):
            fh.write(f"{image_id},{_fmt_float(x)},{_fmt_float(y)}\n")


def read_projection(path) -> Projection:
    ids: List[str] = []
    pts: List[Tuple[float, float]] = []
    with _open_read(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["image_id", "x", "y"]:
            raise InputError(f"{path}:1: expected header 'image_id,x,y'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise InputError(f"{path}:{lineno}: expected 'image_id,x,y'")
            try:
                ids.append(row[0])
                pts.append((float(row[1]), float(row[2])))
            except ValueError:
                raise InputError(f"{path}:{lineno}: malformed projection row {row!r}") from None
    if not ids:
        raise InputError(f"{path}: no projection rows")
    return Projection(image_ids=ids, points=np.asarray(pts))


# --- cluster assignments and priors ------------------------------------

def write_assignments(path, image_ids: Sequence[str], assignments: Sequence[int]):
    if len(image_ids) != len(assignments):
        raise InputError("image ids and assignments must align")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("image_id,cluster\n")
        for image_id, cluster in zip(image_ids, assignments):
            fh.write(f"{image_id},{int(cluster)}\n")


def read_assignments(path) -> Dict[str, int]:
    out: Dict[str, int] = {}
    with _open_read(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["image_id", "cluster"]:
            raise InputError(f"{path}:1: expected header 'image_id,cluster'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                out[row[0]] = int(row[1])
            except (IndexError, ValueError):
                raise InputError(f"{path}:{lineno}: malformed assignment row {row!r}") from None
    if not out:
        raise InputError(f"{path}: no assignment rows")
    return out


def write_region_cluster_map(path, mapping: Mapping[str, int]):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("region,cluster\n")
        for region in mapping:
            fh.write(f"{region},{int(mapping[region])}\n")


def read_region_cluster_map(path) -> Dict[str, int]:
    out: Dict[str, int] = {}
    with _open_read(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["region", "cluster"]:
            raise InputError(f"{path}:1: expected header 'region,cluster'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2 or not row[0]:
                raise InputError(f"{path}:{lineno}: expected 'region,cluster'")
            try:
                out[row[0]] = int(row[1])
            except ValueError:
                raise InputError(f"{path}:{lineno}: cluster {row[1]!r} is not an integer") from None
    if not out:
        raise InputError(f"{path}: no region rows")
    return out


def write_priors(path, priors: ClusterPriors):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for c in range(priors.k):
            fh.write(json.dumps({"cluster": c, "prior": [float(x) for x in priors.priors[c]]}) + "\n")


def read_priors(path) -> ClusterPriors:
    rows: Dict[int, List[float]] = {}
    with _open_read(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                rows[int(rec["cluster"])] = [float(x) for x in rec["prior"]]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise InputError(f"{path}:{lineno}: bad prior record ({exc})") from None
    if not rows:
        raise InputError(f"{path}: no prior records")
    if sorted(rows) != list(range(len(rows))):
        raise InputError(f"{path}: cluster ids must be contiguous 0..k-1, got {sorted(rows)}")
    return ClusterPriors(priors=np.asarray([rows[c] for c in range(len(rows))]))


# --- ground truth ------------------------------------------------------

def read_ground_truth(path, transect_map: Mapping[str, str] | None = None) -> GroundTruth:
    """Load truth sets keyed by quadrat id (species ids, not dense indices).

    An empty transect field falls back to the quadrat-id heuristic; an
    explicit transect map overrides both.
    """
    from .catalog import transect_of

    truth: Dict[str, frozenset] = {}
    transects: Dict[str, str] = {}
    with _open_read(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["quadrat_id", "transect_id", "species_ids"]:
            raise InputError(f"{path}:1: expected header 'quadrat_id,transect_id,species_ids'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3 or not row[0]:
                raise InputError(f"{path}:{lineno}: expected 'quadrat_id,transect_id,species_ids'")
            quadrat_id = row[0]
            if quadrat_id in truth:
                raise InputError(f"{path}:{lineno}: duplicate quadrat_id {quadrat_id!r}")
            try:
                species = frozenset(int(tok) for tok in row[2].split())
            except ValueError:
                raise InputError(f"{path}:{lineno}: species_ids must be space-separated integers") from None
            truth[quadrat_id] = species
            if transect_map is not None and quadrat_id in transect_map:
                transects[quadrat_id] = transect_map[quadrat_id]
            elif row[1]:
                transects[quadrat_id] = row[1]
            else:
                transects[quadrat_id] = transect_of(quadrat_id)
    if not truth:
        raise InputError(f"{path}: no ground truth rows")
    return GroundTruth(truth=truth, transects=transects)


def write_ground_truth(path, truth: GroundTruth):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
        writer.writerow(["quadrat_id", "transect_id", "species_ids"])
        for quadrat_id in truth.truth:
            species = " ".join(str(s) for s in sorted(truth.truth[quadrat_id]))
            writer.writerow([quadrat_id, truth.transects[quadrat_id], species])


# --- training frequency counts ------------------------------------------

def read_training_counts(path) -> Dict[int, int]:
    out: Dict[int, int] = {}
    with _open_read(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["species_id", "count"]:
            raise InputError(f"{path}:1: expected header 'species_id,count'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                out[int(row[0])] = int(row[1])
            except (IndexError, ValueError):
                raise InputError(f"{path}:{lineno}: malformed count row {row!r}") from None
    if not out:
        raise InputError(f"{path}: no count rows")
    return out


def write_training_counts(path, counts: Mapping[int, int]):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("species_id,count\n")
        for sid in counts:
            fh.write(f"{sid},{int(counts[sid])}\n")


# --- submissions --------------------------------------------------------

@dataclass(frozen=True)
class SubmissionRow:
    quadrat_id: str
    species_ids: tuple

    def __post_init__(self):
        ids = tuple(int(s) for s in self.species_ids)
        object.__setattr__(self, "species_ids", ids)
        if not self.quadrat_id:
            raise InputError("submission rows need a quadrat_id")
        if not ids:
            raise InputError(f"submission for {self.quadrat_id!r} has no species")
        if len(set(ids)) != len(ids):
            raise InputError(f"submission for {self.quadrat_id!r} repeats a species")


def write_submission(path, rows: Sequence[SubmissionRow]):
    if not rows:
        raise InputError("submission must contain at least one row")
    seen = set()
    for row in rows:
        if row.quadrat_id in seen:
            raise InputError(f"duplicate quadrat_id {row.quadrat_id!r} in submission")
        seen.add(row.quadrat_id)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("quadrat_id;species_ids\n")
        for row in rows:
            ids = ", ".join(str(s) for s in row.species_ids)
            fh.write(f"{row.quadrat_id};[{ids}]\n")


def read_submission(path) -> List[SubmissionRow]:
    rows: List[SubmissionRow] = []
    seen = set()
    with _open_read(path) as fh:
        header = fh.readline().rstrip("\n")
        if header != "quadrat_id;species_ids":
            raise InputError(f"{path}:1: expected header 'quadrat_id;species_ids'")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            quadrat_id, sep, rest = line.partition(";")
            if not sep or not rest.startswith("[") or not rest.endswith("]"):
                raise InputError(f"{path}:{lineno}: expected 'quadrat_id;[id1, id2, ...]'")
            if quadrat_id in seen:
                raise InputError(f"{path}:{lineno}: duplicate quadrat_id {quadrat_id!r}")
            seen.add(quadrat_id)
            body = rest[1:-1].strip()
            try:
                ids = tuple(int(tok.strip()) for tok in body.split(",")) if body else ()
            except ValueError:
                raise InputError(f"{path}:{lineno}: species ids must be integers") from None
            try:
                rows.append(SubmissionRow(quadrat_id=quadrat_id, species_ids=ids))
            except InputError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise InputError(f"{path}: no submission rows")
    return rows


# --- score report -------------------------------------------------------

def write_score_report(path, report: ScoreReport):
    payload = {
        "final": report.final,
        "n_transects": report.n_transects,
        "per_transect": {
            tid: {"mean_f1": report.per_transect[tid], "n_quadrats": report.transect_sizes[tid]}
            for tid in report.per_transect
        },
        "per_image": report.per_image,
        "missing_predictions": report.missing_predictions,
        "unknown_predictions": report.unknown_predictions,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
