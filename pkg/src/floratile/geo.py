"""Species admissibility masks from geotagged observations.

For each species the observation closest to a reference point (by squared
Euclidean distance in raw degree space, not great-circle) is tested for
containment in any target region polygon. Species whose nearest observation
falls outside every region, or that have no geotagged observation at all,
are masked out.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .catalog import SpeciesCatalog
from .errors import InputError, InvariantViolation

Point = Tuple[float, float]  # (lat, lon)

DEFAULT_REFERENCE_POINT: Point = (44.0, 4.0)


@dataclass(frozen=True)
class Observation:
    species_id: int
    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise InputError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise InputError(f"longitude {self.lon} outside [-180, 180]")


def _cross(ox, oy, ax, ay, bx, by) -> float:
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


def _on_segment(px, py, ax, ay, bx, by) -> bool:
    if _cross(ax, ay, bx, by, px, py) != 0.0:
        return False
    return min(ax, bx) <= px <= max(ax, bx) and min(ay, by) <= py <= max(ay, by)


def _proper_intersection(p1, p2, p3, p4) -> bool:
    d1 = _cross(p3[0], p3[1], p4[0], p4[1], p1[0], p1[1])
    d2 = _cross(p3[0], p3[1], p4[0], p4[1], p2[0], p2[1])
    d3 = _cross(p1[0], p1[1], p2[0], p2[1], p3[0], p3[1])
    d4 = _cross(p1[0], p1[1], p2[0], p2[1], p4[0], p4[1])
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0:
        return True
    # collinear overlap also counts as self-intersection
    if d1 == 0 and d2 == 0 and d3 == 0 and d4 == 0:
        xs1, xs2 = sorted((p1[0], p2[0])), sorted((p3[0], p4[0]))
        ys1, ys2 = sorted((p1[1], p2[1])), sorted((p3[1], p4[1]))
        return (xs1[0] < xs2[1] and xs2[0] < xs1[1]) or (ys1[0] < ys2[1] and ys2[0] < ys1[1])
    return False


@dataclass(frozen=True)
class GeoRegion:
    """Simple polygon over (lat, lon) vertices; the last edge closes implicitly."""

    name: str
    polygon: tuple

    def __post_init__(self):
        verts = tuple((float(a), float(b)) for a, b in self.polygon)
        object.__setattr__(self, "polygon", verts)
        if not self.name:
            raise InputError("region name must be non-empty")
        if len(verts) < 3:
            raise InputError(f"region {self.name!r}: polygon needs at least 3 vertices")
        m = len(verts)
        for i in range(m):
            if verts[i] == verts[(i + 1) % m]:
                raise InputError(f"region {self.name!r}: zero-length edge at vertex {i}")
        for i in range(m):
            a1, a2 = verts[i], verts[(i + 1) % m]
            for j in range(i + 1, m):
                # adjacent edges share a vertex by construction
                if j == i or (j + 1) % m == i or (i + 1) % m == j:
                    continue
                b1, b2 = verts[j], verts[(j + 1) % m]
                if _proper_intersection(a1, a2, b1, b2):
                    raise InputError(f"region {self.name!r}: edges {i} and {j} intersect")


@dataclass
class SpeciesMask:
    """Boolean admissibility per dense index."""

    allowed: np.ndarray
    allowed_count: int

    def __post_init__(self):
        self.allowed = np.asarray(self.allowed, dtype=bool)
        count = int(self.allowed.sum())
        if count != self.allowed_count:
            raise InvariantViolation(
                f"allowed_count {self.allowed_count} does not match mask ({count} true entries)"
            )
        if count < 1:
            raise InvariantViolation("species mask must allow at least one species")


def sq_dist(a: Point, b: Point) -> float:
    """Squared Euclidean distance in raw degree space."""
    return (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2


def nearest_observation(obs: Sequence[Observation], ref: Point) -> Observation:
    """The observation minimizing sq_dist to ref; ties keep input order."""
    if not obs:
        raise InputError("species has no geotagged observations")
    return min(obs, key=lambda o: sq_dist((o.lat, o.lon), ref))


def nearest_per_species(observations: Iterable[Observation], ref: Point) -> Dict[int, Observation]:
    """Group observations by species and keep each species' nearest to ref."""
    best: Dict[int, Observation] = {}
    for o in observations:
        cur = best.get(o.species_id)
        if cur is None or sq_dist((o.lat, o.lon), ref) < sq_dist((cur.lat, cur.lon), ref):
            best[o.species_id] = o
    return best


def contains(region: GeoRegion, p: Point) -> bool:
    """Ray-casting point-in-polygon; boundary points count as inside."""
    lat, lon = float(p[0]), float(p[1])
    verts = region.polygon
    m = len(verts)
    inside = False
    for i in range(m):
        a_lat, a_lon = verts[i]
        b_lat, b_lon = verts[(i + 1) % m]
        if _on_segment(lon, lat, a_lon, a_lat, b_lon, b_lat):
            return True
        # horizontal ray towards +lon; half-open rule avoids double-counted vertices
        if (a_lat > lat) != (b_lat > lat):
            t = (lat - a_lat) / (b_lat - a_lat)
            lon_cross = a_lon + t * (b_lon - a_lon)
            if lon < lon_cross:
                inside = not inside
    return inside


def build_mask(
    nearest: Mapping[int, Observation],
    regions: Sequence[GeoRegion],
    catalog: SpeciesCatalog,
) -> SpeciesMask:
    """Allow species whose nearest observation lies in any region.

    Species absent from ``nearest`` (no geodata) are disallowed.
    """
    if not regions:
        raise InputError("build_mask needs at least one region")
    allowed = np.zeros(len(catalog), dtype=bool)
    for i, species_id in enumerate(catalog.species_ids):
        obs = nearest.get(species_id)
        if obs is None:
            continue
        point = (obs.lat, obs.lon)
        allowed[i] = any(contains(region, point) for region in regions)
    count = int(allowed.sum())
    if count < 1:
        raise InvariantViolation("geolocation mask would disallow every species; check regions file")
    return SpeciesMask(allowed=allowed, allowed_count=count)


def apply_mask(probs, mask: SpeciesMask, renormalize: bool = True):
    """Drop masked-out entries from a sparse vector, optionally renormalizing.

    Returns an empty vector when nothing survives; the caller decides the
    fallback (typically unmasked top-1).
    """
    size = mask.allowed.shape[0]
    kept = []
    for idx, prob in probs:
        if not 0 <= idx < size:
            raise InputError(f"dense index {idx} outside mask of size {size}")
        if mask.allowed[idx]:
            kept.append((int(idx), float(prob)))
    if not kept:
        return []
    if renormalize:
        total = sum(p for _, p in kept)
        if total > 0.0:
            kept = [(idx, p / total) for idx, p in kept]
    return kept
