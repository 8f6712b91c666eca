"""Species label space, region registry, and transect grouping.

The catalog maps opaque external species identifiers to dense 0-based
indices (file order, so indices stay stable regardless of id magnitude).
Regions are matched against quadrat ids by longest prefix; transects are
derived from quadrat ids by dropping the trailing token unless an explicit
mapping overrides the rule.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence

from .errors import InputError, UnknownRegionError

DEFAULT_TRANSECT_DELIMITER = "-"


class SpeciesCatalog:
    """Bijection between external species ids and dense indices 0..S-1."""

    def __init__(self, species_ids: Sequence[int]):
        if len(species_ids) == 0:
            raise InputError("species catalog must contain at least one species")
        self._ids: List[int] = [int(s) for s in species_ids]
        self._index: Dict[int, int] = {}
        for i, sid in enumerate(self._ids):
            if sid in self._index:
                raise InputError(f"duplicate species_id {sid} in catalog")
            self._index[sid] = i

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, species_id: int) -> bool:
        return species_id in self._index

    def dense_index(self, species_id: int) -> int:
        try:
            return self._index[species_id]
        except KeyError:
            raise InputError(f"species_id {species_id} not in catalog") from None

    def species_id(self, dense_index: int) -> int:
        if not 0 <= dense_index < len(self._ids):
            raise InputError(f"dense index {dense_index} out of range 0..{len(self._ids) - 1}")
        return self._ids[dense_index]

    @property
    def species_ids(self) -> List[int]:
        return list(self._ids)


def load_catalog(path) -> SpeciesCatalog:
    """Load a species catalog from a CSV with header ``species_id``."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"{path}: file not found")
    ids: List[int] = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["species_id"]:
            raise InputError(f"{path}:1: expected header 'species_id', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 1:
                raise InputError(f"{path}:{lineno}: expected a single species_id column")
            try:
                ids.append(int(row[0]))
            except ValueError:
                raise InputError(f"{path}:{lineno}: species_id {row[0]!r} is not an integer") from None
    if not ids:
        raise InputError(f"{path}: catalog file has no species rows")
    try:
        return SpeciesCatalog(ids)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


@dataclass(frozen=True)
class RegionRegistry:
    """Ordered list of region name prefixes; overlaps resolved by longest match."""

    regions: tuple

    def __post_init__(self):
        names = list(self.regions)
        object.__setattr__(self, "regions", tuple(names))
        if not names:
            raise InputError("region registry must contain at least one region")
        seen = set()
        for name in names:
            if not name:
                raise InputError("region names must be non-empty")
            if name in seen:
                raise InputError(f"duplicate region name {name!r}")
            seen.add(name)

    def __iter__(self):
        return iter(self.regions)

    def __len__(self) -> int:
        return len(self.regions)


@dataclass(frozen=True)
class QuadratRecord:
    """Metadata for one quadrat image."""

    quadrat_id: str
    region: str
    transect_id: str
    width_px: int
    height_px: int

    def __post_init__(self):
        if self.width_px <= 0 or self.height_px <= 0:
            raise InputError(
                f"quadrat {self.quadrat_id!r}: pixel dimensions must be positive, "
                f"got {self.width_px}x{self.height_px}"
            )


def parse_region(quadrat_id: str, registry: RegionRegistry) -> str:
    """Return the registry entry that is the longest prefix of ``quadrat_id``."""
    best = None
    for name in registry:
        if quadrat_id.startswith(name) and (best is None or len(name) > len(best)):
            best = name
    if best is None:
        raise UnknownRegionError(quadrat_id)
    return best


def transect_of(quadrat_id: str, delimiter: str = DEFAULT_TRANSECT_DELIMITER) -> str:
    """Derive a transect key by dropping the final delimiter-separated token.

    A quadrat id without the delimiter is its own transect.
    """
    if not quadrat_id:
        raise InputError("quadrat_id must be non-empty")
    head, sep, _ = quadrat_id.rpartition(delimiter)
    return head if sep else quadrat_id
