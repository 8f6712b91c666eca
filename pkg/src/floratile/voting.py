"""Image-level label selection from per-tile probability vectors.

Each tile contributes its top-K species as votes; species are ranked by
(vote count, summed probability, dense index) and filtered by a minimum
vote count. The naive frequency baseline lives here too.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple

from .errors import InputError, InvariantViolation

SparseVector = List[Tuple[int, float]]

_MASS_TOL = 1e-6


def _normalize_entries(entries) -> SparseVector:
    out = []
    for item in entries:
        idx, prob = item
        out.append((int(idx), float(prob)))
    return out


@dataclass
class TilePrediction:
    """Sparse class-probability vector for one tile of one image.

    ``probs`` is kept sorted by descending probability (ties by lower dense
    index). A record flagged ``complete`` carries a full distribution and
    must sum to one.
    """

    image_id: str
    row: int
    col: int
    probs: SparseVector
    complete: bool = False

    def __post_init__(self):
        if not self.image_id:
            raise InputError("tile prediction must carry a non-empty image_id")
        if self.row < 0 or self.col < 0:
            raise InputError(f"tile ({self.row}, {self.col}) of {self.image_id!r}: negative grid coordinates")
        entries = _normalize_entries(self.probs)
        if not entries:
            raise InputError(f"tile of {self.image_id!r} carries no probability entries")
        seen = set()
        for idx, prob in entries:
            if idx < 0:
                raise InputError(f"tile of {self.image_id!r}: negative dense index {idx}")
            if idx in seen:
                raise InputError(f"tile of {self.image_id!r}: duplicate dense index {idx}")
            seen.add(idx)
            if not 0.0 < prob <= 1.0:
                raise InputError(f"tile of {self.image_id!r}: probability {prob} outside (0, 1]")
        entries.sort(key=lambda e: (-e[1], e[0]))
        mass = sum(p for _, p in entries)
        if self.complete and abs(mass - 1.0) > _MASS_TOL:
            raise InputError(
                f"tile of {self.image_id!r} declared complete but probabilities sum to {mass!r}"
            )
        if mass > 1.0 + _MASS_TOL:
            raise InputError(f"tile of {self.image_id!r}: probability mass {mass!r} exceeds 1")
        self.probs = entries


@dataclass
class VoteTally:
    """Per-species vote counts and probability mass over one image's tiles."""

    votes: Dict[int, int] = field(default_factory=dict)
    mass: Dict[int, float] = field(default_factory=dict)
    n_tiles: int = 0

    def species(self) -> List[int]:
        return list(self.votes)


def top_k_of_tile(pred: TilePrediction, k: int) -> SparseVector:
    """The k highest-probability entries of a tile; ties favor lower index."""
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    ordered = sorted(pred.probs, key=lambda e: (-e[1], e[0]))
    return ordered[:k]


def tally_votes(preds: Sequence[TilePrediction], k: int) -> VoteTally:
    """Count, per species, the tiles whose top-K contains it; sum its mass there."""
    if not preds:
        raise InvariantViolation("tally_votes needs at least one tile")
    image_ids = {p.image_id for p in preds}
    if len(image_ids) != 1:
        raise InvariantViolation(f"tally_votes got tiles from multiple images: {sorted(image_ids)}")
    tally = VoteTally(n_tiles=len(preds))
    for pred in preds:
        for idx, prob in top_k_of_tile(pred, k):
            tally.votes[idx] = tally.votes.get(idx, 0) + 1
            tally.mass[idx] = tally.mass.get(idx, 0.0) + prob
    return tally


def _rank_key(tally: VoteTally):
    return lambda idx: (-tally.votes[idx], -tally.mass[idx], idx)


def select_labels(tally: VoteTally, min_votes: int = 2, max_labels: int = 10) -> List[int]:
    """Rank tallied species and keep those with enough votes.

    Ordering is (votes desc, mass desc, index asc). If the vote filter
    removes everything, the single best-ranked species is returned so the
    prediction is never empty.
    """
    if min_votes < 1 or max_labels < 1:
        raise InputError("min_votes and max_labels must be >= 1")
    if not tally.votes:
        raise InvariantViolation("select_labels needs a non-empty tally")
    ranked = sorted(tally.votes, key=_rank_key(tally))
    kept = [idx for idx in ranked if tally.votes[idx] >= min_votes]
    if not kept:
        return [ranked[0]]
    return kept[:max_labels]


def naive_baseline(training_freq: Mapping[int, int], k: int) -> List[int]:
    """The k globally most frequent species; the same answer for every image."""
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    if not training_freq:
        raise InputError("naive baseline needs at least one species count")
    ranked = sorted(training_freq, key=lambda idx: (-training_freq[idx], idx))
    return ranked[:k]
