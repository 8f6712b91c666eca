"""Two-level macro-averaged F1 per sample.

Per-image F1 is the harmonic mean of precision and recall over predicted
vs. true species sets. Image scores are averaged within each transect, and
those transect means are averaged again for the final score, so transects
carry equal weight regardless of size.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Mapping, Set

from .errors import InputError


@dataclass
class GroundTruth:
    """Truth species set and transect id per quadrat."""

    truth: Dict[str, FrozenSet[int]]
    transects: Dict[str, str]

    def __post_init__(self):
        if set(self.truth) != set(self.transects):
            raise InputError("ground truth and transect maps must cover the same quadrats")
        self.truth = {q: frozenset(s) for q, s in self.truth.items()}

    def __len__(self) -> int:
        return len(self.truth)


@dataclass
class ScoreReport:
    final: float
    per_transect: Dict[str, float]
    transect_sizes: Dict[str, int]
    per_image: Dict[str, float]
    n_transects: int
    missing_predictions: List[str] = field(default_factory=list)
    unknown_predictions: List[str] = field(default_factory=list)


def image_f1(pred: Set[int], truth: Set[int], both_empty_value: float = 1.0) -> float:
    """Harmonic mean of precision and recall for one image.

    Two empty sets score ``both_empty_value`` (default 1: a correctly
    predicted absence); when precision + recall is zero the score is 0.
    """
    pred = set(pred)
    truth = set(truth)
    if not pred and not truth:
        return both_empty_value
    tp = len(pred & truth)
    fp = len(pred - truth)
    fn = len(truth - pred)
    denom = 2 * tp + fp + fn
    return 2.0 * tp / denom if denom else 0.0


def final_score(
    predictions: Mapping[str, Set[int]],
    truth: GroundTruth,
    both_empty_value: float = 1.0,
) -> ScoreReport:
    """Average image F1 within transects, then average the transect means.

    Quadrats without a prediction score as empty sets and are flagged;
    predictions for unknown quadrats are excluded with a warning.
    """
    unknown = sorted(set(predictions) - set(truth.truth))
    if unknown:
        warnings.warn(f"ignoring predictions for {len(unknown)} unknown quadrat(s)", stacklevel=2)
    missing = sorted(set(truth.truth) - set(predictions))

    per_image: Dict[str, float] = {}
    grouped: Dict[str, List[str]] = {}
    for quadrat_id in sorted(truth.truth):
        pred = set(predictions.get(quadrat_id, ()))
        per_image[quadrat_id] = image_f1(pred, truth.truth[quadrat_id], both_empty_value)
        grouped.setdefault(truth.transects[quadrat_id], []).append(quadrat_id)

    per_transect = {
        tid: sum(per_image[q] for q in quadrats) / len(quadrats)
        for tid, quadrats in sorted(grouped.items())
    }
    transect_sizes = {tid: len(quadrats) for tid, quadrats in sorted(grouped.items())}
    final = sum(per_transect.values()) / len(per_transect) if per_transect else 0.0
    return ScoreReport(
        final=final,
        per_transect=per_transect,
        transect_sizes=transect_sizes,
        per_image=per_image,
        n_transects=len(per_transect),
        missing_predictions=missing,
        unknown_predictions=unknown,
    )
