"""Task accuracy metrics for caption/foil pairs and rank correlation.

Three accuracy views of a pair scorer:

* pairwise accuracy: the caption must strictly outscore its foil
  (ties count as incorrect, so scores on the decision boundary never
  inflate the metric);
* threshold accuracies: caption score above the threshold, foil score at
  or below it, and their mean as the overall value;
* Spearman rank correlation with average-rank tie handling, used to relate
  per-sample correctness to the text share.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from scipy import stats as _scipy_stats

from .errors import DegenerateInput, EmptyInput, LengthMismatch, ValidationError

__all__ = [
    "PairPrediction",
    "pairwise_accuracy",
    "threshold_accuracies",
    "spearman",
]


@dataclass(frozen=True)
class PairPrediction:
    """Scores one predictor assigned to a caption/foil pair."""

    pair_id: str
    score_caption: float
    score_foil: float
    threshold: float = 0.5

    def __post_init__(self) -> None:
        for name in ("score_caption", "score_foil", "threshold"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(
                    f"pair {self.pair_id!r} has non-finite {name}"
                )


def pairwise_accuracy(preds: Sequence[PairPrediction]) -> float:
    """Fraction of pairs whose caption strictly outscores the foil."""
    if not preds:
        raise EmptyInput("no pairs to score")
    hits = sum(1 for p in preds if p.score_caption > p.score_foil)
    return hits / len(preds)


def threshold_accuracies(preds: Sequence[PairPrediction]) -> tuple[float, float, float]:
    """(acc_c, acc_f, acc): caption above threshold, foil at or below, mean.

    acc_c counts captions scored above their threshold, acc_f counts foils
    scored at or below it; the overall accuracy is the mean of the two.
    """
    if not preds:
        raise EmptyInput("no pairs to score")
    acc_c = sum(1 for p in preds if p.score_caption > p.threshold) / len(preds)
    acc_f = sum(1 for p in preds if p.score_foil <= p.threshold) / len(preds)
    return acc_c, acc_f, (acc_c + acc_f) / 2.0


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman rank correlation with average ranks on ties.

    Raises:
        LengthMismatch: sequences differ in length or hold fewer than two
            points.
        DegenerateInput: either sequence is constant, so ranks carry no
            information and the coefficient is undefined.
    """
    if len(xs) != len(ys):
        raise LengthMismatch(f"{len(xs)} x values vs {len(ys)} y values")
    if len(xs) < 2:
        raise LengthMismatch("rank correlation needs at least 2 points")
    if len(set(xs)) < 2 or len(set(ys)) < 2:
        raise DegenerateInput("rank correlation of a constant sequence is undefined")
    result = _scipy_stats.spearmanr(xs, ys)
    coefficient = getattr(result, "statistic", None)
    if coefficient is None:
        coefficient = result.correlation
    return float(coefficient)
