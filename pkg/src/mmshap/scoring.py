"""Multimodality scoring: per-modality attribution mass and its proportions.

A modality's contribution is the sum of absolute Shapley values over its
tokens; the multimodality score is each modality's share of the total.
Magnitude matters here, not sign: a token that pushes the prediction down
is still evidence the model used that modality.

The text share is reported as T-SHAP (a percent) and, for the common
two-modality case, V-SHAP = 100 - T-SHAP is its image complement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import (
    AllZeroContributions,
    DegenerateModalities,
    EmptyInput,
    TokenCountMismatch,
)
from .types import TEXT, ShapleyAttribution, TokenizedSample

__all__ = [
    "MMShapScore",
    "DatasetMMStats",
    "mm_shap",
    "aggregate",
    "format_percent",
]


@dataclass(frozen=True)
class MMShapScore:
    """Modality attribution shares for one sample.

    ``phi_abs_by_modality`` holds each modality's absolute attribution mass;
    ``proportion_by_modality`` holds its share of the total, in [0, 1],
    summing to 1 over the modalities present.
    """

    sample_id: str
    phi_abs_by_modality: Mapping[str, float]
    proportion_by_modality: Mapping[str, float]

    @property
    def t_shap(self) -> float:
        """Text share as a percent."""
        return 100.0 * self.proportion_by_modality.get(TEXT, 0.0)

    @property
    def v_shap(self) -> float:
        """Non-text share as a percent; the image share when two modalities."""
        return 100.0 - self.t_shap


@dataclass(frozen=True)
class DatasetMMStats:
    """Dataset-level summary of per-sample text shares for one split."""

    split: str  # "caption" | "foil" | "all"
    mean_t_shap: float
    stdev_t_shap: float
    per_sample: tuple[MMShapScore, ...]

    @property
    def n_samples(self) -> int:
        return len(self.per_sample)


def mm_shap(attr: ShapleyAttribution, sample: TokenizedSample) -> MMShapScore:
    """Fold an attribution into per-modality masses and proportions.

    Raises:
        TokenCountMismatch: attribution and sample disagree on token count.
        DegenerateModalities: the sample has fewer than two distinct
            modalities, so a cross-modality proportion is meaningless.
        AllZeroContributions: every token's value is zero, so proportions
            are undefined.  This is a reported outcome; callers must not
            substitute an artificial balanced split.
    """
    if len(attr.phi) != len(sample.tokens):
        raise TokenCountMismatch(
            f"attribution has {len(attr.phi)} values for "
            f"{len(sample.tokens)} tokens of sample {sample.sample_id!r}"
        )
    modalities = sample.modalities()
    if len(modalities) < 2:
        raise DegenerateModalities(
            f"sample {sample.sample_id!r} uses only {modalities!r}; "
            "a multimodality proportion needs at least two modalities"
        )
    phi_abs: dict[str, float] = {m: 0.0 for m in modalities}
    for token, value in zip(sample.tokens, attr.phi):
        # Non-maskable tokens are outside the coalition game; any value an
        # external attribution assigns them is not modality evidence.
        if token.maskable:
            phi_abs[token.modality] += abs(value)
    total = sum(phi_abs.values())
    if total == 0.0:
        raise AllZeroContributions(
            f"sample {sample.sample_id!r} has zero total attribution mass"
        )
    proportions = {m: mass / total for m, mass in phi_abs.items()}
    return MMShapScore(
        sample_id=sample.sample_id,
        phi_abs_by_modality=phi_abs,
        proportion_by_modality=proportions,
    )


def aggregate(scores: Sequence[MMShapScore], split: str = "all") -> DatasetMMStats:
    """Mean and population standard deviation of the text share.

    Order-independent: any permutation of ``scores`` yields identical
    statistics.
    """
    if not scores:
        raise EmptyInput(f"no scores to aggregate for split {split!r}")
    values = [score.t_shap for score in scores]
    # fsum is exact, so the statistics cannot drift with input order.
    mean = math.fsum(values) / len(values)
    variance = math.fsum((v - mean) ** 2 for v in values) / len(values)
    return DatasetMMStats(
        split=split,
        mean_t_shap=mean,
        stdev_t_shap=variance**0.5,
        per_sample=tuple(scores),
    )


def format_percent(value: float) -> str:
    """Render a percent to one decimal, the precision used in reports."""
    return f"{value:.1f}"
