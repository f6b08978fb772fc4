"""Exception hierarchy shared by all mmshap modules.

Error classes are named after the condition they report so callers can
catch precisely what they can handle.  Everything derives from
:class:`MMShapError`.
"""

from __future__ import annotations


class MMShapError(Exception):
    """Base class for all errors raised by this package."""


# ---------------------------------------------------------------------------
# Sample validation


class ValidationError(MMShapError):
    """A sample or one of its tokens violates a structural invariant."""


class DuplicateIndex(ValidationError):
    """Two tokens in one sample share the same index."""


class EmptySample(ValidationError):
    """The sample has no maskable tokens, so there is nothing to attribute."""


class UnknownModality(ValidationError):
    """A token carries an empty or malformed modality identifier."""


class NoMaskableText(ValidationError):
    """Sample construction was asked to build a sample whose text tokens are all special."""


# ---------------------------------------------------------------------------
# Oracle protocol


class OracleError(MMShapError):
    """Base class for failures while talking to a value oracle."""


class UnknownSample(OracleError):
    """A request referenced a sample the oracle has not registered."""


class ProtocolViolation(OracleError):
    """The oracle broke the wire contract (malformed frame, non-finite value,
    response/request mismatch)."""


class OracleTimeout(OracleError):
    """The oracle did not answer within the configured deadline."""


class LengthMismatch(OracleError):
    """A per-token parameter vector does not match the sample's token count."""


class IndexOutOfRange(OracleError):
    """An interaction pair references a token index that is missing or not maskable."""


# ---------------------------------------------------------------------------
# Estimation


class EstimationError(MMShapError):
    """Base class for Shapley estimation failures."""


class TooManyTokens(EstimationError):
    """Exact enumeration was requested for more maskable tokens than the configured limit."""


class BudgetTooSmall(EstimationError):
    """The Monte-Carlo coalition budget cannot cover a single full permutation."""


# ---------------------------------------------------------------------------
# Scoring and metrics


class AllZeroContributions(MMShapError):
    """Every token received zero attribution; modality proportions are undefined.

    Reported as a distinct outcome instead of fabricating a 50/50 split,
    so dataset aggregates can skip and count these samples.
    """


class TokenCountMismatch(MMShapError):
    """An attribution vector and a sample disagree on token count."""


class DegenerateModalities(MMShapError):
    """A multimodality proportion was requested for a sample with fewer than
    two distinct modalities; the proportion would always be trivially 100%."""


class EmptyInput(MMShapError):
    """A metric or aggregate was called with no data."""


class DegenerateInput(MMShapError):
    """A rank correlation was requested for a constant sequence; the
    coefficient is undefined."""


# ---------------------------------------------------------------------------
# Harness


class ParseError(MMShapError):
    """A dataset line could not be parsed. Carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class MissingAttributions(MMShapError):
    """A report lacks the per-token values the renderer needs."""


class ConfigError(MMShapError):
    """The run configuration is unusable (bad oracle spec, bad paths, bad values)."""
