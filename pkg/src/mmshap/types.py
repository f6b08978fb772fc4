"""Core domain model: tokens, samples, coalition masks, attributions.

Every other module works in terms of these types.  All of them are frozen
dataclasses: once a sample has passed :func:`validate_sample` it can be
shared freely across worker threads without synchronization.

The JSON encoding of :class:`TokenizedSample` (``to_dict``/``from_dict``)
is an external interface with fixed field names; round-tripping through it
is the identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping

from .errors import DuplicateIndex, EmptySample, UnknownModality

# Canonical modality identifiers. The set is open: any non-empty string is
# a valid modality and comparison is exact string equality.
TEXT = "text"
IMAGE = "image"

PayloadRef = Any
"""Opaque reference the oracle understands: a token id for text, a patch
rectangle for image tokens.  The engine never interprets it; only the
oracle does.  Must be JSON-serializable; sequences are canonically tuples."""


@dataclass(frozen=True)
class Token:
    """One unit of the input, either a text token or an image patch.

    Special tokens (sentence separators, classifier tokens) are marked
    ``maskable=False``; they are never masked and always receive a zero
    attribution by construction.
    """

    index: int
    modality: str
    maskable: bool
    label: str
    payload_ref: PayloadRef = None


@dataclass(frozen=True)
class TokenizedSample:
    """An ordered token sequence tagged with modality and maskability.

    ``n_text`` and ``n_image`` count *maskable* tokens per modality and are
    derived from ``tokens``; they are stored for convenience but never
    serialized.
    """

    sample_id: str
    tokens: tuple[Token, ...]
    metadata: Mapping[str, str] = field(default_factory=dict)

    @property
    def n_text(self) -> int:
        return sum(1 for t in self.tokens if t.maskable and t.modality == TEXT)

    @property
    def n_image(self) -> int:
        return sum(1 for t in self.tokens if t.maskable and t.modality == IMAGE)

    @property
    def maskable_indices(self) -> tuple[int, ...]:
        return tuple(t.index for t in self.tokens if t.maskable)

    @property
    def n_maskable(self) -> int:
        return sum(1 for t in self.tokens if t.maskable)

    def modalities(self) -> tuple[str, ...]:
        """Distinct modalities in token order of first appearance."""
        seen: dict[str, None] = {}
        for t in self.tokens:
            seen.setdefault(t.modality, None)
        return tuple(seen)

    def to_dict(self) -> dict[str, Any]:
        return {
            "sample_id": self.sample_id,
            "tokens": [
                {
                    "index": t.index,
                    "modality": t.modality,
                    "maskable": t.maskable,
                    "label": t.label,
                    "payload_ref": t.payload_ref,
                }
                for t in self.tokens
            ],
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TokenizedSample":
        tokens = tuple(
            Token(
                index=int(t["index"]),
                modality=t["modality"],
                maskable=bool(t["maskable"]),
                label=t["label"],
                payload_ref=_canonical_payload(t.get("payload_ref")),
            )
            for t in data["tokens"]
        )
        return validate_sample(
            cls(
                sample_id=data["sample_id"],
                tokens=tokens,
                metadata=dict(data.get("metadata", {})),
            )
        )


def _canonical_payload(ref: Any) -> PayloadRef:
    """JSON arrays come back as lists; store them as tuples so samples stay
    hashable-by-parts and round-trips are identities for tuple payloads."""
    if isinstance(ref, list):
        return tuple(_canonical_payload(x) for x in ref)
    return ref


def validate_sample(sample: TokenizedSample) -> TokenizedSample:
    """Check all Token/TokenizedSample invariants and return the sample.

    Raises:
        DuplicateIndex: token indices are not unique and contiguous from 0.
        EmptySample: no maskable token at all (p = 0).
        UnknownModality: a token has an empty modality identifier.
    """
    indices = [t.index for t in sample.tokens]
    if len(set(indices)) != len(indices):
        raise DuplicateIndex(f"sample {sample.sample_id!r} has repeated token indices")
    if indices != list(range(len(indices))):
        raise DuplicateIndex(
            f"sample {sample.sample_id!r} token indices are not contiguous from 0"
        )
    for t in sample.tokens:
        if not isinstance(t.modality, str) or not t.modality:
            raise UnknownModality(
                f"sample {sample.sample_id!r} token {t.index} has an empty modality"
            )
    if sample.n_maskable == 0:
        raise EmptySample(f"sample {sample.sample_id!r} has no maskable tokens")
    return sample


@dataclass(frozen=True)
class CoalitionMask:
    """Which tokens are present (unmasked) for one oracle call.

    ``bits[j]`` is True when token ``j`` is present.  Bits of non-maskable
    tokens are always True; such tokens are never masked.
    """

    bits: tuple[bool, ...]

    def __len__(self) -> int:
        return len(self.bits)

    def to_int(self) -> int:
        """Little-endian bit packing: token 0 is the least significant bit."""
        value = 0
        for j, bit in enumerate(self.bits):
            if bit:
                value |= 1 << j
        return value

    @classmethod
    def from_int(cls, value: int, n_tokens: int) -> "CoalitionMask":
        return cls(tuple(bool((value >> j) & 1) for j in range(n_tokens)))


# Test hooks: every function below notifies these callbacks for each mask it
# builds, so the suite can audit that no constructed mask ever drops a
# non-maskable token.
mask_audit_hooks: list[Callable[[TokenizedSample, CoalitionMask], None]] = []


def _audited(sample: TokenizedSample, mask: CoalitionMask) -> CoalitionMask:
    for hook in mask_audit_hooks:
        hook(sample, mask)
    return mask


def mask_for(sample: TokenizedSample, present_maskable: Iterable[int]) -> CoalitionMask:
    """Build a mask with the given maskable token indices present.

    Non-maskable tokens are always present regardless of the argument.
    """
    present = set(present_maskable)
    bits = tuple((not t.maskable) or (t.index in present) for t in sample.tokens)
    return _audited(sample, CoalitionMask(bits))


def full_mask(sample: TokenizedSample) -> CoalitionMask:
    """All tokens present: the unmasked input."""
    return _audited(sample, CoalitionMask((True,) * len(sample.tokens)))


def base_mask(sample: TokenizedSample) -> CoalitionMask:
    """All maskable tokens masked; special tokens stay in place."""
    return mask_for(sample, ())


@dataclass(frozen=True)
class ShapleyAttribution:
    """Per-token attribution values for one sample.

    ``phi`` has one entry per token (zeros for non-maskable tokens).  For
    both estimators the values satisfy efficiency:
    ``sum(phi) == full_value - base_value`` up to float round-off.
    """

    sample_id: str
    phi: tuple[float, ...]
    base_value: float
    full_value: float
    estimator: str  # "exact" | "permutation-mc"
    n_coalitions: int
    seed: int
