"""Value oracles: the black-box functions val(S) that Shapley estimation probes.

An oracle answers batches of coalition-value requests for samples it has
registered.  Real models attach out of process through the wire client in
:mod:`mmshap.wire`; this module ships the in-process contract plus a family
of deterministic synthetic oracles with closed-form Shapley values, used
for testing, calibration, and the self test.

All oracles must be deterministic: the same (sample, mask) pair yields the
same value for the lifetime of the oracle.  Stochastic models must pin
their own seeds behind the protocol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from hashlib import blake2b
from threading import Lock
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import (
    ConfigError,
    IndexOutOfRange,
    LengthMismatch,
    ProtocolViolation,
    UnknownSample,
)
from .types import IMAGE, TEXT, CoalitionMask, TokenizedSample

__all__ = [
    "OracleRequest",
    "OracleResponse",
    "RealizedToken",
    "RegistrationResult",
    "ValueOracle",
    "SyntheticOracle",
    "LinearOracle",
    "DerivedLinearOracle",
    "InteractionOracle",
    "UnimodalOracle",
    "BalancedOracle",
    "ConstantOracle",
    "AffineOracle",
    "SumOracle",
    "BUILTIN_ORACLES",
    "make_builtin_oracle",
]


@dataclass(frozen=True)
class OracleRequest:
    """One coalition-value query: which sample, which tokens are present."""

    sample_id: str
    mask: CoalitionMask
    request_id: int


@dataclass(frozen=True)
class OracleResponse:
    """The oracle's answer to one request; matching is by request_id."""

    request_id: int
    value: float


@dataclass(frozen=True)
class RealizedToken:
    """A text token as the oracle's own tokenizer produced it."""

    label: str
    special: bool = False


@dataclass(frozen=True)
class RegistrationResult:
    """Outcome of registering a sample.

    ``realized_tokens`` is non-None when the oracle tokenizes text itself
    and the caller should rebuild its sample around that tokenization.
    """

    sample_id: str
    realized_tokens: tuple[RealizedToken, ...] | None = None


class ValueOracle:
    """Contract every oracle implements.

    ``evaluate`` is the only query API; a single evaluation is a batch of
    one.  ``batch_limit`` caps how many requests one batch may carry.
    ``score_type`` declares whether full-input values are probabilities
    (threshold metrics apply) or unbounded scores (ranking metrics only).
    """

    batch_limit: int = 1024
    score_type: str = "unbounded"  # "unbounded" | "probability"

    def register(
        self, sample: TokenizedSample, assets: Mapping[str, Any] | None = None
    ) -> RegistrationResult:
        raise NotImplementedError

    def evaluate(self, requests: Sequence[OracleRequest]) -> list[OracleResponse]:
        raise NotImplementedError

    def close(self) -> None:
        return None

    def __enter__(self) -> "ValueOracle":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


class SyntheticOracle(ValueOracle):
    """In-process oracle base: registry bookkeeping plus finiteness checks.

    Subclasses implement ``_value(sample, mask)`` and optionally
    ``_check(sample)`` for registration-time validation.
    """

    def __init__(self) -> None:
        self._samples: dict[str, TokenizedSample] = {}
        self._lock = Lock()

    def _check(self, sample: TokenizedSample) -> None:
        return None

    def _value(self, sample: TokenizedSample, mask: CoalitionMask) -> float:
        raise NotImplementedError

    def register(
        self, sample: TokenizedSample, assets: Mapping[str, Any] | None = None
    ) -> RegistrationResult:
        self._check(sample)
        with self._lock:
            self._samples[sample.sample_id] = sample
        return RegistrationResult(sample_id=sample.sample_id)

    def sample(self, sample_id: str) -> TokenizedSample:
        with self._lock:
            found = self._samples.get(sample_id)
        if found is None:
            raise UnknownSample(f"sample {sample_id!r} was never registered")
        return found

    def evaluate(self, requests: Sequence[OracleRequest]) -> list[OracleResponse]:
        responses = []
        for req in requests:
            sample = self.sample(req.sample_id)
            if len(req.mask) != len(sample.tokens):
                raise LengthMismatch(
                    f"mask has {len(req.mask)} bits, sample has {len(sample.tokens)} tokens"
                )
            value = float(self._value(sample, req.mask))
            if not math.isfinite(value):
                raise ProtocolViolation(
                    f"oracle produced a non-finite value {value!r} for sample "
                    f"{req.sample_id!r}"
                )
            responses.append(OracleResponse(request_id=req.request_id, value=value))
        return responses


def _present_maskable(sample: TokenizedSample, mask: CoalitionMask) -> tuple[int, ...]:
    return tuple(
        t.index for t in sample.tokens if t.maskable and mask.bits[t.index]
    )


class LinearOracle(SyntheticOracle):
    """Additive game: val(S) = bias + sum of weights over present maskable tokens.

    Closed form: the exact Shapley value of maskable token j is weights[j].
    """

    def __init__(self, weights: Sequence[float], bias: float = 0.0) -> None:
        super().__init__()
        self.weights = tuple(float(w) for w in weights)
        self.bias = float(bias)

    def _check(self, sample: TokenizedSample) -> None:
        if len(self.weights) != len(sample.tokens):
            raise LengthMismatch(
                f"{len(self.weights)} weights for {len(sample.tokens)} tokens"
            )

    def _value(self, sample: TokenizedSample, mask: CoalitionMask) -> float:
        return self.bias + sum(
            self.weights[j] for j in _present_maskable(sample, mask)
        )


def derived_weights(
    sample: TokenizedSample, low: float = 0.5, high: float = 1.5, tag: int = 0x1EA5
) -> tuple[float, ...]:
    """Per-token weights derived deterministically from the sample id alone.

    Weights are positive and bounded away from zero so the induced game
    never has an all-zero attribution.  Non-maskable tokens get weight 0.
    """
    digest = blake2b(sample.sample_id.encode("utf-8"), digest_size=8).digest()
    gen = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([tag, int.from_bytes(digest, "big")]))
    )
    draws = gen.uniform(low, high, size=len(sample.tokens))
    return tuple(
        float(draws[t.index]) if t.maskable else 0.0 for t in sample.tokens
    )


class DerivedLinearOracle(SyntheticOracle):
    """Linear game whose weights are a deterministic function of sample_id.

    Lets dataset-level runs use a linear oracle without shipping per-sample
    weight tables: registering the same sample id always yields the same
    weights, independent of dataset order or worker count.
    """

    def __init__(self, low: float = 0.5, high: float = 1.5, bias: float = 0.0) -> None:
        super().__init__()
        self.low = float(low)
        self.high = float(high)
        self.bias = float(bias)
        self._weights: dict[str, tuple[float, ...]] = {}

    def register(
        self, sample: TokenizedSample, assets: Mapping[str, Any] | None = None
    ) -> RegistrationResult:
        result = super().register(sample, assets)
        with self._lock:
            self._weights[sample.sample_id] = derived_weights(
                sample, self.low, self.high
            )
        return result

    def _value(self, sample: TokenizedSample, mask: CoalitionMask) -> float:
        weights = self._weights[sample.sample_id]
        return self.bias + sum(weights[j] for j in _present_maskable(sample, mask))


class InteractionOracle(SyntheticOracle):
    """Pure pairwise game: val(S) = sum of strengths over pairs fully inside S.

    Closed form: each pair's strength splits evenly between its two tokens;
    tokens in no pair are dummies with Shapley value 0.
    """

    def __init__(self, pairs: Sequence[tuple[int, int, float]]) -> None:
        super().__init__()
        self.pairs = tuple((int(i), int(j), float(s)) for i, j, s in pairs)

    def _check(self, sample: TokenizedSample) -> None:
        maskable = set(sample.maskable_indices)
        for i, j, _ in self.pairs:
            for idx in (i, j):
                if idx not in maskable:
                    raise IndexOutOfRange(
                        f"pair index {idx} is not a maskable token of sample "
                        f"{sample.sample_id!r}"
                    )

    def _value(self, sample: TokenizedSample, mask: CoalitionMask) -> float:
        bits = mask.bits
        return sum(s for i, j, s in self.pairs if bits[i] and bits[j])


class UnimodalOracle(SyntheticOracle):
    """Wraps an inner oracle so the value ignores every other modality.

    Masks are projected before delegation: present maskable tokens outside
    the kept modality are treated as absent.  Flipping any such token's bit
    therefore never changes the value, making those tokens exact dummies.
    """

    def __init__(self, keep_modality: str, inner: SyntheticOracle) -> None:
        super().__init__()
        self.keep_modality = keep_modality
        self.inner = inner

    def register(
        self, sample: TokenizedSample, assets: Mapping[str, Any] | None = None
    ) -> RegistrationResult:
        self.inner.register(sample, assets)
        return super().register(sample, assets)

    def _value(self, sample: TokenizedSample, mask: CoalitionMask) -> float:
        # Non-maskable bits stay true; maskable bits survive only in the
        # kept modality.
        projected = CoalitionMask(
            tuple(
                (not t.maskable) or (bit and t.modality == self.keep_modality)
                for t, bit in zip(sample.tokens, mask.bits)
            )
        )
        return self.inner._value(sample, projected)


class BalancedOracle(SyntheticOracle):
    """Mirror game that is exactly symmetric between text and image.

    With x_T the fraction of maskable text tokens present and x_I the image
    counterpart, val(S) = x_T + x_I + x_T * x_I.  Tokens within a modality
    are exchangeable, and the game is invariant under swapping the two
    modalities, so the exact modality shares are equal: text receives half
    of the total absolute attribution regardless of token counts.
    """

    def _fractions(self, sample: TokenizedSample, mask: CoalitionMask) -> tuple[float, float]:
        n_text = sample.n_text
        n_image = sample.n_image
        present = _present_maskable(sample, mask)
        modality = {t.index: t.modality for t in sample.tokens}
        k_text = sum(1 for j in present if modality[j] == TEXT)
        k_image = sum(1 for j in present if modality[j] == IMAGE)
        x_t = k_text / n_text if n_text else 0.0
        x_i = k_image / n_image if n_image else 0.0
        return x_t, x_i

    def _value(self, sample: TokenizedSample, mask: CoalitionMask) -> float:
        x_t, x_i = self._fractions(sample, mask)
        return x_t + x_i + x_t * x_i


class ConstantOracle(SyntheticOracle):
    """val(S) = c for every coalition; every Shapley value is exactly zero."""

    def __init__(self, value: float = 1.0) -> None:
        super().__init__()
        self.value = float(value)

    def _value(self, sample: TokenizedSample, mask: CoalitionMask) -> float:
        return self.value


class AffineOracle(SyntheticOracle):
    """val(S) = scale * inner(S) + shift; scale must be non-zero.

    Used to check that modality proportions are invariant under affine
    transforms of the value function.
    """

    def __init__(self, inner: SyntheticOracle, scale: float, shift: float = 0.0) -> None:
        super().__init__()
        if scale == 0.0:
            raise ConfigError("affine oracle scale must be non-zero")
        self.inner = inner
        self.scale = float(scale)
        self.shift = float(shift)

    def register(
        self, sample: TokenizedSample, assets: Mapping[str, Any] | None = None
    ) -> RegistrationResult:
        self.inner.register(sample, assets)
        return super().register(sample, assets)

    def _value(self, sample: TokenizedSample, mask: CoalitionMask) -> float:
        return self.scale * self.inner._value(sample, mask) + self.shift


class SumOracle(SyntheticOracle):
    """val(S) = a(S) + b(S); Shapley values add game by game."""

    def __init__(self, a: SyntheticOracle, b: SyntheticOracle) -> None:
        super().__init__()
        self.a = a
        self.b = b

    def register(
        self, sample: TokenizedSample, assets: Mapping[str, Any] | None = None
    ) -> RegistrationResult:
        self.a.register(sample, assets)
        self.b.register(sample, assets)
        return super().register(sample, assets)

    def _value(self, sample: TokenizedSample, mask: CoalitionMask) -> float:
        return self.a._value(sample, mask) + self.b._value(sample, mask)


BUILTIN_ORACLES: dict[str, Any] = {
    "linear": lambda: DerivedLinearOracle(),
    "unimodal-text": lambda: UnimodalOracle(TEXT, DerivedLinearOracle()),
    "unimodal-image": lambda: UnimodalOracle(IMAGE, DerivedLinearOracle()),
    "balanced": lambda: BalancedOracle(),
    "constant": lambda: ConstantOracle(1.0),
}


def make_builtin_oracle(name: str) -> SyntheticOracle:
    """Instantiate a named builtin oracle, or raise ConfigError."""
    factory = BUILTIN_ORACLES.get(name)
    if factory is None:
        known = ", ".join(sorted(BUILTIN_ORACLES))
        raise ConfigError(f"unknown builtin oracle {name!r} (known: {known})")
    return factory()
