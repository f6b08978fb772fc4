"""Shapley attribution engine: exact enumeration and permutation Monte Carlo.

Both estimators treat the oracle as a black box over coalitions of the
sample's maskable tokens.  Coalition values are memoized per sample keyed
by the coalition's bit pattern, so repeated coalitions (the empty coalition
appears in every permutation) cost one oracle call.

Determinism: given (sample, seed, config) the result is bit-identical
regardless of batching or worker count.  Per-sample random streams are
derived from the run seed and a hash of the sample id, so subsetting or
reordering a dataset never changes a sample's attribution.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from hashlib import blake2b
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BudgetTooSmall,
    ConfigError,
    ProtocolViolation,
    TooManyTokens,
)
from .oracle import OracleRequest, ValueOracle
from .types import ShapleyAttribution, TokenizedSample, mask_for

__all__ = [
    "EstimatorConfig",
    "exact_shapley",
    "mc_shapley",
    "estimate",
    "sample_seed_sequence",
]

EXACT = "exact"
PERMUTATION_MC = "permutation-mc"

_MAX_SEED = 2**64 - 1

# Request ids are unique across the whole process lifetime; next() on an
# itertools.count is atomic under the GIL.
_REQUEST_IDS = itertools.count(1)


@dataclass(frozen=True)
class EstimatorConfig:
    """How to estimate Shapley values.

    ``n_coalitions`` applies to Monte Carlo mode: either an integer budget
    or "auto" (2p + 1, rounded up to whole permutations).  ``exact_limit``
    caps the maskable token count for exact enumeration.
    """

    mode: str = EXACT
    n_coalitions: int | str = "auto"
    seed: int = 0
    exact_limit: int = 20

    def validated(self) -> "EstimatorConfig":
        if self.mode not in (EXACT, PERMUTATION_MC):
            raise ConfigError(
                f"unknown estimator mode {self.mode!r} "
                f"(expected {EXACT!r} or {PERMUTATION_MC!r})"
            )
        if self.n_coalitions != "auto":
            if not isinstance(self.n_coalitions, int) or isinstance(
                self.n_coalitions, bool
            ):
                raise ConfigError("n_coalitions must be an integer or 'auto'")
            if self.n_coalitions < 1:
                raise ConfigError("n_coalitions must be positive")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError("seed must be an integer")
        if not 0 <= self.seed <= _MAX_SEED:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        if self.exact_limit < 1:
            raise ConfigError("exact_limit must be at least 1")
        return self


def sample_seed_sequence(run_seed: int, sample_id: str) -> np.random.SeedSequence:
    """Per-sample random stream: run seed spawned with a sample-id hash.

    The hash decouples a sample's stream from dataset order, so the same
    (run seed, sample id) pair always yields the same permutations.
    """
    digest = blake2b(sample_id.encode("utf-8"), digest_size=8).digest()
    return np.random.SeedSequence([run_seed, int.from_bytes(digest, "big")])


class _MemoizedEvaluator:
    """Batches coalition evaluations through the oracle with a per-sample memo.

    Coalitions are identified by an integer whose bit k is the k-th maskable
    token (in token-index order).  ``unique_calls`` is the number of
    distinct coalitions actually sent to the oracle.
    """

    def __init__(self, sample: TokenizedSample, oracle: ValueOracle) -> None:
        self.sample = sample
        self.oracle = oracle
        self.maskable = sample.maskable_indices
        self.cache: dict[int, float] = {}
        self.batch_limit = max(1, int(getattr(oracle, "batch_limit", 1)))

    @property
    def unique_calls(self) -> int:
        return len(self.cache)

    def _to_mask(self, subset: int):
        present = [
            self.maskable[k] for k in range(len(self.maskable)) if (subset >> k) & 1
        ]
        return mask_for(self.sample, present)

    def ensure(self, subsets: Iterable[int]) -> None:
        """Evaluate any not-yet-cached coalitions, preserving first-seen order."""
        pending: list[int] = []
        seen: set[int] = set()
        for subset in subsets:
            if subset in self.cache or subset in seen:
                continue
            seen.add(subset)
            pending.append(subset)
        for start in range(0, len(pending), self.batch_limit):
            chunk = pending[start : start + self.batch_limit]
            requests = [
                OracleRequest(
                    sample_id=self.sample.sample_id,
                    mask=self._to_mask(subset),
                    request_id=next(_REQUEST_IDS),
                )
                for subset in chunk
            ]
            responses = self.oracle.evaluate(requests)
            if len(responses) != len(requests):
                raise ProtocolViolation(
                    f"oracle answered {len(responses)} of {len(requests)} requests"
                )
            by_id = {r.request_id: r.value for r in responses}
            if set(by_id) != {r.request_id for r in requests}:
                raise ProtocolViolation("oracle response ids do not match the batch")
            for req, subset in zip(requests, chunk):
                value = float(by_id[req.request_id])
                if not math.isfinite(value):
                    raise ProtocolViolation(
                        f"oracle returned non-finite value {value!r}"
                    )
                self.cache[subset] = value

    def value(self, subset: int) -> float:
        if subset not in self.cache:
            self.ensure([subset])
        return self.cache[subset]


def _scatter(sample: TokenizedSample, phi_maskable: Sequence[float]) -> tuple[float, ...]:
    """Expand maskable-position values to a per-token vector (zeros elsewhere)."""
    phi = [0.0] * len(sample.tokens)
    for k, index in enumerate(sample.maskable_indices):
        phi[index] = float(phi_maskable[k])
    return tuple(phi)


def exact_shapley(
    sample: TokenizedSample,
    oracle: ValueOracle,
    exact_limit: int = 20,
    seed: int = 0,
) -> ShapleyAttribution:
    """Exact Shapley values by direct enumeration of all 2^p coalitions.

    phi_j = sum over subsets S of the other maskable tokens of
    (val(S + j) - val(S)) / (p * C(p-1, |S|)).

    Raises TooManyTokens when p exceeds ``exact_limit``.
    """
    p = sample.n_maskable
    if p > exact_limit:
        raise TooManyTokens(
            f"sample {sample.sample_id!r} has {p} maskable tokens; "
            f"exact enumeration is capped at {exact_limit}"
        )
    evaluator = _MemoizedEvaluator(sample, oracle)
    n_subsets = 1 << p
    evaluator.ensure(range(n_subsets))

    # Multinomial weights by coalition size; comb avoids factorial overflow.
    weights = [1.0 / (p * math.comb(p - 1, s)) for s in range(p)]
    cache = evaluator.cache
    phi_maskable = [0.0] * p
    for subset in range(n_subsets):
        size = subset.bit_count()
        if size == p:
            continue
        w = weights[size]
        v_subset = cache[subset]
        for k in range(p):
            bit = 1 << k
            if subset & bit:
                continue
            phi_maskable[k] += w * (cache[subset | bit] - v_subset)

    base_value = cache[0]
    full_value = cache[n_subsets - 1]
    return ShapleyAttribution(
        sample_id=sample.sample_id,
        phi=_scatter(sample, phi_maskable),
        base_value=base_value,
        full_value=full_value,
        estimator=EXACT,
        n_coalitions=n_subsets,
        seed=seed,
    )


def _fisher_yates(n: int, gen: np.random.Generator) -> list[int]:
    """Explicit Fisher-Yates shuffle so the draw sequence is pinned."""
    order = list(range(n))
    for i in range(n - 1, 0, -1):
        j = int(gen.integers(0, i + 1))
        order[i], order[j] = order[j], order[i]
    return order


def mc_shapley(
    sample: TokenizedSample,
    oracle: ValueOracle,
    config: EstimatorConfig,
) -> ShapleyAttribution:
    """Permutation Monte Carlo estimate of Shapley values.

    Draws K = ceil(budget / (p + 1)) random orderings of the maskable
    tokens; walking each ordering and unmasking one token at a time yields
    p marginal contributions per permutation, and phi_j is the mean of
    token j's marginals.  The marginals telescope, so efficiency
    (sum(phi) = full - base) holds exactly for every run.
    """
    config = config.validated()
    p = sample.n_maskable
    budget = 2 * p + 1 if config.n_coalitions == "auto" else int(config.n_coalitions)
    if budget < p + 1:
        raise BudgetTooSmall(
            f"budget {budget} cannot cover one permutation of {p} tokens "
            f"(needs at least {p + 1} coalitions)"
        )
    n_permutations = math.ceil(budget / (p + 1))

    gen = np.random.Generator(
        np.random.PCG64(sample_seed_sequence(config.seed, sample.sample_id))
    )
    permutations = [_fisher_yates(p, gen) for _ in range(n_permutations)]

    # One pass to collect every coalition on the permutation chains, then a
    # deterministic reduction in permutation order.
    chains: list[list[int]] = []
    needed: list[int] = [0]
    for perm in permutations:
        chain = [0]
        current = 0
        for position in perm:
            current |= 1 << position
            chain.append(current)
        chains.append(chain)
        needed.extend(chain)
    evaluator = _MemoizedEvaluator(sample, oracle)
    evaluator.ensure(needed)

    cache = evaluator.cache
    totals = [0.0] * p
    for perm, chain in zip(permutations, chains):
        previous = cache[chain[0]]
        for step, position in enumerate(perm, start=1):
            value = cache[chain[step]]
            totals[position] += value - previous
            previous = value
    phi_maskable = [total / n_permutations for total in totals]

    return ShapleyAttribution(
        sample_id=sample.sample_id,
        phi=_scatter(sample, phi_maskable),
        base_value=cache[0],
        full_value=cache[(1 << p) - 1],
        estimator=PERMUTATION_MC,
        n_coalitions=n_permutations * (p + 1),
        seed=config.seed,
    )


def estimate(
    sample: TokenizedSample,
    oracle: ValueOracle,
    config: EstimatorConfig,
) -> ShapleyAttribution:
    """Dispatch to the configured estimator."""
    config = config.validated()
    if config.mode == EXACT:
        return exact_shapley(
            sample, oracle, exact_limit=config.exact_limit, seed=config.seed
        )
    return mc_shapley(sample, oracle, config)
