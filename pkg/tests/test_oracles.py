"""Synthetic oracle behavior: values by hand, validation, determinism."""

from __future__ import annotations

import math

import pytest

from conftest import make_sample
from mmshap.errors import IndexOutOfRange, LengthMismatch, ProtocolViolation, UnknownSample
from mmshap.oracle import (
    AffineOracle,
    BalancedOracle,
    ConstantOracle,
    DerivedLinearOracle,
    InteractionOracle,
    LinearOracle,
    OracleRequest,
    SumOracle,
    UnimodalOracle,
    make_builtin_oracle,
)
from mmshap.types import IMAGE, TEXT, base_mask, full_mask, mask_for


def value_of(oracle, sample, present):
    responses = oracle.evaluate(
        [OracleRequest(sample.sample_id, mask_for(sample, present), request_id=1)]
    )
    return responses[0].value


def test_linear_values_by_hand():
    sample = make_sample(2, 1)
    oracle = LinearOracle(weights=(1.0, 2.0, 3.0))
    oracle.register(sample)
    assert value_of(oracle, sample, [0, 1, 2]) == 6.0
    assert value_of(oracle, sample, [0]) == 1.0
    assert value_of(oracle, sample, []) == 0.0


def test_linear_bias_is_base_value():
    sample = make_sample(2, 0)
    oracle = LinearOracle(weights=(2.0, -1.0), bias=0.5)
    oracle.register(sample)
    assert value_of(oracle, sample, []) == 0.5
    assert value_of(oracle, sample, [0]) == 2.5


def test_linear_ignores_special_tokens():
    sample = make_sample(1, 1, specials=1)
    oracle = LinearOracle(weights=(100.0, 2.0, 3.0))
    oracle.register(sample)
    # Token 0 is special: present in every mask, never contributes.
    responses = oracle.evaluate(
        [OracleRequest(sample.sample_id, base_mask(sample), 1)]
    )
    assert responses[0].value == 0.0


def test_linear_length_mismatch():
    sample = make_sample(2, 1)
    oracle = LinearOracle(weights=(1.0, 2.0))
    with pytest.raises(LengthMismatch):
        oracle.register(sample)


def test_unknown_sample():
    oracle = LinearOracle(weights=(1.0,))
    sample = make_sample(1, 0)
    with pytest.raises(UnknownSample):
        oracle.evaluate([OracleRequest("nope", full_mask(sample), 1)])


def test_interaction_values_by_hand():
    sample = make_sample(3, 0)
    oracle = InteractionOracle(pairs=[(0, 1, 4.0), (1, 2, -2.0)])
    oracle.register(sample)
    assert value_of(oracle, sample, []) == 0.0
    assert value_of(oracle, sample, [0, 1]) == 4.0
    assert value_of(oracle, sample, [1, 2]) == -2.0
    assert value_of(oracle, sample, [0, 1, 2]) == 2.0
    assert value_of(oracle, sample, [0, 2]) == 0.0


def test_interaction_rejects_bad_indices():
    sample = make_sample(2, 0, specials=1)
    with pytest.raises(IndexOutOfRange):
        InteractionOracle(pairs=[(0, 1, 1.0)]).register(sample)  # 0 is special
    with pytest.raises(IndexOutOfRange):
        InteractionOracle(pairs=[(1, 9, 1.0)]).register(sample)


def test_unimodal_ignores_other_modality():
    sample = make_sample(2, 3)
    oracle = UnimodalOracle(TEXT, LinearOracle(weights=(1.0, 2.0, 4.0, 8.0, 16.0)))
    oracle.register(sample)
    with_images = value_of(oracle, sample, [0, 1, 2, 3, 4])
    without_images = value_of(oracle, sample, [0, 1])
    assert with_images == without_images == 3.0


def test_balanced_values_by_hand():
    sample = make_sample(2, 4)
    oracle = BalancedOracle()
    oracle.register(sample)
    # Half the text (1/2) and half the image (2/4): 0.5 + 0.5 + 0.25.
    assert value_of(oracle, sample, [0, 2, 3]) == pytest.approx(1.25)
    assert value_of(oracle, sample, []) == 0.0
    assert value_of(oracle, sample, [0, 1, 2, 3, 4, 5]) == 3.0


def test_balanced_is_modality_symmetric():
    sample = make_sample(2, 2)
    oracle = BalancedOracle()
    oracle.register(sample)
    # Swapping the text and image parts of the coalition leaves the value.
    assert value_of(oracle, sample, [0, 1]) == value_of(oracle, sample, [2, 3])
    assert value_of(oracle, sample, [0]) == value_of(oracle, sample, [2])


def test_constant_oracle():
    sample = make_sample(1, 1)
    oracle = ConstantOracle(7.0)
    oracle.register(sample)
    assert value_of(oracle, sample, []) == 7.0
    assert value_of(oracle, sample, [0, 1]) == 7.0


def test_affine_and_sum_combinators():
    sample = make_sample(2, 0)
    inner = LinearOracle(weights=(1.0, 2.0))
    affine = AffineOracle(inner, scale=-3.0, shift=5.0)
    affine.register(sample)
    assert value_of(affine, sample, [0, 1]) == -3.0 * 3.0 + 5.0

    both = SumOracle(LinearOracle(weights=(1.0, 2.0)), InteractionOracle([(0, 1, 4.0)]))
    both.register(sample)
    assert value_of(both, sample, [0, 1]) == 3.0 + 4.0


def test_duplicate_requests_get_identical_values():
    sample = make_sample(2, 2, sample_id="probe")
    oracle = DerivedLinearOracle()
    oracle.register(sample)
    mask = mask_for(sample, [0, 2])
    requests = [
        OracleRequest("probe", mask, 1),
        OracleRequest("probe", mask, 2),
    ]
    first, second = oracle.evaluate(requests)
    assert first.value == second.value


def test_derived_weights_depend_only_on_sample_id():
    a = make_sample(2, 2, sample_id="same")
    oracle_one = DerivedLinearOracle()
    oracle_two = DerivedLinearOracle()
    oracle_one.register(a)
    oracle_two.register(a)
    mask = mask_for(a, [0, 3])
    assert (
        oracle_one.evaluate([OracleRequest("same", mask, 1)])[0].value
        == oracle_two.evaluate([OracleRequest("same", mask, 1)])[0].value
    )


def test_non_finite_value_is_protocol_violation():
    class BadOracle(ConstantOracle):
        def _value(self, sample, mask):
            return math.nan

    sample = make_sample(1, 0)
    oracle = BadOracle()
    oracle.register(sample)
    with pytest.raises(ProtocolViolation):
        oracle.evaluate([OracleRequest(sample.sample_id, full_mask(sample), 1)])


def test_builtin_registry():
    for name in ("linear", "unimodal-text", "unimodal-image", "balanced", "constant"):
        oracle = make_builtin_oracle(name)
        sample = make_sample(2, 2, sample_id=f"builtin-{name}")
        oracle.register(sample)
        value = value_of(oracle, sample, [0, 1, 2, 3])
        assert math.isfinite(value)


def test_builtin_registry_unknown_name():
    from mmshap.errors import ConfigError

    with pytest.raises(ConfigError):
        make_builtin_oracle("no-such-oracle")


def test_unimodal_image_keeps_only_image():
    sample = make_sample(2, 2)
    oracle = UnimodalOracle(IMAGE, LinearOracle(weights=(1.0, 2.0, 4.0, 8.0)))
    oracle.register(sample)
    assert value_of(oracle, sample, [0, 1]) == 0.0
    assert value_of(oracle, sample, [2, 3]) == 12.0
