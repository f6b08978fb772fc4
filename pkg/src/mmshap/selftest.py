"""Built-in diagnostic suite: fast closed-form checks over synthetic oracles.

Run via ``mmshap selftest``.  Each check prints one PASS/FAIL line; the
suite passes only if every check does.  These checks are a subset of the
full test suite, chosen so a user can validate an installation in seconds
without installing test tooling.
"""

from __future__ import annotations

import math
import traceback
from typing import Callable

import numpy as np

from .engine import EstimatorConfig, estimate, exact_shapley, mc_shapley
from .errors import AllZeroContributions
from .masking import TilingPlan, build_sample, plan_tiling
from .metrics import PairPrediction, pairwise_accuracy, spearman, threshold_accuracies
from .oracle import (
    BalancedOracle,
    ConstantOracle,
    InteractionOracle,
    LinearOracle,
    UnimodalOracle,
)
from .scoring import mm_shap
from .types import IMAGE, TEXT, CoalitionMask, Token, TokenizedSample, validate_sample
from .wire import mask_from_hex, mask_to_hex

__all__ = ["selftest"]


def demo_sample(
    n_text: int, n_image: int, sample_id: str = "selftest", specials: int = 0
) -> TokenizedSample:
    """A plain sample: optional special text tokens, then text, then patches."""
    tokens: list[Token] = []
    for k in range(specials):
        tokens.append(Token(len(tokens), TEXT, False, f"[SPECIAL{k}]"))
    for k in range(n_text):
        tokens.append(Token(len(tokens), TEXT, True, f"word{k}"))
    for k in range(n_image):
        tokens.append(Token(len(tokens), IMAGE, True, f"patch{k}"))
    return validate_sample(TokenizedSample(sample_id=sample_id, tokens=tuple(tokens)))


def _check_linear_exact() -> None:
    sample = demo_sample(2, 1)
    oracle = LinearOracle(weights=(3.0, 5.0, -2.0), bias=0.25)
    oracle.register(sample)
    attr = exact_shapley(sample, oracle)
    assert attr.phi == (3.0, 5.0, -2.0), attr.phi
    assert attr.base_value == 0.25 and attr.full_value == 6.25


def _check_interaction_split() -> None:
    sample = demo_sample(2, 1)
    oracle = InteractionOracle(pairs=[(0, 1, 4.0)])
    oracle.register(sample)
    attr = exact_shapley(sample, oracle)
    assert attr.phi == (2.0, 2.0, 0.0), attr.phi


def _check_constant_all_zero() -> None:
    sample = demo_sample(2, 2)
    oracle = ConstantOracle(7.5)
    oracle.register(sample)
    attr = exact_shapley(sample, oracle)
    assert attr.phi == (0.0, 0.0, 0.0, 0.0)
    assert attr.base_value == attr.full_value == 7.5
    try:
        mm_shap(attr, sample)
    except AllZeroContributions:
        return
    raise AssertionError("expected AllZeroContributions")


def _check_efficiency() -> None:
    gen = np.random.Generator(np.random.PCG64(7))
    for trial in range(20):
        n_text = int(gen.integers(1, 5))
        n_image = int(gen.integers(1, 5))
        sample = demo_sample(n_text, n_image, sample_id=f"eff{trial}")
        n = len(sample.tokens)
        weights = gen.uniform(-2, 2, n)
        oracle = LinearOracle(weights=tuple(weights), bias=float(gen.uniform(-1, 1)))
        oracle.register(sample)
        for attr in (
            exact_shapley(sample, oracle),
            mc_shapley(
                sample,
                oracle,
                EstimatorConfig(mode="permutation-mc", seed=trial),
            ),
        ):
            gap = abs(math.fsum(attr.phi) - (attr.full_value - attr.base_value))
            assert gap <= 1e-9, (trial, attr.estimator, gap)


def _check_balanced_is_half() -> None:
    for n_text, n_image in ((1, 4), (3, 4), (5, 2)):
        sample = demo_sample(n_text, n_image, sample_id=f"bal{n_text}x{n_image}")
        oracle = BalancedOracle()
        oracle.register(sample)
        score = mm_shap(exact_shapley(sample, oracle), sample)
        assert abs(score.t_shap - 50.0) <= 1e-9, (n_text, n_image, score.t_shap)


def _check_unimodal_extremes() -> None:
    sample = demo_sample(3, 4)
    text_only = UnimodalOracle(TEXT, LinearOracle(weights=(1.0,) * 7))
    text_only.register(sample)
    score = mm_shap(exact_shapley(sample, text_only), sample)
    assert score.t_shap == 100.0, score.t_shap
    image_only = UnimodalOracle(IMAGE, LinearOracle(weights=(1.0,) * 7))
    image_only.register(sample)
    score = mm_shap(exact_shapley(sample, image_only), sample)
    assert score.t_shap == 0.0, score.t_shap


def _check_tiling_exact() -> None:
    gen = np.random.Generator(np.random.PCG64(11))
    for _ in range(50):
        width = int(gen.integers(1, 4097))
        height = int(gen.integers(1, 4097))
        n_text = int(gen.integers(1, 201))
        plan = plan_tiling(width, height, n_text)
        area = sum((x1 - x0) * (y1 - y0) for x0, y0, x1, y1 in plan.patch_rects)
        assert area == width * height, (width, height, n_text)
    sizes = [plan_tiling(100, 100, n).grid_rows for n in range(1, 201)]
    assert all(a <= b for a, b in zip(sizes, sizes[1:])), "grid not monotone"
    assert TilingPlan.from_dict(plan_tiling(512, 512, 16).to_dict()) == plan_tiling(
        512, 512, 16
    )


def _check_sample_build() -> None:
    plan = plan_tiling(64, 64, 2)
    sample = build_sample(
        "demo",
        [("[CLS]", None, True), ("a", None, False), ("cat", None, False), ("[SEP]", None, True)],
        plan,
    )
    assert len(sample.tokens) == 8 and sample.n_maskable == 6
    assert sample.n_text == 2 and sample.n_image == 4


def _check_mask_hex() -> None:
    mask = CoalitionMask((True, False, True, True))
    assert mask_to_hex(mask) == "d"
    assert mask_from_hex("d", 4) == mask
    assert mask_to_hex(CoalitionMask((False,) * 3)) == "0"


def _check_metrics() -> None:
    pairs = [
        PairPrediction("a", 0.9, 0.1),
        PairPrediction("b", 0.4, 0.4),
        PairPrediction("c", 0.2, 0.8),
        PairPrediction("d", 0.7, 0.3),
    ]
    assert pairwise_accuracy(pairs) == 0.5
    acc_c, acc_f, acc = threshold_accuracies(pairs)
    assert (acc_c, acc_f, acc) == (0.5, 0.75, 0.625)
    assert spearman((1, 2, 3), (10, 20, 30)) == 1.0
    assert spearman((1, 2, 3), (3, 2, 1)) == -1.0


def _check_mc_determinism() -> None:
    sample = demo_sample(4, 4, sample_id="det")
    oracle = InteractionOracle(pairs=[(0, 5, 2.0), (1, 2, -1.0)])
    oracle.register(sample)
    config = EstimatorConfig(mode="permutation-mc", n_coalitions=45, seed=123)
    first = mc_shapley(sample, oracle, config)
    second = mc_shapley(sample, oracle, config)
    assert first.phi == second.phi
    other = mc_shapley(
        sample, oracle, EstimatorConfig(mode="permutation-mc", n_coalitions=45, seed=124)
    )
    assert other.phi != first.phi, "different seeds produced identical estimates"


_CHECKS: list[tuple[str, Callable[[], None]]] = [
    ("linear oracle recovers its weights exactly", _check_linear_exact),
    ("pair interaction splits evenly", _check_interaction_split),
    ("constant oracle yields all-zero attributions", _check_constant_all_zero),
    ("efficiency holds for both estimators", _check_efficiency),
    ("balanced mirror game scores exactly 50 percent text", _check_balanced_is_half),
    ("unimodal oracles collapse to 100 / 0", _check_unimodal_extremes),
    ("image tiling is exact and monotone", _check_tiling_exact),
    ("sample construction counts tokens correctly", _check_sample_build),
    ("mask hex codec round-trips", _check_mask_hex),
    ("accuracy metrics match hand values", _check_metrics),
    ("mc estimates are seed-deterministic", _check_mc_determinism),
]


def selftest(out: Callable[[str], None] = print) -> bool:
    """Run all checks; print one line each; return overall success."""
    passed = True
    for name, check in _CHECKS:
        try:
            check()
        except Exception:
            passed = False
            out(f"FAIL {name}")
            out("  " + traceback.format_exc().strip().replace("\n", "\n  "))
        else:
            out(f"PASS {name}")
    out(f"{'OK' if passed else 'FAILED'} ({len(_CHECKS)} checks)")
    return passed
