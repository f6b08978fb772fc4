"""Run orchestration: ingest a dataset, attribute every sample, report.

For each record and each requested split (caption, foil) the harness
builds a tokenized sample, registers it with the oracle, estimates Shapley
values, and folds them into modality scores.  Results land in a versioned
JSON report plus a delimited per-sample table; rendering static heatmaps
is optional on top.

Determinism: with the same config and seed the report is byte-identical
(wall time excluded) for any worker count, because per-sample randomness
is derived from (run seed, sample id) and all reductions are ordered by
sample id.

Resumability: each finished sample is checkpointed under
``<output_dir>/state/`` keyed by a fingerprint of the run config; rerunning
skips checkpointed samples and rebuilds the same report.  Per-sample
failures do not abort the run; they are collected into a failure manifest.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from hashlib import blake2b, sha256
from pathlib import Path
from threading import Lock
from typing import Any, Mapping, Sequence

from .dataset import DatasetRecord, image_size, ingest, resolve_image
from .engine import EstimatorConfig, estimate
from .errors import (
    AllZeroContributions,
    ConfigError,
    MMShapError,
    OracleTimeout,
    ProtocolViolation,
)
from .masking import build_sample, plan_tiling
from .metrics import PairPrediction, pairwise_accuracy, spearman, threshold_accuracies
from .oracle import OracleRequest, OracleResponse, RealizedToken, RegistrationResult, ValueOracle
from .scoring import MMShapScore, aggregate, mm_shap
from .types import TokenizedSample
from .wire import resolve_oracle

__all__ = [
    "SCHEMA_VERSION",
    "RunConfig",
    "EvaluationReport",
    "run",
    "write_report",
    "write_csv",
    "config_echo",
    "config_fingerprint",
]

SCHEMA_VERSION = 1

SPLITS = ("caption", "foil")

REPORT_NAME = "report.json"
CSV_NAME = "samples.csv"
FAILURES_NAME = "failures.json"
STATE_DIR = "state"


@dataclass(frozen=True)
class RunConfig:
    """Everything one evaluation run needs.

    ``workers``, ``output_dir``, ``render``, and ``oracle_timeout`` affect
    only how and where work happens, never the numbers; they are excluded
    from the config echo and the resume fingerprint.
    """

    dataset_path: str
    oracle_spec: str
    output_dir: str
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    splits: tuple[str, ...] = SPLITS
    workers: int = 1
    render: bool = False
    threshold: float = 0.5
    oracle_timeout: float = 120.0

    def validated(self) -> "RunConfig":
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if not self.splits:
            raise ConfigError("at least one split is required")
        for split in self.splits:
            if split not in SPLITS:
                raise ConfigError(
                    f"unknown split {split!r} (expected a subset of {SPLITS})"
                )
        self.estimator.validated()
        return self


@dataclass(frozen=True)
class EvaluationReport:
    """The versioned result of one run, JSON-shaped throughout."""

    schema_version: int
    config: dict[str, Any]
    samples: tuple[dict[str, Any], ...]
    dataset_stats: dict[str, Any]
    metrics: dict[str, Any]
    runtime: dict[str, Any]
    failures: tuple[dict[str, Any], ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "config": self.config,
            "samples": list(self.samples),
            "dataset_stats": self.dataset_stats,
            "metrics": self.metrics,
            "runtime": self.runtime,
            "failures": list(self.failures),
        }


def config_echo(config: RunConfig) -> dict[str, Any]:
    """The run parameters that determine the numbers, and only those."""
    return {
        "dataset_path": str(config.dataset_path),
        "oracle_spec": config.oracle_spec,
        "estimator": {
            "mode": config.estimator.mode,
            "n_coalitions": config.estimator.n_coalitions,
            "seed": config.estimator.seed,
            "exact_limit": config.estimator.exact_limit,
        },
        "splits": list(config.splits),
        "threshold": config.threshold,
    }


def config_fingerprint(echo: Mapping[str, Any]) -> str:
    return sha256(json.dumps(echo, sort_keys=True).encode("utf-8")).hexdigest()


class _CountingOracle(ValueOracle):
    """Delegating wrapper that tallies evaluation requests per sample.

    The engine memoizes coalitions, so the tally equals the number of
    distinct coalitions evaluated for each sample.
    """

    def __init__(self, inner: ValueOracle) -> None:
        self.inner = inner
        self.counts: dict[str, int] = {}
        self._lock = Lock()

    @property
    def batch_limit(self) -> int:  # type: ignore[override]
        return self.inner.batch_limit

    @property
    def score_type(self) -> str:  # type: ignore[override]
        return self.inner.score_type

    def register(
        self, sample: TokenizedSample, assets: Mapping[str, Any] | None = None
    ) -> RegistrationResult:
        return self.inner.register(sample, assets)

    def evaluate(self, requests: Sequence[OracleRequest]) -> list[OracleResponse]:
        with self._lock:
            for request in requests:
                self.counts[request.sample_id] = (
                    self.counts.get(request.sample_id, 0) + 1
                )
        return self.inner.evaluate(requests)

    def close(self) -> None:
        self.inner.close()


@dataclass(frozen=True)
class _Unit:
    """One (record, split) work item."""

    record: DatasetRecord
    split: str

    @property
    def sample_id(self) -> str:
        return f"{self.record.record_id}::{self.split}"

    @property
    def text(self) -> str:
        return self.record.caption if self.split == "caption" else str(self.record.foil)


def _provisional_text_tokens(text: str) -> list[tuple[str, Any, bool]]:
    """Whitespace tokenization; the oracle may substitute its own tokens."""
    return [(word, None, False) for word in text.split()]


def _tokens_from_realized(
    realized: Sequence[RealizedToken],
) -> list[tuple[str, Any, bool]]:
    return [(t.label, None, t.special) for t in realized]


def _text_tokens_of(sample: TokenizedSample) -> list[tuple[str, bool]]:
    return [
        (t.label, not t.maskable) for t in sample.tokens if t.modality == "text"
    ]


def _build_unit_sample(
    unit: _Unit,
    text_tokens: list[tuple[str, Any, bool]],
    width: int,
    height: int,
):
    n_text = sum(1 for _, _, special in text_tokens if not special)
    plan = plan_tiling(width, height, max(1, n_text))
    sample = build_sample(
        unit.sample_id,
        text_tokens,
        plan,
        metadata={
            "record_id": unit.record.record_id,
            "split": unit.split,
            "task": unit.record.task,
        },
    )
    return sample, plan


def _register_with_feedback(
    unit: _Unit,
    oracle: ValueOracle,
    assets: dict[str, Any],
    width: int,
    height: int,
) -> TokenizedSample:
    """Register, adopting the oracle's own tokenization when it reports one.

    The oracle tokenizes the same text both times, so one rebuild reaches a
    fixed point; a second disagreement is a protocol violation.
    """
    text_tokens = _provisional_text_tokens(unit.text)
    sample, plan = _build_unit_sample(unit, text_tokens, width, height)
    for _ in range(2):
        result = oracle.register(
            sample, {**assets, "text": unit.text, "tiling": plan.to_dict()}
        )
        realized = result.realized_tokens
        if realized is None:
            return sample
        if _text_tokens_of(sample) == [(t.label, t.special) for t in realized]:
            return sample
        sample, plan = _build_unit_sample(
            unit, _tokens_from_realized(realized), width, height
        )
    raise ProtocolViolation(
        f"oracle tokenization for sample {unit.sample_id!r} did not stabilize "
        "after one rebuild"
    )


def _process_unit(
    unit: _Unit,
    oracle: _CountingOracle,
    config: RunConfig,
    dataset_dir: Path,
) -> dict[str, Any]:
    # A missing or undecodable image is a data problem with this record,
    # not a reason to abort the run.
    try:
        assets = dict(resolve_image(unit.record.image, dataset_dir))
        width, height = image_size(assets)
    except (ValueError, OSError) as exc:
        raise MMShapError(str(exc)) from exc
    sample = _register_with_feedback(unit, oracle, assets, width, height)
    attribution = estimate(sample, oracle, config.estimator)

    score_block: dict[str, Any] = {
        "all_zero": False,
        "phi_abs_by_modality": None,
        "proportion_by_modality": None,
        "t_shap": None,
        "v_shap": None,
    }
    try:
        score = mm_shap(attribution, sample)
        score_block.update(
            phi_abs_by_modality=dict(score.phi_abs_by_modality),
            proportion_by_modality=dict(score.proportion_by_modality),
            t_shap=score.t_shap,
            v_shap=score.v_shap,
        )
    except AllZeroContributions:
        score_block["all_zero"] = True

    record = {
        "sample_id": unit.sample_id,
        "record_id": unit.record.record_id,
        "split": unit.split,
        "task": unit.record.task,
        "text": unit.text,
        "image_size": [width, height],
        "sample": sample.to_dict(),
        "attribution": {
            "phi": list(attribution.phi),
            "base_value": attribution.base_value,
            "full_value": attribution.full_value,
            "estimator": attribution.estimator,
            "n_coalitions": attribution.n_coalitions,
            "seed": attribution.seed,
        },
        "score": score_block,
        "oracle_calls": oracle.counts.get(unit.sample_id, 0),
    }
    # Freshly computed and checkpoint-loaded records must compare equal, so
    # normalize containers (tuples, mapping views) to their JSON shape now.
    return json.loads(json.dumps(record))


def _state_path(state_dir: Path, sample_id: str) -> Path:
    digest = blake2b(sample_id.encode("utf-8"), digest_size=16).hexdigest()
    return state_dir / f"{digest}.json"


def _load_state(path: Path, fingerprint: str) -> dict[str, Any] | None:
    if not path.exists():
        return None
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError):
        return None
    if data.get("fingerprint") != fingerprint:
        return None
    record = data.get("record")
    return record if isinstance(record, dict) else None


def _save_state(path: Path, fingerprint: str, record: dict[str, Any]) -> None:
    payload = json.dumps(
        {"fingerprint": fingerprint, "record": record}, sort_keys=True
    )
    tmp = path.with_suffix(".tmp")
    tmp.write_text(payload, encoding="utf-8")
    tmp.replace(path)


def _failure_entry(sample_id: str, exc: Exception) -> dict[str, Any]:
    return {
        "sample_id": sample_id,
        "error": type(exc).__name__,
        "message": str(exc),
    }


def _score_from_record(record: Mapping[str, Any]) -> MMShapScore | None:
    block = record["score"]
    if block["all_zero"] or block["proportion_by_modality"] is None:
        return None
    return MMShapScore(
        sample_id=record["sample_id"],
        phi_abs_by_modality=dict(block["phi_abs_by_modality"]),
        proportion_by_modality=dict(block["proportion_by_modality"]),
    )


def _dataset_stats(records: Sequence[Mapping[str, Any]]) -> dict[str, Any]:
    stats: dict[str, Any] = {}
    for split in ("caption", "foil", "all"):
        members = [
            r for r in records if split == "all" or r["split"] == split
        ]
        scores = [s for s in map(_score_from_record, members) if s is not None]
        n_all_zero = sum(1 for r in members if r["score"]["all_zero"])
        if not scores:
            stats[split] = None if not members else {
                "split": split,
                "mean_t_shap": None,
                "stdev_t_shap": None,
                "n_samples": 0,
                "n_all_zero": n_all_zero,
            }
            continue
        agg = aggregate(scores, split=split)
        stats[split] = {
            "split": split,
            "mean_t_shap": agg.mean_t_shap,
            "stdev_t_shap": agg.stdev_t_shap,
            "n_samples": agg.n_samples,
            "n_all_zero": n_all_zero,
        }
    return stats


def _metrics_block(
    records: Sequence[Mapping[str, Any]],
    dataset_records: Sequence[DatasetRecord],
    threshold: float,
    score_type: str,
) -> dict[str, Any]:
    by_key = {(r["record_id"], r["split"]): r for r in records}
    correct_flags = {r.record_id: r.correct for r in dataset_records}

    pairs: list[PairPrediction] = []
    correctness_points: list[tuple[float, float]] = []
    for record in dataset_records:
        caption = by_key.get((record.record_id, "caption"))
        foil = by_key.get((record.record_id, "foil"))
        if caption is not None and foil is not None:
            pairs.append(
                PairPrediction(
                    pair_id=record.record_id,
                    score_caption=caption["attribution"]["full_value"],
                    score_foil=foil["attribution"]["full_value"],
                    threshold=threshold,
                )
            )
        correct: bool | None
        if caption is not None and foil is not None:
            correct = (
                caption["attribution"]["full_value"]
                > foil["attribution"]["full_value"]
            )
        else:
            correct = correct_flags.get(record.record_id)
        if (
            correct is not None
            and caption is not None
            and caption["score"]["t_shap"] is not None
        ):
            correctness_points.append((float(correct), caption["score"]["t_shap"]))

    block: dict[str, Any] = {
        "n_pairs": len(pairs),
        "threshold": threshold,
        "score_type": score_type,
        "acc_r": None,
        "acc_c": None,
        "acc_f": None,
        "acc": None,
        "spearman_correct_vs_t_shap": None,
        "spearman_note": None,
    }
    if pairs:
        block["acc_r"] = pairwise_accuracy(pairs)
        # Threshold accuracies only make sense for calibrated probabilities;
        # for unbounded scores the ranking metric is the whole story.
        if score_type == "probability":
            acc_c, acc_f, acc = threshold_accuracies(pairs)
            block.update(acc_c=acc_c, acc_f=acc_f, acc=acc)
    if len(correctness_points) >= 2:
        xs = [p[0] for p in correctness_points]
        ys = [p[1] for p in correctness_points]
        try:
            block["spearman_correct_vs_t_shap"] = spearman(xs, ys)
        except MMShapError as exc:
            block["spearman_note"] = f"undefined: {exc}"
    return block


def run(config: RunConfig) -> EvaluationReport:
    """Execute a full evaluation run and write its outputs.

    Writes ``report.json`` and ``samples.csv`` under the output directory
    (plus rendered heatmaps when configured), checkpointing each sample for
    resumption.  Per-sample failures are recorded and skipped; transport
    failures (protocol violations, timeouts) abort the run.
    """
    config = config.validated()
    started = time.perf_counter()

    records = ingest(config.dataset_path)
    dataset_dir = Path(config.dataset_path).resolve().parent

    out_dir = Path(config.output_dir)
    state_dir = out_dir / STATE_DIR
    state_dir.mkdir(parents=True, exist_ok=True)

    echo = config_echo(config)
    fingerprint = config_fingerprint(echo)

    units: list[_Unit] = []
    for record in records:
        for split in config.splits:
            if split == "foil" and record.foil is None:
                continue
            units.append(_Unit(record=record, split=split))
    units.sort(key=lambda u: u.sample_id)

    oracle = _CountingOracle(resolve_oracle(config.oracle_spec, config.oracle_timeout))
    results: dict[str, dict[str, Any]] = {}
    failures: dict[str, dict[str, Any]] = {}

    def work(unit: _Unit) -> None:
        path = _state_path(state_dir, unit.sample_id)
        cached = _load_state(path, fingerprint)
        if cached is not None:
            results[unit.sample_id] = cached
            return
        try:
            record = _process_unit(unit, oracle, config, dataset_dir)
        except (ProtocolViolation, OracleTimeout):
            raise
        except MMShapError as exc:
            failures[unit.sample_id] = _failure_entry(unit.sample_id, exc)
            return
        _save_state(path, fingerprint, record)
        results[unit.sample_id] = record

    try:
        if config.workers == 1:
            for unit in units:
                work(unit)
        else:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                for future in [pool.submit(work, unit) for unit in units]:
                    future.result()
    finally:
        oracle.close()

    ordered = [results[sample_id] for sample_id in sorted(results)]
    ordered_failures = tuple(failures[sample_id] for sample_id in sorted(failures))

    report = EvaluationReport(
        schema_version=SCHEMA_VERSION,
        config=echo,
        samples=tuple(ordered),
        dataset_stats=_dataset_stats(ordered),
        metrics=_metrics_block(ordered, records, config.threshold, oracle.score_type),
        runtime={
            "oracle_calls": sum(r["oracle_calls"] for r in ordered),
            "wall_time_s": time.perf_counter() - started,
        },
        failures=ordered_failures,
    )

    write_report(report, out_dir)
    write_csv(report, out_dir)
    failures_path = out_dir / FAILURES_NAME
    if ordered_failures:
        failures_path.write_text(
            json.dumps(list(ordered_failures), sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
    elif failures_path.exists():
        failures_path.unlink()

    if config.render:
        from .render import render_report

        render_report(report.to_dict(), out_dir)
    return report


def write_report(report: EvaluationReport, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / REPORT_NAME
    path.write_text(
        json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    return path


def _csv_percent(value: float | None) -> str:
    return "" if value is None else f"{value:.1f}"


def _csv_float(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def write_csv(report: EvaluationReport, out_dir: Path) -> Path:
    """One row per sample; percentages at one decimal, raw values full
    precision."""
    import csv

    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / CSV_NAME
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            [
                "sample_id",
                "record_id",
                "split",
                "task",
                "t_shap",
                "v_shap",
                "phi_abs_text",
                "phi_abs_image",
                "base_value",
                "full_value",
                "estimator",
                "n_coalitions",
                "oracle_calls",
                "all_zero",
            ]
        )
        for record in report.samples:
            attribution = record["attribution"]
            score = record["score"]
            phi_abs = score["phi_abs_by_modality"] or {}
            writer.writerow(
                [
                    record["sample_id"],
                    record["record_id"],
                    record["split"],
                    record["task"],
                    _csv_percent(score["t_shap"]),
                    _csv_percent(score["v_shap"]),
                    _csv_float(phi_abs.get("text")),
                    _csv_float(phi_abs.get("image")),
                    _csv_float(attribution["base_value"]),
                    _csv_float(attribution["full_value"]),
                    attribution["estimator"],
                    attribution["n_coalitions"],
                    record["oracle_calls"],
                    "true" if score["all_zero"] else "false",
                ]
            )
    return path
