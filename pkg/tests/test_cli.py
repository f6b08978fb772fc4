"""CLI behavior: subcommands, exit codes, console output."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

from conftest import write_dataset
from mmshap.cli import EXIT_CONFIG, EXIT_OK, EXIT_ORACLE, EXIT_PARTIAL, main

STUB = str(Path(__file__).resolve().parent / "stub_oracle.py")


def run_args(dataset, out, *extra):
    return [
        "run",
        "--dataset",
        str(dataset),
        "--oracle",
        "builtin:linear",
        "--mode",
        "exact",
        "--out",
        str(out),
        *extra,
    ]


def test_selftest_passes():
    assert main(["selftest"]) == EXIT_OK


def test_run_happy_path(tiny_dataset, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(run_args(tiny_dataset, out)) == EXIT_OK
    printed = capsys.readouterr().out
    assert "report:" in printed
    assert "samples: 6 attributed, 0 failed" in printed
    assert "mean T-SHAP (caption):" in printed
    assert "acc_r:" in printed
    assert (out / "report.json").exists()
    assert (out / "samples.csv").exists()


def test_run_with_render_writes_heatmaps(tiny_dataset, tmp_path):
    out = tmp_path / "out"
    assert main(run_args(tiny_dataset, out, "--render")) == EXIT_OK
    assert list((out / "samples").glob("*.html"))


def test_missing_dataset_is_a_config_error(tmp_path, capsys):
    code = main(run_args(tmp_path / "absent.jsonl", tmp_path / "out"))
    assert code == EXIT_CONFIG
    assert "error:" in capsys.readouterr().err


def test_malformed_dataset_is_a_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"not": "a record"}\n')
    assert main(run_args(bad, tmp_path / "out")) == EXIT_CONFIG


def test_bad_coalitions_value_is_a_config_error(tiny_dataset, tmp_path):
    code = main(run_args(tiny_dataset, tmp_path / "out", "--coalitions", "many"))
    assert code == EXIT_CONFIG


def test_unknown_builtin_is_a_config_error(tiny_dataset, tmp_path):
    code = main(
        [
            "run",
            "--dataset",
            str(tiny_dataset),
            "--oracle",
            "builtin:nope",
            "--out",
            str(tmp_path / "out"),
        ]
    )
    assert code == EXIT_CONFIG


def test_broken_oracle_handshake_is_an_oracle_error(tiny_dataset, tmp_path, capsys):
    code = main(
        [
            "run",
            "--dataset",
            str(tiny_dataset),
            "--oracle",
            f"{sys.executable} {STUB} --no-handshake",
            "--out",
            str(tmp_path / "out"),
        ]
    )
    assert code == EXIT_ORACLE
    assert "oracle" in capsys.readouterr().err


def test_hanging_oracle_is_an_oracle_error(tiny_dataset, tmp_path):
    code = main(
        [
            "run",
            "--dataset",
            str(tiny_dataset),
            "--oracle",
            f"{sys.executable} {STUB} --hang",
            "--out",
            str(tmp_path / "out"),
            "--timeout",
            "0.5",
        ]
    )
    assert code == EXIT_ORACLE


def test_per_sample_failures_exit_partial(tiny_dataset, tmp_path, capsys):
    code = main(
        [
            "run",
            "--dataset",
            str(tiny_dataset),
            "--oracle",
            f"{sys.executable} {STUB} --fail-sample rec000::caption",
            "--mode",
            "exact",
            "--out",
            str(tmp_path / "out"),
        ]
    )
    assert code == EXIT_PARTIAL
    err = capsys.readouterr().err
    assert "failures.json" in err
    assert (tmp_path / "out" / "failures.json").exists()


def test_render_subcommand(tiny_dataset, tmp_path):
    out = tmp_path / "out"
    assert main(run_args(tiny_dataset, out)) == EXIT_OK
    rendered = tmp_path / "rendered"
    code = main(
        ["render", "--report", str(out / "report.json"), "--out", str(rendered)]
    )
    assert code == EXIT_OK
    assert list((rendered / "samples").glob("*.html"))
    assert (rendered / "figures" / "t_shap_hist.png").exists()


def test_render_missing_report_is_a_config_error(tmp_path, capsys):
    code = main(
        ["render", "--report", str(tmp_path / "nope.json"), "--out", str(tmp_path)]
    )
    assert code == EXIT_CONFIG


def test_render_invalid_json_is_a_config_error(tmp_path):
    report = tmp_path / "report.json"
    report.write_text("{not json")
    assert main(["render", "--report", str(report), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_splits_flag_limits_the_run(tiny_dataset, tmp_path):
    out = tmp_path / "out"
    assert main(run_args(tiny_dataset, out, "--splits", "caption")) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert {s["split"] for s in report["samples"]} == {"caption"}


def test_console_script_is_installed():
    import shutil

    assert shutil.which("mmshap") is not None
