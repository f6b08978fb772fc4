"""Static report rendering: sample pages, diverging colors, figures."""

from __future__ import annotations

from pathlib import Path

import pytest

from conftest import write_dataset
from mmshap.engine import EstimatorConfig
from mmshap.errors import MissingAttributions
from mmshap.harness import RunConfig, run
from mmshap.render import (
    color_for,
    load_report,
    render_report,
    render_sample_html,
    sample_page_name,
)

GOLDEN = Path(__file__).resolve().parent / "data" / "golden_sample.html"


def golden_record() -> dict:
    return {
        "sample_id": "demo::caption",
        "record_id": "demo",
        "split": "caption",
        "task": "isa",
        "text": "a red kite",
        "image_size": [64, 48],
        "sample": {
            "sample_id": "demo::caption",
            "tokens": [
                {"index": 0, "modality": "text", "maskable": False, "label": "[CLS]", "payload_ref": None},
                {"index": 1, "modality": "text", "maskable": True, "label": "red", "payload_ref": None},
                {"index": 2, "modality": "text", "maskable": True, "label": "kite", "payload_ref": None},
                {"index": 3, "modality": "image", "maskable": True, "label": "patch[0,0]", "payload_ref": [0, 0, 32, 24]},
                {"index": 4, "modality": "image", "maskable": True, "label": "patch[0,1]", "payload_ref": [32, 0, 64, 24]},
                {"index": 5, "modality": "image", "maskable": True, "label": "patch[1,0]", "payload_ref": [0, 24, 32, 48]},
                {"index": 6, "modality": "image", "maskable": True, "label": "patch[1,1]", "payload_ref": [32, 24, 64, 48]},
            ],
            "metadata": {"record_id": "demo", "split": "caption", "task": "isa"},
        },
        "attribution": {
            "phi": [0.0, 0.5, -0.25, 1.0, 0.0, -0.5, 0.25],
            "base_value": 0.1,
            "full_value": 1.1,
            "estimator": "exact",
            "n_coalitions": 64,
            "seed": 0,
        },
        "score": {
            "all_zero": False,
            "phi_abs_by_modality": {"text": 0.75, "image": 1.75},
            "proportion_by_modality": {"text": 0.3, "image": 0.7},
            "t_shap": 30.0,
            "v_shap": 70.0,
        },
        "oracle_calls": 64,
    }


def test_sample_page_matches_golden_file():
    assert render_sample_html(golden_record()) == GOLDEN.read_text(encoding="utf-8")


def test_zero_maps_to_white():
    assert color_for(0.0, 1.0) == "rgb(255,255,255)"
    assert color_for(0.5, 0.0) == "rgb(255,255,255)"  # all-zero sample


def test_endpoints_hit_the_palette():
    assert color_for(1.0, 1.0) == "rgb(59,76,192)"
    assert color_for(-1.0, 1.0) == "rgb(180,4,38)"


def test_color_intensity_is_symmetric_in_magnitude():
    for a in (0.1, 0.25, 0.5, 0.9):
        up = color_for(a, 1.0)
        down = color_for(-a, 1.0)
        assert up != down
        # Equal |phi| means equal distance from white on both arms.
        up_rgb = [int(v) for v in up[4:-1].split(",")]
        down_rgb = [int(v) for v in down[4:-1].split(",")]
        up_dist = sum(255 - c for c in up_rgb)
        down_dist = sum(255 - c for c in down_rgb)
        blue_total = sum(255 - c for c in (59, 76, 192))
        red_total = sum(255 - c for c in (180, 4, 38))
        assert up_dist / blue_total == pytest.approx(
            down_dist / red_total, abs=0.01
        )


def test_values_beyond_max_clamp():
    assert color_for(5.0, 1.0) == "rgb(59,76,192)"


def test_all_zero_page_shows_banner_and_na_scores():
    record = golden_record()
    record["attribution"]["phi"] = [0.0] * 7
    record["score"] = {
        "all_zero": True,
        "phi_abs_by_modality": None,
        "proportion_by_modality": None,
        "t_shap": None,
        "v_shap": None,
    }
    page = render_sample_html(record)
    assert "All token contributions are zero" in page
    assert "T-SHAP: n/a" in page
    assert "30.0%" not in page


def test_labels_are_html_escaped():
    record = golden_record()
    record["sample"]["tokens"][1]["label"] = "<script>alert(1)</script>"
    page = render_sample_html(record)
    assert "<script>" not in page
    assert "&lt;script&gt;" in page


def test_missing_attribution_is_an_error():
    record = golden_record()
    del record["attribution"]
    with pytest.raises(MissingAttributions):
        render_sample_html(record)
    record = golden_record()
    record["attribution"]["phi"] = []
    with pytest.raises(MissingAttributions):
        render_sample_html(record)


def test_page_names_are_safe_and_distinct():
    # Separators are replaced, so the name is always one path component.
    name = sample_page_name("rec/../../etc::caption")
    assert "/" not in name and "\\" not in name
    assert (Path("base") / name).parent == Path("base")
    assert name.endswith(".html")
    assert sample_page_name("a/b") != sample_page_name("a_b")


def test_render_report_writes_pages_and_figures(tmp_path):
    dataset = write_dataset(tmp_path / "ds")
    out = tmp_path / "out"
    report = run(
        RunConfig(
            dataset_path=str(dataset),
            oracle_spec="builtin:linear",
            output_dir=str(out),
            estimator=EstimatorConfig(mode="exact"),
        )
    )
    written = render_report(report.to_dict(), out)
    pages = [p for p in written if p.suffix == ".html"]
    assert len(pages) == 6
    for record in report.samples:
        expected = out / "samples" / sample_page_name(record["sample_id"])
        assert expected in pages
        assert expected.read_text().startswith("<!DOCTYPE html>")
    hist = out / "figures" / "t_shap_hist.png"
    mass = out / "figures" / "modality_mass.png"
    assert hist in written and mass in written
    for figure in (hist, mass):
        assert figure.read_bytes()[:4] == b"\x89PNG"


def test_render_report_with_all_zero_samples_skips_figures(tmp_path):
    dataset = write_dataset(tmp_path / "ds")
    out = tmp_path / "out"
    report = run(
        RunConfig(
            dataset_path=str(dataset),
            oracle_spec="builtin:constant",
            output_dir=str(out),
            estimator=EstimatorConfig(mode="exact"),
        )
    )
    written = render_report(report.to_dict(), out)
    assert all(p.suffix == ".html" for p in written)
    page = written[0].read_text()
    assert "All token contributions are zero" in page


def test_run_with_render_flag_writes_pages(tmp_path):
    dataset = write_dataset(tmp_path / "ds")
    out = tmp_path / "out"
    run(
        RunConfig(
            dataset_path=str(dataset),
            oracle_spec="builtin:linear",
            output_dir=str(out),
            estimator=EstimatorConfig(mode="exact"),
            render=True,
        )
    )
    assert list((out / "samples").glob("*.html"))
    assert (out / "figures" / "t_shap_hist.png").exists()


def test_load_report_roundtrip(tmp_path):
    dataset = write_dataset(tmp_path / "ds")
    out = tmp_path / "out"
    report = run(
        RunConfig(
            dataset_path=str(dataset),
            oracle_spec="builtin:linear",
            output_dir=str(out),
            estimator=EstimatorConfig(mode="exact"),
        )
    )
    loaded = load_report(out / "report.json")
    assert loaded == report.to_dict()
