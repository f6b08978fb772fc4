"""Dataset ingestion: the line-delimited record format and its validation."""

from __future__ import annotations

import json

import pytest

from mmshap.dataset import DatasetRecord, image_size, ingest, resolve_image
from mmshap.errors import ParseError


def write_lines(tmp_path, lines, name="data.jsonl"):
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def record_line(record_id="r1", image="img.png", caption="a cat", **extra):
    body = {"id": record_id, "image": image, "caption": caption, **extra}
    return json.dumps(body)


def test_ingest_valid_records(tmp_path):
    path = write_lines(
        tmp_path,
        [
            record_line("r1", caption="a cat sits", foil="a dog sits"),
            record_line("r2", caption="blue sky"),
            record_line("r3", caption="q?", task="vqa", correct=True),
        ],
    )
    records = ingest(path)
    assert [r.record_id for r in records] == ["r1", "r2", "r3"]
    assert records[0].foil == "a dog sits"
    assert records[1].foil is None
    assert records[1].task == "isa"
    assert records[2].task == "vqa"
    assert records[2].correct is True


def test_ingest_skips_blank_lines(tmp_path):
    path = write_lines(tmp_path, [record_line("r1"), "", "   ", record_line("r2")])
    assert len(ingest(path)) == 2


def test_parse_error_carries_line_number(tmp_path):
    path = write_lines(tmp_path, [record_line("r1"), "{broken", record_line("r3")])
    with pytest.raises(ParseError) as info:
        ingest(path)
    assert info.value.line == 2
    assert "line 2" in str(info.value)


@pytest.mark.parametrize(
    "bad",
    [
        '{"image": "x.png", "caption": "hi"}',  # missing id
        '{"id": "", "image": "x.png", "caption": "hi"}',  # empty id
        '{"id": "r", "caption": "hi"}',  # missing image
        '{"id": "r", "image": "x.png"}',  # missing caption
        '{"id": "r", "image": "x.png", "caption": ""}',  # empty caption
        '{"id": "r", "image": "x.png", "caption": "hi", "foil": 3}',
        '{"id": "r", "image": "x.png", "caption": "hi", "task": "poetry"}',
        '{"id": "r", "image": "x.png", "caption": "hi", "correct": "yes"}',
        '["not", "an", "object"]',
    ],
)
def test_ingest_rejects_malformed_records(tmp_path, bad):
    path = write_lines(tmp_path, [bad])
    with pytest.raises(ParseError) as info:
        ingest(path)
    assert info.value.line == 1


def test_ingest_rejects_duplicate_ids(tmp_path):
    path = write_lines(tmp_path, [record_line("dup"), record_line("dup")])
    with pytest.raises(ParseError) as info:
        ingest(path)
    assert info.value.line == 2


def test_ingest_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        ingest(tmp_path / "absent.jsonl")


def test_resolve_image_path_is_relative_to_dataset(tiny_dataset):
    records = ingest(tiny_dataset)
    assets = resolve_image(records[0].image, tiny_dataset.parent)
    assert "image_path" in assets
    width, height = image_size(assets)
    assert (width, height) == (64, 48)


def test_resolve_image_base64(tmp_path):
    import base64

    from conftest import write_png

    png = write_png(tmp_path / "b.png", width=8, height=8)
    encoded = base64.b64encode(png.read_bytes()).decode("ascii")
    assets = resolve_image(f"data:image/png;base64,{encoded}", tmp_path)
    assert "image_base64" in assets
    assert image_size(assets) == (8, 8)


def test_resolve_image_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        resolve_image("missing.png", tmp_path)


def test_image_size_rejects_garbage_base64(tmp_path):
    with pytest.raises(ValueError):
        image_size({"image_base64": "@@not-base64@@"})
