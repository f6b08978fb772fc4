"""JSONL dataset ingestion and image size probing.

One record per line:

    {"id": "c1", "image": "img/cat.png", "caption": "a cat sits",
     "foil": "a dog sits", "task": "isa", "correct": true}

``image`` is either a filesystem path (absolute, or relative to the
dataset file) or base64-encoded image bytes (optionally a data: URI).
``foil``, ``task`` (default "isa") and ``correct`` are optional.
Malformed lines are rejected with their 1-based line number.
"""

from __future__ import annotations

import base64
import binascii
import io
import json
from dataclasses import dataclass
from pathlib import Path

from PIL import Image

from .errors import ParseError

__all__ = ["DatasetRecord", "ingest", "resolve_image", "image_size"]

TASKS = ("isa", "vqa")


@dataclass(frozen=True)
class DatasetRecord:
    """One image/caption entry, optionally paired with a foil caption."""

    record_id: str
    image: str
    caption: str
    foil: str | None = None
    task: str = "isa"
    correct: bool | None = None


def _parse_record(line_no: int, raw: str) -> DatasetRecord:
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(line_no, f"invalid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ParseError(line_no, "record is not a JSON object")
    for key in ("id", "image", "caption"):
        if key not in data:
            raise ParseError(line_no, f"missing required field {key!r}")
        if not isinstance(data[key], str) or not data[key].strip():
            raise ParseError(line_no, f"field {key!r} must be a non-empty string")
    foil = data.get("foil")
    if foil is not None and (not isinstance(foil, str) or not foil.strip()):
        raise ParseError(line_no, "field 'foil' must be a non-empty string")
    task = data.get("task", "isa")
    if task not in TASKS:
        raise ParseError(line_no, f"unknown task {task!r} (expected one of {TASKS})")
    correct = data.get("correct")
    if correct is not None and not isinstance(correct, bool):
        raise ParseError(line_no, "field 'correct' must be a boolean")
    return DatasetRecord(
        record_id=data["id"],
        image=data["image"],
        caption=data["caption"],
        foil=foil,
        task=task,
        correct=correct,
    )


def ingest(dataset_path: str | Path) -> list[DatasetRecord]:
    """Parse a JSONL dataset file; blank lines are allowed and skipped.

    Raises FileNotFoundError for a missing file and ParseError (carrying
    the 1-based line number) for any malformed line, including duplicated
    record ids.
    """
    path = Path(dataset_path)
    records: list[DatasetRecord] = []
    seen: dict[str, int] = {}
    with path.open("r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            if not raw.strip():
                continue
            record = _parse_record(line_no, raw)
            if record.record_id in seen:
                raise ParseError(
                    line_no,
                    f"duplicate record id {record.record_id!r} "
                    f"(first seen on line {seen[record.record_id]})",
                )
            seen[record.record_id] = line_no
            records.append(record)
    return records


def resolve_image(image: str, dataset_dir: Path) -> dict[str, str]:
    """Classify an image field as a path or base64 payload.

    Returns an asset mapping with either ``image_path`` (absolute) or
    ``image_base64`` (raw base64, data: URI header stripped).
    """
    if image.startswith("data:"):
        _, _, payload = image.partition(",")
        return {"image_base64": payload}
    candidate = Path(image)
    if not candidate.is_absolute():
        candidate = dataset_dir / candidate
    if not candidate.exists():
        raise FileNotFoundError(f"image file not found: {candidate}")
    return {"image_path": str(candidate.resolve())}


def image_size(assets: dict[str, str]) -> tuple[int, int]:
    """(width, height) in pixels of the record's image.

    Raises ValueError when the bytes cannot be decoded as an image.
    """
    if "image_path" in assets:
        with Image.open(assets["image_path"]) as img:
            return img.size
    try:
        raw = base64.b64decode(assets["image_base64"], validate=True)
    except (binascii.Error, ValueError) as exc:
        raise ValueError(f"image is neither an existing path nor base64: {exc}") from None
    with Image.open(io.BytesIO(raw)) as img:
        return img.size
