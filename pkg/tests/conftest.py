"""Shared test fixtures: sample builders and synthetic datasets."""

from __future__ import annotations

import json
from pathlib import Path

import pytest
from PIL import Image

from mmshap.types import IMAGE, TEXT, Token, TokenizedSample, validate_sample


def make_sample(
    n_text: int,
    n_image: int,
    sample_id: str = "t",
    specials: int = 0,
) -> TokenizedSample:
    """Specials first, then maskable text tokens, then image patch tokens."""
    tokens: list[Token] = []
    for k in range(specials):
        tokens.append(Token(len(tokens), TEXT, False, f"[S{k}]"))
    for k in range(n_text):
        tokens.append(Token(len(tokens), TEXT, True, f"w{k}"))
    for k in range(n_image):
        tokens.append(Token(len(tokens), IMAGE, True, f"p{k}", (k, 0, k + 1, 1)))
    return validate_sample(TokenizedSample(sample_id=sample_id, tokens=tuple(tokens)))


def write_png(path: Path, width: int = 64, height: int = 48) -> Path:
    img = Image.new("RGB", (width, height), color=(90, 120, 150))
    img.save(path)
    return path


def write_dataset(
    directory: Path,
    n_records: int = 3,
    with_foil: bool = True,
    caption_words: int = 4,
    image_size: tuple[int, int] = (64, 48),
    task: str = "isa",
) -> Path:
    """A small synthetic JSONL dataset with one shared PNG image."""
    directory.mkdir(parents=True, exist_ok=True)
    image_path = write_png(directory / "img.png", *image_size)
    lines = []
    for k in range(n_records):
        record = {
            "id": f"rec{k:03d}",
            "image": image_path.name,
            "caption": " ".join(f"word{k}{i}" for i in range(caption_words)),
            "task": task,
        }
        if with_foil:
            record["foil"] = " ".join(f"foil{k}{i}" for i in range(caption_words))
        lines.append(json.dumps(record))
    dataset = directory / "data.jsonl"
    dataset.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return dataset


@pytest.fixture
def tiny_dataset(tmp_path: Path) -> Path:
    return write_dataset(tmp_path / "ds")
