"""Sample construction: image tiling driven by text length, special-token flags.

This module decides how an image is cut into patch tokens and assembles the
combined text+image token sequence.  It also states the normative masking
semantics that any real-model adapter must implement:

* a masked text token is replaced by the model tokenizer's mask token;
* a masked image patch has every pixel in its rectangle set to zero, in
  original pixel space, before the model's own preprocessing runs.

Special text tokens (sentence separators and similar) are flagged
non-maskable here and are excluded from attribution by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from .errors import NoMaskableText, ValidationError
from .types import IMAGE, TEXT, Token, TokenizedSample, validate_sample

__all__ = ["TilingPlan", "plan_tiling", "build_sample"]

MIN_GRID = 2
MAX_GRID = 8


@dataclass(frozen=True)
class TilingPlan:
    """An exact partition of an image into a square grid of patch rectangles.

    Rectangles are (x0, y0, x1, y1) half-open pixel bounds in row-major
    order; they are disjoint and their union covers every pixel.
    """

    grid_rows: int
    grid_cols: int
    patch_rects: tuple[tuple[int, int, int, int], ...]

    @property
    def n_patches(self) -> int:
        return self.grid_rows * self.grid_cols

    def to_dict(self) -> dict[str, Any]:
        return {
            "grid_rows": self.grid_rows,
            "grid_cols": self.grid_cols,
            "patch_rects": [list(rect) for rect in self.patch_rects],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TilingPlan":
        return cls(
            grid_rows=int(data["grid_rows"]),
            grid_cols=int(data["grid_cols"]),
            patch_rects=tuple(
                (int(r[0]), int(r[1]), int(r[2]), int(r[3]))
                for r in data["patch_rects"]
            ),
        )


def grid_size(n_text_tokens: int) -> int:
    """Grid side for a given text length: round(sqrt(n)) clamped to [2, 8].

    Longer text gets more and smaller patches; the clamp keeps degenerate
    captions at a 2x2 floor and very long text at an 8x8 ceiling.
    """
    if n_text_tokens < 1:
        raise ValidationError("n_text_tokens must be at least 1")
    return min(MAX_GRID, max(MIN_GRID, round(math.sqrt(n_text_tokens))))


def plan_tiling(image_width: int, image_height: int, n_text_tokens: int) -> TilingPlan:
    """Cut a width x height image into a g x g grid, g from the text length.

    Edges sit at floor(i * W / g) and floor(j * H / g), so the rectangles
    tile the image exactly for any resolution: no pixel is dropped or
    counted twice.  Non-square images keep a square grid with non-square
    patches.
    """
    if image_width < 1 or image_height < 1:
        raise ValidationError("image dimensions must be at least 1 pixel")
    g = grid_size(n_text_tokens)
    if image_width < g or image_height < g:
        raise ValidationError(
            f"image {image_width}x{image_height} is smaller than the "
            f"{g}x{g} patch grid; every patch needs at least one pixel"
        )
    xs = [(i * image_width) // g for i in range(g + 1)]
    ys = [(j * image_height) // g for j in range(g + 1)]
    rects = tuple(
        (xs[c], ys[r], xs[c + 1], ys[r + 1])
        for r in range(g)
        for c in range(g)
    )
    return TilingPlan(grid_rows=g, grid_cols=g, patch_rects=rects)


def build_sample(
    sample_id: str,
    text_tokens: Sequence[tuple[str, Any, bool]],
    tiling: TilingPlan,
    metadata: Mapping[str, str] | None = None,
) -> TokenizedSample:
    """Assemble a sample: text tokens first, then image patches row-major.

    ``text_tokens`` entries are (label, payload_ref, is_special); special
    tokens are kept in the sequence but flagged non-maskable.  Image tokens
    carry their patch rectangle as payload_ref so oracles can zero the
    exact same pixels.

    Raises NoMaskableText when every text token is special.
    """
    if not any(not special for _, _, special in text_tokens):
        raise NoMaskableText(
            f"sample {sample_id!r} has no maskable text token"
        )
    tokens: list[Token] = []
    for label, payload_ref, special in text_tokens:
        tokens.append(
            Token(
                index=len(tokens),
                modality=TEXT,
                maskable=not special,
                label=str(label),
                payload_ref=payload_ref,
            )
        )
    for r in range(tiling.grid_rows):
        for c in range(tiling.grid_cols):
            rect = tiling.patch_rects[r * tiling.grid_cols + c]
            tokens.append(
                Token(
                    index=len(tokens),
                    modality=IMAGE,
                    maskable=True,
                    label=f"patch[{r},{c}]",
                    payload_ref=rect,
                )
            )
    return validate_sample(
        TokenizedSample(
            sample_id=sample_id,
            tokens=tuple(tokens),
            metadata=dict(metadata or {}),
        )
    )
