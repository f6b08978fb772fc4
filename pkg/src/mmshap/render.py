"""Static heatmap rendering: per-sample HTML/SVG pages and summary figures.

Each sample page is self-contained (inline CSS and SVG, no external
assets): text tokens are shown as colored chips and image patches as a
colored overlay grid at their exact pixel rectangles.  Positive values
are blue, negative values red, with intensity scaled per sample by the
largest absolute value, so the page answers "what pushed this prediction
up or down" at a glance.

Dataset-level matplotlib figures (text-share histogram, modality mass)
are written alongside the per-sample pages.
"""

from __future__ import annotations

import html
import json
from hashlib import blake2b
from pathlib import Path
from typing import Any, Mapping, Sequence

from .errors import MissingAttributions
from .scoring import format_percent

__all__ = [
    "render_report",
    "render_sample_html",
    "color_for",
    "sample_page_name",
]

SAMPLES_DIR = "samples"
FIGURES_DIR = "figures"

# Diverging endpoints: blue for positive, red for negative contributions.
_BLUE = (59, 76, 192)
_RED = (180, 4, 38)

_PAGE_CSS = """
body { font-family: sans-serif; margin: 2rem; color: #1a1a1a; background: #ffffff; }
h1 { font-size: 1.2rem; margin-bottom: 0.2rem; }
.meta { color: #555; font-size: 0.85rem; }
.scores { font-size: 1.0rem; margin: 0.8rem 0; }
.scores b { font-size: 1.1rem; }
.banner { background: #fff3cd; border: 1px solid #d0a000; padding: 0.5rem 0.8rem; margin: 0.8rem 0; }
.tokens { line-height: 2.2; max-width: 60rem; }
.tok { padding: 0.25rem 0.45rem; margin: 0 0.15rem; border-radius: 4px; border: 1px solid #999; }
.tok.special { border-style: dashed; color: #777; }
svg { max-width: 480px; height: auto; display: block; margin: 1rem 0; border: 1px solid #999; }
.legend { font-size: 0.85rem; color: #555; }
.swatch { display: inline-block; width: 0.9rem; height: 0.9rem; border: 1px solid #999; vertical-align: -0.15rem; }
""".strip()


def color_for(phi: float, max_abs: float) -> str:
    """CSS color for one value on the per-sample diverging scale.

    Zero (or an all-zero sample) maps to white; intensity grows linearly
    with |phi| / max_abs toward the blue (positive) or red (negative)
    endpoint.
    """
    if max_abs <= 0.0 or phi == 0.0:
        return "rgb(255,255,255)"
    t = min(1.0, abs(phi) / max_abs)
    target = _BLUE if phi > 0 else _RED
    r, g, b = (round(255 + (c - 255) * t) for c in target)
    return f"rgb({r},{g},{b})"


def sample_page_name(sample_id: str) -> str:
    """Filesystem-safe page name; a short hash keeps distinct ids distinct."""
    safe = "".join(
        ch if ch.isalnum() or ch in "._-" else "_" for ch in sample_id
    )
    digest = blake2b(sample_id.encode("utf-8"), digest_size=4).hexdigest()
    return f"{safe}-{digest}.html"


def _require_attribution(record: Mapping[str, Any]) -> Mapping[str, Any]:
    attribution = record.get("attribution")
    if not isinstance(attribution, Mapping) or not attribution.get("phi"):
        raise MissingAttributions(
            f"sample {record.get('sample_id')!r} carries no per-token values"
        )
    return attribution


def _token_chip(token: Mapping[str, Any], phi: float, max_abs: float) -> str:
    classes = "tok" if token["maskable"] else "tok special"
    label = html.escape(str(token["label"]))
    color = color_for(phi, max_abs)
    return (
        f'<span class="{classes}" style="background:{color}" '
        f'title="phi={phi:+.6f}">{label}</span>'
    )


def _svg_grid(
    tokens: Sequence[Mapping[str, Any]],
    phi: Sequence[float],
    width: int,
    height: int,
    max_abs: float,
) -> str:
    rects = []
    for token in tokens:
        if token["modality"] != "image":
            continue
        x0, y0, x1, y1 = (int(v) for v in token["payload_ref"])
        value = phi[token["index"]]
        label = html.escape(str(token["label"]))
        rects.append(
            f'<rect x="{x0}" y="{y0}" width="{x1 - x0}" height="{y1 - y0}" '
            f'fill="{color_for(value, max_abs)}" fill-opacity="0.65" '
            f'stroke="#444" stroke-width="1">'
            f"<title>{label} phi={value:+.6f}</title></rect>"
        )
    body = "".join(rects)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="0 0 {width} {height}" role="img">{body}</svg>'
    )


def render_sample_html(record: Mapping[str, Any]) -> str:
    """One self-contained page for one sample record of the report."""
    attribution = _require_attribution(record)
    phi = [float(v) for v in attribution["phi"]]
    tokens = record["sample"]["tokens"]
    max_abs = max((abs(v) for v in phi), default=0.0)
    score = record["score"]
    width, height = (int(v) for v in record["image_size"])

    sample_id = html.escape(str(record["sample_id"]))
    if score["t_shap"] is None:
        shap_text = "T-SHAP: n/a | V-SHAP: n/a"
    else:
        shap_text = (
            f"T-SHAP: {format_percent(score['t_shap'])}% | "
            f"V-SHAP: {format_percent(score['v_shap'])}%"
        )
    banner = (
        '<div class="banner">All token contributions are zero; '
        "modality proportions are undefined for this sample.</div>"
        if score["all_zero"]
        else ""
    )
    chips = "".join(
        _token_chip(token, phi[token["index"]], max_abs)
        for token in tokens
        if token["modality"] == "text"
    )
    positive = color_for(max_abs if max_abs else 1.0, max_abs if max_abs else 1.0)
    negative = color_for(-(max_abs if max_abs else 1.0), max_abs if max_abs else 1.0)
    legend = (
        f'<span class="swatch" style="background:{positive}"></span> '
        f"pushes the score up &nbsp; "
        f'<span class="swatch" style="background:{negative}"></span> '
        f"pushes the score down &nbsp; intensity = |phi| / {max_abs:.6f}"
    )

    return f"""<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>{sample_id}</title>
<style>
{_PAGE_CSS}
</style>
</head>
<body>
<h1>{sample_id}</h1>
<p class="meta">split: {html.escape(str(record["split"]))} | task: {html.escape(str(record["task"]))} | estimator: {html.escape(str(attribution["estimator"]))} | coalitions: {attribution["n_coalitions"]} | seed: {attribution["seed"]}</p>
{banner}
<p class="scores">score: {attribution["full_value"]:.6f} | base: {attribution["base_value"]:.6f} | <b>{shap_text}</b></p>
<div class="tokens">{chips}</div>
{_svg_grid(tokens, phi, width, height, max_abs)}
<p class="legend">{legend}</p>
</body>
</html>
"""


def _render_figures(report: Mapping[str, Any], figures_dir: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written: list[Path] = []
    samples = report["samples"]

    by_split: dict[str, list[float]] = {}
    for record in samples:
        t_shap = record["score"]["t_shap"]
        if t_shap is not None:
            by_split.setdefault(record["split"], []).append(t_shap)
    if by_split:
        fig, ax = plt.subplots(figsize=(6, 4))
        for split in sorted(by_split):
            ax.hist(
                by_split[split],
                bins=20,
                range=(0.0, 100.0),
                alpha=0.6,
                label=split,
            )
        ax.set_xlabel("T-SHAP (%)")
        ax.set_ylabel("samples")
        ax.set_title("Text share per sample")
        ax.legend()
        fig.tight_layout()
        path = figures_dir / "t_shap_hist.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    masses: dict[str, list[float]] = {}
    for record in samples:
        phi_abs = record["score"]["phi_abs_by_modality"]
        if phi_abs:
            for modality, mass in phi_abs.items():
                masses.setdefault(modality, []).append(mass)
    if masses:
        fig, ax = plt.subplots(figsize=(5, 4))
        names = sorted(masses)
        means = [sum(masses[m]) / len(masses[m]) for m in names]
        ax.bar(names, means, color="#6a89c9")
        ax.set_ylabel("mean absolute attribution mass")
        ax.set_title("Attribution mass by modality")
        fig.tight_layout()
        path = figures_dir / "modality_mass.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


def render_report(report: Mapping[str, Any], out_dir: str | Path) -> list[Path]:
    """Write one HTML page per sample plus dataset-level figures.

    Returns the list of written paths.  Raises MissingAttributions when a
    sample record has no per-token values to draw.
    """
    out = Path(out_dir)
    samples_dir = out / SAMPLES_DIR
    figures_dir = out / FIGURES_DIR
    samples_dir.mkdir(parents=True, exist_ok=True)
    figures_dir.mkdir(parents=True, exist_ok=True)

    written: list[Path] = []
    for record in report["samples"]:
        page = render_sample_html(record)
        path = samples_dir / sample_page_name(record["sample_id"])
        path.write_text(page, encoding="utf-8")
        written.append(path)
    written.extend(_render_figures(report, figures_dir))
    return written


def load_report(path: str | Path) -> dict[str, Any]:
    """Read a report JSON file back for rendering."""
    with Path(path).open("r", encoding="utf-8") as handle:
        return json.load(handle)
