"""Tile a document's page images into one fixed-resolution grid image.

The grid side is ceil(sqrt(L)) and pages are placed row-major in page order.
Unused cells keep the background fill. Resampling is pinned to bilinear so
composed images are byte-identical across runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from PIL import Image

from .model import DocumentRecord, PagewiseError

RESAMPLING = Image.Resampling.BILINEAR

STRETCH = "stretch"
LETTERBOX = "letterbox"
SCALING_MODES = (STRETCH, LETTERBOX)


@dataclass(frozen=True)
class GridConfig:
    """output_size is (height, width); background int = grayscale, tuple = RGB."""

    output_size: tuple[int, int] = (224, 224)
    background: int | tuple[int, int, int] = 255
    scaling: str = STRETCH

    def __post_init__(self) -> None:
        h, w = self.output_size
        if h <= 0 or w <= 0:
            raise PagewiseError(f"output_size must be positive, got {self.output_size}")
        if self.scaling not in SCALING_MODES:
            raise PagewiseError(f"unknown scaling mode: {self.scaling!r}")

    @property
    def mode(self) -> str:
        return "RGB" if isinstance(self.background, tuple) else "L"


def grid_side(page_count: int) -> int:
    """Smallest g with g*g >= page_count."""
    if page_count < 1:
        raise PagewiseError("grid needs at least one page")
    g = math.isqrt(page_count)
    return g if g * g == page_count else g + 1


def compose(page_images: Sequence[Image.Image], config: GridConfig) -> Image.Image:
    """Place page images row-major into a g x g grid of equal cells."""
    if not page_images:
        raise PagewiseError("empty document")
    g = grid_side(len(page_images))
    height, width = config.output_size
    cell_h, cell_w = height // g, width // g
    if cell_h == 0 or cell_w == 0:
        raise PagewiseError(
            f"{len(page_images)} pages do not fit a {height}x{width} output"
        )
    canvas = Image.new(config.mode, (width, height), config.background)
    for i, img in enumerate(page_images):
        row, col = divmod(i, g)
        x0, y0 = col * cell_w, row * cell_h
        page = img.convert(config.mode)
        if config.scaling == STRETCH:
            canvas.paste(page.resize((cell_w, cell_h), RESAMPLING), (x0, y0))
        else:
            scale = min(cell_w / page.width, cell_h / page.height)
            tw = max(1, int(page.width * scale))
            th = max(1, int(page.height * scale))
            tile = page.resize((tw, th), RESAMPLING)
            canvas.paste(tile, (x0 + (cell_w - tw) // 2, y0 + (cell_h - th) // 2))
    return canvas


def compose_document(
    record: DocumentRecord, config: GridConfig, root: Path | None = None
) -> Image.Image:
    """Load a record's page images from disk and compose them."""
    images = []
    for ref in record.pages:
        path = Path(root, ref) if root is not None else Path(ref)
        try:
            with Image.open(path) as img:
                img.load()
                images.append(img.copy())
        except FileNotFoundError:
            raise PagewiseError(f"{record.doc_id}: page image not found: {ref}") from None
        except Exception as exc:
            raise PagewiseError(
                f"{record.doc_id}: cannot decode page {ref}: {exc}"
            ) from None
    return compose(images, config)


def write_grids(
    records: Iterable[DocumentRecord],
    config: GridConfig,
    out_dir: Path,
    root: Path | None = None,
) -> list[Path]:
    """Compose every document and write <doc_id>.png files; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for record in sorted(records, key=lambda r: r.doc_id):
        target = out_dir / f"{record.doc_id}.png"
        compose_document(record, config, root=root).save(target, format="PNG")
        written.append(target)
    return written
