"""Balanced non-overlapping grid partitions of a quadrat image.

A WxH image split into rows x cols yields tiles whose widths (and heights)
differ by at most one pixel: the remainder pixels go to the leading columns
and rows. The tiler emits geometry only; pixel cropping is the feature
extractor's job.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

from .errors import ImageTooSmallError, InputError


@dataclass(frozen=True)
class GridSpec:
    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise InputError(f"grid must have at least one row and column, got {self.rows}x{self.cols}")


@dataclass(frozen=True)
class TileRect:
    """Grid cell with 0-based grid coordinates and half-open pixel bounds."""

    row: int
    col: int
    x0: int
    y0: int
    x1: int
    y1: int


def _edges(total: int, parts: int) -> List[int]:
    # first (total mod parts) segments are one pixel wider
    base, extra = divmod(total, parts)
    edges = [0]
    for i in range(parts):
        edges.append(edges[-1] + base + (1 if i < extra else 0))
    return edges


def make_grid(width: int, height: int, spec: GridSpec) -> List[TileRect]:
    """Partition a width x height image into row-major tiles."""
    if width < spec.cols or height < spec.rows:
        raise ImageTooSmallError(
            f"image {width}x{height} too small for a {spec.rows}x{spec.cols} grid"
        )
    xs = _edges(width, spec.cols)
    ys = _edges(height, spec.rows)
    tiles = []
    for r in range(spec.rows):
        for c in range(spec.cols):
            tiles.append(TileRect(row=r, col=c, x0=xs[c], y0=ys[r], x1=xs[c + 1], y1=ys[r + 1]))
    return tiles


def parse_grid_spec(text: str) -> GridSpec:
    """Parse 'RxC' (e.g. '4x4') into a GridSpec."""
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise InputError(f"grid spec must look like 'RxC', got {text!r}")
    try:
        rows, cols = int(parts[0]), int(parts[1])
    except ValueError:
        raise InputError(f"grid spec must use integers, got {text!r}") from None
    return GridSpec(rows=rows, cols=cols)
