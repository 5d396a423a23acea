"""Gaussian kernel-density rasters of per-point values.

The heatmap surface is the value-weighted Gaussian kernel sum evaluated at
cell centers: cell(c) = sum_i v_i exp(-d(c, p_i)^2 / (2 bandwidth^2)). Grids
are exported as a row-major CSV, an 8-bit binary portable graymap with
min-max scaling, and a flat key-value metadata sidecar recording the scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spatial import PointSet

# Cells per evaluation block; bounds the (block x points) kernel intermediate.
_EVAL_BLOCK = 16_384


@dataclass(frozen=True)
class RasterGrid:
    """Row-major grid of nonnegative intensities.

    Row 0 is the southernmost row (y grows with the row index); the PGM
    writer flips rows so images come out north-up. Cell (r, c) has its
    center at origin + ((c + 0.5) * cell_size, (r + 0.5) * cell_size).
    """

    origin: tuple[float, float]
    cell_size: float
    width: int
    height: int
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        if values.shape != (self.height * self.width,):
            raise ValueError(
                f"values length {values.shape} does not match "
                f"{self.height} x {self.width}"
            )

    def as_array(self) -> np.ndarray:
        """(height, width) view, row 0 = south."""
        return self.values.reshape(self.height, self.width)

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.origin[0] + (np.arange(self.width) + 0.5) * self.cell_size
        y = self.origin[1] + (np.arange(self.height) + 0.5) * self.cell_size
        return x, y


def raster_heatmap(
    points: PointSet, values: np.ndarray, cell_size: float, bandwidth: float
) -> RasterGrid:
    """Rasterize per-point values onto a grid covering the padded bounding box.

    The grid extends 2 * bandwidth beyond the point bounding box on every
    side. The kernel sum is linear in the values and runs over all points
    (no truncation), evaluated blockwise over cells.
    """
    if cell_size <= 0 or bandwidth <= 0:
        raise ValueError("cell_size and bandwidth must be positive")
    values = np.asarray(values, dtype=float)
    if values.shape != (points.n,):
        raise ValueError("need exactly one value per point")

    pad = 2.0 * bandwidth
    min_xy = points.coords.min(axis=0) - pad
    max_xy = points.coords.max(axis=0) + pad
    width = max(1, math.ceil((max_xy[0] - min_xy[0]) / cell_size))
    height = max(1, math.ceil((max_xy[1] - min_xy[1]) / cell_size))

    cx = min_xy[0] + (np.arange(width) + 0.5) * cell_size
    cy = min_xy[1] + (np.arange(height) + 0.5) * cell_size
    centers_x = np.tile(cx, height)
    centers_y = np.repeat(cy, width)

    denom = 2.0 * bandwidth * bandwidth
    out = np.empty(height * width)
    for start in range(0, out.size, _EVAL_BLOCK):
        stop = min(out.size, start + _EVAL_BLOCK)
        dx = centers_x[start:stop, None] - points.coords[None, :, 0]
        dy = centers_y[start:stop, None] - points.coords[None, :, 1]
        out[start:stop] = np.exp(-(dx * dx + dy * dy) / denom) @ values
    return RasterGrid(
        origin=(float(min_xy[0]), float(min_xy[1])),
        cell_size=float(cell_size),
        width=width,
        height=height,
        values=out,
    )


def graymap_bytes(grid: RasterGrid, scale: tuple[float, float] | None = None) -> bytes:
    """Binary 8-bit PGM (P5) with min-max scaling, rows written north-up.

    ``scale`` overrides the per-file (min, max) so paired rasters can share
    one scale; values outside it are clipped. A degenerate scale produces an
    all-black image.
    """
    vmin, vmax = scale if scale is not None else (float(grid.values.min()), float(grid.values.max()))
    arr = grid.as_array()[::-1]
    if vmax > vmin:
        scaled = np.clip((arr - vmin) / (vmax - vmin), 0.0, 1.0)
        pixels = np.rint(scaled * 255.0).astype(np.uint8)
    else:
        pixels = np.zeros(arr.shape, dtype=np.uint8)
    header = f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii")
    return header + pixels.tobytes()


def raster_scale(grid: RasterGrid) -> tuple[float, float]:
    """The per-file min-max scale the graymap uses by default."""
    return float(grid.values.min()), float(grid.values.max())
