"""Planar contour grids for external plotting.

Grids are corner-anchored (linspace over [-1, 1] includes both endpoints),
row-major with x as the outer loop, and serialized at 17 significant digits,
so two runs produce byte-identical files.
"""

import numpy as np

from .._jsonio import format_float
from ..errors import ConfigError, UnsupportedDim


def emit_contour_grid(fn, M=2, resolution=201):
    """Evaluate fn on a resolution x resolution grid; rows of (x, y, value)."""
    if M != 2:
        raise UnsupportedDim(f"contour grids are planar only (M=2), got M={M}")
    if not resolution >= 2:
        raise ConfigError(f"resolution must be at least 2, got {resolution}")
    axis = np.linspace(-1.0, 1.0, int(resolution))
    return [(float(x), float(y), float(fn(np.array([x, y])))) for x in axis for y in axis]


def write_contour_csv(rows, path):
    with open(path, "w") as fh:
        fh.write("x,y,value\n")
        for row in rows:
            fh.write(",".join(format_float(v) for v in row) + "\n")
