"""Dense grid snapshots extracted from a sampled tree.

Both grids describe the k-adic subdivision of one base cell (``root``) into
``k**resolution`` cells per axis.  Occupancy is an approximation from above
that sharpens as ``probe_depth`` grows; mass cells hold the natural-measure
estimate carried by each subcell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .words import Word


@dataclass
class OccupancyGrid:
    """Boolean grid: which cells still have live descendants probe_depth below."""

    cells: np.ndarray  # bool, shape (side,) * m with side = k**resolution
    root: Word
    resolution: int
    probe_depth: int

    @property
    def side(self) -> int:
        return self.cells.shape[0]

    @property
    def m(self) -> int:
        return self.cells.ndim

    def occupied_fraction(self) -> float:
        return float(self.cells.mean())


@dataclass
class MassGrid:
    """Float grid of natural-measure estimates per cell, plus their sum."""

    cells: np.ndarray  # float64, shape (side,) * m
    root: Word
    resolution: int
    probe_depth: int
    total: float

    @property
    def side(self) -> int:
        return self.cells.shape[0]

    @property
    def m(self) -> int:
        return self.cells.ndim
