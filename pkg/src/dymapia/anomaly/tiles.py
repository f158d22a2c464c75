"""Block tiling used by the texture and edge analyzers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_TILES = 4


@dataclass(frozen=True)
class Tile:
    y0: int
    y1: int
    x0: int
    x1: int

    @property
    def slices(self):
        return slice(self.y0, self.y1), slice(self.x0, self.x1)


def iter_tiles(shape, block: int):
    h, w = shape
    for y0 in range(0, h, block):
        for x0 in range(0, w, block):
            yield Tile(y0, min(y0 + block, h), x0, min(x0 + block, w))


def paint_tiles(shape, tiles, flags) -> np.ndarray:
    out = np.zeros(shape, dtype=np.uint8)
    for tile, flag in zip(tiles, flags):
        if flag:
            out[tile.slices] = 1
    return out
