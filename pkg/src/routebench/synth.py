"""Synthetic land-cover masks for demos and self-tests."""

from __future__ import annotations

import numpy as np

from routebench.kb import AGRICULTURE, BARELAND, BUILDING, DEVELOPED, RANGELAND, ROAD, TREE, WATER
from routebench.mask import SemanticMask

_BASE = np.array([BARELAND, RANGELAND, DEVELOPED, TREE, AGRICULTURE])
_BASE_WEIGHTS = np.array([0.12, 0.22, 0.24, 0.2, 0.22])


def _band(rng, size, width, vertical) -> np.ndarray:
    """Boolean mask of a meandering band crossing the image."""
    out = np.zeros((size, size), dtype=bool)
    pos = float(rng.integers(size // 5, 4 * size // 5))
    drift = 0.0
    for t in range(size):
        drift = 0.85 * drift + rng.normal(0, 0.6)
        pos = float(np.clip(pos + drift, width, size - width - 1))
        lo, hi = int(pos) - width // 2, int(pos) - width // 2 + width
        if vertical:
            out[t, lo:hi] = True
        else:
            out[lo:hi, t] = True
    return out


def make_mask(rng: np.random.Generator, size: int = 128) -> SemanticMask:
    """Voronoi patches of open land cut by a river, roads and building blocks."""
    n_seeds = int(rng.integers(10, 22))
    seeds = rng.integers(0, size, size=(n_seeds, 2))
    labels = rng.choice(_BASE, size=n_seeds, p=_BASE_WEIGHTS)
    rr, cc = np.mgrid[0:size, 0:size]
    d = (rr[..., None] - seeds[:, 0]) ** 2 + (cc[..., None] - seeds[:, 1]) ** 2
    cells = labels[np.argmin(d, axis=2)].astype(np.uint8)

    cells[_band(rng, size, int(rng.integers(4, 9)), bool(rng.integers(2)))] = WATER
    for k in range(int(rng.integers(1, 3))):
        cells[_band(rng, size, 3, k % 2 == 0)] = ROAD

    for _ in range(int(rng.integers(4, 10))):
        h, w = rng.integers(5, 13, size=2)
        r, c = rng.integers(0, size - 13, size=2)
        block = cells[r:r + h, c:c + w]
        block[(block != ROAD) & (block != WATER)] = BUILDING
    return SemanticMask(cells)
