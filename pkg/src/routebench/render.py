"""PNG overlays of masks, region ids and trajectories for human inspection."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from PIL import Image

from routebench.mask import RegionCatalog, SemanticMask

PALETTE = np.array(
    [
        (128, 0, 0),  # Bareland
        (0, 255, 36),  # Rangeland
        (148, 148, 148),  # Developed space
        (255, 255, 255),  # Road
        (34, 97, 38),  # Tree
        (0, 69, 255),  # Water
        (75, 181, 73),  # Agriculture land
        (222, 31, 7),  # Building
    ],
    dtype=np.uint8,
)
PATH_COLOR = (255, 0, 255)
START_COLOR = (0, 255, 255)
END_COLOR = (255, 255, 0)
CORE_TINT = 0.6


def overlay(mask: SemanticMask, path: Optional[Sequence[Sequence[int]]] = None, start=None, end=None,
            catalog: Optional[RegionCatalog] = None) -> Image.Image:
    """RGB image the size of ``mask``; path pixels and endpoints recoloured in place.

    With a catalog, region cores are darkened so grounding probes are visible.
    """
    rgb = PALETTE[mask.cells].copy()
    if catalog is not None:
        for r in catalog.regions:
            core = r.core
            rgb[core[:, 0], core[:, 1]] = (rgb[core[:, 0], core[:, 1]] * CORE_TINT).astype(np.uint8)
    h, w = mask.cells.shape
    for p in path or ():
        if 0 <= p[0] < h and 0 <= p[1] < w:
            rgb[p[0], p[1]] = PATH_COLOR
    for p, color in ((start, START_COLOR), (end, END_COLOR)):
        if p is not None:
            rgb[p[0], p[1]] = color
    return Image.fromarray(rgb, mode="RGB")
