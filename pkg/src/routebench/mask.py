"""Class-ID rasters: loading, majority fill, region extraction and eroded cores."""

from __future__ import annotations

import hashlib
import io
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

import numpy as np
from PIL import Image
from scipy import ndimage

from routebench.kb import NUM_CLASSES, ROAD, WATER, BUILDING, ScenarioConfig

PROTECTED_CLASSES = frozenset({ROAD, WATER, BUILDING})
DEFAULT_MIN_AREA = 64
DEFAULT_CORE_DEPTH = 2
RAW_MAGIC = b"NSRM"

# 4-connectivity for components, 8-neighbourhood for erosion.
FOUR = ndimage.generate_binary_structure(2, 1)
EIGHT = ndimage.generate_binary_structure(2, 2)

Coord = Tuple[int, int]


class MalformedMask(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SemanticMask:
    cells: np.ndarray

    def __post_init__(self):
        cells = np.asarray(self.cells)
        if cells.ndim != 2 or cells.size == 0:
            raise MalformedMask("mask must be a non-empty 2-D grid")
        if cells.min() < 0 or cells.max() >= NUM_CLASSES:
            raise MalformedMask(f"class ids must lie in [0, {NUM_CLASSES - 1}], got max {cells.max()}")
        cells = cells.astype(np.uint8)
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    def classes(self) -> FrozenSet[int]:
        return frozenset(int(c) for c in np.unique(self.cells))

    def digest(self) -> str:
        return hashlib.sha256(self.cells.tobytes() + struct.pack("<II", self.width, self.height)).hexdigest()

    def __eq__(self, other):
        return isinstance(other, SemanticMask) and np.array_equal(self.cells, other.cells)

    __hash__ = None


def load_mask(path) -> SemanticMask:
    """Read a mask from an 8-bit single-channel PNG or an ``NSRM`` raw file."""
    data = Path(path).read_bytes()
    if not data:
        raise MalformedMask(f"{path}: empty file")
    if data[:4] == RAW_MAGIC:
        if len(data) < 12:
            raise MalformedMask(f"{path}: truncated header")
        width, height = struct.unpack("<II", data[4:12])
        body = data[12:]
        if width * height == 0 or len(body) != width * height:
            raise MalformedMask(f"{path}: expected {width}x{height} bytes, got {len(body)}")
        cells = np.frombuffer(body, dtype=np.uint8).reshape(height, width)
        return SemanticMask(cells)
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except Exception as exc:
        raise MalformedMask(f"{path}: unreadable image ({exc})") from exc
    if img.mode not in ("L", "P"):
        raise MalformedMask(f"{path}: expected single-channel 8-bit image, got mode {img.mode}")
    return SemanticMask(np.array(img, dtype=np.uint8))


def save_mask(mask: SemanticMask, path) -> None:
    path = Path(path)
    if path.suffix.lower() == ".png":
        Image.fromarray(mask.cells, mode="L").save(path)
    else:
        path.write_bytes(RAW_MAGIC + struct.pack("<II", mask.width, mask.height) + mask.cells.tobytes())


def _components(cells: np.ndarray) -> Tuple[np.ndarray, int]:
    """Label 4-connected same-class components across all classes at once."""
    labels = np.zeros(cells.shape, dtype=np.int32)
    total = 0
    for c in range(NUM_CLASSES):
        sel = cells == c
        if not sel.any():
            continue
        lab, n = ndimage.label(sel, structure=FOUR)
        labels[sel] = lab[sel] + total
        total += n
    return labels, total


def majority_fill(mask: SemanticMask, min_area: int = DEFAULT_MIN_AREA) -> SemanticMask:
    """Relabel small non-protected components to their most common neighbouring class.

    Components are measured on the input; each small one takes the most frequent
    non-protected class among the pixels 4-adjacent to it (smallest id on ties).
    Components with no eligible neighbour are left alone.
    """
    if min_area < 0:
        raise ValueError("min_area must be non-negative")
    if min_area == 0:
        return mask
    cells = mask.cells
    labels, n = _components(cells)
    areas = np.bincount(labels.ravel(), minlength=n + 1)
    out = cells.copy()
    objects = ndimage.find_objects(labels)
    h, w = cells.shape
    for lab in range(1, n + 1):
        if areas[lab] >= min_area:
            continue
        sl = objects[lab - 1]
        r0, r1 = max(sl[0].start - 1, 0), min(sl[0].stop + 1, h)
        c0, c1 = max(sl[1].start - 1, 0), min(sl[1].stop + 1, w)
        own = labels[r0:r1, c0:c1] == lab
        cls = int(cells[sl][labels[sl] == lab][0])
        if cls in PROTECTED_CLASSES:
            continue
        ring = ndimage.binary_dilation(own, structure=FOUR) & ~own
        counts = np.bincount(cells[r0:r1, c0:c1][ring], minlength=NUM_CLASSES)
        for c in PROTECTED_CLASSES:
            counts[c] = 0
        if counts.sum() == 0:
            continue
        out[r0:r1, c0:c1][own] = int(np.argmax(counts))
    return SemanticMask(out)


@dataclass(frozen=True, eq=False)
class Region:
    region_id: int
    class_id: int
    pixels: np.ndarray  # (n, 2) row-major sorted [row, col]
    core: np.ndarray  # (m, 2) row-major sorted, m >= 1

    @property
    def area(self) -> int:
        return len(self.pixels)

    @property
    def centroid(self) -> Tuple[float, float]:
        r, c = self.pixels.mean(axis=0)
        return float(r), float(c)

    @property
    def bbox(self) -> Tuple[int, int, int, int]:
        """(row_min, col_min, row_max, col_max), inclusive."""
        lo = self.pixels.min(axis=0)
        hi = self.pixels.max(axis=0)
        return int(lo[0]), int(lo[1]), int(hi[0]), int(hi[1])

    def core_sample(self) -> Coord:
        """Core pixel nearest the core's own centroid (row-major on ties)."""
        centre = self.core.mean(axis=0)
        d = ((self.core - centre) ** 2).sum(axis=1)
        r, c = self.core[int(np.argmin(d))]
        return int(r), int(c)

    def to_dict(self) -> dict:
        r, c = self.centroid
        return {
            "id": self.region_id,
            "class_id": self.class_id,
            "area": self.area,
            "centroid": [round(r, 6), round(c, 6)],
            "bbox": list(self.bbox),
            "core_size": int(len(self.core)),
            "core_sample": list(self.core_sample()),
        }


@dataclass(frozen=True, eq=False)
class RegionCatalog:
    regions: Tuple[Region, ...]
    labels: np.ndarray  # region id per pixel
    per_class_primary: Tuple[int, ...]

    def __getitem__(self, region_id: int) -> Region:
        if not 1 <= region_id <= len(self.regions):
            raise KeyError(f"unknown region id {region_id}")
        return self.regions[region_id - 1]

    def __len__(self):
        return len(self.regions)

    def to_dict(self) -> dict:
        return {
            "regions": [r.to_dict() for r in self.regions],
            "per_class_primary": list(self.per_class_primary),
        }


def chebyshev_distance_to_other(cells: np.ndarray, class_id: int) -> np.ndarray:
    """Chessboard distance from each pixel to the nearest pixel of a different class.

    The image border is not a boundary. Where no other class exists the distance
    is ``max(h, w)``.
    """
    same = cells == class_id
    if same.all():
        return np.full(cells.shape, max(cells.shape), dtype=np.int64)
    return ndimage.distance_transform_cdt(same, metric="chessboard").astype(np.int64)


def erode_core(pixels: np.ndarray, class_id: int, mask: SemanticMask, depth: int = DEFAULT_CORE_DEPTH,
               dist: Optional[np.ndarray] = None) -> np.ndarray:
    """Pure interior of a region after up to ``depth`` 8-neighbourhood erosions.

    Each erosion keeps pixels whose whole clipped 3x3 neighbourhood survived the
    previous step, which equals keeping pixels at chessboard distance
    ``>= step + 1`` from any other class. Erosion stops early rather than empty
    the set; if even one step empties it, the single region pixel farthest from
    any other class is returned.
    """
    if dist is None:
        dist = chebyshev_distance_to_other(mask.cells, class_id)
    d = dist[pixels[:, 0], pixels[:, 1]]
    best = int(d.max())
    if best >= 2 and depth >= 1:
        keep = min(depth, best - 1)
        return pixels[d >= keep + 1]
    return pixels[int(np.argmax(d))][None, :]


def extract_regions(mask: SemanticMask, core_depth: int = DEFAULT_CORE_DEPTH) -> RegionCatalog:
    cells = mask.cells
    labels, n = _components(cells)
    flat = labels.ravel()
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=n + 1)
    starts = np.concatenate([[0], np.cumsum(counts)])
    w = cells.shape[1]
    groups = []
    for lab in range(1, n + 1):
        idx = order[starts[lab]:starts[lab + 1]]  # stable sort keeps row-major order
        coords = np.stack([idx // w, idx % w], axis=1).astype(np.int64)
        groups.append(coords)
    # Decreasing area, ties by topmost-leftmost pixel.
    groups.sort(key=lambda g: (-len(g), int(g[0, 0]), int(g[0, 1])))
    dists: Dict[int, np.ndarray] = {}
    regions: List[Region] = []
    relabeled = np.zeros(cells.shape, dtype=np.int32)
    primary = [0] * NUM_CLASSES
    for rid, coords in enumerate(groups, start=1):
        cls = int(cells[coords[0, 0], coords[0, 1]])
        if cls not in dists:
            dists[cls] = chebyshev_distance_to_other(cells, cls)
        core = erode_core(coords, cls, mask, core_depth, dists[cls])
        regions.append(Region(rid, cls, coords, core))
        relabeled[coords[:, 0], coords[:, 1]] = rid
        if primary[cls] == 0:
            primary[cls] = rid
    relabeled.setflags(write=False)
    return RegionCatalog(tuple(regions), relabeled, tuple(primary))


def compatible(mask_classes: Iterable[int], config: ScenarioConfig) -> bool:
    """True when the mask shows every allowed and start/end class of the query."""
    return set(mask_classes) >= set(config.allowed_classes) | set(config.start_end_classes)
