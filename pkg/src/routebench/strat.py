"""Difficulty tiers: class-count tiers and the entropy/topology complexity score."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Iterable, Sequence, Tuple

import numpy as np

from routebench.graph import RegionGraph
from routebench.kb import NUM_CLASSES
from routebench.mask import RegionCatalog

EASY, MEDIUM, HARD = "Easy", "Medium", "Hard"
TIERS = (EASY, MEDIUM, HARD)
DEFAULT_LAMBDAS = (0.25, 0.25, 0.25, 0.25)
DEFAULT_QUANTILES = (0.60, 0.85)


def task2_tier(class_count: int) -> str:
    if not 1 <= class_count <= NUM_CLASSES:
        raise ValueError(f"class count must be in 1..{NUM_CLASSES}, got {class_count}")
    if class_count <= 4:
        return EASY
    if class_count <= 6:
        return MEDIUM
    return HARD


def entropy_bits(weights: Iterable[float]) -> float:
    w = np.asarray([x for x in weights if x > 0], dtype=float)
    if w.size == 0:
        return 0.0
    p = w / w.sum()
    return float(-(p * np.log2(p)).sum()) + 0.0


@dataclass(frozen=True)
class ComplexityBreakdown:
    h_inter: float
    h_intra: float
    h_count: float
    c_topo: float
    lambdas: Tuple[float, float, float, float] = DEFAULT_LAMBDAS

    @property
    def score(self) -> float:
        l1, l2, l3, l4 = self.lambdas
        return l1 * self.h_inter + l2 * self.h_intra + l3 * self.h_count + l4 * self.c_topo

    def with_lambdas(self, lambdas: Sequence[float]) -> "ComplexityBreakdown":
        return ComplexityBreakdown(self.h_inter, self.h_intra, self.h_count, self.c_topo, tuple(float(x) for x in lambdas))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambdas"] = list(self.lambdas)
        d["score"] = self.score
        return d


def complexity(catalog: RegionCatalog, graph: RegionGraph, lambdas: Sequence[float] = DEFAULT_LAMBDAS) -> ComplexityBreakdown:
    """Complexity components of a scene.

    Classes with a single region contribute nothing to the intra-class term,
    which is averaged over all eight classes. Graph density uses the
    unmasked adjacency and is 0 for a single-node graph.
    """
    if len(catalog) == 0:
        raise ValueError("empty catalog")
    areas = [[] for _ in range(NUM_CLASSES)]
    for r in catalog.regions:
        areas[r.class_id].append(r.area)
    h_inter = entropy_bits(sum(a) for a in areas)
    h_count = entropy_bits(len(a) for a in areas)
    intra = 0.0
    for a in areas:
        if len(a) > 1:
            intra += entropy_bits(a) / math.log2(len(a))
    h_intra = intra / NUM_CLASSES
    n = len(graph.classes)
    c_topo = 0.0 if n <= 1 else min(1.0, 2 * graph.num_edges() / (n * (n - 1)))
    return ComplexityBreakdown(h_inter, h_intra, h_count, c_topo, tuple(float(x) for x in lambdas))


def task3_tier(score: float, thresholds: Tuple[float, float]) -> str:
    t_easy, t_hard = thresholds
    if t_easy > t_hard:
        raise ValueError("easy threshold must not exceed hard threshold")
    if score < t_easy:
        return EASY
    if score >= t_hard:
        return HARD
    return MEDIUM


def calibrate_thresholds(scores: Sequence[float], quantiles: Tuple[float, float] = DEFAULT_QUANTILES) -> Tuple[float, float]:
    """Thresholds at corpus quantiles (linear interpolation)."""
    if len(scores) == 0:
        return (math.inf, math.inf)
    lo, hi = np.quantile(np.asarray(scores, dtype=float), quantiles)
    return float(lo), float(hi)
