"""Region adjacency graph, traversability masking and endpoint selection."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from routebench.kb import ConstraintVectors, ScenarioConfig
from routebench.mask import Coord, RegionCatalog


class NoValidPair(RuntimeError):
    """No reachable start/end region pair matches the scenario."""


@dataclass(frozen=True, eq=False)
class RegionGraph:
    """Region-level graph. Node ``i`` of the matrices is region id ``i + 1``."""

    classes: Tuple[int, ...]
    adjacency: np.ndarray
    constrained: np.ndarray
    trav: Tuple[int, ...]

    @property
    def nodes(self) -> List[int]:
        return list(range(1, len(self.classes) + 1))

    def traversable(self, region_id: int) -> bool:
        return bool(self.trav[self.classes[region_id - 1]])

    def num_edges(self, constrained: bool = False) -> int:
        m = self.constrained if constrained else self.adjacency
        return int(np.triu(m, 1).sum())

    def neighbours(self, region_id: int, constrained: bool = True) -> List[int]:
        m = self.constrained if constrained else self.adjacency
        return [int(j) + 1 for j in np.flatnonzero(m[region_id - 1])]

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {"id": rid, "class_id": self.classes[rid - 1], "traversable": self.traversable(rid)}
                for rid in self.nodes
            ],
            "adjacency": {str(rid): self.neighbours(rid, constrained=False) for rid in self.nodes},
            "constrained": {str(rid): self.neighbours(rid, constrained=True) for rid in self.nodes},
        }


def region_adjacency(labels: np.ndarray, n: int) -> np.ndarray:
    """Symmetric boolean matrix of regions sharing a 4-adjacent pixel pair."""
    adj = np.zeros((n, n), dtype=bool)
    for a, b in ((labels[:, :-1], labels[:, 1:]), (labels[:-1, :], labels[1:, :])):
        diff = a != b
        i = a[diff] - 1
        j = b[diff] - 1
        adj[i, j] = True
        adj[j, i] = True
    return adj


def build_graph(catalog: RegionCatalog, vectors: ConstraintVectors) -> RegionGraph:
    classes = tuple(r.class_id for r in catalog.regions)
    adj = region_adjacency(catalog.labels, len(classes))
    ok = np.array([vectors.trav[c] == 1 for c in classes], dtype=bool)
    constrained = adj & ok[:, None] & ok[None, :]
    adj.setflags(write=False)
    constrained.setflags(write=False)
    return RegionGraph(classes, adj, constrained, tuple(vectors.trav))


def _check(graph: RegionGraph, region_id: int) -> None:
    if not 1 <= region_id <= len(graph.classes):
        raise KeyError(f"unknown region id {region_id}")


def component_of(graph: RegionGraph, a: int) -> set:
    """Region ids reachable from ``a`` over the constrained graph."""
    _check(graph, a)
    if not graph.traversable(a):
        return set()
    seen = {a}
    queue = deque([a])
    m = graph.constrained
    while queue:
        u = queue.popleft()
        for j in np.flatnonzero(m[u - 1]):
            v = int(j) + 1
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


def reachable(graph: RegionGraph, a: int, b: int) -> bool:
    _check(graph, b)
    return b in component_of(graph, a)


@dataclass(frozen=True)
class EndpointPair:
    start_region: int
    end_region: int
    start: Coord
    end: Coord


def _components(graph: RegionGraph) -> Dict[int, int]:
    comp: Dict[int, int] = {}
    for rid in graph.nodes:
        if rid in comp or not graph.traversable(rid):
            continue
        for v in component_of(graph, rid):
            comp[v] = rid
    return comp


def candidate_pairs(graph: RegionGraph, catalog: RegionCatalog, config: ScenarioConfig) -> List[Tuple[float, int, int]]:
    """Reachable (distance, start, end) pairs matching the start/end classes, best first."""
    cs, ce = config.start_end_classes
    comp = _components(graph)
    starts = [r.region_id for r in catalog.regions if r.class_id == cs and r.region_id in comp]
    ends = [r.region_id for r in catalog.regions if r.class_id == ce and r.region_id in comp]
    pairs = []
    for s in starts:
        ys, xs = catalog[s].centroid
        for e in ends:
            if comp[s] != comp[e]:
                continue
            ye, xe = catalog[e].centroid
            pairs.append((math.hypot(ys - ye, xs - xe), s, e))
    pairs.sort(key=lambda t: (-t[0], t[1], t[2]))
    return pairs


def select_endpoints(graph: RegionGraph, catalog: RegionCatalog, config: ScenarioConfig, rng_seed) -> EndpointPair:
    """Pick the most distant reachable region pair and draw S, E from their cores."""
    pairs = candidate_pairs(graph, catalog, config)
    if not pairs:
        raise NoValidPair(f"no reachable {config.start_end_classes} region pair")
    _, s, e = pairs[0]
    rng = np.random.default_rng(rng_seed)
    core_s = catalog[s].core
    core_e = catalog[e].core
    if s == e and len(core_s) > 1:
        i, j = rng.choice(len(core_s), size=2, replace=False)
        a, b = core_s[i], core_s[j]
    else:
        a = core_s[rng.integers(len(core_s))]
        b = core_e[rng.integers(len(core_e))]
    return EndpointPair(s, e, (int(a[0]), int(a[1])), (int(b[0]), int(b[1])))
