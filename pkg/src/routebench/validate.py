"""Randomised self-checks of the planner against its oracles."""

from __future__ import annotations

import math
from typing import Tuple

import numpy as np

from routebench.plan import CostMap, Unreachable, astar, cost_to_go, dijkstra_oracle

ADMISSIBILITY_SLACK = 1e-9


def random_instance(rng: np.random.Generator, size: int, density: float | None = None,
                    costs=(1, 2, 3)) -> Tuple[CostMap, tuple, tuple]:
    """Random cost grid with obstacle density in [0, 0.4] and two traversable endpoints."""
    if density is None:
        density = float(rng.uniform(0.0, 0.4))
    cost = rng.choice(np.asarray(costs, dtype=float), size=(size, size))
    cost[rng.random((size, size)) < density] = math.inf
    free = np.argwhere(np.isfinite(cost))
    if len(free) == 0:
        cost[0, 0] = costs[0]
        free = np.array([[0, 0]])
    s = tuple(int(x) for x in free[rng.integers(len(free))])
    e = tuple(int(x) for x in free[rng.integers(len(free))])
    return CostMap(cost), s, e


def check_optimality(grids: int = 200, size: int = 48, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    solved = unreachable = 0
    failures = []
    for k in range(grids):
        cm, s, e = random_instance(rng, size)
        try:
            path, cost = astar(cm, s, e)
            a = cost
        except Unreachable:
            a = None
        try:
            d = dijkstra_oracle(cm, s, e)
        except Unreachable:
            d = None
        if a != d:
            failures.append({"instance": k, "astar": a, "oracle": d})
        elif a is None:
            unreachable += 1
        else:
            solved += 1
            if cm.path_cost(path) != cost or path[0] != s or path[-1] != e:
                failures.append({"instance": k, "path": "invalid"})
    return {"grids": grids, "size": size, "solved": solved, "unreachable": unreachable, "failures": failures}


def check_admissibility(instances: int = 50, max_size: int = 32, seed: int = 1) -> dict:
    """Euclidean heuristic never exceeds the oracle cost-to-go at any traversable pixel."""
    rng = np.random.default_rng(seed)
    checked = 0
    failures = []
    for k in range(instances):
        size = int(rng.integers(4, max_size + 1))
        cm, _, e = random_instance(rng, size)
        dist = cost_to_go(cm, e)
        rows, cols = np.nonzero(np.isfinite(dist))
        h = np.hypot(rows - e[0], cols - e[1])
        bad = h > dist[rows, cols] + ADMISSIBILITY_SLACK
        checked += len(rows)
        if bad.any():
            failures.append({"instance": k, "violations": int(bad.sum())})
    return {"instances": instances, "pixels_checked": checked, "failures": failures}
