"""Pixel cost maps and optimal 4-connected route search."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Sequence, Tuple

import numpy as np

from routebench.kb import ConstraintVectors
from routebench.mask import Coord, SemanticMask

INF = math.inf
_STEPS = ((-1, 0), (0, -1), (0, 1), (1, 0))


class Unreachable(RuntimeError):
    pass


class BadEndpoint(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CostMap:
    """Per-pixel entry cost; ``inf`` marks non-traversable pixels."""

    cost: np.ndarray

    @property
    def height(self) -> int:
        return self.cost.shape[0]

    @property
    def width(self) -> int:
        return self.cost.shape[1]

    @cached_property
    def flat(self) -> List[float]:
        return self.cost.ravel().tolist()

    def in_bounds(self, p: Sequence[int]) -> bool:
        return 0 <= p[0] < self.height and 0 <= p[1] < self.width

    def at(self, p: Sequence[int]) -> float:
        """Cost of ``p``; out-of-bounds pixels are infinite."""
        if not self.in_bounds(p):
            return INF
        return self.flat[p[0] * self.width + p[1]]

    def path_cost(self, path: Sequence[Sequence[int]]) -> float:
        total = 0
        for p in path:
            total += self.at(p)
        return total


def build_cost_map(mask: SemanticMask, vectors: ConstraintVectors) -> CostMap:
    pref = np.asarray(vectors.pref, dtype=float)
    trav = np.asarray(vectors.trav, dtype=bool)
    top = pref[trav].max() if trav.any() else 0.0
    per_class = np.where(trav, top - pref + 1, INF)
    cost = per_class[mask.cells]
    cost.setflags(write=False)
    return CostMap(cost)


def _check_endpoints(cost_map: CostMap, s: Coord, e: Coord) -> None:
    for name, p in (("start", s), ("end", e)):
        if not cost_map.in_bounds(p):
            raise BadEndpoint(f"{name} {tuple(p)} out of bounds")
        if cost_map.at(p) == INF:
            raise BadEndpoint(f"{name} {tuple(p)} is not traversable")


def astar(cost_map: CostMap, s: Coord, e: Coord) -> Tuple[List[Coord], int]:
    """Minimum total-cost 4-connected path from ``s`` to ``e``.

    Path cost is the sum of the costs of every pixel on it, start included.
    The heuristic is the Euclidean distance to ``e``; with costs >= 1 and unit
    steps it never exceeds the remaining cost. Heap entries order by
    (f, h, row, col) so results are reproducible.
    """
    _check_endpoints(cost_map, s, e)
    h_, w_ = cost_map.height, cost_map.width
    cost = cost_map.flat
    er, ec = e
    start = s[0] * w_ + s[1]
    goal = er * w_ + ec
    g = {start: cost[start]}
    parent = {start: -1}
    closed = set()
    h0 = math.hypot(s[0] - er, s[1] - ec)
    heap = [(g[start] + h0, h0, s[0], s[1])]
    while heap:
        _, _, r, c = heapq.heappop(heap)
        u = r * w_ + c
        if u in closed:
            continue
        if u == goal:
            break
        closed.add(u)
        gu = g[u]
        for dr, dc in _STEPS:
            nr, nc = r + dr, c + dc
            if nr < 0 or nr >= h_ or nc < 0 or nc >= w_:
                continue
            v = nr * w_ + nc
            wv = cost[v]
            if wv == INF or v in closed:
                continue
            gv = gu + wv
            if gv < g.get(v, INF):
                g[v] = gv
                parent[v] = u
                hv = math.hypot(nr - er, nc - ec)
                heapq.heappush(heap, (gv + hv, hv, nr, nc))
    else:
        raise Unreachable(f"no traversable path from {tuple(s)} to {tuple(e)}")
    path = []
    u = goal
    while u != -1:
        path.append((u // w_, u % w_))
        u = parent[u]
    path.reverse()
    return path, int(g[goal])


def dijkstra_oracle(cost_map: CostMap, s: Coord, e: Coord) -> int:
    """Uninformed uniform-cost search over the grid, same cost accounting as :func:`astar`."""
    _check_endpoints(cost_map, s, e)
    cost = cost_map.cost
    h_, w_ = cost.shape
    dist = np.full(cost.shape, INF)
    dist[s] = cost[s]
    heap = [(float(cost[s]), tuple(s))]
    while heap:
        d, (r, c) = heapq.heappop(heap)
        if (r, c) == tuple(e):
            return int(d)
        if d > dist[r, c]:
            continue
        for nr, nc in ((r + 1, c), (r - 1, c), (r, c + 1), (r, c - 1)):
            if 0 <= nr < h_ and 0 <= nc < w_:
                nd = d + cost[nr, nc]
                if nd < dist[nr, nc]:
                    dist[nr, nc] = nd
                    heapq.heappush(heap, (nd, (nr, nc)))
    raise Unreachable(f"no traversable path from {tuple(s)} to {tuple(e)}")


def cost_to_go(cost_map: CostMap, e: Coord) -> np.ndarray:
    """Oracle cost of reaching ``e`` from every pixel, excluding the pixel's own cost."""
    cost = cost_map.cost
    h_, w_ = cost.shape
    dist = np.full(cost.shape, INF)
    if cost[e] == INF:
        return dist
    dist[e] = 0.0
    heap = [(0.0, tuple(e))]
    while heap:
        d, (r, c) = heapq.heappop(heap)
        if d > dist[r, c]:
            continue
        step = cost[r, c]
        for nr, nc in ((r + 1, c), (r - 1, c), (r, c + 1), (r, c - 1)):
            if 0 <= nr < h_ and 0 <= nc < w_ and cost[nr, nc] != INF:
                nd = d + step
                if nd < dist[nr, nc]:
                    dist[nr, nc] = nd
                    heapq.heappush(heap, (nd, (nr, nc)))
    return dist


def bresenham(a: Coord, b: Coord) -> List[Coord]:
    """Integer-error Bresenham raster from ``a`` to ``b`` inclusive.

    Always rasterised from the lexicographically smaller endpoint and reversed
    when needed, so ``bresenham(b, a) == bresenham(a, b)[::-1]``.
    """
    a = (int(a[0]), int(a[1]))
    b = (int(b[0]), int(b[1]))
    if b < a:
        return bresenham(b, a)[::-1]
    r0, c0 = a
    r1, c1 = b
    dr, dc = abs(r1 - r0), abs(c1 - c0)
    sr = 1 if r1 >= r0 else -1
    sc = 1 if c1 >= c0 else -1
    steep = dr > dc
    major, minor = (dr, dc) if steep else (dc, dr)
    err = 2 * minor - major
    r, c = r0, c0
    out = []
    for _ in range(major + 1):
        out.append((r, c))
        if err > 0:
            if steep:
                c += sc
            else:
                r += sr
            err -= 2 * major
        err += 2 * minor
        if steep:
            r += sr
        else:
            c += sc
    return out


@dataclass
class DensePath:
    pixels: List[Coord]
    legs: List[str] = field(default_factory=list)

    @property
    def has_line_fallback(self) -> bool:
        return "line" in self.legs


def _join(parts: List[List[Coord]]) -> List[Coord]:
    out: List[Coord] = []
    for seg in parts:
        if out and seg and out[-1] == seg[0]:
            seg = seg[1:]
        out.extend(seg)
    return out


def reconstruct_dense(waypoints: Sequence[Coord], cost_map: CostMap, compliant: bool) -> DensePath:
    """Join sparse waypoints into a pixel path.

    Compliant waypoints are joined by optimal search legs, with a Bresenham leg
    wherever search finds no route. Otherwise every leg is a Bresenham line.
    """
    if len(waypoints) == 0:
        raise ValueError("no waypoints")
    pts = [(int(p[0]), int(p[1])) for p in waypoints]
    parts = [[pts[0]]]
    legs = []
    for a, b in zip(pts, pts[1:]):
        if a == b:
            continue
        if compliant:
            try:
                seg, _ = astar(cost_map, a, b)
                legs.append("search")
            except (Unreachable, BadEndpoint):
                seg = bresenham(a, b)
                legs.append("line")
        else:
            seg = bresenham(a, b)
            legs.append("line")
        parts.append(seg)
    return DensePath(_join(parts), legs)
