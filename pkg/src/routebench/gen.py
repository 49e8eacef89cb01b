"""Task 1/2/3 sample assembly and the seeded corpus pipeline."""

from __future__ import annotations

import json
import logging
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from routebench import SCHEMA_VERSION
from routebench.graph import NoValidPair, RegionGraph, build_graph, select_endpoints
from routebench.kb import (
    Agent,
    ConstraintVectors,
    Objective,
    ScenarioConfig,
    agent_tiers,
    canonicalize_pref,
    derive_vectors,
)
from routebench.mask import (
    DEFAULT_CORE_DEPTH,
    DEFAULT_MIN_AREA,
    RegionCatalog,
    SemanticMask,
    compatible,
    extract_regions,
    load_mask,
    majority_fill,
)
from routebench.plan import Unreachable, astar, build_cost_map, dijkstra_oracle
from routebench.strat import (
    DEFAULT_LAMBDAS,
    ComplexityBreakdown,
    calibrate_thresholds,
    complexity,
    task2_tier,
    task3_tier,
)
from routebench.text import TextGeneratorPort, make_port

log = logging.getLogger(__name__)

MASK_SUFFIXES = (".png", ".nsrm", ".raw")


class GenerationFailed(RuntimeError):
    pass


class Incompatible(ValueError):
    pass


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent PCG64 stream for ``key`` under the root ``seed``.

    Streams are split with ``SeedSequence`` spawn keys, so the numbers a sample
    sees depend only on (seed, key) and never on scheduling.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key)))


def sample_config(rng: np.random.Generator) -> ScenarioConfig:
    """Uniform agent and objective; always-traversable classes plus a coin-flip subset of conditional ones."""
    agent = list(Agent)[rng.integers(len(Agent))]
    objective = list(Objective)[rng.integers(len(Objective))]
    always, conditional, _ = agent_tiers(agent)
    allowed = set(always)
    for c in sorted(conditional):
        if rng.random() < 0.5:
            allowed.add(c)
    pool = sorted(allowed)
    start = pool[rng.integers(len(pool))]
    end = pool[rng.integers(len(pool))]
    return ScenarioConfig(agent, objective, (start, end), frozenset(allowed))


@dataclass(frozen=True)
class QuerySpec:
    config: ScenarioConfig
    text: str
    gt: ConstraintVectors
    attempts: int = 1

    def to_dict(self) -> dict:
        return {"config": self.config.to_dict(), "text": self.text, "attempts": self.attempts}


def _same_vectors(a: ConstraintVectors, b: ConstraintVectors) -> bool:
    return a.trav == b.trav and canonicalize_pref(a.pref, a.trav) == list(b.pref)


def synthesize_query(config: ScenarioConfig, port: TextGeneratorPort, max_retries: int = 5) -> QuerySpec:
    """Generate query text until the generator's own reading matches the KB and it passes verification."""
    gt = derive_vectors(config)
    for attempt in range(1, max_retries + 1):
        text, inferred = port.generate(config)
        if not _same_vectors(inferred, gt):
            log.debug("attempt %d: self-inferred vectors disagree with KB", attempt)
            continue
        if not port.verify(text):
            log.debug("attempt %d: verifier rejected text", attempt)
            continue
        return QuerySpec(config, text, gt, attempt)
    raise GenerationFailed(f"no compliant query after {max_retries} attempts")


@dataclass
class TaskSample:
    sample_id: str
    task: int
    query: QuerySpec
    gt_trav: Tuple[int, ...]
    gt_pref: Tuple[int, ...]
    mask_ref: Optional[dict] = None
    present_classes: Optional[List[int]] = None
    gt_region_vector: Optional[List[int]] = None
    start: Optional[Tuple[int, int]] = None
    end: Optional[Tuple[int, int]] = None
    gt_trajectory: Optional[List[Tuple[int, int]]] = None
    gt_cost: Optional[int] = None
    complexity: Optional[ComplexityBreakdown] = None
    tier: Optional[str] = None

    @property
    def gt_vectors(self) -> ConstraintVectors:
        return ConstraintVectors(self.gt_trav, self.gt_pref)

    def to_dict(self) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "sample_id": self.sample_id,
            "task": self.task,
            "query": self.query.to_dict(),
            "gt_trav": list(self.gt_trav),
            "gt_pref": list(self.gt_pref),
            "tier": self.tier,
        }
        if self.task >= 2:
            d["mask_ref"] = self.mask_ref
            d["present_classes"] = self.present_classes
            d["gt_region_vector"] = self.gt_region_vector
        if self.task == 3:
            d["start"] = list(self.start)
            d["end"] = list(self.end)
            d["gt_trajectory"] = [list(p) for p in self.gt_trajectory]
            d["gt_cost"] = self.gt_cost
            d["complexity"] = self.complexity.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TaskSample":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"sample schema_version {d.get('schema_version')!r} != {SCHEMA_VERSION}")
        config = ScenarioConfig.from_dict(d["query"]["config"])
        query = QuerySpec(config, d["query"]["text"], derive_vectors(config), d["query"].get("attempts", 1))
        cx = None
        if d.get("complexity"):
            c = d["complexity"]
            cx = ComplexityBreakdown(c["h_inter"], c["h_intra"], c["h_count"], c["c_topo"], tuple(c["lambdas"]))
        return cls(
            sample_id=d["sample_id"],
            task=int(d["task"]),
            query=query,
            gt_trav=tuple(d["gt_trav"]),
            gt_pref=tuple(d["gt_pref"]),
            mask_ref=d.get("mask_ref"),
            present_classes=d.get("present_classes"),
            gt_region_vector=d.get("gt_region_vector"),
            start=tuple(d["start"]) if d.get("start") is not None else None,
            end=tuple(d["end"]) if d.get("end") is not None else None,
            gt_trajectory=[tuple(p) for p in d["gt_trajectory"]] if d.get("gt_trajectory") else None,
            gt_cost=d.get("gt_cost"),
            complexity=cx,
            tier=d.get("tier"),
        )


def dumps_sample(sample: TaskSample) -> str:
    return json.dumps(sample.to_dict(), sort_keys=True, separators=(",", ":"))


def write_samples(samples: Sequence[TaskSample], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(dumps_sample(s) + "\n")


def read_samples(path) -> List[TaskSample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(TaskSample.from_dict(json.loads(line)))
    return out


def make_task1(query: QuerySpec, sample_id: str = "") -> TaskSample:
    return TaskSample(sample_id, 1, query, query.gt.trav, query.gt.pref)


def _grounded(query: QuerySpec, mask: SemanticMask, catalog: RegionCatalog) -> Tuple[ConstraintVectors, List[int], List[int]]:
    present = sorted(mask.classes())
    if not compatible(present, query.config):
        raise Incompatible("mask lacks classes required by the query")
    vectors = query.gt.restrict(present)
    region_vec = [catalog.per_class_primary[c] if c in present else 0 for c in range(len(query.gt.trav))]
    return vectors, present, region_vec


def make_task2(query: QuerySpec, mask: SemanticMask, catalog: RegionCatalog, sample_id: str = "",
               mask_ref: Optional[dict] = None) -> TaskSample:
    vectors, present, region_vec = _grounded(query, mask, catalog)
    return TaskSample(
        sample_id, 2, query, vectors.trav, vectors.pref,
        mask_ref=mask_ref, present_classes=present, gt_region_vector=region_vec,
        tier=task2_tier(len(present)),
    )


def make_task3(query: QuerySpec, mask: SemanticMask, catalog: RegionCatalog, rng_seed,
               sample_id: str = "", mask_ref: Optional[dict] = None,
               lambdas: Sequence[float] = DEFAULT_LAMBDAS,
               graph: Optional[RegionGraph] = None) -> Optional[TaskSample]:
    """Task 3 sample with an optimal trajectory, or ``None`` when pixel search fails.

    Raises :class:`NoValidPair` when no reachable region pair exists.
    """
    vectors, present, region_vec = _grounded(query, mask, catalog)
    if graph is None:
        graph = build_graph(catalog, vectors)
    pair = select_endpoints(graph, catalog, query.config, rng_seed)
    cost_map = build_cost_map(mask, vectors)
    try:
        path, cost = astar(cost_map, pair.start, pair.end)
    except Unreachable:
        return None
    oracle = dijkstra_oracle(cost_map, pair.start, pair.end)
    if oracle != cost or cost_map.path_cost(path) != cost:
        raise AssertionError(f"{sample_id}: planner cost {cost} disagrees with oracle {oracle}")
    return TaskSample(
        sample_id, 3, query, vectors.trav, vectors.pref,
        mask_ref=mask_ref, present_classes=present, gt_region_vector=region_vec,
        start=pair.start, end=pair.end, gt_trajectory=path, gt_cost=cost,
        complexity=complexity(catalog, graph, lambdas),
    )


@dataclass
class GenerateOptions:
    seed: int = 0
    tasks: Tuple[int, ...] = (1, 2, 3)
    queries_per_mask: int = 1
    config_tries: int = 32
    backend: str = "template"
    backend_url: Optional[str] = None
    max_retries: int = 5
    min_area: int = DEFAULT_MIN_AREA
    core_depth: int = DEFAULT_CORE_DEPTH
    lambdas: Tuple[float, float, float, float] = DEFAULT_LAMBDAS
    thresholds: Optional[Tuple[float, float]] = None  # None: corpus quantiles
    workers: int = 1
    dump_graph: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "tasks": list(self.tasks),
            "queries_per_mask": self.queries_per_mask,
            "config_tries": self.config_tries,
            "backend": self.backend,
            "max_retries": self.max_retries,
            "min_area": self.min_area,
            "core_depth": self.core_depth,
            "lambdas": list(self.lambdas),
            "thresholds": list(self.thresholds) if self.thresholds else "auto",
        }


def list_masks(directory) -> List[Path]:
    paths = sorted(p for p in Path(directory).iterdir() if p.suffix.lower() in MASK_SUFFIXES)
    if not paths:
        raise FileNotFoundError(f"no mask files in {directory}")
    return paths


def prepare_mask(path, min_area: int, core_depth: int) -> Tuple[SemanticMask, RegionCatalog, dict]:
    mask = majority_fill(load_mask(path), min_area)
    catalog = extract_regions(mask, core_depth)
    ref = {
        "name": Path(path).name,
        "path": str(path),
        "sha256": mask.digest(),
        "min_area": min_area,
        "core_depth": core_depth,
    }
    return mask, catalog, ref


def _process_mask(job) -> Tuple[List[dict], Dict[str, int]]:
    index, path, opts = job
    counts: Counter = Counter()
    port = make_port(opts.backend, opts.backend_url)
    mask, catalog, ref = prepare_mask(path, opts.min_area, opts.core_depth)
    stem = Path(path).stem
    present = mask.classes()
    out: List[TaskSample] = []
    for j in range(opts.queries_per_mask):
        first = None
        chosen = None
        for attempt in range(opts.config_tries):
            cfg = sample_config(stream(opts.seed, index, j, attempt, 0))
            if first is None:
                first = cfg
            if compatible(present, cfg):
                chosen = (cfg, attempt)
                break
        base = f"{stem}-q{j}"
        if 1 in opts.tasks:
            out.append(make_task1(synthesize_query(first, port, opts.max_retries), f"{base}-t1"))
            counts["task1"] += 1
        if chosen is None:
            counts["incompatible"] += 1
            continue
        cfg, attempt = chosen
        query = synthesize_query(cfg, port, opts.max_retries)
        if 2 in opts.tasks:
            out.append(make_task2(query, mask, catalog, f"{base}-t2", ref))
            counts["task2"] += 1
        if 3 in opts.tasks:
            vectors = query.gt.restrict(present)
            graph = build_graph(catalog, vectors)
            if opts.dump_graph:
                Path(opts.dump_graph).mkdir(parents=True, exist_ok=True)
                with open(Path(opts.dump_graph) / f"{base}-t3.graph.json", "w", encoding="utf-8") as fh:
                    json.dump(graph.to_dict(), fh, sort_keys=True)
            seed = stream(opts.seed, index, j, attempt, 1).integers(2**63)
            try:
                sample = make_task3(query, mask, catalog, seed, f"{base}-t3", ref, opts.lambdas, graph)
            except NoValidPair:
                counts["skip_no_pair"] += 1
                continue
            if sample is None:
                counts["skip_unreachable"] += 1
                continue
            out.append(sample)
            counts["task3"] += 1
    return [s.to_dict() for s in out], dict(counts)


def assign_task3_tiers(samples: Sequence[TaskSample], lambdas: Sequence[float] = DEFAULT_LAMBDAS,
                       thresholds: Optional[Tuple[float, float]] = None) -> Tuple[float, float]:
    """Re-score task 3 samples with ``lambdas`` and set their tiers in place."""
    t3 = [s for s in samples if s.task == 3]
    for s in t3:
        s.complexity = s.complexity.with_lambdas(lambdas)
    if thresholds is None:
        thresholds = calibrate_thresholds([s.complexity.score for s in t3])
    for s in t3:
        s.tier = task3_tier(s.complexity.score, thresholds)
    return thresholds


def thresholds_json(thresholds) -> Optional[List[float]]:
    return list(thresholds) if all(np.isfinite(thresholds)) else None


def generate_corpus(mask_paths: Sequence, opts: GenerateOptions) -> Tuple[List[TaskSample], dict]:
    jobs = [(i, str(p), opts) for i, p in enumerate(mask_paths)]
    if opts.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=opts.workers) as pool:
            results = list(pool.map(_process_mask, jobs))
    else:
        results = [_process_mask(job) for job in jobs]
    samples: List[TaskSample] = []
    counts: Counter = Counter()
    for dicts, c in results:
        samples.extend(TaskSample.from_dict(d) for d in dicts)
        counts.update(c)
    thresholds = assign_task3_tiers(samples, opts.lambdas, opts.thresholds)
    tiers = Counter(f"task{s.task}:{s.tier}" for s in samples if s.tier)
    report = {
        "schema_version": SCHEMA_VERSION,
        "run_config": opts.to_dict(),
        "masks": len(jobs),
        "counts": dict(sorted(counts.items())),
        "task3_thresholds": thresholds_json(thresholds),
        "tiers": dict(sorted(tiers.items())),
    }
    return samples, report


def default_workers() -> int:
    return os.cpu_count() or 1
