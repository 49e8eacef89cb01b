"""Symbolic scoring of candidate answers for all three tasks."""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from routebench import SCHEMA_VERSION
from routebench.gen import TaskSample, prepare_mask
from routebench.kb import NUM_CLASSES, canonicalize_pref
from routebench.plan import CostMap, bresenham, build_cost_map, reconstruct_dense
from routebench.strat import TIERS

COMPLIANT, VIOLATING = "compliant", "violating"
METRICS = {1: ("TM", "PR", "FM"), 2: ("RM", "TM", "PR"), 3: ("AR", "VR", "CR", "CD")}


@dataclass
class CandidateAnswer:
    sample_id: str
    task: int
    pred_trav: Optional[List[int]] = None
    pred_pref: Optional[List[int]] = None
    pred_region_vector: Optional[List[int]] = None
    pred_waypoints: Optional[List[Tuple[int, int]]] = None

    def to_dict(self) -> dict:
        d = {"sample_id": self.sample_id, "task": self.task}
        if self.pred_trav is not None:
            d["trav"] = list(self.pred_trav)
        if self.pred_pref is not None:
            d["pref"] = list(self.pred_pref)
        if self.pred_region_vector is not None:
            d["region"] = list(self.pred_region_vector)
        if self.pred_waypoints is not None:
            d["waypoints"] = [list(p) for p in self.pred_waypoints]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CandidateAnswer":
        wps = d.get("waypoints")
        return cls(
            sample_id=str(d["sample_id"]),
            task=int(d.get("task", 0)),
            pred_trav=d.get("trav"),
            pred_pref=d.get("pref"),
            pred_region_vector=d.get("region"),
            pred_waypoints=[(int(p[0]), int(p[1])) for p in wps] if wps is not None else None,
        )


def read_answers(path) -> Dict[str, CandidateAnswer]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            try:
                ans = CandidateAnswer.from_dict(json.loads(line))
            except (ValueError, KeyError, TypeError, IndexError):
                continue  # malformed lines score as missing
            out[ans.sample_id] = ans
    return out


def write_answers(answers: Iterable[CandidateAnswer], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in answers:
            fh.write(json.dumps(a.to_dict(), sort_keys=True, separators=(",", ":")) + "\n")


# ---- vector metrics -------------------------------------------------------

def _valid_vector(v) -> bool:
    try:
        return v is not None and len(v) == NUM_CLASSES and all(isinstance(x, (int, np.integer)) for x in v)
    except TypeError:
        return False


def score_tm(preds: Sequence[Sequence[int]], gts: Sequence[Sequence[int]]) -> float:
    if len(preds) != len(gts):
        raise ValueError("prediction and ground-truth batches differ in length")
    if not gts:
        return math.nan
    return sum(list(p) == list(g) for p, g in zip(preds, gts)) / len(gts)


def _sign(x) -> int:
    return int(x > 0) - int(x < 0)


def score_pr(pred_pref: Sequence[int], gt_pref: Sequence[int], gt_trav: Sequence[int]) -> Optional[float]:
    """Kendall-style rank agreement over traversable classes, ``None`` when fewer than two.

    A pair counts as concordant when both rankings order it the same way or both
    tie it, discordant when they order it oppositely, and neither otherwise.
    """
    idx = [i for i, t in enumerate(gt_trav) if t == 1]
    m = len(idx)
    if m < 2:
        return None
    nc = nd = 0
    for i, j in combinations(idx, 2):
        a = _sign(pred_pref[i] - pred_pref[j])
        b = _sign(gt_pref[i] - gt_pref[j])
        if a == b:
            nc += 1
        elif a != 0 and b != 0:
            nd += 1
    return (nc - nd) / (m * (m - 1) / 2)


def fm_indicator(pred_trav, pred_pref, gt_trav, gt_pref) -> bool:
    if list(pred_trav) != list(gt_trav):
        return False
    return canonicalize_pref(pred_pref, pred_trav) == canonicalize_pref(gt_pref, gt_trav)


def score_fm(preds: Sequence[Tuple[Sequence[int], Sequence[int]]], gts: Sequence[Tuple[Sequence[int], Sequence[int]]]) -> float:
    """Share of samples with both vectors right; ``preds``/``gts`` hold (trav, pref) pairs."""
    if len(preds) != len(gts):
        raise ValueError("prediction and ground-truth batches differ in length")
    if not gts:
        return math.nan
    return sum(fm_indicator(pt, pp, gt, gp) for (pt, pp), (gt, gp) in zip(preds, gts)) / len(gts)


def score_rm(pred_region_vectors: Sequence[Sequence[int]], gt_region_vectors: Sequence[Sequence[int]]) -> float:
    if len(pred_region_vectors) != len(gt_region_vectors):
        raise ValueError("prediction and ground-truth batches differ in length")
    if not gt_region_vectors:
        return math.nan
    hits = 0
    for p, g in zip(pred_region_vectors, gt_region_vectors):
        hits += sum(int(a == b) for a, b in zip(p, g))
    return hits / (len(gt_region_vectors) * NUM_CLASSES)


# ---- trajectory metrics ---------------------------------------------------

def classify_adherence(waypoints: Sequence[Sequence[int]], cost_map: CostMap) -> str:
    if len(waypoints) == 0:
        raise ValueError("no waypoints")
    return COMPLIANT if all(cost_map.at(p) < math.inf for p in waypoints) else VIOLATING


def chamfer(path_a: Sequence[Sequence[int]], path_b: Sequence[Sequence[int]]) -> float:
    """Sum of the two directed mean nearest-neighbour distances."""
    a = np.asarray(path_a, dtype=float).reshape(-1, 2)
    b = np.asarray(path_b, dtype=float).reshape(-1, 2)
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))
    return float(d.min(axis=1).mean() + d.min(axis=0).mean())


def violation_ratio(pixels: Sequence[Sequence[int]], cost_map: CostMap) -> float:
    return sum(cost_map.at(p) == math.inf for p in pixels) / len(pixels)


def anchor(waypoints: Sequence[Tuple[int, int]], start, end) -> List[Tuple[int, int]]:
    """Waypoints with the task's start and end prepended/appended when missing."""
    pts = [tuple(p) for p in waypoints]
    if not pts or pts[0] != tuple(start):
        pts.insert(0, tuple(start))
    if pts[-1] != tuple(end):
        pts.append(tuple(end))
    return pts


@dataclass
class Task3Record:
    sample_id: str
    tier: Optional[str]
    status: str
    ar: float
    cr: Optional[float]
    vr: Optional[float]
    cd: float
    disconnected: bool = False
    missing: bool = False
    dense_path: Optional[List[Tuple[int, int]]] = field(default=None, repr=False)

    def metrics(self) -> dict:
        return {"AR": self.ar, "VR": self.vr, "CR": self.cr, "CD": self.cd}


def score_task3_sample(sample: TaskSample, answer: Optional[CandidateAnswer], cost_map: CostMap) -> Task3Record:
    gt = sample.gt_trajectory
    gt_cost = cost_map.path_cost(gt)
    if answer is None or not answer.pred_waypoints:
        # Missing answers count as violating with the worst violation ratio.
        dense = [tuple(sample.start)]
        return Task3Record(sample.sample_id, sample.tier, VIOLATING, 0.0, None, 1.0, chamfer(dense, gt),
                           missing=True, dense_path=dense)
    wps = answer.pred_waypoints
    status = classify_adherence(wps, cost_map)
    path = reconstruct_dense(anchor(wps, sample.start, sample.end), cost_map, status == COMPLIANT)
    cd = chamfer(path.pixels, gt)
    if status == COMPLIANT:
        if path.has_line_fallback:
            return Task3Record(sample.sample_id, sample.tier, status, 1.0, None, None, cd,
                               disconnected=True, dense_path=path.pixels)
        cr = cost_map.path_cost(path.pixels) / gt_cost
        return Task3Record(sample.sample_id, sample.tier, status, 1.0, cr, None, cd, dense_path=path.pixels)
    vr = violation_ratio(path.pixels, cost_map)
    return Task3Record(sample.sample_id, sample.tier, status, 0.0, None, vr, cd, dense_path=path.pixels)


def score_vector_sample(sample: TaskSample, answer: Optional[CandidateAnswer]) -> dict:
    """Per-sample TM/PR/FM (task 1) or RM/TM/PR (task 2) values."""
    rec = {"sample_id": sample.sample_id, "task": sample.task, "tier": sample.tier, "missing": False}
    ok = answer is not None and _valid_vector(answer.pred_trav) and _valid_vector(answer.pred_pref)
    if not ok:
        rec["missing"] = True
    trav = list(answer.pred_trav) if ok else None
    pref = list(answer.pred_pref) if ok else None
    rec["TM"] = float(trav == list(sample.gt_trav)) if ok else 0.0
    if ok:
        rec["PR"] = score_pr(pref, sample.gt_pref, sample.gt_trav)
    else:
        rec["PR"] = None if sum(sample.gt_trav) < 2 else -1.0
    if sample.task == 1:
        rec["FM"] = float(fm_indicator(trav, pref, sample.gt_trav, sample.gt_pref)) if ok else 0.0
    else:
        reg = answer.pred_region_vector if answer is not None else None
        if _valid_vector(reg):
            rec["RM"] = score_rm([reg], [sample.gt_region_vector])
        else:
            rec["RM"] = 0.0
            rec["missing"] = True
    return rec


# ---- aggregation ----------------------------------------------------------

def _mean(values) -> Optional[float]:
    vals = [v for v in values if v is not None]
    return sum(vals) / len(vals) if vals else None


def aggregate(records: Sequence[dict], task: int) -> dict:
    """Per-tier and overall means of per-sample metric values.

    ``avg_pooled`` averages over samples, ``avg_of_tiers`` over the tier means.
    Undefined values (``None``) are left out of every mean.
    """
    names = METRICS[task]
    by_tier: Dict[str, List[dict]] = defaultdict(list)
    for r in records:
        if r.get("tier") is not None:
            by_tier[r["tier"]].append(r)
    tiers = {}
    for t in TIERS:
        if by_tier.get(t):
            rows = by_tier[t]
            tiers[t] = {"n": len(rows), **{m: _mean(r[m] for r in rows) for m in names}}
    pooled = {m: _mean(r[m] for r in records) for m in names}
    of_tiers = {m: _mean(tiers[t][m] for t in tiers) for m in names} if tiers else dict(pooled)
    counts = {"n": len(records), "missing": sum(bool(r.get("missing")) for r in records)}
    if "PR" in names:
        counts["pr_excluded"] = sum(r["PR"] is None for r in records)
    if task == 3:
        counts["compliant"] = sum(r["status"] == COMPLIANT for r in records)
        counts["violating"] = sum(r["status"] == VIOLATING for r in records)
        counts["disconnected_count"] = sum(bool(r.get("disconnected")) for r in records)
    return {"counts": counts, "tiers": tiers, "avg_pooled": pooled, "avg_of_tiers": of_tiers}


class CostMapCache:
    """Rebuilds task-3 cost maps from the referenced masks."""

    def __init__(self, mask_dir=None):
        self.mask_dir = Path(mask_dir) if mask_dir else None
        self._masks: dict = {}

    def _resolve(self, ref: dict) -> Path:
        candidates = []
        if self.mask_dir is not None:
            candidates.append(self.mask_dir / ref["name"])
        candidates.append(Path(ref["path"]))
        for c in candidates:
            if c.exists():
                return c
        raise FileNotFoundError(f"mask {ref['name']} not found (looked in {[str(c) for c in candidates]})")

    def cost_map(self, sample: TaskSample) -> CostMap:
        ref = sample.mask_ref
        key = (ref["name"], ref["sha256"])
        if key not in self._masks:
            mask, _, got = prepare_mask(self._resolve(ref), ref["min_area"], ref["core_depth"])
            if got["sha256"] != ref["sha256"]:
                raise ValueError(f"mask {ref['name']} does not match the digest recorded at generation")
            self._masks[key] = mask
        return build_cost_map(self._masks[key], sample.gt_vectors)


def evaluate(samples: Sequence[TaskSample], answers: Dict[str, CandidateAnswer], mask_dir=None,
             metadata: Optional[dict] = None) -> Tuple[dict, List[dict]]:
    """Score every sample; returns the report and per-sample records."""
    cache = CostMapCache(mask_dir)
    per_sample: List[dict] = []
    by_task: Dict[int, List[dict]] = defaultdict(list)
    for s in samples:
        ans = answers.get(s.sample_id)
        if s.task in (1, 2):
            rec = score_vector_sample(s, ans)
        else:
            r = score_task3_sample(s, ans, cache.cost_map(s))
            rec = {"sample_id": s.sample_id, "task": 3, "tier": s.tier, "status": r.status,
                   "missing": r.missing, "disconnected": r.disconnected, **r.metrics()}
        per_sample.append(rec)
        by_task[s.task].append(rec)
    report = {
        "schema_version": SCHEMA_VERSION,
        "metadata": metadata or {},
        "tasks": {str(t): aggregate(by_task[t], t) for t in sorted(by_task)},
    }
    return report, per_sample


def gt_answers(samples: Sequence[TaskSample]) -> Dict[str, CandidateAnswer]:
    """Ground truth restated as answers; a perfect score on every metric."""
    out = {}
    for s in samples:
        out[s.sample_id] = CandidateAnswer(
            s.sample_id, s.task,
            pred_trav=list(s.gt_trav), pred_pref=list(s.gt_pref),
            pred_region_vector=list(s.gt_region_vector) if s.gt_region_vector is not None else None,
            pred_waypoints=list(s.gt_trajectory) if s.gt_trajectory is not None else None,
        )
    return out


def line_answers(samples: Sequence[TaskSample]) -> Dict[str, CandidateAnswer]:
    """Straight-line baseline: every task-3 answer is the raster line from start to end."""
    out = {}
    for s in samples:
        if s.task == 3:
            out[s.sample_id] = CandidateAnswer(s.sample_id, 3, pred_waypoints=bresenham(s.start, s.end))
    return out
