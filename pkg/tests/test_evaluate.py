import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from routebench.evaluate import (
    COMPLIANT,
    VIOLATING,
    CandidateAnswer,
    aggregate,
    anchor,
    chamfer,
    classify_adherence,
    evaluate,
    gt_answers,
    line_answers,
    read_answers,
    score_fm,
    score_pr,
    score_rm,
    score_task3_sample,
    score_tm,
    score_vector_sample,
    violation_ratio,
)
from routebench.gen import GenerateOptions, generate_corpus, list_masks, make_task1, make_task3, synthesize_query
from routebench.kb import ScenarioConfig
from routebench.mask import SemanticMask, extract_regions
from routebench.plan import CostMap, astar, bresenham, build_cost_map
from routebench.text import TemplateGenerator

INF = math.inf


# ---- oracles ----------------------------------------------------------------

def pr_oracle(pred, gt, trav):
    """Ordered-pair enumeration: each unordered pair is seen twice."""
    idx = [i for i, t in enumerate(trav) if t]
    m = len(idx)
    if m < 2:
        return None
    total = 0
    for i in idx:
        for j in idx:
            if i == j:
                continue
            dp, dg = pred[i] - pred[j], gt[i] - gt[j]
            if (dp == 0) and (dg == 0):
                total += 1
            elif dp * dg > 0:
                total += 1
            elif dp * dg < 0:
                total -= 1
    return total / (m * (m - 1))


def weak_orders(m):
    """Every canonical tier vector (dense ranks 1..T) of length m."""
    out = []
    for v in itertools.product(range(1, m + 1), repeat=m):
        if set(v) == set(range(1, max(v) + 1)):
            out.append(v)
    return out


def chamfer_oracle(a, b):
    def directed(x, y):
        return sum(min(math.dist(p, q) for q in y) for p in x) / len(x)

    return directed(a, b) + directed(b, a)


# ---- task 1/2 metrics -------------------------------------------------------

def test_tm_examples():
    assert score_tm([[1, 0, 1]], [[1, 0, 1]]) == 1.0
    preds = [[1, 1], [0, 1], [1, 0], [0, 0]]
    assert score_tm(preds, [[0, 0]] * 4) == 0.25
    with pytest.raises(ValueError):
        score_tm([[1]], [])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.lists(st.integers(0, 1), min_size=8, max_size=8),
                          st.lists(st.integers(0, 1), min_size=8, max_size=8)), min_size=1, max_size=20))
def test_tm_loop_oracle(pairs):
    preds, gts = zip(*pairs)
    hits = 0
    for p, g in pairs:
        same = True
        for a, b in zip(p, g):
            same = same and a == b
        hits += same
    assert score_tm(preds, gts) == pytest.approx(hits / len(pairs), abs=1e-12)


def test_pr_identical_and_reversed():
    trav = [1, 1, 1, 1, 0, 0, 0, 0]
    gt = [4, 3, 2, 1, 0, 0, 0, 0]
    assert score_pr(gt, gt, trav) == pytest.approx(1.0, abs=1e-9)
    assert score_pr([1, 2, 3, 4, 0, 0, 0, 0], gt, trav) == pytest.approx(-1.0, abs=1e-9)


def test_pr_ties():
    trav = [1, 1, 1, 0, 0, 0, 0, 0]
    # all tied in both: every pair concordant
    assert score_pr([1, 1, 1, 0, 0, 0, 0, 0], [1, 1, 1, 0, 0, 0, 0, 0], trav) == 1.0
    # gt ties everything, pred orders everything: no pair counts
    assert score_pr([3, 2, 1, 0, 0, 0, 0, 0], [1, 1, 1, 0, 0, 0, 0, 0], trav) == 0.0


def test_pr_undefined_below_two():
    assert score_pr([1] + [0] * 7, [1] + [0] * 7, [1] + [0] * 7) is None
    assert score_pr([0] * 8, [0] * 8, [0] * 8) is None


def test_pr_ignores_non_traversable_entries():
    trav = [1, 1, 0, 0, 0, 0, 0, 0]
    assert score_pr([2, 1, 9, 9, 9, 9, 9, 9], [2, 1, 0, 0, 0, 0, 0, 0], trav) == 1.0


@pytest.mark.parametrize("m", [2, 3, 4])
def test_pr_exhaustive(m):
    trav = [1] * m + [0] * (8 - m)
    for g in weak_orders(m):
        gt = list(g) + [0] * (8 - m)
        for p in weak_orders(m):
            pred = list(p) + [0] * (8 - m)
            assert score_pr(pred, gt, trav) == pytest.approx(pr_oracle(pred, gt, trav), abs=1e-9)


def test_pr_range_and_symmetry():
    rng = np.random.default_rng(0)
    for _ in range(300):
        trav = rng.integers(0, 2, 8)
        a, b = rng.integers(0, 5, 8), rng.integers(0, 5, 8)
        v = score_pr(a, b, trav)
        if v is None:
            assert trav.sum() < 2
            continue
        assert -1 <= v <= 1
        assert v == pytest.approx(score_pr(b, a, trav), abs=1e-12)


def test_fm_canonicalises():
    trav = [1, 1, 0, 0, 0, 0, 0, 0]
    assert score_fm([(trav, [2, 4, 0, 0, 0, 0, 0, 0])], [(trav, [1, 2, 0, 0, 0, 0, 0, 0])]) == 1.0
    assert score_fm([(trav, [4, 2, 0, 0, 0, 0, 0, 0])], [(trav, [1, 2, 0, 0, 0, 0, 0, 0])]) == 0.0
    # right preferences, wrong traversability
    bad = [1, 1, 1, 0, 0, 0, 0, 0]
    assert score_fm([(bad, [1, 2, 0, 0, 0, 0, 0, 0])], [(trav, [1, 2, 0, 0, 0, 0, 0, 0])]) == 0.0


def test_rm_examples():
    gt = [1, 2, 3, 4, 5, 6, 7, 8]
    assert score_rm([[1, 2, 3, 4, 5, 6, 7, 0]], [gt]) == pytest.approx(7 / 8)
    assert score_rm([gt, [0] * 4 + gt[4:]], [gt, gt]) == pytest.approx(0.75)


# ---- task 3 metrics ---------------------------------------------------------

def test_adherence():
    cm = CostMap(np.array([[1, 1, INF, 1]], float))
    assert classify_adherence([(0, 0), (0, 3)], cm) == COMPLIANT
    assert classify_adherence([(0, 0), (0, 2)], cm) == VIOLATING
    assert classify_adherence([(0, 0), (5, 5)], cm) == VIOLATING  # out of bounds
    with pytest.raises(ValueError):
        classify_adherence([], cm)


def test_violation_ratio_example():
    cost = np.ones((1, 12))
    cost[0, 3:7] = INF
    path = bresenham((0, 0), (0, 9))
    assert len(path) == 10
    assert violation_ratio(path, CostMap(cost)) == pytest.approx(0.4, abs=1e-9)


def test_violation_ratio_counts_out_of_bounds():
    assert violation_ratio([(0, 0), (0, 1), (0, 2), (0, 3)], CostMap(np.ones((1, 2)))) == 0.5


def test_chamfer_identical_zero():
    p = bresenham((0, 0), (7, 19))
    assert chamfer(p, p) == 0.0


def test_chamfer_parallel_offset():
    a = [(0, c) for c in range(10)]
    b = [(3, c) for c in range(10)]
    # both directed terms are 3, and the metric adds them
    assert chamfer(a, b) == pytest.approx(6.0, abs=1e-9)
    assert chamfer_oracle(a, b) == pytest.approx(6.0, abs=1e-9)


pts = st.lists(st.tuples(st.integers(-20, 20), st.integers(-20, 20)), min_size=1, max_size=15)


@settings(max_examples=80, deadline=None)
@given(pts, pts)
def test_chamfer_matches_oracle_and_is_symmetric(a, b):
    assert chamfer(a, b) == pytest.approx(chamfer_oracle(a, b), abs=1e-9)
    assert chamfer(a, b) == pytest.approx(chamfer(b, a), abs=1e-12)
    assert chamfer(a, b) >= 0


def test_anchor():
    assert anchor([(2, 2)], (0, 0), (5, 5)) == [(0, 0), (2, 2), (5, 5)]
    assert anchor([(0, 0), (5, 5)], (0, 0), (5, 5)) == [(0, 0), (5, 5)]
    assert anchor([], (0, 0), (5, 5)) == [(0, 0), (5, 5)]


# ---- per-sample task 3 scoring ------------------------------------------------

@pytest.fixture(scope="module")
def wall_sample():
    """Developed space split by a Building wall with a gap at the bottom."""
    cells = np.full((12, 12), 2, np.uint8)
    cells[0:9, 6] = 7
    mask = SemanticMask(cells)
    query = synthesize_query(ScenarioConfig("Car", "Fastest", (2, 2), {2}), TemplateGenerator())
    sample = make_task3(query, mask, extract_regions(mask, core_depth=1), 0, "w")
    sample.start, sample.end = (2, 1), (2, 10)
    cm = build_cost_map(mask, sample.gt_vectors)
    sample.gt_trajectory, sample.gt_cost = astar(cm, sample.start, sample.end)
    return sample, cm


def test_task3_gt_answer(wall_sample):
    s, cm = wall_sample
    r = score_task3_sample(s, CandidateAnswer("w", 3, pred_waypoints=s.gt_trajectory), cm)
    assert (r.status, r.ar, r.cr, r.vr, r.cd) == (COMPLIANT, 1.0, 1.0, None, 0.0)


def test_task3_sparse_gt_answer(wall_sample):
    s, cm = wall_sample
    # (9, 6) is the gap cell every optimal route crosses
    r = score_task3_sample(s, CandidateAnswer("w", 3, pred_waypoints=[(9, 6)]), cm)
    assert r.status == COMPLIANT and r.cr == pytest.approx(1.0, abs=1e-12)
    r = score_task3_sample(s, CandidateAnswer("w", 3, pred_waypoints=s.gt_trajectory[::4]), cm)
    assert r.cr == pytest.approx(1.0, abs=1e-12)


def test_task3_detour_cost_ratio(wall_sample):
    s, cm = wall_sample
    r = score_task3_sample(s, CandidateAnswer("w", 3, pred_waypoints=[(11, 0), (11, 11)]), cm)
    assert r.status == COMPLIANT and r.cr > 1.0 and r.cd > 0


def test_task3_line_answer_violates(wall_sample):
    s, cm = wall_sample
    r = score_task3_sample(s, CandidateAnswer("w", 3, pred_waypoints=bresenham(s.start, s.end)), cm)
    assert r.status == VIOLATING and r.ar == 0.0 and r.cr is None
    assert r.vr == pytest.approx(1 / 10)


def test_task3_missing(wall_sample):
    s, cm = wall_sample
    r = score_task3_sample(s, None, cm)
    assert r.missing and r.status == VIOLATING and r.vr == 1.0
    assert r.cd == pytest.approx(chamfer_oracle([s.start], s.gt_trajectory))


def test_task3_disconnected_excluded_from_cr():
    cells = np.full((5, 9), 2, np.uint8)
    cells[:, 4] = 7
    mask = SemanticMask(cells)
    query = synthesize_query(ScenarioConfig("Car", "Fastest", (2, 2), {2}), TemplateGenerator())
    s = make_task3(query, mask, extract_regions(mask, core_depth=1), 0, "x")
    cm = build_cost_map(mask, s.gt_vectors)
    other = (2, 7) if s.start[1] < 4 else (2, 1)
    r = score_task3_sample(s, CandidateAnswer("x", 3, pred_waypoints=[s.start, other, s.end]), cm)
    assert r.status == COMPLIANT and r.disconnected and r.cr is None


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 11), st.integers(0, 11)), min_size=1, max_size=4))
def test_cost_ratio_at_least_one(wall_sample, wps):
    s, cm = wall_sample
    r = score_task3_sample(s, CandidateAnswer("w", 3, pred_waypoints=wps), cm)
    if r.status == COMPLIANT and not r.disconnected:
        assert r.cr >= 1.0 - 1e-12
    if r.status == VIOLATING:
        assert 0 < r.vr <= 1


# ---- vector sample scoring --------------------------------------------------

def t1_sample():
    cfg = ScenarioConfig("Pedestrian", "Safest", (2, 3), {2, 3, 6})
    return make_task1(synthesize_query(cfg, TemplateGenerator()), "a")


def test_vector_missing_answer():
    rec = score_vector_sample(t1_sample(), None)
    assert rec["missing"] and rec["TM"] == 0.0 and rec["FM"] == 0.0 and rec["PR"] == -1.0


def test_vector_malformed_answer():
    rec = score_vector_sample(t1_sample(), CandidateAnswer("a", 1, pred_trav=[1, 0], pred_pref=[1]))
    assert rec["missing"] and rec["TM"] == 0.0


def test_read_answers_skips_bad_lines(tmp_path):
    p = tmp_path / "a.jsonl"
    p.write_text('{"sample_id": "x", "task": 1, "trav": [1,1,1,1,1,1,1,1]}\nnot json\n{"task": 1}\n\n')
    got = read_answers(p)
    assert list(got) == ["x"]


# ---- aggregation -------------------------------------------------------------

def recs(tm_by_tier):
    return [{"tier": t, "TM": tm, "PR": None, "RM": 1.0, "missing": False} for t, tm in tm_by_tier]


def test_aggregate_single_tier():
    out = aggregate(recs([("Easy", 1.0), ("Easy", 0.0), ("Easy", 1.0)]), 2)
    assert out["tiers"]["Easy"]["TM"] == pytest.approx(2 / 3)
    assert out["avg_pooled"]["TM"] == out["avg_of_tiers"]["TM"]
    assert out["counts"]["pr_excluded"] == 3 and out["avg_pooled"]["PR"] is None


def test_aggregate_pooled_vs_tier_mean():
    rows = recs([("Easy", 1.0), ("Easy", 1.0), ("Hard", 0.0), ("Hard", 0.0)])
    out = aggregate(rows, 2)
    assert out["avg_pooled"]["TM"] == 0.5 and out["avg_of_tiers"]["TM"] == 0.5
    rows = recs([("Easy", 1.0), ("Easy", 1.0), ("Easy", 1.0), ("Hard", 0.0)])
    out = aggregate(rows, 2)
    assert out["avg_pooled"]["TM"] == 0.75 and out["avg_of_tiers"]["TM"] == 0.5


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["Easy", "Medium", "Hard"]), st.sampled_from([0.0, 0.5, 1.0])),
                min_size=1, max_size=30), st.randoms())
def test_aggregate_permutation_invariant_and_streaming(rows, rnd):
    rows = recs(rows)
    out = aggregate(rows, 2)
    shuffled = rows[:]
    rnd.shuffle(shuffled)
    again = aggregate(shuffled, 2)
    for k in ("avg_pooled", "avg_of_tiers"):
        assert again[k]["TM"] == pytest.approx(out[k]["TM"], abs=1e-12)
    # streaming oracle: running sums per tier
    sums, counts = {}, {}
    for r in rows:
        sums[r["tier"]] = sums.get(r["tier"], 0.0) + r["TM"]
        counts[r["tier"]] = counts.get(r["tier"], 0) + 1
    for t in sums:
        assert out["tiers"][t]["TM"] == pytest.approx(sums[t] / counts[t], abs=1e-12)
        assert out["tiers"][t]["n"] == counts[t]


# ---- end to end ----------------------------------------------------------------

@pytest.fixture(scope="module")
def corpus(synthetic_dir):
    return generate_corpus(list_masks(synthetic_dir), GenerateOptions(seed=1, queries_per_mask=2))[0]


def test_evaluate_gt_perfect(corpus, synthetic_dir):
    report, per = evaluate(corpus, gt_answers(corpus), synthetic_dir)
    t = report["tasks"]
    assert t["1"]["avg_pooled"]["TM"] == t["1"]["avg_pooled"]["FM"] == 1.0
    assert t["2"]["avg_pooled"]["RM"] == 1.0
    t3 = t["3"]["avg_pooled"]
    assert (t3["AR"], t3["CR"], t3["CD"], t3["VR"]) == (1.0, 1.0, 0.0, None)
    assert len(per) == len(corpus)
    json.dumps(report)


def test_evaluate_missing_answers(corpus, synthetic_dir):
    report, per = evaluate(corpus, {}, synthetic_dir)
    assert all(r["missing"] for r in per)
    t3 = report["tasks"]["3"]
    assert t3["avg_pooled"]["AR"] == 0.0 and t3["avg_pooled"]["VR"] == 1.0
    assert t3["counts"]["violating"] == t3["counts"]["n"]


def test_evaluate_line_baseline(corpus, synthetic_dir):
    answers = line_answers(corpus)
    report, _ = evaluate([s for s in corpus if s.task == 3], answers, synthetic_dir)
    t3 = report["tasks"]["3"]["avg_pooled"]
    assert t3["AR"] <= 1.0 and t3["CD"] >= 0.0


def test_evaluate_rejects_changed_mask(corpus, tmp_path):
    from routebench.mask import save_mask

    s = next(x for x in corpus if x.task == 3)
    save_mask(SemanticMask(np.zeros((128, 128), np.uint8)), tmp_path / s.mask_ref["name"])
    with pytest.raises(ValueError):
        evaluate([s], {}, tmp_path)
