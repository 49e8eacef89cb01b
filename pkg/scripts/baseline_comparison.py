"""Task 3 planners compared per difficulty tier.

Three answer sources are scored on the same samples:
  oracle  - the ground-truth trajectory itself
  sparse  - every k-th oracle pixel, so the evaluator's search fills the gaps
  line    - the straight raster line from start to end
"""

import argparse
from pathlib import Path

from routebench.evaluate import CandidateAnswer, evaluate, gt_answers, line_answers
from routebench.gen import GenerateOptions, generate_corpus, list_masks, stream
from routebench.mask import save_mask
from routebench.synth import make_mask


def sparse_answers(samples, step):
    return {
        s.sample_id: CandidateAnswer(s.sample_id, 3, pred_waypoints=s.gt_trajectory[::step])
        for s in samples if s.task == 3
    }


def fmt(v):
    return "   n/a" if v is None else f"{v:6.3f}"


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--masks", default=None, help="mask directory (default: synthesise into --work)")
    ap.add_argument("--work", default="runs/baselines")
    ap.add_argument("--count", type=int, default=40)
    ap.add_argument("--queries-per-mask", type=int, default=3)
    ap.add_argument("--sparse-step", type=int, default=12)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    mask_dir = Path(args.masks) if args.masks else Path(args.work) / "masks"
    if args.masks is None:
        mask_dir.mkdir(parents=True, exist_ok=True)
        for i in range(args.count):
            save_mask(make_mask(stream(args.seed, i), 128), mask_dir / f"synthetic_{i:04d}.png")

    opts = GenerateOptions(seed=args.seed, tasks=(3,), queries_per_mask=args.queries_per_mask)
    samples, gen_report = generate_corpus(list_masks(mask_dir), opts)
    print(f"{len(samples)} task-3 samples; tiers {gen_report['tiers']}")

    sources = {
        "oracle": gt_answers(samples),
        f"sparse/{args.sparse_step}": sparse_answers(samples, args.sparse_step),
        "line": line_answers(samples),
    }
    print(f"{'planner':<12}{'tier':<8}{'n':>4}  {'AR':>6} {'VR':>6} {'CR':>6} {'CD':>6}")
    for name, answers in sources.items():
        report, _ = evaluate(samples, answers, mask_dir)
        block = report["tasks"]["3"]
        rows = list(block["tiers"].items()) + [("all", {"n": block["counts"]["n"], **block["avg_pooled"]})]
        for tier, m in rows:
            print(f"{name:<12}{tier:<8}{m['n']:>4}  {fmt(m['AR'])} {fmt(m['VR'])} {fmt(m['CR'])} {fmt(m['CD'])}")


if __name__ == "__main__":
    main()
