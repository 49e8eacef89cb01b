"""End-to-end run: synthetic masks -> task samples -> baselines -> reports.

    python3 scripts/run_pipeline.py --out runs/demo --masks 20 --seed 0
"""

import argparse
import json
from pathlib import Path

from routebench.cli import run


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="runs/demo")
    ap.add_argument("--masks", type=int, default=20)
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--queries-per-mask", type=int, default=2)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    masks, tasks = out / "masks", out / "tasks.jsonl"

    steps = [
        ["synth", "--out", str(masks), "--count", str(args.masks), "--size", str(args.size), "--seed", str(args.seed)],
        ["generate", "--masks", str(masks), "--out", str(tasks), "--seed", str(args.seed),
         "--queries-per-mask", str(args.queries_per_mask), "--workers", str(args.workers),
         "--report", str(out / "generate_report.json"), "--format", "summary"],
    ]
    for kind in ("gt", "line"):
        answers = out / f"answers_{kind}.jsonl"
        steps.append(["baseline", "--tasks", str(tasks), "--kind", kind, "--out", str(answers)])
        steps.append(["evaluate", "--tasks", str(tasks), "--answers", str(answers), "--masks", str(masks),
                      "--out", str(out / f"report_{kind}.json"), "--per-sample", str(out / f"per_sample_{kind}.jsonl")])
    for argv in steps:
        print("$ routebench " + " ".join(argv))
        code = run(argv)
        if code:
            raise SystemExit(code)

    render_id = next(json.loads(l)["sample_id"] for l in tasks.read_text().splitlines() if '"task":3' in l)
    run(["render", "--tasks", str(tasks), "--sample-id", render_id, "--masks", str(masks),
         "--answers", str(out / "answers_line.jsonl"), "--out", str(out / f"{render_id}_line.png")])
    run(["render", "--tasks", str(tasks), "--sample-id", render_id, "--masks", str(masks),
         "--out", str(out / f"{render_id}_gt.png"), "--cores"])
    print(f"outputs in {out}")


if __name__ == "__main__":
    main()
