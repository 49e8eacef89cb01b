"""Command-line entry point: ``routebench <subcommand>``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional


from routebench import SCHEMA_VERSION, __version__
from routebench import evaluate as ev
from routebench import gen
from routebench.kb import dump_kb
from routebench.mask import DEFAULT_CORE_DEPTH, DEFAULT_MIN_AREA, save_mask
from routebench.render import overlay
from routebench.strat import DEFAULT_LAMBDAS
from routebench.synth import make_mask
from routebench.validate import check_admissibility, check_optimality

log = logging.getLogger("routebench")


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error("UsageError", message)
        sys.exit(2)


def _emit_error(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


def _floats(text: str, n: int) -> tuple:
    parts = [float(x) for x in text.split(",")]
    if len(parts) != n:
        raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers")
    return tuple(parts)


def _lambdas(text):
    return _floats(text, 4)


def _thresholds(text):
    return None if text == "auto" else _floats(text, 2)


def _tasks(text):
    if text == "all":
        return (1, 2, 3)
    if text in ("1", "2", "3"):
        return (int(text),)
    raise argparse.ArgumentTypeError("task must be 1, 2, 3 or all")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write_or_print(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _summary(report: dict) -> str:
    lines = []
    for task, block in report.get("tasks", {}).items():
        vals = ", ".join(
            f"{k}={'n/a' if v is None else f'{v:.4f}'}" for k, v in block["avg_pooled"].items()
        )
        lines.append(f"task {task}: n={block['counts']['n']} {vals}")
    return "\n".join(lines) + "\n"


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        mask = make_mask(gen.stream(args.seed, i), args.size)
        save_mask(mask, out / f"synthetic_{i:04d}.png")
    return 0


def cmd_generate(args) -> int:
    opts = gen.GenerateOptions(
        seed=args.seed, tasks=args.task, queries_per_mask=args.queries_per_mask,
        backend=args.backend, backend_url=args.backend_url, max_retries=args.max_retries,
        min_area=args.min_area, core_depth=args.core_depth, lambdas=args.lambdas,
        thresholds=args.thresholds, workers=args.workers or gen.default_workers(),
        dump_graph=args.dump_graph,
    )
    samples, report = gen.generate_corpus(gen.list_masks(args.masks), opts)
    gen.write_samples(samples, args.out)
    if args.report:
        Path(args.report).write_text(_dump(report), encoding="utf-8")
    if args.format == "summary":
        sys.stdout.write(f"wrote {len(samples)} samples to {args.out}; counts {report['counts']}\n")
    else:
        sys.stdout.write(_dump(report))
    return 0


def cmd_stratify(args) -> int:
    samples = gen.read_samples(args.tasks)
    thresholds = gen.assign_task3_tiers(samples, args.lambdas, args.thresholds)
    gen.write_samples(samples, args.tasks)
    hist = {}
    for s in samples:
        if s.tier:
            hist.setdefault(f"task{s.task}", {}).setdefault(s.tier, 0)
            hist[f"task{s.task}"][s.tier] += 1
    sys.stdout.write(_dump({"task3_thresholds": gen.thresholds_json(thresholds), "histogram": hist}))
    return 0


def cmd_evaluate(args) -> int:
    samples = gen.read_samples(args.tasks)
    answers = ev.read_answers(args.answers)
    meta = {
        "version": __version__,
        "tasks_file": Path(args.tasks).name,
        "answers_file": Path(args.answers).name,
        "answered": sum(s.sample_id in answers for s in samples),
    }
    report, per_sample = ev.evaluate(samples, answers, args.masks, meta)
    if args.per_sample:
        with open(args.per_sample, "w", encoding="utf-8") as fh:
            for rec in per_sample:
                fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n")
    if args.format == "summary":
        text = _summary(report)
    elif args.format == "jsonl":
        text = "".join(
            json.dumps({"task": t, **b}, sort_keys=True, separators=(",", ":")) + "\n"
            for t, b in report["tasks"].items()
        )
    else:
        text = _dump(report)
    _write_or_print(text, args.out)
    if args.out and args.format != "summary":
        sys.stdout.write(_summary(report))
    return 0


def cmd_baseline(args) -> int:
    samples = gen.read_samples(args.tasks)
    answers = ev.gt_answers(samples) if args.kind == "gt" else ev.line_answers(samples)
    ev.write_answers(answers.values(), args.out)
    return 0


def cmd_validate(args) -> int:
    opt = check_optimality(args.grids, args.size, args.seed)
    adm = check_admissibility(args.admissibility, args.admissibility_size, args.seed + 1)
    ok = not opt["failures"] and not adm["failures"]
    sys.stdout.write(_dump({"ok": ok, "optimality": opt, "admissibility": adm}))
    return 0 if ok else 1


def cmd_render(args) -> int:
    samples = {s.sample_id: s for s in gen.read_samples(args.tasks)}
    if args.sample_id not in samples:
        raise CliError(f"unknown sample id {args.sample_id}")
    s = samples[args.sample_id]
    if s.task == 1:
        raise CliError("task 1 samples have no mask")
    cache = ev.CostMapCache(args.masks)
    ref = s.mask_ref
    mask, catalog, _ = gen.prepare_mask(cache._resolve(ref), ref["min_area"], ref["core_depth"])
    path = None
    if s.task == 3:
        path = s.gt_trajectory
        if args.answers:
            ans = ev.read_answers(args.answers).get(s.sample_id)
            if ans is not None and ans.pred_waypoints:
                cm = cache.cost_map(s)
                status = ev.classify_adherence(ans.pred_waypoints, cm)
                dense = ev.reconstruct_dense(ev.anchor(ans.pred_waypoints, s.start, s.end), cm, status == ev.COMPLIANT)
                path = dense.pixels
    img = overlay(mask, path, s.start, s.end, catalog if args.cores else None)
    img.save(args.out)
    return 0


def cmd_kb(args) -> int:
    _write_or_print(dump_kb(), args.out)
    return 0


def cmd_catalog(args) -> int:
    mask, catalog, ref = gen.prepare_mask(args.mask, args.min_area, args.core_depth)
    doc = {"schema_version": SCHEMA_VERSION, "mask": ref, **catalog.to_dict()}
    _write_or_print(_dump(doc), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="routebench", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="write synthetic class-id PNG masks")
    s.add_argument("--out", required=True)
    s.add_argument("--count", type=int, default=20)
    s.add_argument("--size", type=int, default=128)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)

    g = sub.add_parser("generate", help="generate task samples from a mask directory")
    g.add_argument("--masks", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--task", type=_tasks, default=(1, 2, 3))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--backend", choices=("template", "http"), default="template")
    g.add_argument("--backend-url", default=None, help="generator endpoint (default: $ROUTEBENCH_GENERATOR_URL)")
    g.add_argument("--max-retries", type=int, default=5)
    g.add_argument("--queries-per-mask", type=int, default=1)
    g.add_argument("--workers", type=int, default=0, help="0 = all cores")
    g.add_argument("--min-area", type=int, default=DEFAULT_MIN_AREA)
    g.add_argument("--core-depth", type=int, default=DEFAULT_CORE_DEPTH)
    g.add_argument("--lambdas", type=_lambdas, default=DEFAULT_LAMBDAS)
    g.add_argument("--thresholds", type=_thresholds, default=None)
    g.add_argument("--report", default=None)
    g.add_argument("--dump-graph", default=None, metavar="DIR")
    g.add_argument("--format", choices=("json", "summary"), default="json")
    g.set_defaults(func=cmd_generate)

    st = sub.add_parser("stratify", help="recompute difficulty tiers in place")
    st.add_argument("--tasks", required=True)
    st.add_argument("--lambdas", type=_lambdas, default=DEFAULT_LAMBDAS)
    st.add_argument("--thresholds", type=_thresholds, default=None)
    st.set_defaults(func=cmd_stratify)

    e = sub.add_parser("evaluate", help="score answers against task samples")
    e.add_argument("--tasks", required=True)
    e.add_argument("--answers", required=True)
    e.add_argument("--out", default=None)
    e.add_argument("--per-sample", default=None)
    e.add_argument("--masks", default=None, help="directory holding the referenced masks")
    e.add_argument("--format", choices=("json", "jsonl", "summary"), default="json")
    e.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("baseline", help="write reference answers (ground truth or straight line)")
    b.add_argument("--tasks", required=True)
    b.add_argument("--kind", choices=("gt", "line"), default="gt")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_baseline)

    v = sub.add_parser("validate", help="cross-check the planner against its oracles")
    v.add_argument("--grids", type=int, default=200)
    v.add_argument("--size", type=int, default=48)
    v.add_argument("--admissibility", type=int, default=50)
    v.add_argument("--admissibility-size", type=int, default=32)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("render", help="PNG overlay of a sample")
    r.add_argument("--tasks", required=True)
    r.add_argument("--sample-id", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--masks", default=None)
    r.add_argument("--answers", default=None)
    r.add_argument("--cores", action="store_true", help="shade eroded region cores")
    r.set_defaults(func=cmd_render)

    k = sub.add_parser("kb", help="dump the knowledge base as JSON")
    k.add_argument("--out", default=None)
    k.set_defaults(func=cmd_kb)

    c = sub.add_parser("catalog", help="region catalog JSON for one mask")
    c.add_argument("--mask", required=True)
    c.add_argument("--out", default=None)
    c.add_argument("--min-area", type=int, default=DEFAULT_MIN_AREA)
    c.add_argument("--core-depth", type=int, default=DEFAULT_CORE_DEPTH)
    c.set_defaults(func=cmd_catalog)
    return p


def run(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (CliError, ValueError, KeyError, FileNotFoundError, RuntimeError) as exc:
        _emit_error(type(exc).__name__, str(exc))
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
