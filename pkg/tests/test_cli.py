import json
import subprocess
import sys

import numpy as np
import pytest
from PIL import Image

from routebench.cli import run
from routebench.gen import read_samples
from routebench.render import PALETTE


@pytest.fixture(scope="module")
def generated(synthetic_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("gen")
    tasks = out / "tasks.jsonl"
    assert run(["generate", "--masks", str(synthetic_dir), "--out", str(tasks), "--seed", "3",
                "--queries-per-mask", "2", "--workers", "1", "--report", str(out / "report.json")]) == 0
    return out, tasks


def test_generate_writes_samples(generated, capsys):
    out, tasks = generated
    samples = read_samples(tasks)
    assert {s.task for s in samples} == {1, 2, 3}
    report = json.loads((out / "report.json").read_text())
    assert report["counts"]["task1"] == 12


def test_generate_repeatable(generated, synthetic_dir, tmp_path):
    out, tasks = generated
    again = tmp_path / "tasks.jsonl"
    run(["generate", "--masks", str(synthetic_dir), "--out", str(again), "--seed", "3",
         "--queries-per-mask", "2", "--workers", "1", "--report", str(tmp_path / "r.json")])
    assert again.read_bytes() == tasks.read_bytes()
    assert (tmp_path / "r.json").read_bytes() == (out / "report.json").read_bytes()


def test_generate_single_task(synthetic_dir, tmp_path):
    t = tmp_path / "t.jsonl"
    assert run(["generate", "--masks", str(synthetic_dir), "--out", str(t), "--task", "2", "--format", "summary"]) == 0
    assert {s.task for s in read_samples(t)} == {2}


def test_gt_baseline_evaluates_perfectly(generated, synthetic_dir, tmp_path, capsys):
    _, tasks = generated
    ans = tmp_path / "gt.jsonl"
    assert run(["baseline", "--tasks", str(tasks), "--kind", "gt", "--out", str(ans)]) == 0
    rep = tmp_path / "rep.json"
    per = tmp_path / "per.jsonl"
    assert run(["evaluate", "--tasks", str(tasks), "--answers", str(ans), "--out", str(rep),
                "--per-sample", str(per), "--masks", str(synthetic_dir)]) == 0
    report = json.loads(rep.read_text())
    t3 = report["tasks"]["3"]["avg_pooled"]
    assert t3 == {"AR": 1.0, "CR": 1.0, "CD": 0.0, "VR": None}
    assert report["tasks"]["1"]["avg_pooled"]["FM"] == 1.0
    assert len(per.read_text().splitlines()) == len(read_samples(tasks))
    assert "task 3" in capsys.readouterr().out


def test_line_baseline_summary(generated, synthetic_dir, tmp_path, capsys):
    _, tasks = generated
    ans = tmp_path / "line.jsonl"
    run(["baseline", "--tasks", str(tasks), "--kind", "line", "--out", str(ans)])
    capsys.readouterr()
    assert run(["evaluate", "--tasks", str(tasks), "--answers", str(ans), "--format", "summary"]) == 0
    out = capsys.readouterr().out
    assert "task 1" in out and "AR=" in out


def test_stratify_in_place(generated, tmp_path, capsys):
    _, tasks = generated
    copy = tmp_path / "t.jsonl"
    copy.write_bytes(tasks.read_bytes())
    capsys.readouterr()
    assert run(["stratify", "--tasks", str(copy), "--lambdas", "1,0,0,0", "--thresholds", "0.5,1.0"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["task3_thresholds"] == [0.5, 1.0]
    for s in read_samples(copy):
        if s.task == 3:
            expect = "Easy" if s.complexity.h_inter < 0.5 else "Medium" if s.complexity.h_inter < 1.0 else "Hard"
            assert s.tier == expect


def test_validate(capsys):
    assert run(["validate", "--grids", "10", "--size", "16", "--admissibility", "5", "--admissibility-size", "12"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["ok"] and doc["optimality"]["grids"] == 10


def test_render(generated, synthetic_dir, tmp_path):
    _, tasks = generated
    s = next(x for x in read_samples(tasks) if x.task == 3)
    png = tmp_path / "o.png"
    assert run(["render", "--tasks", str(tasks), "--sample-id", s.sample_id, "--out", str(png),
                "--masks", str(synthetic_dir), "--cores"]) == 0
    img = np.asarray(Image.open(png).convert("RGB"))
    assert img.shape == (128, 128, 3)
    mid = s.gt_trajectory[len(s.gt_trajectory) // 2]
    assert tuple(img[mid]) == (255, 0, 255)
    assert tuple(img[s.start]) == (0, 255, 255)
    assert len(PALETTE) == 8


def test_render_unknown_sample(generated, tmp_path, capsys):
    _, tasks = generated
    assert run(["render", "--tasks", str(tasks), "--sample-id", "nope", "--out", str(tmp_path / "x.png")]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "CliError"


def test_kb_and_catalog(synthetic_dir, tmp_path, capsys):
    assert run(["kb"]) == 0
    kb = json.loads(capsys.readouterr().out)
    assert set(kb) >= {"classes", "agents", "rankings"}
    mask = sorted(synthetic_dir.iterdir())[0]
    assert run(["catalog", "--mask", str(mask), "--out", str(tmp_path / "c.json")]) == 0
    cat = json.loads((tmp_path / "c.json").read_text())
    assert cat["mask"]["name"] == mask.name


def test_missing_mask_dir_is_json_error(tmp_path, capsys):
    assert run(["generate", "--masks", str(tmp_path), "--out", str(tmp_path / "x.jsonl")]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "FileNotFoundError"


def test_bad_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        run(["generate", "--lambdas", "1,2"])
    assert exc.value.code == 2
    assert json.loads(capsys.readouterr().err.splitlines()[-1])["error"] == "UsageError"


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "routebench.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip()
