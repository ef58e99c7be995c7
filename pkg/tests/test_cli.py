import json
import subprocess
import sys

import pytest

from linekit.cli import build_parser, run

from fixtures import make_dataset, make_predictions

SUBCOMMANDS = ["split", "augment", "eval", "loss-check", "module-check"]


@pytest.fixture
def dataset(tmp_path):
    return make_dataset(tmp_path / "data")


@pytest.mark.parametrize("cmd", SUBCOMMANDS)
def test_help_exits_zero_and_lists_flags(cmd, capsys):
    assert run([cmd, "--help"]) == 0
    text = capsys.readouterr().out
    sub = build_parser()._subparsers._group_actions[0].choices[cmd]
    for action in sub._actions:
        for opt in action.option_strings:
            assert opt in text


def test_unknown_flag_is_usage_error(capsys):
    assert run(["eval", "--bogus"]) == 2
    assert "error" in capsys.readouterr().err
    assert run([]) == 2


def test_eval_missing_dir(tmp_path, capsys):
    assert run(["eval", "--pred", "/nonexistent", "--gt", str(tmp_path)]) == 2
    assert "nonexistent" in capsys.readouterr().err


def test_eval_perfect_predictions(dataset, tmp_path):
    pred = make_predictions(dataset, tmp_path / "pred")
    report = tmp_path / "r.json"
    assert run(["eval", "--pred", str(pred), "--gt", str(dataset), "--report", str(report)]) == 0
    doc = json.loads(report.read_text())
    assert doc["map50"] == 1.0 and doc["map5095"] == 1.0
    assert doc["precision"] == 1.0 and doc["recall"] == 1.0
    assert doc["config"] == {"conf": 0.25, "nms_iou": 0.45,
                             "iou_thresholds": [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95]}


def test_eval_byte_identical_reports(dataset, tmp_path):
    pred = make_predictions(dataset, tmp_path / "pred", score=0.6)
    # perturb one prediction so the report is non-trivial
    f = sorted(pred.glob("*.txt"))[0]
    f.write_text(f.read_text() + "0 0.5 0.5 0.3 0.3 0.4\n")
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert run(["eval", "--pred", str(pred), "--gt", str(dataset), "--report", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_eval_empty_ground_truth(tmp_path, capsys):
    gt = tmp_path / "gt" / "labels"
    gt.mkdir(parents=True)
    (gt / "a.txt").write_text("")
    pred = tmp_path / "pred"
    pred.mkdir()
    (pred / "a.txt").write_text("0 0.5 0.5 0.2 0.2 0.9\n")
    assert run(["eval", "--pred", str(pred), "--gt", str(tmp_path / "gt")]) == 2
    out = capsys.readouterr()
    assert json.loads(out.out)["map50"] is None
    assert "undefined" in out.err


def test_eval_bad_label_line(dataset, tmp_path, capsys):
    pred = make_predictions(dataset, tmp_path / "pred")
    (pred / "img000.txt").write_text("0 0.5 0.5 0.2\n")
    assert run(["eval", "--pred", str(pred), "--gt", str(dataset)]) == 2
    assert "line 1" in capsys.readouterr().err


def test_split_writes_lists(dataset, capsys):
    assert run(["split", "--in", str(dataset), "--seed", "4"]) == 0
    parts = [(dataset / f"{n}.txt").read_text().split() for n in ("train", "val", "test")]
    assert [len(p) for p in parts] == [3, 1, 1]
    assert sorted(sum(parts, [])) == [f"img{i:03d}" for i in range(5)]
    assert run(["split", "--in", str(dataset), "--ratios", "0.5,0.2"]) == 2


def test_augment_directory(dataset, tmp_path):
    out = tmp_path / "aug"
    args = ["augment", "--in", str(dataset), "--out", str(out), "--seed", "1",
            "--rotations", "90", "--brightness", "1.4", "--sp-density", "0", "--occ-count", "0"]
    assert run(args) == 0
    names = sorted(p.stem for p in (out / "images").glob("*.ppm"))
    assert len(names) == 15
    assert "img000__rot90" in names and "img000__bright1.4" in names
    first = {p.name: p.read_bytes() for p in (out / "images").glob("*.ppm")}
    assert run(args) == 0
    assert first == {p.name: p.read_bytes() for p in (out / "images").glob("*.ppm")}


def test_augment_subset_after_split(dataset, tmp_path):
    assert run(["split", "--in", str(dataset)]) == 0
    out = tmp_path / "aug"
    assert run(["augment", "--in", str(dataset), "--out", str(out),
                "--ids", str(dataset / "train.txt")]) == 0
    assert len(list((out / "images").glob("*.ppm"))) == 3 * 8


def test_augment_missing_input(tmp_path):
    assert run(["augment", "--in", str(tmp_path / "nope"), "--out", str(tmp_path / "o")]) == 2


def test_loss_check(capsys):
    assert run(["loss-check", "--pairs", "1000", "--seed", "7"]) == 0
    last = capsys.readouterr().out.strip().splitlines()[-1]
    assert last.startswith("max relative error")
    assert float(last.split()[3]) <= 1e-5


def test_module_check(capsys):
    assert run(["module-check", "--seed", "0"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 5
    assert run(["module-check", "--seed", "3"]) == 0


def test_console_entry_point(dataset, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "linekit", "module-check"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
