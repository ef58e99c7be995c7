"""Batch command line: ``linekit {split,augment,eval,loss-check,module-check}``.

Exit status: 0 success, 1 check failure, 2 usage or I/O error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import checks
from .augment import AugmentSpec, OcclusionSpec, augment_directory
from .boxgeom import DEFAULT_GAMMA
from .datasetio import list_stems, parse_yolo_records, read_classes, split_dataset
from .errors import LinekitError
from .evalkit import DEFAULT_CONF, DEFAULT_NMS_IOU, Detection, EvalConfig, GroundTruth, evaluate, nms, report_json

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _unit_float(text: str) -> float:
    v = float(text)
    if not 0 <= v <= 1:
        raise argparse.ArgumentTypeError(f"{v} is outside [0, 1]")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="linekit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("split", help="write train/val/test id lists for a dataset directory")
    s.add_argument("--in", dest="in_dir", required=True, help="dataset directory (images/*.ppm)")
    s.add_argument("--out", help="where to write train.txt/val.txt/test.txt (default: --in)")
    s.add_argument("--seed", type=int, default=0, help="shuffle seed (default 0)")
    s.add_argument("--ratios", type=_float_list, default=[0.6, 0.2, 0.2],
                   help="comma-separated split ratios summing to 1 (default 0.6,0.2,0.2)")

    a = sub.add_parser("augment", help="expand a dataset with rotations, brightness, noise and occluders")
    a.add_argument("--in", dest="in_dir", required=True, help="input dataset directory")
    a.add_argument("--out", dest="out_dir", required=True, help="output dataset directory")
    a.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    a.add_argument("--ids", help="file of sample ids to augment, one per line (e.g. train.txt)")
    a.add_argument("--rotations", type=_float_list, default=[90, 180, 270],
                   help="clockwise angles in degrees (default 90,180,270; empty string for none)")
    a.add_argument("--brightness", type=_float_list, default=[0.6, 1.4],
                   help="brightness factors (default 0.6,1.4; empty string for none)")
    a.add_argument("--sp-density", type=_unit_float, default=0.02,
                   help="salt-and-pepper density, 0 disables (default 0.02)")
    a.add_argument("--occ-count", default="1,3",
                   help="occluder count range MIN,MAX; 0 disables (default 1,3)")
    a.add_argument("--occ-area", type=_float_list, default=[0.01, 0.05],
                   help="occluder area as image fraction MIN,MAX (default 0.01,0.05)")
    a.add_argument("--occ-max-overlap", type=_unit_float, default=0.5,
                   help="largest fraction of any box an occluder may cover (default 0.5)")

    e = sub.add_parser("eval", help="NMS + mAP evaluation of YOLO-format predictions")
    e.add_argument("--pred", required=True, help="prediction dir: <id>.txt lines 'cls cx cy w h score'")
    e.add_argument("--gt", required=True, help="ground-truth dataset dir (labels/<id>.txt, classes.txt)")
    e.add_argument("--conf", type=_unit_float, default=DEFAULT_CONF,
                   help=f"confidence threshold for precision/recall (default {DEFAULT_CONF})")
    e.add_argument("--nms-iou", type=_unit_float, default=DEFAULT_NMS_IOU,
                   help=f"NMS IoU threshold (default {DEFAULT_NMS_IOU})")
    e.add_argument("--report", help="write the JSON report here (default: stdout)")

    lc = sub.add_parser("loss-check", help="finite-difference check of the loss gradients")
    lc.add_argument("--pairs", type=int, default=1000, help="random box pairs (default 1000)")
    lc.add_argument("--seed", type=int, default=0, help="pair generator seed (default 0)")
    lc.add_argument("--gamma", type=float, action="append",
                    help=f"focal exponent, repeatable (default 0, {DEFAULT_GAMMA}, 1)")

    m = sub.add_parser("module-check", help="GAM and SPPCSPC against the nested-loop reference")
    m.add_argument("--seed", type=int, default=0, help="parameter seed; 0 also checks frozen goldens")
    return p


def _label_dir(root: Path) -> Path:
    return root / "labels" if (root / "labels").is_dir() else root


def _cmd_split(args) -> int:
    ids = list_stems(args.in_dir)
    parts = split_dataset(ids, args.ratios, args.seed)
    out = Path(args.out or args.in_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = ("train", "val", "test") if len(parts) == 3 else [f"split{i}" for i in range(len(parts))]
    for name, part in zip(names, parts):
        (out / f"{name}.txt").write_text("".join(f"{i}\n" for i in part))
        print(f"{name}: {len(part)}")
    return EXIT_OK


def _cmd_augment(args) -> int:
    try:
        counts = [int(t) for t in args.occ_count.split(",")]
    except ValueError:
        raise UsageError(f"bad --occ-count {args.occ_count!r}") from None
    lo, hi = (counts[0], counts[0]) if len(counts) == 1 else counts[:2]
    if len(args.occ_area) != 2:
        raise UsageError("--occ-area needs MIN,MAX")
    occ = None if hi == 0 else OcclusionSpec(lo, hi, args.occ_area[0], args.occ_area[1],
                                             args.occ_max_overlap)
    spec = AugmentSpec(tuple(args.rotations), tuple(args.brightness), args.sp_density, occ, args.seed)
    ids = None
    if args.ids:
        ids = [ln.strip() for ln in Path(args.ids).read_text().splitlines() if ln.strip()]
    n = augment_directory(args.in_dir, args.out_dir, spec, ids)
    print(f"wrote {n} samples to {args.out_dir}")
    return EXIT_OK


def load_eval_inputs(pred_dir, gt_dir):
    """Read YOLO-format predictions and ground truth in normalised coordinates.

    IoU is unchanged by per-axis scaling, so pixel sizes are not needed.
    """
    pred_root, gt_root = Path(pred_dir), Path(gt_dir)
    for root in (pred_root, gt_root):
        if not root.is_dir():
            raise FileNotFoundError(f"{root} is not a directory")
    classes = read_classes(gt_root)
    n = len(classes)
    gts, dets = [], []
    gt_files = sorted(_label_dir(gt_root).glob("*.txt"))
    for f in gt_files:
        if f.name == "classes.txt":
            continue
        for rec in parse_yolo_records(f.read_text(), n):
            gts.append(GroundTruth(f.stem, rec.class_id, rec.to_bbox(1.0, 1.0)))
    for f in sorted(_label_dir(pred_root).glob("*.txt")):
        if f.name == "classes.txt":
            continue
        for rec, score in parse_yolo_records(f.read_text(), n, with_score=True):
            dets.append(Detection(f.stem, rec.class_id, score, rec.to_bbox(1.0, 1.0)))
    return classes, dets, gts


def _cmd_eval(args) -> int:
    classes, dets, gts = load_eval_inputs(args.pred, args.gt)
    kept = nms(dets, args.nms_iou)
    report = evaluate(kept, gts, EvalConfig(tuple(classes), args.conf))
    text = report_json(report, args.nms_iou)
    if args.report:
        Path(args.report).write_text(text)
    else:
        sys.stdout.write(text)
    if not report.defined:
        print("no ground truth boxes: metrics undefined", file=sys.stderr)
        return EXIT_USAGE
    if args.report:
        print(f"mAP50 {report.map50:.6f}  mAP50-95 {report.map5095:.6f}  "
              f"P {report.precision:.6f}  R {report.recall:.6f}")
    return EXIT_OK


def _cmd_loss_check(args) -> int:
    if args.pairs < 1:
        raise UsageError("--pairs must be positive")
    gammas = args.gamma or [0.0, DEFAULT_GAMMA, 1.0]
    if any(g < 0 for g in gammas):
        raise UsageError("--gamma must be non-negative")
    results = checks.loss_check(args.pairs, args.seed, tuple(gammas))
    worst = 0.0
    for g, r in results.items():
        print(f"gamma={g:g}: checked {r.n_checked} pairs, excluded {r.n_excluded} near ties, "
              f"max relative error {r.max_rel_err:.3e}")
        worst = max(worst, r.max_rel_err)
    print(f"max relative error {worst:.3e} (limit {checks.GRAD_RTOL:g})")
    return EXIT_OK if worst <= checks.GRAD_RTOL else EXIT_CHECK


def _cmd_module_check(args) -> int:
    ok = True
    for m in checks.module_check(args.seed):
        print(f"{'PASS' if m.ok else 'FAIL'} {m.name}: {m.value:.12g} (expected {m.expected:.12g})")
        ok &= m.ok
    return EXIT_OK if ok else EXIT_CHECK


COMMANDS = {
    "split": _cmd_split,
    "augment": _cmd_augment,
    "eval": _cmd_eval,
    "loss-check": _cmd_loss_check,
    "module-check": _cmd_module_check,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (UsageError, OSError, LinekitError, ValueError) as e:
        print(f"linekit {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
