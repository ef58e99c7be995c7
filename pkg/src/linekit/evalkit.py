"""Detection evaluation: class-wise NMS, greedy matching, AP and mAP.

Conventions:

* a detection matches a ground truth when IoU >= threshold (inclusive);
* AP is the all-point interpolated area under the precision envelope;
* classes with no ground truth are left out of every mean;
* precision and recall are taken at the confidence threshold and IoU 0.5,
  averaged over the classes that have ground truth.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .boxgeom import BBox, box_iou_matrix
from .datasetio import DEFAULT_CLASSES
from .errors import DomainError

IOU_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))
DEFAULT_CONF = 0.25
DEFAULT_NMS_IOU = 0.45


@dataclass(frozen=True)
class Detection:
    image_id: Hashable
    class_id: int
    score: float
    box: BBox

    def __post_init__(self):
        if not 0 <= self.score <= 1:
            raise DomainError(f"score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class GroundTruth:
    image_id: Hashable
    class_id: int
    box: BBox


@dataclass(frozen=True)
class EvalConfig:
    class_names: tuple = DEFAULT_CLASSES
    conf_thresh: float = DEFAULT_CONF
    iou_thresholds: tuple = IOU_THRESHOLDS

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


@dataclass
class ClassResult:
    name: str
    n_gt: int
    ap: dict = field(default_factory=dict)  # iou threshold -> AP
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def has_gt(self) -> bool:
        return self.n_gt > 0

    @property
    def ap50(self) -> float | None:
        return self.ap.get(0.5) if self.has_gt else None

    @property
    def ap5095(self) -> float | None:
        if not self.has_gt:
            return None
        return sum(self.ap.values()) / len(self.ap)


@dataclass
class EvalReport:
    per_class: list
    map50: float | None
    map5095: float | None
    precision: float | None
    recall: float | None
    map_by_threshold: dict
    config: EvalConfig

    @property
    def defined(self) -> bool:
        return self.map50 is not None

    def to_dict(self, nms_iou: float | None = None) -> dict:
        cfg = {
            "conf": self.config.conf_thresh,
            "iou_thresholds": list(self.config.iou_thresholds),
        }
        if nms_iou is not None:
            cfg["nms_iou"] = nms_iou
        return {
            "map50": self.map50,
            "map5095": self.map5095,
            "precision": self.precision,
            "recall": self.recall,
            "per_class": [
                {"name": c.name, "ap50": c.ap50, "ap5095": c.ap5095,
                 "tp": c.tp, "fp": c.fp, "fn": c.fn}
                for c in self.per_class
            ],
            "config": cfg,
        }


def _round_sig(v):
    if isinstance(v, float):
        return float(f"{v:.6g}") if math.isfinite(v) else None
    if isinstance(v, dict):
        return {k: _round_sig(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_round_sig(x) for x in v]
    return v


def report_json(report: EvalReport, nms_iou: float | None = None) -> str:
    """Canonical JSON: sorted keys, floats at 6 significant digits, null for undefined."""
    return json.dumps(_round_sig(report.to_dict(nms_iou)), sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------


def _by_image_class(items):
    groups: dict = {}
    for idx, it in enumerate(items):
        groups.setdefault((it.image_id, it.class_id), []).append(idx)
    return groups


def _score_order(dets, idxs):
    # stable sort: ties keep input order
    return sorted(idxs, key=lambda i: -dets[i].score)


def _boxes(items, idxs) -> np.ndarray:
    return np.array([items[i].box.as_tuple() for i in idxs], dtype=np.float64).reshape(-1, 4)


def nms(dets: Sequence[Detection], iou_thresh: float) -> list[Detection]:
    """Greedy class-wise NMS.

    Within each (image, class) group, boxes are visited by descending score
    and dropped when IoU with an already kept box exceeds ``iou_thresh``.
    Survivors are returned in global descending-score order, ties by input
    order.
    """
    if not 0 <= iou_thresh <= 1:
        raise DomainError(f"iou_thresh must be in [0, 1], got {iou_thresh}")
    dets = list(dets)
    keep = []
    for idxs in _by_image_class(dets).values():
        order = _score_order(dets, idxs)
        ious = box_iou_matrix(_boxes(dets, order), _boxes(dets, order))
        alive = np.ones(len(order), dtype=bool)
        for a in range(len(order)):
            if not alive[a]:
                continue
            keep.append(order[a])
            alive[a + 1:] &= ~(ious[a, a + 1:] > iou_thresh)
    keep = _score_order(dets, sorted(keep))
    return [dets[i] for i in keep]


@dataclass
class MatchResult:
    order: list          # detection indices, descending score
    tp: list             # bool per entry of ``order``
    n_fn: int
    n_gt: int
    scores: list = field(default_factory=list)

    @property
    def n_tp(self) -> int:
        return sum(self.tp)

    @property
    def n_fp(self) -> int:
        return len(self.tp) - self.n_tp


def match_detections(dets: Sequence[Detection], gts: Sequence[GroundTruth],
                     iou_thresh: float) -> MatchResult:
    """Greedy one-to-one matching per image and class.

    Detections are taken in descending score; each claims the still-unmatched
    ground truth of highest IoU if that IoU >= ``iou_thresh`` (ties to the
    lowest ground-truth index), else it is a false positive.
    """
    dets, gts = list(dets), list(gts)
    det_groups = _by_image_class(dets)
    gt_groups = _by_image_class(gts)
    flags: dict[int, bool] = {}
    n_matched = 0
    for key, didx in det_groups.items():
        gidx = gt_groups.get(key, [])
        order = _score_order(dets, didx)
        if not gidx:
            flags.update((i, False) for i in order)
            continue
        ious = box_iou_matrix(_boxes(dets, order), _boxes(gts, gidx))
        used = np.zeros(len(gidx), dtype=bool)
        for row, i in enumerate(order):
            cand = np.where(used, -1.0, ious[row])
            best = int(np.argmax(cand))
            if cand[best] >= iou_thresh and not used[best]:
                used[best] = True
                flags[i] = True
                n_matched += 1
            else:
                flags[i] = False
    order = _score_order(dets, list(range(len(dets))))
    return MatchResult(order=order, tp=[flags[i] for i in order], n_fn=len(gts) - n_matched,
                       n_gt=len(gts), scores=[dets[i].score for i in order])


def average_precision(flags: Sequence[bool], n_gt: int) -> float:
    """All-point interpolated AP for TP/FP flags already in descending score.

    Zero when there is no ground truth.
    """
    if n_gt <= 0 or len(flags) == 0:
        return 0.0
    tp = np.cumsum(np.asarray(flags, dtype=np.float64))
    fp = np.cumsum(1.0 - np.asarray(flags, dtype=np.float64))
    recall = tp / n_gt
    precision = tp / (tp + fp)
    mrec = np.concatenate(([0.0], recall))
    mpre = np.concatenate(([0.0], precision))
    # precision envelope: max precision at any recall >= r
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.nonzero(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


def evaluate(dets: Sequence[Detection], gts: Sequence[GroundTruth],
             config: EvalConfig = EvalConfig()) -> EvalReport:
    """Per-class AP over all IoU thresholds plus P/R at the operating point.

    AP uses every detection; precision, recall and the TP/FP/FN counts use
    only detections with ``score >= conf_thresh`` matched at IoU 0.5.
    """
    dets, gts = list(dets), list(gts)
    n_cls = config.n_classes
    for item in (*dets, *gts):
        if not 0 <= item.class_id < n_cls:
            raise DomainError(f"class id {item.class_id} outside [0, {n_cls})")
    results = []
    for cls in range(n_cls):
        cd = [d for d in dets if d.class_id == cls]
        cg = [g for g in gts if g.class_id == cls]
        res = ClassResult(config.class_names[cls], len(cg))
        for t in config.iou_thresholds:
            m = match_detections(cd, cg, t)
            res.ap[t] = average_precision(m.tp, m.n_gt)
        op = match_detections([d for d in cd if d.score >= config.conf_thresh], cg, 0.5)
        res.tp, res.fp, res.fn = op.n_tp, op.n_fp, op.n_fn
        results.append(res)

    scored = [r for r in results if r.has_gt]
    if not scored:
        return EvalReport(results, None, None, None, None,
                          {t: None for t in config.iou_thresholds}, config)
    by_t = {t: sum(r.ap[t] for r in scored) / len(scored) for t in config.iou_thresholds}
    map5095 = sum(by_t.values()) / len(by_t)
    precision = sum(r.tp / (r.tp + r.fp) if r.tp + r.fp else 0.0 for r in scored) / len(scored)
    recall = sum(r.tp / r.n_gt for r in scored) / len(scored)
    return EvalReport(results, by_t.get(0.5), map5095, precision, recall, by_t, config)
