"""Axis-aligned box geometry and the EIoU / Focal-EIoU regression losses.

Boxes are corner form ``(x1, y1, x2, y2)`` in continuous pixel coordinates.
The losses return both the value and its exact gradient with respect to the
predicted box corners, so any trainer can consume them without autodiff.

Loss definition, with ``c`` the smallest enclosing box of pred and gt::

    L_EIoU  = (1 - IoU) + rho^2(centers) / (cw^2 + ch^2)
              + (w - w_gt)^2 / cw^2 + (h - h_gt)^2 / ch^2
    L_focal = IoU**gamma * L_EIoU

``epsilon`` is added to the three enclosing-box denominators.  The width and
height terms use squared enclosing extents so every term is dimensionless.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._accel import njit, numba_enabled
from .errors import DomainError

DEFAULT_GAMMA = 0.5
DEFAULT_EPS = 1e-9


@dataclass(frozen=True)
class BBox:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        coords = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(v) for v in coords):
            raise DomainError(f"non-finite box coordinates {coords}")
        if not (self.x2 > self.x1 and self.y2 > self.y1):
            raise DomainError(f"box must have positive area, got {coords}")

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "BBox":
        return cls(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x1 + self.x2) / 2, (self.y1 + self.y2) / 2)

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)

    def translate(self, dx: float, dy: float) -> "BBox":
        return BBox(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)


@dataclass(frozen=True)
class LossConfig:
    gamma: float = DEFAULT_GAMMA
    epsilon: float = DEFAULT_EPS

    def __post_init__(self):
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise DomainError(f"gamma must be >= 0, got {self.gamma}")
        if not self.epsilon > 0:
            raise DomainError(f"epsilon must be > 0, got {self.epsilon}")


@dataclass(frozen=True)
class LossOutput:
    value: float
    grad: tuple[float, float, float, float]


def as_bbox(b: BBox | Sequence[float]) -> BBox:
    if isinstance(b, BBox):
        return b
    x1, y1, x2, y2 = b
    return BBox(float(x1), float(y1), float(x2), float(y2))


def iou(a: BBox, b: BBox) -> float:
    """Intersection area over union area.  Exact: no epsilon in the division."""
    a, b = as_bbox(a), as_bbox(b)
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def enclosing_box(a: BBox, b: BBox) -> BBox:
    a, b = as_bbox(a), as_bbox(b)
    return BBox(min(a.x1, b.x1), min(a.y1, b.y1), max(a.x2, b.x2), max(a.y2, b.y2))


def _side(a, b):
    """1 where a > b, 0 where a < b, 0.5 on a tie (mean of the one-sided slopes)."""
    return np.where(a > b, 1.0, np.where(a == b, 0.5, 0.0))


def eiou_terms(pred, gt, eps=DEFAULT_EPS):
    """Vectorised EIoU over ``(..., 4)`` corner arrays.

    Returns a dict with ``iou``, ``dis``, ``asp_w``, ``asp_h``, ``value`` and
    the gradients ``d_iou`` and ``d_value`` (shape ``(..., 4)``) with respect to
    the predicted corners.  At edge ties the enclosing box takes the branch
    where the predicted edge is active; the intersection takes the mean of
    its two one-sided slopes, so the gradient vanishes when pred == gt.
    """
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    px1, py1, px2, py2 = p[..., 0], p[..., 1], p[..., 2], p[..., 3]
    gx1, gy1, gx2, gy2 = g[..., 0], g[..., 1], g[..., 2], g[..., 3]
    one = np.ones_like(px1)
    zero = np.zeros_like(px1)

    w, h = px2 - px1, py2 - py1
    gw, gh = gx2 - gx1, gy2 - gy1

    # intersection; derivative of each clipped edge w.r.t. pred edge
    ix1 = np.maximum(px1, gx1)
    ix2 = np.minimum(px2, gx2)
    iy1 = np.maximum(py1, gy1)
    iy2 = np.minimum(py2, gy2)
    iw_raw, ih_raw = ix2 - ix1, iy2 - iy1
    overlap = (iw_raw > 0) & (ih_raw > 0)
    iw = np.where(overlap, iw_raw, 0.0)
    ih = np.where(overlap, ih_raw, 0.0)
    inter = iw * ih
    diw_dx1 = np.where(overlap, -_side(px1, gx1), zero)
    diw_dx2 = np.where(overlap, _side(gx2, px2), zero)
    dih_dy1 = np.where(overlap, -_side(py1, gy1), zero)
    dih_dy2 = np.where(overlap, _side(gy2, py2), zero)
    d_inter = np.stack([diw_dx1 * ih, dih_dy1 * iw, diw_dx2 * ih, dih_dy2 * iw], axis=-1)

    union = w * h + gw * gh - inter
    d_area = np.stack([-h, -w, h, w], axis=-1)
    d_union = d_area - d_inter
    iou_v = inter / union
    d_iou = (d_inter * union[..., None] - inter[..., None] * d_union) / (union**2)[..., None]

    # enclosing box
    cw = np.maximum(px2, gx2) - np.minimum(px1, gx1)
    ch = np.maximum(py2, gy2) - np.minimum(py1, gy1)
    dcw = np.stack([np.where(px1 <= gx1, -one, zero), zero,
                    np.where(px2 >= gx2, one, zero), zero], axis=-1)
    dch = np.stack([zero, np.where(py1 <= gy1, -one, zero),
                    zero, np.where(py2 >= gy2, one, zero)], axis=-1)

    # center distance
    dx = (px1 + px2 - gx1 - gx2) / 2
    dy = (py1 + py2 - gy1 - gy2) / 2
    rho2 = dx * dx + dy * dy
    d_rho2 = np.stack([dx, dy, dx, dy], axis=-1)
    c2 = cw * cw + ch * ch + eps
    d_c2 = 2 * cw[..., None] * dcw + 2 * ch[..., None] * dch
    dis = rho2 / c2
    d_dis = (d_rho2 * c2[..., None] - rho2[..., None] * d_c2) / (c2**2)[..., None]

    # width / height
    dw_term = w - gw
    cw2 = cw * cw + eps
    asp_w = dw_term**2 / cw2
    d_w = np.stack([-one, zero, one, zero], axis=-1)
    d_asp_w = (2 * dw_term / cw2)[..., None] * d_w \
        - (dw_term**2 / cw2**2)[..., None] * (2 * cw[..., None] * dcw)
    dh_term = h - gh
    ch2 = ch * ch + eps
    asp_h = dh_term**2 / ch2
    d_h = np.stack([zero, -one, zero, one], axis=-1)
    d_asp_h = (2 * dh_term / ch2)[..., None] * d_h \
        - (dh_term**2 / ch2**2)[..., None] * (2 * ch[..., None] * dch)

    value = (1.0 - iou_v) + dis + asp_w + asp_h
    d_value = -d_iou + d_dis + d_asp_w + d_asp_h
    return {
        "iou": iou_v, "dis": dis, "asp_w": asp_w, "asp_h": asp_h,
        "value": value, "d_iou": d_iou, "d_value": d_value,
    }


def focal_eiou_arrays(pred, gt, gamma=DEFAULT_GAMMA, eps=DEFAULT_EPS):
    """Batched Focal-EIoU.  Returns ``(value, grad)`` arrays.

    With ``gamma == 0`` this is exactly EIoU.  For disjoint boxes and
    ``gamma > 0`` both value and gradient are zero.
    """
    t = eiou_terms(pred, gt, eps)
    if gamma == 0:
        return t["value"], t["d_value"]
    u, L = t["iou"], t["value"]
    pos = u > 0
    safe_u = np.where(pos, u, 1.0)
    weight = np.where(pos, safe_u**gamma, 0.0)
    d_weight = np.where(pos, gamma * safe_u ** (gamma - 1), 0.0)
    value = weight * L
    grad = d_weight[..., None] * t["d_iou"] * L[..., None] + weight[..., None] * t["d_value"]
    return value, grad


def _check_pair(pred, gt):
    return as_bbox(pred), as_bbox(gt)


def eiou_loss(pred: BBox, gt: BBox, cfg: LossConfig = LossConfig()) -> LossOutput:
    pred, gt = _check_pair(pred, gt)
    t = eiou_terms(pred.as_tuple(), gt.as_tuple(), cfg.epsilon)
    return LossOutput(float(t["value"]), tuple(float(v) for v in t["d_value"]))


def focal_eiou_loss(pred: BBox, gt: BBox, cfg: LossConfig = LossConfig()) -> LossOutput:
    pred, gt = _check_pair(pred, gt)
    value, grad = focal_eiou_arrays(pred.as_tuple(), gt.as_tuple(), cfg.gamma, cfg.epsilon)
    return LossOutput(float(value), tuple(float(v) for v in grad))


# ---------------------------------------------------------------------------
# pairwise IoU matrix (hot path for NMS and matching)


@njit
def _box_iou_matrix_loop(a, b):
    n, m = a.shape[0], b.shape[0]
    out = np.zeros((n, m))
    for i in range(n):
        area_a = (a[i, 2] - a[i, 0]) * (a[i, 3] - a[i, 1])
        for j in range(m):
            iw = min(a[i, 2], b[j, 2]) - max(a[i, 0], b[j, 0])
            ih = min(a[i, 3], b[j, 3]) - max(a[i, 1], b[j, 1])
            if iw > 0 and ih > 0:
                inter = iw * ih
                area_b = (b[j, 2] - b[j, 0]) * (b[j, 3] - b[j, 1])
                out[i, j] = inter / (area_a + area_b - inter)
    return out


def _box_iou_matrix_numpy(a, b):
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    ok = (iw > 0) & (ih > 0)
    inter = np.where(ok, iw * ih, 0.0)
    union = area_a[:, None] + area_b[None, :] - inter
    return np.where(ok, inter / np.where(ok, union, 1.0), 0.0)


def box_iou_matrix(a, b) -> np.ndarray:
    """``(N, 4) x (M, 4) -> (N, M)`` IoU matrix; same arithmetic as :func:`iou`."""
    a = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 4)
    if numba_enabled():
        return _box_iou_matrix_loop(a, b)
    return _box_iou_matrix_numpy(a, b)
