"""Self-checks exposed by the CLI: gradient verification and module goldens."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import reference
from .boxgeom import DEFAULT_EPS, focal_eiou_arrays
from .gam import gam_forward, init_gam_params
from .rng import SplitMix64, uniform_block
from .sppcspc import init_params_deterministic, sppcspc_forward

FD_STEP = 1e-6
TIE_MARGIN = 1e-4
GRAD_RTOL = 1e-5
# gradient entries smaller than this are compared on an absolute scale
GRAD_FLOOR = 1e-3

GAM_GOLDEN_SHAPE = (1, 8, 6, 6)
SPP_GOLDEN_SHAPE = (1, 4, 8, 8)
# frozen from the nested-loop reference composition, seed 0
GAM_GOLDEN = -11.582394293614447
SPP_GOLDEN = -20.718343493144427
SPP_PARAM_GOLDEN = -8.343863299341551


def random_box_pairs(n: int, seed: int, extent: float = 64.0) -> tuple[np.ndarray, np.ndarray]:
    """``n`` (pred, gt) pairs; gt is jittered around pred so most pairs overlap."""
    rng = SplitMix64(seed)
    pred = np.empty((n, 4))
    gt = np.empty((n, 4))
    for i in range(n):
        w, h = rng.uniform(2.0, 16.0), rng.uniform(2.0, 16.0)
        x, y = rng.uniform(16.0, extent - 32.0), rng.uniform(16.0, extent - 32.0)
        pred[i] = (x, y, x + w, y + h)
        gw, gh = w * rng.uniform(0.5, 2.0), h * rng.uniform(0.5, 2.0)
        gx, gy = x + rng.uniform(-w, w), y + rng.uniform(-h, h)
        gt[i] = (gx, gy, gx + gw, gy + gh)
    return pred, gt


def near_tie(pred: np.ndarray, gt: np.ndarray, margin: float = TIE_MARGIN) -> np.ndarray:
    """Rows where some predicted edge lies within ``margin`` of a gt edge on the same axis.

    These are the kinks of the min/max in the intersection and enclosing box.
    """
    px = pred[:, [0, 2]]
    gx = gt[:, [0, 2]]
    py = pred[:, [1, 3]]
    gy = gt[:, [1, 3]]
    dx = np.abs(px[:, :, None] - gx[:, None, :]).reshape(len(pred), -1).min(axis=1)
    dy = np.abs(py[:, :, None] - gy[:, None, :]).reshape(len(pred), -1).min(axis=1)
    return (dx < margin) | (dy < margin)


@dataclass
class GradCheckResult:
    max_rel_err: float
    n_checked: int
    n_excluded: int

    @property
    def ok(self) -> bool:
        return self.max_rel_err <= GRAD_RTOL


def grad_check(pred: np.ndarray, gt: np.ndarray, gamma: float, eps: float = DEFAULT_EPS,
               step: float = FD_STEP) -> GradCheckResult:
    """Analytic gradient vs central differences, over every pair not near a tie.

    Relative error per entry is ``|a - n| / max(|a|, |n|, GRAD_FLOOR)``.
    """
    keep = ~near_tie(pred, gt, TIE_MARGIN + step)
    p, g = pred[keep], gt[keep]
    _, analytic = focal_eiou_arrays(p, g, gamma, eps)
    numeric = np.empty_like(analytic)
    for k in range(4):
        e = np.zeros(4)
        e[k] = step
        fp, _ = focal_eiou_arrays(p + e, g, gamma, eps)
        fm, _ = focal_eiou_arrays(p - e, g, gamma, eps)
        numeric[:, k] = (fp - fm) / (2 * step)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), GRAD_FLOOR)
    rel = np.abs(analytic - numeric) / denom
    return GradCheckResult(float(rel.max()) if rel.size else 0.0, int(keep.sum()), int((~keep).sum()))


def loss_check(pairs: int, seed: int, gammas=(0.0, 0.5, 1.0)) -> dict[float, GradCheckResult]:
    pred, gt = random_box_pairs(pairs, seed)
    return {g: grad_check(pred, gt, g) for g in gammas}


# ---------------------------------------------------------------------------
# module goldens


def fixed_input(shape, seed: int) -> np.ndarray:
    """Deterministic tensor, uniform in [-1, 1)."""
    size = int(np.prod(shape))
    return (2.0 * uniform_block(seed ^ 0x5EED, 0, size) - 1.0).reshape(shape)


def gam_case(seed: int):
    n, c, h, w = GAM_GOLDEN_SHAPE
    return fixed_input(GAM_GOLDEN_SHAPE, seed), init_gam_params(c, seed, reduction=4, kernel=7)


def spp_case(seed: int):
    return fixed_input(SPP_GOLDEN_SHAPE, seed), init_params_deterministic(4, 8, seed)


def param_checksum(p) -> float:
    return reference.weighted_checksum(
        [v for conv in p.convs() for v in (*conv.weight.ravel(), *conv.bias)])


@dataclass
class ModuleCheck:
    name: str
    value: float
    expected: float
    tol: float

    @property
    def ok(self) -> bool:
        return abs(self.value - self.expected) <= self.tol


def module_check(seed: int = 0, tol: float = 1e-9) -> list[ModuleCheck]:
    """Library forward passes against the nested-loop reference.

    For seed 0 the frozen goldens are checked too.
    """
    out = []
    x, p = gam_case(seed)
    got = reference.weighted_checksum(gam_forward(x, p))
    out.append(ModuleCheck("gam_vs_reference", got,
                           reference.weighted_checksum(reference.gam_forward(x, p)), tol))
    x2, p2 = spp_case(seed)
    got2 = reference.weighted_checksum(sppcspc_forward(x2, p2))
    out.append(ModuleCheck("sppcspc_vs_reference", got2,
                           reference.weighted_checksum(reference.sppcspc_forward(x2, p2)), tol))
    if seed == 0:
        out.append(ModuleCheck("gam_golden", got, GAM_GOLDEN, tol))
        out.append(ModuleCheck("sppcspc_golden", got2, SPP_GOLDEN, tol))
        out.append(ModuleCheck("sppcspc_param_golden", param_checksum(p2), SPP_PARAM_GOLDEN, tol))
    return out
