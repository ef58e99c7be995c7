"""Time the numba and pure-numpy kernel backends side by side.

    python3 benchmarks/bench_kernels.py [--repeat N] [--quick]

Both backends are called through the public entry points with the
``LINEKIT_PURE_NUMPY`` flag toggled, so the numbers include dispatch and
validation overhead.  Outputs are compared bit for bit before timing.
"""
import argparse
import math
import os
import timeit

import numpy as np

from linekit.augment import Sample, rotate_sample
from linekit.boxgeom import box_iou_matrix
from linekit.datasetio import Raster
from linekit.tensorcore import ConvParams, conv2d, maxpool2d

FLAG = "LINEKIT_PURE_NUMPY"


def cases(quick: bool):
    rng = np.random.default_rng(0)
    side = 32 if quick else 64
    x = rng.standard_normal((1, 16, side, side))
    conv = ConvParams.same(rng.standard_normal((16, 16, 3, 3)), rng.standard_normal(16))
    boxes_a = np.sort(rng.uniform(0, 100, (400, 4)).reshape(400, 2, 2), axis=1).transpose(0, 2, 1).reshape(400, 4)
    boxes_b = np.sort(rng.uniform(0, 100, (300, 4)).reshape(300, 2, 2), axis=1).transpose(0, 2, 1).reshape(300, 4)
    img = Sample(Raster(rng.integers(0, 256, (4 * side, 4 * side, 3), dtype=np.uint8)))
    return {
        f"conv2d 16x16x3x3 on {side}x{side}": lambda: conv2d(x, conv),
        f"maxpool2d k=13 on {side}x{side}": lambda: maxpool2d(x, 13, 1, 6),
        "box_iou_matrix 400x300": lambda: box_iou_matrix(boxes_a, boxes_b),
        f"rotate 30 deg {4 * side}x{4 * side}": lambda: rotate_sample(img, 30).image.pixels,
    }


def run_with(flag_value, fn):
    old = os.environ.get(FLAG)
    os.environ[FLAG] = flag_value
    try:
        return fn()
    finally:
        if old is None:
            del os.environ[FLAG]
        else:
            os.environ[FLAG] = old


def best_of(fn, repeat):
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--quick", action="store_true", help="smaller inputs")
    args = ap.parse_args()

    print(f"{'kernel':<32} {'numba':>11} {'numpy':>11} {'speedup':>8}")
    for name, fn in cases(args.quick).items():
        fast = run_with("0", fn)  # also triggers compilation
        slow = run_with("1", fn)
        if np.asarray(fast).tobytes() != np.asarray(slow).tobytes():
            raise SystemExit(f"{name}: backends disagree")
        t_nb = run_with("0", lambda: best_of(fn, args.repeat))
        t_np = run_with("1", lambda: best_of(fn, args.repeat))
        ratio = t_np / t_nb if t_nb > 0 else math.inf
        print(f"{name:<32} {t_nb * 1e3:>9.3f}ms {t_np * 1e3:>9.3f}ms {ratio:>7.1f}x")


if __name__ == "__main__":
    main()
