"""Builders for on-disk dataset fixtures."""
import numpy as np

from linekit.boxgeom import BBox
from linekit.datasetio import Raster, write_classes, write_sample, DEFAULT_CLASSES


def make_dataset(root, n=5, w=64, h=48, seed=0):
    rng = np.random.default_rng(seed)
    write_classes(root, DEFAULT_CLASSES)
    for i in range(n):
        img = Raster(rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8))
        labels = []
        for _ in range(int(rng.integers(1, 4))):
            x1, y1 = int(rng.integers(0, w - 10)), int(rng.integers(0, h - 10))
            labels.append((int(rng.integers(0, 6)), BBox(x1, y1, x1 + int(rng.integers(4, 10)),
                                                         y1 + int(rng.integers(4, 10)))))
        write_sample(root, f"img{i:03d}", img, labels)
    return root


def make_predictions(gt_root, pred_root, score=0.9):
    """Copy ground truth labels as predictions with a confidence column."""
    pred_root.mkdir(parents=True, exist_ok=True)
    for f in sorted((gt_root / "labels").glob("*.txt")):
        lines = [f"{ln} {score}\n" for ln in f.read_text().splitlines() if ln.strip()]
        (pred_root / f.name).write_text("".join(lines))
    return pred_root
