"""Seeded image augmentation with exact label transforms.

Transforms: rotation, brightness scaling, salt-and-pepper noise and gray
occluder patches.  Every random choice comes from SplitMix64 streams keyed
by ``derive_seed(spec.seed, sample_index, transform_index)``, so output does
not depend on processing order or thread count.

Rotation angles are in degrees, clockwise as seen on screen (y axis down).
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ._accel import njit, numba_enabled
from .boxgeom import BBox
from .datasetio import Raster, list_stems, read_classes, read_sample, write_classes, write_sample
from .errors import DomainError
from .rng import SplitMix64, derive_seed, u64_block, uniform_block

OCCLUDER_VALUE = 128
MAX_OCCLUDER_TRIES = 100
MIN_BOX_AREA = 1.0


@dataclass
class Sample:
    image: Raster
    labels: list = field(default_factory=list)  # [(class_id, BBox)] in pixels

    def __post_init__(self):
        w, h = self.image.width, self.image.height
        tol = 1e-6 * max(w, h)
        for _, box in self.labels:
            if box.x1 < -tol or box.y1 < -tol or box.x2 > w + tol or box.y2 > h + tol:
                raise DomainError(f"label {box.as_tuple()} outside the {w}x{h} image")

    def __eq__(self, other):
        return (isinstance(other, Sample) and self.image == other.image
                and list(self.labels) == list(other.labels))


@dataclass(frozen=True)
class OcclusionSpec:
    count_min: int = 1
    count_max: int = 3
    min_frac: float = 0.01
    max_frac: float = 0.05
    max_overlap: float = 0.5

    def __post_init__(self):
        if not 0 <= self.count_min <= self.count_max:
            raise DomainError("need 0 <= count_min <= count_max")
        if not 0 < self.min_frac <= self.max_frac <= 1:
            raise DomainError("need 0 < min_frac <= max_frac <= 1")
        if not 0 <= self.max_overlap <= 1:
            raise DomainError("max_overlap must be in [0, 1]")


@dataclass(frozen=True)
class AugmentSpec:
    rotations: tuple = (90, 180, 270)
    brightness_factors: tuple = (0.6, 1.4)
    sp_density: float = 0.02
    occlusion: OcclusionSpec | None = OcclusionSpec()
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.sp_density <= 1:
            raise DomainError("sp_density must be in [0, 1]")
        if any(not f >= 0 for f in self.brightness_factors):
            raise DomainError("brightness factors must be non-negative")

    def transforms(self) -> list[tuple[str, float | None]]:
        """The transform instances, in the order their outputs are emitted."""
        out: list[tuple[str, float | None]] = [("rot", float(a)) for a in self.rotations]
        out += [("bright", float(f)) for f in self.brightness_factors]
        if self.sp_density > 0:
            out.append(("sp", float(self.sp_density)))
        if self.occlusion is not None and self.occlusion.count_max > 0:
            out.append(("occ", None))
        return out


def transform_tag(kind: str, arg) -> str:
    return kind if arg is None else f"{kind}{arg:g}"


# ---------------------------------------------------------------------------
# rotation


def _rotate_point_90(x, y, w, h, quarter):
    if quarter == 1:
        return h - y, x
    if quarter == 2:
        return w - x, h - y
    return y, w - x


def _rotate_box_90(box: BBox, w, h, quarter) -> BBox:
    xa, ya = _rotate_point_90(box.x1, box.y1, w, h, quarter)
    xb, yb = _rotate_point_90(box.x2, box.y2, w, h, quarter)
    return BBox(min(xa, xb), min(ya, yb), max(xa, xb), max(ya, yb))


@njit
def _remap_nearest_loop(src, nw, nh, c, s):
    h, w = src.shape[0], src.shape[1]
    out = np.zeros((nh, nw, 3), dtype=np.uint8)
    for v in range(nh):
        dy = v + 0.5 - nh / 2.0
        for u in range(nw):
            dx = u + 0.5 - nw / 2.0
            x = c * dx + s * dy + w / 2.0
            y = -s * dx + c * dy + h / 2.0
            xi = int(np.floor(x))
            yi = int(np.floor(y))
            if 0 <= xi < w and 0 <= yi < h:
                out[v, u, 0] = src[yi, xi, 0]
                out[v, u, 1] = src[yi, xi, 1]
                out[v, u, 2] = src[yi, xi, 2]
    return out


def _remap_nearest_numpy(src, nw, nh, c, s):
    h, w = src.shape[0], src.shape[1]
    dy = (np.arange(nh) + 0.5 - nh / 2.0)[:, None]
    dx = (np.arange(nw) + 0.5 - nw / 2.0)[None, :]
    xi = np.floor(c * dx + s * dy + w / 2.0).astype(np.int64)
    yi = np.floor(-s * dx + c * dy + h / 2.0).astype(np.int64)
    ok = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
    out = np.zeros((nh, nw, 3), dtype=np.uint8)
    out[ok] = src[yi[ok], xi[ok]]
    return out


def rotated_canvas(w: int, h: int, angle_deg: float) -> tuple[int, int]:
    t = math.radians(angle_deg)
    c, s = abs(math.cos(t)), abs(math.sin(t))
    return (max(1, math.ceil(w * c + h * s - 1e-6)), max(1, math.ceil(w * s + h * c - 1e-6)))


def rotate_sample(sample: Sample, angle_deg: float) -> Sample:
    """Rotate image and labels clockwise by ``angle_deg`` about the image center.

    Multiples of 90 degrees are exact pixel permutations.  Other angles
    expand the canvas to the rotated bounding rectangle, resample with
    nearest neighbour (uncovered pixels are black) and replace each box with
    the axis-aligned hull of its rotated corners, clipped to the canvas.
    Boxes left with less than 1 px^2 are dropped.
    """
    angle = float(angle_deg) % 360.0
    img = sample.image.pixels
    h, w = img.shape[0], img.shape[1]
    if angle == 0:
        return Sample(Raster(img.copy()), list(sample.labels))
    if angle % 90 == 0:
        quarter = int(angle // 90)
        # np.rot90 with k=-1 turns the array clockwise
        pixels = np.ascontiguousarray(np.rot90(img, k=-quarter, axes=(0, 1)))
        labels = [(cls, _rotate_box_90(b, w, h, quarter)) for cls, b in sample.labels]
        return Sample(Raster(pixels), labels)

    nw, nh = rotated_canvas(w, h, angle)
    t = math.radians(angle)
    c, s = math.cos(t), math.sin(t)
    remap = _remap_nearest_loop if numba_enabled() else _remap_nearest_numpy
    pixels = remap(img, nw, nh, c, s)

    labels = []
    for cls, b in sample.labels:
        xs, ys = [], []
        for x, y in ((b.x1, b.y1), (b.x2, b.y1), (b.x2, b.y2), (b.x1, b.y2)):
            dx, dy = x - w / 2.0, y - h / 2.0
            xs.append(c * dx - s * dy + nw / 2.0)
            ys.append(s * dx + c * dy + nh / 2.0)
        x1, y1 = max(0.0, min(xs)), max(0.0, min(ys))
        x2, y2 = min(float(nw), max(xs)), min(float(nh), max(ys))
        if x2 > x1 and y2 > y1 and (x2 - x1) * (y2 - y1) >= MIN_BOX_AREA:
            labels.append((cls, BBox(x1, y1, x2, y2)))
    return Sample(Raster(pixels), labels)


# ---------------------------------------------------------------------------
# photometric


def adjust_brightness(img: Raster, factor: float) -> Raster:
    """``v -> floor(v * factor + 0.5)`` saturated to [0, 255]."""
    if not factor >= 0:
        raise DomainError(f"brightness factor must be >= 0, got {factor}")
    v = np.floor(img.pixels.astype(np.float64) * factor + 0.5)
    return Raster(np.clip(v, 0, 255).astype(np.uint8))


def salt_pepper(img: Raster, density: float, seed: int) -> Raster:
    """Force pixels to black or white.

    Pixel ``i`` (row-major) is hit when draw ``2i`` of the stream is below
    ``density``; it turns white when the top bit of draw ``2i + 1`` is set.
    """
    if not 0 <= density <= 1:
        raise DomainError(f"density must be in [0, 1], got {density}")
    h, w = img.height, img.width
    n = h * w
    u = uniform_block(seed, 0, 2 * n)
    bits = u64_block(seed, 0, 2 * n)[1::2] >> np.uint64(63)
    hit = u[0::2] < density
    out = img.pixels.reshape(n, 3).copy()
    out[hit] = np.where(bits[hit, None] == 1, 255, 0).astype(np.uint8)
    return Raster(out.reshape(h, w, 3))


# ---------------------------------------------------------------------------
# occlusion


def _overlap_area(a, b: BBox) -> float:
    iw = min(a[2], b.x2) - max(a[0], b.x1)
    ih = min(a[3], b.y2) - max(a[1], b.y1)
    return iw * ih if iw > 0 and ih > 0 else 0.0


def plan_occluders(width: int, height: int, labels, spec: OcclusionSpec, seed: int) -> list:
    """Integer patch rectangles ``(x1, y1, x2, y2)`` accepted for this seed.

    A candidate covering more than ``max_overlap`` of any label's area is
    redrawn, up to ``MAX_OCCLUDER_TRIES`` times, then that patch is skipped.
    """
    rng = SplitMix64(seed)
    count = rng.randint(spec.count_min, spec.count_max)
    accepted = []
    for _ in range(count):
        for _ in range(MAX_OCCLUDER_TRIES):
            frac = rng.uniform(spec.min_frac, spec.max_frac)
            aspect = math.exp(rng.uniform(math.log(0.5), math.log(2.0)))
            area = frac * width * height
            pw = min(width, max(1, int(math.floor(math.sqrt(area * aspect) + 0.5))))
            ph = min(height, max(1, int(math.floor(area / pw + 0.5))))
            x0 = rng.randint(0, width - pw)
            y0 = rng.randint(0, height - ph)
            patch = (x0, y0, x0 + pw, y0 + ph)
            if all(_overlap_area(patch, box) <= spec.max_overlap * box.area for _, box in labels):
                accepted.append(patch)
                break
    return accepted


def occlude_sample(sample: Sample, spec: OcclusionSpec, seed: int) -> Sample:
    pixels = sample.image.pixels.copy()
    for x1, y1, x2, y2 in plan_occluders(sample.image.width, sample.image.height,
                                         sample.labels, spec, seed):
        pixels[y1:y2, x1:x2] = OCCLUDER_VALUE
    return Sample(Raster(pixels), list(sample.labels))


# ---------------------------------------------------------------------------
# pipeline


def apply_transform(sample: Sample, kind: str, arg, spec: AugmentSpec, seed: int) -> Sample:
    if kind == "rot":
        return rotate_sample(sample, arg)
    if kind == "bright":
        return Sample(adjust_brightness(sample.image, arg), list(sample.labels))
    if kind == "sp":
        return Sample(salt_pepper(sample.image, arg, seed), list(sample.labels))
    if kind == "occ":
        return occlude_sample(sample, spec.occlusion, seed)
    raise DomainError(f"unknown transform {kind!r}")


def augment_one(index: int, name: str, sample: Sample, spec: AugmentSpec) -> list[tuple[str, Sample]]:
    out = [(name, sample)]
    for t_idx, (kind, arg) in enumerate(spec.transforms()):
        seed = derive_seed(spec.seed, index, t_idx)
        out.append((f"{name}__{transform_tag(kind, arg)}",
                    apply_transform(sample, kind, arg, spec, seed)))
    return out


def thread_count() -> int:
    raw = os.environ.get("LINEKIT_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def run_pipeline(samples: Sequence[tuple[str, Sample]], spec: AugmentSpec,
                 threads: int | None = None) -> list[tuple[str, Sample]]:
    """Originals plus one output per transform instance, as ``(name, sample)``.

    Results come back in input order whatever the worker count.
    """
    threads = threads or thread_count()
    jobs = [(i, name, s, spec) for i, (name, s) in enumerate(samples)]
    if threads <= 1 or len(jobs) <= 1:
        groups = [augment_one(*job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            groups = list(pool.map(lambda job: augment_one(*job), jobs))
    return [item for group in groups for item in group]


def augment_directory(in_dir, out_dir, spec: AugmentSpec, ids: Sequence[str] | None = None,
                      threads: int | None = None) -> int:
    """Augment a dataset directory into ``out_dir``; returns samples written."""
    classes = read_classes(in_dir)
    stems = list_stems(in_dir)
    if ids is not None:
        wanted = set(ids)
        stems = [s for s in stems if s in wanted]
    samples = []
    for stem in stems:
        raster, labels = read_sample(in_dir, stem, len(classes))
        samples.append((stem, Sample(raster, labels)))
    results = run_pipeline(samples, spec, threads)
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    write_classes(out_dir, classes)
    for name, s in results:
        write_sample(out_dir, name, s.image, s.labels)
    return len(results)
