import math

import numpy as np
import pytest

from linekit.augment import (AugmentSpec, OcclusionSpec, Sample, adjust_brightness, occlude_sample,
                             plan_occluders, rotate_sample, run_pipeline, salt_pepper)
from linekit.boxgeom import BBox
from linekit.datasetio import Raster
from linekit.rng import SplitMix64


def random_raster(w, h, seed):
    rng = np.random.default_rng(seed)
    return Raster(rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8))


def random_labels(w, h, n, seed, quantum=0.25):
    rng = SplitMix64(seed)
    out = []
    for _ in range(n):
        bw, bh = rng.uniform(2, w / 2), rng.uniform(2, h / 2)
        x, y = rng.uniform(0, w - bw), rng.uniform(0, h - bh)
        q = lambda v: math.floor(v / quantum) * quantum  # noqa: E731
        out.append((rng.randint(0, 5), BBox(q(x), q(y), q(x) + q(bw) + quantum, q(y) + q(bh) + quantum)))
    return out


def test_rotate_zero_is_identity():
    s = Sample(random_raster(7, 5, 0), random_labels(7, 5, 3, 1))
    assert rotate_sample(s, 0) == s
    assert rotate_sample(s, 360) == s


def test_rotate_90_corner_mapping():
    s = Sample(Raster.blank(100, 50), [(0, BBox(10, 5, 30, 25))])
    r = rotate_sample(s, 90)
    assert (r.image.width, r.image.height) == (50, 100)
    assert r.labels == [(0, BBox(25, 10, 45, 30))]


def test_rotate_90_pixel_mapping():
    img = random_raster(6, 4, 3)
    r = rotate_sample(Sample(img), 90).image
    w, h = img.width, img.height
    for y in range(h):
        for x in range(w):
            assert np.array_equal(r.pixels[x, h - 1 - y], img.pixels[y, x])


def test_four_quarter_turns_round_trip():
    for seed in range(20):
        w, h = 5 + seed, 3 + 2 * seed
        s = Sample(random_raster(w, h, seed), random_labels(w, h, 4, seed))
        t = s
        for _ in range(4):
            t = rotate_sample(t, 90)
        assert t.image.to_bytes() == s.image.to_bytes()
        assert t.labels == s.labels
        assert rotate_sample(rotate_sample(s, 180), 180) == s
        assert rotate_sample(rotate_sample(s, 90), 270) == s


def test_arbitrary_rotation_labels_valid_and_inside(backend):
    for seed in range(10):
        s = Sample(random_raster(40, 30, seed), random_labels(40, 30, 5, seed))
        for angle in (15, 33.3, 135, -20):
            r = rotate_sample(s, angle)
            w, h = r.image.width, r.image.height
            for _, b in r.labels:
                assert 0 <= b.x1 < b.x2 <= w and 0 <= b.y1 < b.y2 <= h
                assert b.area >= 1


def test_arbitrary_rotation_backends_match(monkeypatch):
    s = Sample(random_raster(23, 17, 5), random_labels(23, 17, 3, 5))
    monkeypatch.delenv("LINEKIT_PURE_NUMPY", raising=False)
    a = rotate_sample(s, 27.5)
    monkeypatch.setenv("LINEKIT_PURE_NUMPY", "1")
    b = rotate_sample(s, 27.5)
    assert a == b


def test_arbitrary_rotation_moves_center_pixel():
    img = Raster.blank(21, 21)
    img.pixels[9:12, 9:12] = 255
    r = rotate_sample(Sample(img), 45).image
    assert (r.width, r.height) == (30, 30)
    cy, cx = r.height // 2, r.width // 2
    assert (r.pixels[cy, cx] == 255).all()


def test_brightness():
    img = random_raster(8, 8, 1)
    assert adjust_brightness(img, 1.0) == img
    assert not adjust_brightness(img, 0.0).pixels.any()
    px = Raster(np.array([[[100, 200, 0]]], dtype=np.uint8))
    assert adjust_brightness(px, 1.5).pixels.tolist() == [[[150, 255, 0]]]


def test_salt_pepper_extremes():
    img = random_raster(16, 16, 2)
    assert salt_pepper(img, 0.0, 1) == img
    full = salt_pepper(img, 1.0, 1).pixels
    assert np.isin(full, (0, 255)).all()
    assert (full.min(axis=2) == full.max(axis=2)).all()


def test_salt_pepper_statistics_and_determinism():
    img = Raster.blank(256, 256, 100)
    a = salt_pepper(img, 0.05, seed=9)
    b = salt_pepper(img, 0.05, seed=9)
    assert a.to_bytes() == b.to_bytes()
    n = 256 * 256
    flipped = np.count_nonzero(a.pixels[:, :, 0] != 100) / n
    sigma = math.sqrt(0.05 * 0.95 / n)
    assert abs(flipped - 0.05) <= 6 * sigma
    assert salt_pepper(img, 0.05, seed=10).to_bytes() != a.to_bytes()


def test_occlusion_count_zero_and_placement():
    s = Sample(random_raster(32, 32, 4), [(0, BBox(0, 0, 8, 8))])
    assert occlude_sample(s, OcclusionSpec(0, 0), seed=1) == s
    spec = OcclusionSpec(1, 1, 0.02, 0.05, max_overlap=0.0)
    out = occlude_sample(s, spec, seed=5)
    patches = plan_occluders(32, 32, s.labels, spec, 5)
    assert patches and out.labels == s.labels
    for x1, y1, x2, y2 in patches:
        assert (out.image.pixels[y1:y2, x1:x2] == 128).all()
        # max_overlap 0 keeps every patch off the box entirely
        assert x1 >= 8 or y1 >= 8
    untouched = np.ones((32, 32), dtype=bool)
    for x1, y1, x2, y2 in patches:
        untouched[y1:y2, x1:x2] = False
    assert np.array_equal(out.image.pixels[untouched], s.image.pixels[untouched])


def test_occluders_respect_max_overlap():
    spec = OcclusionSpec(1, 3, 0.01, 0.3, max_overlap=0.5)
    labels = random_labels(64, 48, 4, 0)
    for seed in range(1000):
        for x1, y1, x2, y2 in plan_occluders(64, 48, labels, spec, seed):
            assert 0 <= x1 < x2 <= 64 and 0 <= y1 < y2 <= 48
            for _, b in labels:
                iw = min(x2, b.x2) - max(x1, b.x1)
                ih = min(y2, b.y2) - max(y1, b.y1)
                cover = iw * ih if iw > 0 and ih > 0 else 0.0
                assert cover <= 0.5 * b.area


def test_pipeline_counts_and_names():
    samples = [(f"s{i}", Sample(random_raster(9, 7, i), random_labels(9, 7, 2, i))) for i in range(10)]
    none = AugmentSpec(rotations=(), brightness_factors=(), sp_density=0, occlusion=None)
    assert run_pipeline(samples, none) == samples
    spec = AugmentSpec(rotations=(90,), brightness_factors=(1.4,), sp_density=0.1, occlusion=None, seed=3)
    out = run_pipeline(samples, spec, threads=1)
    assert len(out) == 40
    assert [n for n, _ in out[:4]] == ["s0", "s0__rot90", "s0__bright1.4", "s0__sp0.1"]


def test_pipeline_deterministic_across_threads():
    samples = [(f"s{i}", Sample(random_raster(12, 10, i), random_labels(12, 10, 2, i))) for i in range(6)]
    spec = AugmentSpec(seed=11)
    a = run_pipeline(samples, spec, threads=1)
    b = run_pipeline(samples, spec, threads=4)
    assert [n for n, _ in a] == [n for n, _ in b]
    assert all(x == y for (_, x), (_, y) in zip(a, b))


def test_transforms_keep_labels_valid():
    s = Sample(random_raster(30, 20, 8), random_labels(30, 20, 5, 8))
    for name, t in run_pipeline([("x", s)], AugmentSpec(rotations=(90, 180, 270, 10)), threads=1):
        w, h = t.image.width, t.image.height
        for _, b in t.labels:
            assert b.x2 > b.x1 and b.y2 > b.y1
            assert b.x1 >= 0 and b.y1 >= 0 and b.x2 <= w and b.y2 <= h
        if not name.startswith("x__rot"):
            assert t.labels == s.labels


def test_two_variant_config_triples_the_dataset():
    # 3774 originals grew to 11323 images: about two variants per original
    samples = [(f"s{i}", Sample(random_raster(8, 8, i))) for i in range(12)]
    spec = AugmentSpec(rotations=(90,), brightness_factors=(1.4,), sp_density=0, occlusion=None)
    factor = len(run_pipeline(samples, spec, threads=1)) / len(samples)
    assert factor == 3
    assert abs(factor - 11323 / 3774) < 0.01
