"""Dataset I/O: YOLO label text, binary P6 PPM rasters and the id split.

On-disk dataset layout::

    DIR/images/<stem>.ppm
    DIR/labels/<stem>.txt
    DIR/classes.txt          one class name per line, in id order
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .boxgeom import BBox
from .errors import DomainError, FormatError, LabelParseError
from .rng import SplitMix64

DEFAULT_CLASSES = ("trash", "twig", "nest", "kite", "bird", "balloon")
LABEL_TOL = 1e-6
_WHITESPACE = b" \t\n\r\x0b\x0c"


@dataclass(eq=False)
class Raster:
    """8-bit RGB image; ``pixels`` is an (height, width, 3) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise DomainError(f"raster must be (h, w, 3) with h, w >= 1, got {px.shape}")
        self.pixels = px

    @classmethod
    def blank(cls, width: int, height: int, value: int = 0) -> "Raster":
        return cls(np.full((height, width, 3), value, dtype=np.uint8))

    @classmethod
    def from_bytes(cls, width: int, height: int, data: bytes) -> "Raster":
        if len(data) != width * height * 3:
            raise DomainError("pixel payload length does not match width*height*3")
        return cls(np.frombuffer(data, dtype=np.uint8).reshape(height, width, 3))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def to_bytes(self) -> bytes:
        return self.pixels.tobytes()

    def __eq__(self, other):
        return isinstance(other, Raster) and np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True)
class LabelRecord:
    """One YOLO label: class id and normalised center-form box."""

    class_id: int
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        problem = _record_problem(self.cx, self.cy, self.w, self.h)
        if problem:
            raise DomainError(problem)

    def to_bbox(self, image_w: float, image_h: float) -> BBox:
        return BBox((self.cx - self.w / 2) * image_w, (self.cy - self.h / 2) * image_h,
                    (self.cx + self.w / 2) * image_w, (self.cy + self.h / 2) * image_h)

    @classmethod
    def from_bbox(cls, class_id: int, box: BBox, image_w: float, image_h: float) -> "LabelRecord":
        return cls(class_id, (box.x1 + box.x2) / 2 / image_w, (box.y1 + box.y2) / 2 / image_h,
                   box.width / image_w, box.height / image_h)


def _record_problem(cx, cy, w, h) -> str | None:
    vals = (cx, cy, w, h)
    if not all(math.isfinite(v) for v in vals):
        return "non-finite value"
    if not (0 <= cx <= 1 and 0 <= cy <= 1):
        return f"center ({cx}, {cy}) outside [0, 1]"
    if not (0 < w <= 1 and 0 < h <= 1):
        return f"size ({w}, {h}) outside (0, 1]"
    if (cx - w / 2 < -LABEL_TOL or cx + w / 2 > 1 + LABEL_TOL
            or cy - h / 2 < -LABEL_TOL or cy + h / 2 > 1 + LABEL_TOL):
        return "box extends outside the unit square"
    return None


# ---------------------------------------------------------------------------
# YOLO labels


def parse_yolo_records(text: str, n_classes: int | None = len(DEFAULT_CLASSES),
                       with_score: bool = False) -> list:
    """Parse label lines into :class:`LabelRecord` (plus score when requested).

    ``with_score`` expects a sixth column holding the detection confidence.
    """
    out = []
    ncols = 6 if with_score else 5
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != ncols:
            raise LabelParseError(lineno, f"expected {ncols} fields, got {len(tokens)}")
        try:
            cls_f = float(tokens[0])
            vals = [float(t) for t in tokens[1:]]
        except ValueError:
            raise LabelParseError(lineno, "non-numeric field") from None
        if not cls_f.is_integer():
            raise LabelParseError(lineno, f"class id {tokens[0]!r} is not an integer")
        cls = int(cls_f)
        if cls < 0 or (n_classes is not None and cls >= n_classes):
            raise LabelParseError(lineno, f"unknown class id {cls}")
        problem = _record_problem(*vals[:4])
        if problem:
            raise LabelParseError(lineno, problem)
        rec = LabelRecord(cls, *vals[:4])
        if with_score:
            score = vals[4]
            if not 0 <= score <= 1:
                raise LabelParseError(lineno, f"score {score} outside [0, 1]")
            out.append((rec, score))
        else:
            out.append(rec)
    return out


def parse_yolo_labels(text: str, image_w: float, image_h: float,
                      n_classes: int | None = len(DEFAULT_CLASSES)) -> list[tuple[int, BBox]]:
    """Parse ``cls cx cy w h`` lines into pixel corner boxes."""
    return [(r.class_id, r.to_bbox(image_w, image_h))
            for r in parse_yolo_records(text, n_classes)]


def serialize_yolo_labels(labels: Iterable[tuple[int, BBox]], image_w: float, image_h: float) -> str:
    lines = []
    for cls, box in labels:
        tol_x, tol_y = LABEL_TOL * image_w, LABEL_TOL * image_h
        if box.x1 < -tol_x or box.y1 < -tol_y or box.x2 > image_w + tol_x or box.y2 > image_h + tol_y:
            raise DomainError(f"box {box.as_tuple()} lies outside the {image_w}x{image_h} image")
        r = LabelRecord.from_bbox(cls, box, image_w, image_h)
        lines.append(f"{int(cls)} {r.cx:.6f} {r.cy:.6f} {r.w:.6f} {r.h:.6f}\n")
    return "".join(lines)


# ---------------------------------------------------------------------------
# P6 PPM


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        ch = data[pos:pos + 1]
        if ch == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif ch in _WHITESPACE:
            pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos:pos + 1] not in _WHITESPACE and data[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise FormatError("truncated PPM header")
    return data[start:pos], pos


def load_image_p6(data: bytes) -> Raster:
    if data[:2] != b"P6":
        raise FormatError(f"not a binary PPM (magic {data[:2]!r})")
    pos = 2
    fields = []
    for _ in range(3):
        tok, pos = _read_token(data, pos)
        if not tok.isdigit():
            raise FormatError(f"bad header token {tok!r}")
        fields.append(int(tok))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise FormatError("image dimensions must be positive")
    if maxval != 255:
        raise FormatError(f"only maxval 255 is supported, got {maxval}")
    if pos >= len(data) or data[pos:pos + 1] not in _WHITESPACE:
        raise FormatError("missing whitespace after maxval")
    pos += 1
    size = width * height * 3
    payload = data[pos:pos + size]
    if len(payload) != size:
        raise FormatError(f"truncated payload: {len(payload)} of {size} bytes")
    return Raster.from_bytes(width, height, payload)


def save_image_p6(r: Raster) -> bytes:
    return b"P6\n%d %d\n255\n" % (r.width, r.height) + r.to_bytes()


def read_p6_size(path) -> tuple[int, int]:
    """Width and height from a PPM header without reading the payload."""
    with open(path, "rb") as fh:
        head = fh.read(4096)
    if head[:2] != b"P6":
        raise FormatError(f"{path}: not a binary PPM")
    pos = 2
    w, pos = _read_token(head, pos)
    h, pos = _read_token(head, pos)
    return int(w), int(h)


# ---------------------------------------------------------------------------
# split


def split_dataset(sample_ids: Sequence, ratios: Sequence[float] = (0.6, 0.2, 0.2),
                  seed: int = 0) -> tuple[list, ...]:
    """Seeded shuffle then contiguous cut.

    Every split but the last gets ``floor(n * r + 0.5)`` items (capped by what
    is left); the last absorbs the remainder.
    """
    ratios = [float(r) for r in ratios]
    if not ratios or any(not r > 0 for r in ratios):
        raise DomainError("ratios must be positive")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DomainError(f"ratios must sum to 1, got {sum(ratios)}")
    ids = list(sample_ids)
    SplitMix64(seed).shuffle(ids)
    n = len(ids)
    parts, start = [], 0
    for r in ratios[:-1]:
        size = min(int(math.floor(n * r + 0.5)), n - start)
        parts.append(ids[start:start + size])
        start += size
    parts.append(ids[start:])
    return tuple(parts)


# ---------------------------------------------------------------------------
# dataset directories


def read_classes(root, default=DEFAULT_CLASSES) -> list[str]:
    path = Path(root) / "classes.txt"
    if not path.exists():
        return list(default)
    return [ln.strip() for ln in path.read_text().splitlines() if ln.strip()]


def write_classes(root, names: Sequence[str]) -> None:
    os.makedirs(root, exist_ok=True)
    Path(root, "classes.txt").write_text("".join(f"{n}\n" for n in names))


def list_stems(root) -> list[str]:
    images = Path(root) / "images"
    if not images.is_dir():
        raise FileNotFoundError(f"{images} is not a directory")
    return sorted(p.stem for p in images.glob("*.ppm"))


def read_sample(root, stem: str, n_classes: int) -> tuple[Raster, list[tuple[int, BBox]]]:
    root = Path(root)
    raster = load_image_p6((root / "images" / f"{stem}.ppm").read_bytes())
    label_path = root / "labels" / f"{stem}.txt"
    text = label_path.read_text() if label_path.exists() else ""
    try:
        labels = parse_yolo_labels(text, raster.width, raster.height, n_classes)
    except LabelParseError as e:
        raise LabelParseError(e.lineno, f"{label_path}: {e.reason}") from None
    return raster, labels


def write_sample(root, stem: str, raster: Raster, labels) -> None:
    root = Path(root)
    os.makedirs(root / "images", exist_ok=True)
    os.makedirs(root / "labels", exist_ok=True)
    (root / "images" / f"{stem}.ppm").write_bytes(save_image_p6(raster))
    (root / "labels" / f"{stem}.txt").write_text(
        serialize_yolo_labels(labels, raster.width, raster.height))
