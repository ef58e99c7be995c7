"""Dense NCHW float64 tensors and the forward kernels built on them.

A tensor here is a plain C-contiguous ``np.ndarray`` of shape ``(n, c, h, w)``
and dtype float64; :func:`tensor4` validates and normalises one.

``conv2d`` and ``maxpool2d`` have a numba loop kernel and a numpy kernel.
Both accumulate every output element in the same order (input channel
outermost, then kernel row, then kernel column, bias added last), so they
agree bit for bit with each other and with a naive nested-loop reference.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._accel import njit, numba_enabled
from .errors import DomainError, ShapeError

ACTIVATIONS = ("sigmoid", "relu", "silu")


def tensor4(x) -> np.ndarray:
    t = np.ascontiguousarray(x, dtype=np.float64)
    if t.ndim != 4:
        raise ShapeError(f"expected a 4-d NCHW tensor, got shape {t.shape}")
    if min(t.shape) < 1:
        raise ShapeError(f"all dimensions must be positive, got {t.shape}")
    if not np.all(np.isfinite(t)):
        raise DomainError("tensor contains non-finite values")
    return t


@dataclass
class ConvParams:
    weight: np.ndarray
    bias: np.ndarray | None = None
    stride: int = 1
    padding: int = 0
    _checked: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        self.weight = np.ascontiguousarray(self.weight, dtype=np.float64)
        if self.weight.ndim != 4:
            raise ShapeError(f"conv weight must be (out_c, in_c, kh, kw), got {self.weight.shape}")
        out_c = self.weight.shape[0]
        if self.bias is None:
            self.bias = np.zeros(out_c)
        self.bias = np.ascontiguousarray(self.bias, dtype=np.float64).reshape(-1)
        if self.bias.shape != (out_c,):
            raise ShapeError(f"bias must have {out_c} entries, got {self.bias.shape}")
        if self.stride < 1:
            raise DomainError(f"stride must be positive, got {self.stride}")
        if self.padding < 0:
            raise DomainError(f"padding must be non-negative, got {self.padding}")

    @property
    def out_c(self) -> int:
        return self.weight.shape[0]

    @property
    def in_c(self) -> int:
        return self.weight.shape[1]

    @property
    def kernel(self) -> tuple[int, int]:
        return self.weight.shape[2], self.weight.shape[3]

    def is_same(self) -> bool:
        """True when the conv preserves spatial dims for any input size."""
        kh, kw = self.kernel
        return (self.stride == 1 and kh == kw and kh % 2 == 1
                and self.padding == (kh - 1) // 2)

    @classmethod
    def same(cls, weight, bias=None) -> "ConvParams":
        k = np.shape(weight)[2]
        return cls(weight, bias, stride=1, padding=(k - 1) // 2)


def _out_size(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


# ---------------------------------------------------------------------------
# conv2d


@njit
def _valid_range(k, stride, pad, size, n_out):
    # output indices o with 0 <= o*stride + k - pad < size
    lo = 0
    while lo < n_out and lo * stride + k - pad < 0:
        lo += 1
    hi = n_out
    while hi > lo and (hi - 1) * stride + k - pad >= size:
        hi -= 1
    return lo, hi


@njit
def _conv2d_loop(x, w, b, stride, pad):
    n, c, h, wd = x.shape
    oc, _, kh, kw = w.shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    out = np.zeros((n, oc, oh, ow))
    # taps outermost so every output sums in (ci, ki, kj) order, like the reference
    for bi in range(n):
        for o in range(oc):
            acc = np.zeros((oh, ow))
            for ci in range(c):
                for ki in range(kh):
                    i0, i1 = _valid_range(ki, stride, pad, h, oh)
                    for kj in range(kw):
                        j0, j1 = _valid_range(kj, stride, pad, wd, ow)
                        wv = w[o, ci, ki, kj]
                        off = kj - pad
                        for i in range(i0, i1):
                            yy = i * stride + ki - pad
                            if stride == 1:
                                src = x[bi, ci, yy, j0 + off:j1 + off]
                                dst = acc[i, j0:j1]
                                for t in range(j1 - j0):
                                    dst[t] += wv * src[t]
                            else:
                                for j in range(j0, j1):
                                    acc[i, j] += wv * x[bi, ci, yy, j * stride + off]
            for i in range(oh):
                for j in range(ow):
                    out[bi, o, i, j] = acc[i, j] + b[o]
    return out


def _conv2d_numpy(x, w, b, stride, pad):
    n, c, h, wd = x.shape
    oc, _, kh, kw = w.shape
    oh = _out_size(h, kh, stride, pad)
    ow = _out_size(wd, kw, stride, pad)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    acc = np.zeros((n, oc, oh, ow))
    # zero-padded taps add +0.0, which leaves every partial sum unchanged
    for ci in range(c):
        for ki in range(kh):
            for kj in range(kw):
                patch = xp[:, ci, ki:ki + stride * (oh - 1) + 1:stride,
                           kj:kj + stride * (ow - 1) + 1:stride]
                acc += w[None, :, ci, ki, kj, None, None] * patch[:, None, :, :]
    return acc + b[None, :, None, None]


def conv2d(x, p: ConvParams) -> np.ndarray:
    """Zero-padded cross-correlation of an NCHW tensor."""
    x = tensor4(x)
    if x.shape[1] != p.in_c:
        raise ShapeError(f"input has {x.shape[1]} channels, conv expects {p.in_c}")
    kh, kw = p.kernel
    oh = _out_size(x.shape[2], kh, p.stride, p.padding)
    ow = _out_size(x.shape[3], kw, p.stride, p.padding)
    if oh < 1 or ow < 1:
        raise ShapeError(f"conv output would be empty ({oh}x{ow})")
    if numba_enabled():
        return _conv2d_loop(x, p.weight, p.bias, p.stride, p.padding)
    return _conv2d_numpy(x, p.weight, p.bias, p.stride, p.padding)


# ---------------------------------------------------------------------------
# maxpool2d


@njit
def _maxpool_loop(x, k, stride, pad):
    # separable: row maxima then column maxima; max is exact so order is free
    n, c, h, wd = x.shape
    oh = (h + 2 * pad - k) // stride + 1
    ow = (wd + 2 * pad - k) // stride + 1
    rows = np.empty(h * ow)
    out = np.empty((n, c, oh, ow))
    for bi in range(n):
        for ci in range(c):
            for y in range(h):
                for j in range(ow):
                    a = max(j * stride - pad, 0)
                    e = min(j * stride - pad + k, wd)
                    m = -np.inf
                    for xx in range(a, e):
                        v = x[bi, ci, y, xx]
                        if v > m:
                            m = v
                    rows[y * ow + j] = m
            for i in range(oh):
                a = max(i * stride - pad, 0)
                e = min(i * stride - pad + k, h)
                for j in range(ow):
                    m = -np.inf
                    for yy in range(a, e):
                        v = rows[yy * ow + j]
                        if v > m:
                            m = v
                    out[bi, ci, i, j] = m
    return out


def _maxpool_numpy(x, k, stride, pad):
    n, c, h, wd = x.shape
    oh = _out_size(h, k, stride, pad)
    ow = _out_size(wd, k, stride, pad)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)), constant_values=-np.inf) if pad else x
    out = np.full((n, c, oh, ow), -np.inf)
    for ki in range(k):
        for kj in range(k):
            np.maximum(out, xp[:, :, ki:ki + stride * (oh - 1) + 1:stride,
                               kj:kj + stride * (ow - 1) + 1:stride], out=out)
    return out


def maxpool2d(x, k: int, stride: int = 1, pad: int = 0) -> np.ndarray:
    """Windowed max; padded cells are -inf and never win."""
    x = tensor4(x)
    if k <= 0:
        raise DomainError(f"pool kernel must be positive, got {k}")
    if stride <= 0 or pad < 0:
        raise DomainError("stride must be positive and padding non-negative")
    if pad >= k:
        # a window made only of padding would emit -inf
        raise DomainError(f"padding {pad} must be smaller than kernel {k}")
    oh = _out_size(x.shape[2], k, stride, pad)
    ow = _out_size(x.shape[3], k, stride, pad)
    if oh < 1 or ow < 1:
        raise ShapeError(f"pool output would be empty ({oh}x{ow})")
    if numba_enabled():
        return _maxpool_loop(x, k, stride, pad)
    return _maxpool_numpy(x, k, stride, pad)


# ---------------------------------------------------------------------------
# small dense ops


def dense(x, weight, bias=None) -> np.ndarray:
    """Affine map ``x @ weight + bias`` over the rows of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    weight = np.asarray(weight, dtype=np.float64)
    if x.ndim != 2 or weight.ndim != 2:
        raise ShapeError("dense expects 2-d input and weight")
    if x.shape[1] != weight.shape[0]:
        raise ShapeError(f"cannot multiply {x.shape} by {weight.shape}")
    out = x @ weight
    if bias is not None:
        bias = np.asarray(bias, dtype=np.float64).reshape(-1)
        if bias.shape != (weight.shape[1],):
            raise ShapeError(f"bias must have {weight.shape[1]} entries")
        out = out + bias
    return out


def sigmoid(t):
    t = np.asarray(t, dtype=np.float64)
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-t))


def activation(x, kind: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "silu":
        return x * sigmoid(x)
    raise DomainError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


def permute(x, order) -> np.ndarray:
    x = np.asarray(x)
    order = tuple(int(o) for o in order)
    if sorted(order) != list(range(x.ndim)):
        raise DomainError(f"{order} is not a permutation of {x.ndim} axes")
    return np.ascontiguousarray(np.transpose(x, order))


def inverse_permutation(order) -> tuple[int, ...]:
    inv = [0] * len(order)
    for i, o in enumerate(order):
        inv[o] = i
    return tuple(inv)


def concat_channels(xs) -> np.ndarray:
    xs = [tensor4(x) for x in xs]
    if not xs:
        raise ShapeError("nothing to concatenate")
    n, _, h, w = xs[0].shape
    for t in xs[1:]:
        if (t.shape[0], t.shape[2], t.shape[3]) != (n, h, w):
            raise ShapeError(f"cannot concatenate {t.shape} with {xs[0].shape}")
    return np.concatenate(xs, axis=1)
