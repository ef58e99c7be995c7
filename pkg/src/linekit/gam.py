"""Global Attention Mechanism forward pass.

Two sequential gates, each a sigmoid map multiplied elementwise into the
features::

    F2 = M_C(F1) * F1      channel gate: per-pixel MLP c -> c/r -> c
    F3 = M_S(F2) * F2      spatial gate: kxk conv c -> c/r, ReLU, kxk conv c/r -> c

Normalisation layers are assumed folded into the conv weights.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .rng import uniform_block
from .tensorcore import ConvParams, activation, conv2d, dense, inverse_permutation, permute, tensor4

DEFAULT_REDUCTION = 4
DEFAULT_KERNEL = 7

_NCHW_TO_NHWC = (0, 2, 3, 1)


@dataclass
class GamParams:
    channels: int
    reduction: int
    kernel: int
    mlp_w1: np.ndarray  # (c, c/r)
    mlp_b1: np.ndarray  # (c/r,)
    mlp_w2: np.ndarray  # (c/r, c)
    mlp_b2: np.ndarray  # (c,)
    conv1: ConvParams   # c -> c/r, kxk same-pad
    conv2: ConvParams   # c/r -> c, kxk same-pad

    def __post_init__(self):
        c, r, k = self.channels, self.reduction, self.kernel
        if c < 1 or r < 1 or c % r:
            raise ConfigError(f"reduction {r} must divide channel count {c}")
        if k < 1 or k % 2 == 0:
            raise ConfigError(f"spatial kernel must be odd and positive, got {k}")
        hid = c // r
        expect = {"mlp_w1": (c, hid), "mlp_b1": (hid,), "mlp_w2": (hid, c), "mlp_b2": (c,)}
        for name, shape in expect.items():
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if arr.shape != shape:
                raise ConfigError(f"{name} must have shape {shape}, got {arr.shape}")
            setattr(self, name, arr)
        for name, conv, shape in (("conv1", self.conv1, (hid, c, k, k)),
                                  ("conv2", self.conv2, (c, hid, k, k))):
            if conv.weight.shape != shape:
                raise ConfigError(f"{name} weight must have shape {shape}, got {conv.weight.shape}")
            if not conv.is_same():
                raise ConfigError(f"{name} must be stride-1 same-padded")

    @property
    def hidden(self) -> int:
        return self.channels // self.reduction


def zero_gam_params(channels: int, reduction: int = DEFAULT_REDUCTION,
                    kernel: int = DEFAULT_KERNEL) -> GamParams:
    if channels < 1 or reduction < 1 or channels % reduction:
        raise ConfigError(f"reduction {reduction} must divide channel count {channels}")
    hid = channels // reduction
    return GamParams(
        channels, reduction, kernel,
        np.zeros((channels, hid)), np.zeros(hid), np.zeros((hid, channels)), np.zeros(channels),
        ConvParams.same(np.zeros((hid, channels, kernel, kernel))),
        ConvParams.same(np.zeros((channels, hid, kernel, kernel))),
    )


def init_gam_params(channels: int, seed: int, reduction: int = DEFAULT_REDUCTION,
                    kernel: int = DEFAULT_KERNEL, scale: float = 0.1) -> GamParams:
    """Seeded parameters, uniform in [-scale, scale].

    Arrays are filled from one SplitMix64 stream in this order: mlp_w1,
    mlp_b1, mlp_w2, mlp_b2, conv1 weight, conv1 bias, conv2 weight, conv2 bias.
    """
    p = zero_gam_params(channels, reduction, kernel)
    arrays = [p.mlp_w1, p.mlp_b1, p.mlp_w2, p.mlp_b2,
              p.conv1.weight, p.conv1.bias, p.conv2.weight, p.conv2.bias]
    pos = 0
    for arr in arrays:
        u = uniform_block(seed, pos, arr.size)
        arr[...] = (scale * (2.0 * u - 1.0)).reshape(arr.shape)
        pos += arr.size
    return p


def _check_input(f, p: GamParams) -> np.ndarray:
    f = tensor4(f)
    if f.shape[1] != p.channels:
        raise ShapeError(f"input has {f.shape[1]} channels, params expect {p.channels}")
    return f


def channel_gate(f1, p: GamParams) -> np.ndarray:
    """The channel gate M_C(F1), values in (0, 1)."""
    f1 = _check_input(f1, p)
    n, c, h, w = f1.shape
    rows = permute(f1, _NCHW_TO_NHWC).reshape(-1, c)
    hidden = activation(dense(rows, p.mlp_w1, p.mlp_b1), "relu")
    mixed = dense(hidden, p.mlp_w2, p.mlp_b2).reshape(n, h, w, c)
    return activation(permute(mixed, inverse_permutation(_NCHW_TO_NHWC)), "sigmoid")


def channel_attention(f1, p: GamParams) -> np.ndarray:
    f1 = _check_input(f1, p)
    return channel_gate(f1, p) * f1


def spatial_gate(f2, p: GamParams) -> np.ndarray:
    f2 = _check_input(f2, p)
    z = activation(conv2d(f2, p.conv1), "relu")
    return activation(conv2d(z, p.conv2), "sigmoid")


def spatial_attention(f2, p: GamParams) -> np.ndarray:
    f2 = _check_input(f2, p)
    return spatial_gate(f2, p) * f2


def gam_forward(f1, p: GamParams) -> np.ndarray:
    return spatial_attention(channel_attention(f1, p), p)
