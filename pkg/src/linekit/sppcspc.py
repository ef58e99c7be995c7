"""SPPCSPC block: CSP split with a max-pool pyramid on one branch.

::

    A  = cv4(cv3(cv1(x)))
    P  = concat(A, pool_k1(A), pool_k2(A), ...)      stride 1, same padding
    A' = cv6(cv5(P))
    B  = cv2(x)
    y  = cv7(concat(A', B))

Every conv is stride 1, same-padded and followed by the configured
activation (SiLU by default).  With the default pools {5, 9, 13} the pyramid
has four scale branches counting the identity path.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .rng import uniform_block
from .tensorcore import ACTIVATIONS, ConvParams, activation, concat_channels, conv2d, maxpool2d, tensor4

DEFAULT_POOLS = (5, 9, 13)
CONV_NAMES = ("cv1", "cv2", "cv3", "cv4", "cv5", "cv6", "cv7")


def conv_shapes(in_c: int, out_c: int, hidden_c: int, n_pools: int) -> dict[str, tuple]:
    """Weight shape of every conv, keyed by name."""
    h = hidden_c
    return {
        "cv1": (h, in_c, 1, 1),
        "cv2": (h, in_c, 1, 1),
        "cv3": (h, h, 3, 3),
        "cv4": (h, h, 1, 1),
        "cv5": (h, (n_pools + 1) * h, 1, 1),
        "cv6": (h, h, 3, 3),
        "cv7": (out_c, 2 * h, 1, 1),
    }


@dataclass
class SppcspcParams:
    in_c: int
    out_c: int
    hidden_c: int
    cv1: ConvParams
    cv2: ConvParams
    cv3: ConvParams
    cv4: ConvParams
    cv5: ConvParams
    cv6: ConvParams
    cv7: ConvParams
    pool_kernels: tuple = DEFAULT_POOLS
    activation: str = "silu"

    def __post_init__(self):
        self.pool_kernels = tuple(int(k) for k in self.pool_kernels)
        if any(k < 1 or k % 2 == 0 for k in self.pool_kernels):
            raise ConfigError(f"pool kernels must be odd, got {self.pool_kernels}")
        if list(self.pool_kernels) != sorted(set(self.pool_kernels)):
            raise ConfigError(f"pool kernels must be strictly ascending, got {self.pool_kernels}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        shapes = conv_shapes(self.in_c, self.out_c, self.hidden_c, len(self.pool_kernels))
        for name in CONV_NAMES:
            conv = getattr(self, name)
            if conv.weight.shape != shapes[name]:
                raise ConfigError(f"{name} weight must be {shapes[name]}, got {conv.weight.shape}")
            if not conv.is_same():
                raise ConfigError(f"{name} must be stride-1 same-padded")

    def convs(self) -> list[ConvParams]:
        return [getattr(self, name) for name in CONV_NAMES]

    def to_bytes(self) -> bytes:
        return b"".join(c.weight.tobytes() + c.bias.tobytes() for c in self.convs())


def init_params_deterministic(in_c: int, out_c: int, seed: int, hidden_c: int | None = None,
                              pool_kernels=DEFAULT_POOLS, activation: str = "silu",
                              scale: float = 0.1) -> SppcspcParams:
    """Seeded parameters, uniform in [-scale, scale].

    One SplitMix64 stream fills, for cv1 .. cv7 in numeric order, the weight
    (row-major) and then the bias.
    """
    if in_c < 1 or out_c < 1:
        raise ConfigError("channel counts must be positive")
    hidden_c = out_c if hidden_c is None else hidden_c
    shapes = conv_shapes(in_c, out_c, hidden_c, len(tuple(pool_kernels)))
    convs = {}
    pos = 0
    for name in CONV_NAMES:
        shape = shapes[name]
        size = int(np.prod(shape))
        w = scale * (2.0 * uniform_block(seed, pos, size) - 1.0)
        pos += size
        b = scale * (2.0 * uniform_block(seed, pos, shape[0]) - 1.0)
        pos += shape[0]
        convs[name] = ConvParams.same(w.reshape(shape), b)
    return SppcspcParams(in_c, out_c, hidden_c, pool_kernels=tuple(pool_kernels),
                         activation=activation, **convs)


def sppcspc_forward(x, p: SppcspcParams) -> np.ndarray:
    x = tensor4(x)
    if x.shape[1] != p.in_c:
        raise ShapeError(f"input has {x.shape[1]} channels, block expects {p.in_c}")

    def cv(t, conv):
        return activation(conv2d(t, conv), p.activation)

    a = cv(cv(cv(x, p.cv1), p.cv3), p.cv4)
    pyramid = concat_channels([a] + [maxpool2d(a, k, 1, (k - 1) // 2) for k in p.pool_kernels])
    a = cv(cv(pyramid, p.cv5), p.cv6)
    b = cv(x, p.cv2)
    return cv(concat_channels([a, b]), p.cv7)
