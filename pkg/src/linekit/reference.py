"""Pure-Python nested-loop kernels.

These are deliberately naive and share no code with :mod:`linekit.tensorcore`.
They serve as the oracle for the compiled kernels and as the composition
used by the golden checksums in :mod:`linekit.checks`.  Tensors are nested
Python lists indexed ``[n][c][h][w]``.
"""
import math


def to_nested(x):
    return x.tolist() if hasattr(x, "tolist") else x


def shape4(x):
    return (len(x), len(x[0]), len(x[0][0]), len(x[0][0][0]))


def conv2d(x, weight, bias, stride=1, pad=0):
    x, weight = to_nested(x), to_nested(weight)
    n, c, h, w = shape4(x)
    oc, _, kh, kw = shape4(weight)
    bias = list(bias) if bias is not None else [0.0] * oc
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    out = [[[[0.0] * ow for _ in range(oh)] for _ in range(oc)] for _ in range(n)]
    for b in range(n):
        for o in range(oc):
            for i in range(oh):
                for j in range(ow):
                    s = 0.0
                    for ci in range(c):
                        for ki in range(kh):
                            y = i * stride + ki - pad
                            if not 0 <= y < h:
                                continue
                            for kj in range(kw):
                                xx = j * stride + kj - pad
                                if not 0 <= xx < w:
                                    continue
                                s += weight[o][ci][ki][kj] * x[b][ci][y][xx]
                    out[b][o][i][j] = s + float(bias[o])
    return out


def maxpool2d(x, k, stride=1, pad=0):
    x = to_nested(x)
    n, c, h, w = shape4(x)
    oh = (h + 2 * pad - k) // stride + 1
    ow = (w + 2 * pad - k) // stride + 1
    out = [[[[0.0] * ow for _ in range(oh)] for _ in range(c)] for _ in range(n)]
    for b in range(n):
        for ci in range(c):
            for i in range(oh):
                for j in range(ow):
                    m = -math.inf
                    for ki in range(k):
                        for kj in range(k):
                            y, xx = i * stride + ki - pad, j * stride + kj - pad
                            if 0 <= y < h and 0 <= xx < w and x[b][ci][y][xx] > m:
                                m = x[b][ci][y][xx]
                    out[b][ci][i][j] = m
    return out


def _sigmoid(t):
    if t < -700:
        return 0.0
    return 1.0 / (1.0 + math.exp(-t))


def act(x, kind):
    x = to_nested(x)
    f = {"relu": lambda t: t if t > 0 else 0.0,
         "sigmoid": _sigmoid,
         "silu": lambda t: t * _sigmoid(t)}[kind]
    return [[[[f(v) for v in row] for row in ch] for ch in img] for img in x]


def mul(a, b):
    return [[[[u * v for u, v in zip(ra, rb)] for ra, rb in zip(ca, cb)]
             for ca, cb in zip(ia, ib)] for ia, ib in zip(a, b)]


def cat(xs):
    xs = [to_nested(x) for x in xs]
    return [[ch for x in xs for ch in x[b]] for b in range(len(xs[0]))]


def channel_gate_mlp(x, w1, b1, w2, b2):
    """Per-pixel two-layer MLP over channels with a ReLU in between, then sigmoid."""
    x, w1, w2 = to_nested(x), to_nested(w1), to_nested(w2)
    n, c, h, w = shape4(x)
    hid = len(w1[0])
    gate = [[[[0.0] * w for _ in range(h)] for _ in range(c)] for _ in range(n)]
    for b in range(n):
        for i in range(h):
            for j in range(w):
                v = [x[b][ci][i][j] for ci in range(c)]
                z = []
                for k in range(hid):
                    s = sum(v[ci] * w1[ci][k] for ci in range(c)) + float(b1[k])
                    z.append(s if s > 0 else 0.0)
                for co in range(c):
                    s = sum(z[k] * w2[k][co] for k in range(hid)) + float(b2[co])
                    gate[b][co][i][j] = _sigmoid(s)
    return gate


def gam_forward(x, p):
    """Channel gate then spatial gate, written out longhand."""
    x = to_nested(x)
    f2 = mul(channel_gate_mlp(x, p.mlp_w1, p.mlp_b1, p.mlp_w2, p.mlp_b2), x)
    c1 = p.conv1
    z = act(conv2d(f2, c1.weight, c1.bias, 1, c1.padding), "relu")
    c2 = p.conv2
    gate = act(conv2d(z, c2.weight, c2.bias, 1, c2.padding), "sigmoid")
    return mul(gate, f2)


def gam_forward_reversed(x, p):
    """Spatial gate first; only used to show that order matters."""
    x = to_nested(x)
    c1, c2 = p.conv1, p.conv2
    z = act(conv2d(x, c1.weight, c1.bias, 1, c1.padding), "relu")
    f2 = mul(act(conv2d(z, c2.weight, c2.bias, 1, c2.padding), "sigmoid"), x)
    return mul(channel_gate_mlp(f2, p.mlp_w1, p.mlp_b1, p.mlp_w2, p.mlp_b2), f2)


def sppcspc_forward(x, p):
    def cv(t, conv):
        return act(conv2d(t, conv.weight, conv.bias, conv.stride, conv.padding), p.activation)

    a = cv(cv(cv(x, p.cv1), p.cv3), p.cv4)
    pyramid = cat([a] + [maxpool2d(a, k, 1, (k - 1) // 2) for k in p.pool_kernels])
    a2 = cv(cv(pyramid, p.cv5), p.cv6)
    b = cv(x, p.cv2)
    return cv(cat([a2, b]), p.cv7)


def weighted_checksum(values):
    """``sum(v_i * (1 + i % 7))`` over the row-major flattening, via fsum."""
    flat = []

    def walk(v):
        if isinstance(v, (list, tuple)):
            for u in v:
                walk(u)
        else:
            flat.append(float(v))

    walk(to_nested(values))
    return math.fsum(v * (1 + i % 7) for i, v in enumerate(flat))
