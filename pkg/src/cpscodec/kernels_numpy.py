"""Pure-numpy fallback kernels, bit-identical to kernels_numba.

The (channel, kernel-row, kernel-col) python loops below add exactly one
float32 product per output element per iteration, which reproduces the
numba kernels' per-element accumulation order. Bias is added last.
"""

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0


def conv2d(x, w, b, s):
    c_in, h_in, w_in = x.shape
    c_out, _, k, _ = w.shape
    h_out = (h_in - k) // s + 1
    w_out = (w_in - k) // s + 1
    out = np.zeros((c_out, h_out, w_out), dtype=np.float32)
    for ic in range(c_in):
        for ki in range(k):
            for kj in range(k):
                xs = x[ic, ki:ki + s * (h_out - 1) + 1:s,
                       kj:kj + s * (w_out - 1) + 1:s]
                out += xs[None, :, :] * w[:, ic, ki, kj][:, None, None]
    out += b[:, None, None]
    return out


def tconv2d(x, w, b, s):
    c_in, h_in, w_in = x.shape
    c_out = w.shape[1]
    k = w.shape[2]
    h_out = s * (h_in - 1) + k
    w_out = s * (w_in - 1) + k
    out = np.zeros((c_out, h_out, w_out), dtype=np.float32)
    for ic in range(c_in):
        for ki in range(k):
            for kj in range(k):
                out[:, ki:ki + s * (h_in - 1) + 1:s,
                    kj:kj + s * (w_in - 1) + 1:s] += (
                        x[ic][None, :, :] * w[ic, :, ki, kj][:, None, None])
    out += b[:, None, None]
    return out


def leaky(x):
    return np.where(x >= 0, x, x * np.float32(0.01))


def splitmix_fill(seed, offset, lo, hi, out):
    n = out.size
    idx = np.arange(n, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed) + (np.uint64(offset) + idx + np.uint64(1)) * _GAMMA
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        z = z ^ (z >> np.uint64(31))
    u = (z >> np.uint64(11)).astype(np.float64) * _INV53
    out[:] = (lo + u * (hi - lo)).astype(np.float32)
