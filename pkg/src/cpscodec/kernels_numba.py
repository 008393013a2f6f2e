"""Numba implementations of the hot kernels.

Accumulation contract (shared with kernels_numpy, keep in sync): every
output element is a float32 sum of float32 products taken in (channel,
kernel-row, kernel-col) ascending order, bias added last. Parallelism is
across output elements only, so results are bit-identical for any thread
count.
"""

import numpy as np
from numba import njit, prange

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


@njit(cache=True, parallel=True)
def conv2d(x, w, b, s):
    # one kernel-tap pass per (ic, ki, kj): every output element gains one
    # product per pass, giving the documented per-element order while the
    # inner spatial loop stays vectorizable
    c_in, h_in, w_in = x.shape
    c_out = w.shape[0]
    k = w.shape[2]
    h_out = (h_in - k) // s + 1
    w_out = (w_in - k) // s + 1
    out = np.empty((c_out, h_out, w_out), dtype=np.float32)
    for oc in prange(c_out):
        acc = np.zeros((h_out, w_out), dtype=np.float32)
        for ic in range(c_in):
            for ki in range(k):
                for kj in range(k):
                    wv = w[oc, ic, ki, kj]
                    for i in range(h_out):
                        row = x[ic, i * s + ki]
                        arow = acc[i]
                        for j in range(w_out):
                            arow[j] = arow[j] + row[j * s + kj] * wv
        for i in range(h_out):
            for j in range(w_out):
                out[oc, i, j] = acc[i, j] + b[oc]
    return out


@njit(cache=True, parallel=True)
def tconv2d(x, w, b, s):
    # scatter-add of each input pixel's k x k stamp at offset (i*s, j*s);
    # per output element the contributions still arrive in (ic, ki, kj)
    # ascending order
    c_in, h_in, w_in = x.shape
    c_out = w.shape[1]
    k = w.shape[2]
    h_out = s * (h_in - 1) + k
    w_out = s * (w_in - 1) + k
    out = np.empty((c_out, h_out, w_out), dtype=np.float32)
    for oc in prange(c_out):
        acc = np.zeros((h_out, w_out), dtype=np.float32)
        for ic in range(c_in):
            for ki in range(k):
                for kj in range(k):
                    wv = w[ic, oc, ki, kj]
                    for i in range(h_in):
                        row = x[ic, i]
                        arow = acc[i * s + ki]
                        for j in range(w_in):
                            oj = j * s + kj
                            arow[oj] = arow[oj] + row[j] * wv
        for i in range(h_out):
            for j in range(w_out):
                out[oc, i, j] = acc[i, j] + b[oc]
    return out


@njit(cache=True, parallel=True)
def leaky(x):
    slope = np.float32(0.01)
    flat = x.ravel()
    out = np.empty(flat.size, dtype=np.float32)
    for i in prange(flat.size):
        v = flat[i]
        out[i] = v if v >= np.float32(0.0) else v * slope
    return out.reshape(x.shape)


@njit(cache=True)
def splitmix_fill(seed, offset, lo, hi, out):
    # splitmix64 in closed form: draw i mixes seed + (offset+i+1)*gamma,
    # so any tensor's slice of the stream is seekable in O(1).
    n = out.size
    for i in range(n):
        z = seed + (offset + np.uint64(i) + np.uint64(1)) * _GAMMA
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        z = z ^ (z >> np.uint64(31))
        u = np.float64(z >> np.uint64(11)) * _INV53
        out[i] = np.float32(lo + u * (hi - lo))
