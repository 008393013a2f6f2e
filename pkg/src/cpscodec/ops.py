"""Padding-free tensor operators.

All operators are pure: they read immutable tensors and return a new
frozen tensor. conv2d/tconv2d never pad; output sizes follow

    conv : w_out = floor((w_in - k) / s) + 1
    tconv: w_out = s * (w_in - 1) + k

Every output element is accumulated in a single fixed order (channel,
then kernel row, then kernel column; bias last), so results are
bit-identical across runs, thread counts and backends.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import accel
from .errors import ContractViolation, CoverageError, SizingError
from .tensor import Tensor

if accel.has_numba:
    from . import kernels_numba as _K
else:
    from . import kernels_numpy as _K


def _as_weight(w) -> np.ndarray:
    w = np.asarray(w, dtype=np.float32)
    if w.ndim != 4 or w.shape[2] != w.shape[3]:
        raise ContractViolation(f"weight must be (a, b, k, k), got {w.shape}")
    return np.ascontiguousarray(w)


def _as_bias(b, c_out) -> np.ndarray:
    b = np.asarray(b, dtype=np.float32).reshape(-1)
    if b.shape != (c_out,):
        raise ContractViolation(f"bias must have shape ({c_out},), got {b.shape}")
    return np.ascontiguousarray(b)


def conv2d(x: Tensor, weight, bias, stride: int) -> Tensor:
    """Valid (padding-free) 2-D convolution, stride `stride`."""
    w = _as_weight(weight)
    c_out, c_in, k, _ = w.shape
    b = _as_bias(bias, c_out)
    if stride < 1:
        raise ContractViolation(f"stride must be >= 1, got {stride}")
    if x.c != c_in:
        raise ContractViolation(
            f"conv2d expects {c_in} input channels, got {x.c}")
    if x.h < k or x.w < k:
        raise SizingError(
            f"conv2d input {x.h}x{x.w} smaller than kernel {k}x{k}")
    planes = [_K.conv2d(x.data[i], w, b, stride) for i in range(x.n)]
    return Tensor(np.stack(planes), x.domain)


def tconv2d(x: Tensor, weight, bias, stride: int) -> Tensor:
    """Transposed convolution: exact adjoint of conv2d (scatter-add of
    each input pixel's k x k stamp at offset (i*s, j*s)), no padding."""
    w = _as_weight(weight)
    c_in, c_out, k, _ = w.shape
    b = _as_bias(bias, c_out)
    if stride < 1:
        raise ContractViolation(f"stride must be >= 1, got {stride}")
    if x.c != c_in:
        raise ContractViolation(
            f"tconv2d expects {c_in} input channels, got {x.c}")
    planes = [_K.tconv2d(x.data[i], w, b, stride) for i in range(x.n)]
    return Tensor(np.stack(planes), x.domain)


def activation(x: Tensor) -> Tensor:
    """Leaky rectifier, negative slope 0.01."""
    return Tensor(_K.leaky(x.data), x.domain)


def add(x: Tensor, y: Tensor) -> Tensor:
    if x.dims != y.dims:
        raise ContractViolation(f"add shape mismatch: {x.dims} vs {y.dims}")
    return Tensor(x.data + y.data, x.domain)


def concat_channels(parts: Sequence[Tensor]) -> Tensor:
    if not parts:
        raise ContractViolation("concat of zero tensors")
    return Tensor(np.concatenate([p.data for p in parts], axis=1),
                  parts[0].domain)


def crop2d(x: Tensor, top: int, left: int, height: int, width: int) -> Tensor:
    if height < 1 or width < 1:
        raise ContractViolation("crop window must be non-empty")
    if top < 0 or left < 0 or top + height > x.h or left + width > x.w:
        raise ContractViolation(
            f"crop window ({top},{left},{height},{width}) outside {x.h}x{x.w}")
    return Tensor(x.data[:, :, top:top + height, left:left + width].copy(),
                  x.domain)


def stitch2d(tiles: Sequence[tuple[Tensor, int, int]], height: int,
             width: int, domain: str | None = None) -> Tensor:
    """Assemble tiles placed at (top, left) offsets into one tensor.

    The tiles must cover the (height, width) target exactly once; any gap
    or double-cover raises CoverageError naming the first bad pixel.
    """
    if not tiles:
        raise ContractViolation("stitch of zero tiles")
    first = tiles[0][0]
    n, c = first.n, first.c
    cover = np.zeros((height, width), dtype=np.uint8)
    out = np.empty((n, c, height, width), dtype=np.float32)
    for t, top, left in tiles:
        if t.n != n or t.c != c:
            raise ContractViolation("stitch tiles disagree on (n, c)")
        if top < 0 or left < 0 or top + t.h > height or left + t.w > width:
            raise CoverageError(
                f"tile at ({top},{left}) size {t.h}x{t.w} exceeds target")
        cover[top:top + t.h, left:left + t.w] += 1
        out[:, :, top:top + t.h, left:left + t.w] = t.data
    bad = np.argwhere(cover != 1)
    if bad.size:
        i, j = bad[0]
        word = "gap" if cover[i, j] == 0 else "double-cover"
        raise CoverageError(f"{word} at pixel ({i}, {j})")
    return Tensor(out, domain if domain is not None else first.domain)
