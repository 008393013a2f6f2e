"""Binary PPM (P6, maxval 255) image I/O and 8-bit conversions.

Images travel through the codec as planar float32 arrays (3, H, W) in
[0, 1]: u8 -> value / 255.0; back via round(clamp(v, 0, 1) * 255) with
half-to-even rounding.
"""

from __future__ import annotations

import numpy as np

from .errors import FormatError


def from_u8(img: np.ndarray) -> np.ndarray:
    """(H, W, 3) uint8 -> (3, H, W) float32 in [0, 1]."""
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise FormatError(f"expected (H, W, 3) uint8, got "
                          f"{img.shape} {img.dtype}")
    return np.ascontiguousarray(
        img.transpose(2, 0, 1).astype(np.float32) / np.float32(255.0))


def to_u8(planes: np.ndarray) -> np.ndarray:
    """(3, H, W) float32 -> (H, W, 3) uint8."""
    v = np.clip(planes, 0.0, 1.0) * np.float32(255.0)
    return np.rint(v).astype(np.uint8).transpose(1, 2, 0)


def _token(f) -> bytes:
    # skip whitespace and '#' comments between header tokens
    tok = b""
    while True:
        ch = f.read(1)
        if not ch:
            raise FormatError("unexpected end of PPM header")
        if ch == b"#":
            while ch not in (b"\n", b""):
                ch = f.read(1)
            continue
        if ch.isspace():
            if tok:
                return tok
            continue
        tok += ch


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as f:
        if _token(f) != b"P6":
            raise FormatError(f"{path}: not a binary PPM (P6) file")
        w = int(_token(f))
        h = int(_token(f))
        maxval = int(_token(f))
        if w < 1 or h < 1:
            raise FormatError(f"{path}: bad dimensions {w}x{h}")
        if maxval != 255:
            raise FormatError(f"{path}: only maxval 255 supported, "
                              f"got {maxval}")
        data = f.read(w * h * 3)
        if len(data) != w * h * 3:
            raise FormatError(f"{path}: truncated pixel data")
        return np.frombuffer(data, dtype=np.uint8).reshape(h, w, 3).copy()


def write_ppm(path, img: np.ndarray) -> None:
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise FormatError(f"expected (H, W, 3) uint8, got "
                          f"{img.shape} {img.dtype}")
    h, w, _ = img.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode())
        f.write(img.tobytes())
