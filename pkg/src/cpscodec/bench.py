"""Memory/time benchmark of the tiled vs full encode paths.

Emits the CSV consumed by plotting scripts:

    resolution,peak_bytes_tiled,peak_bytes_full,wall_time

peak_* are AllocStats peaks (live tensor payload bytes) for one encode
of an NxN synthetic image; wall_time is the tiled encode's wall seconds
(a measurement, the one non-deterministic column). Rows whose estimated
full-path footprint exceeds the budget are skipped with a note.
"""

from __future__ import annotations

import gc
import io
import time
from dataclasses import dataclass

import numpy as np

from . import accel, codec
from .blocks import NetworkSpec, WeightStore
from .tensor import alloc_stats, reset_peak

if accel.has_numba:
    from .kernels_numba import splitmix_fill
else:
    from .kernels_numpy import splitmix_fill

CSV_HEADER = "resolution,peak_bytes_tiled,peak_bytes_full,wall_time"


@dataclass(frozen=True)
class BenchRow:
    resolution: int
    peak_bytes_tiled: int
    peak_bytes_full: int
    wall_time: float
    # extra measurements, not part of the CSV schema
    peak_image_tiled: int
    peak_latent_tiled: int
    peak_image_full: int


def synthetic_image(h: int, w: int, seed: int) -> np.ndarray:
    """Deterministic uniform-noise RGB image (3, h, w) float32 in [0, 1]."""
    img = np.empty(3 * h * w, dtype=np.float32)
    splitmix_fill(np.uint64(seed), np.uint64(0), 0.0, 1.0, img)
    return img.reshape(3, h, w)


def estimate_full_bytes(net: NetworkSpec, h: int, w: int) -> int:
    # input planes + ~3 coexisting stem-scale activations
    return 4 * h * w * 3 + 3 * net.channels * h * w


def _measure(fn):
    gc.collect()
    reset_peak()
    base = alloc_stats().live_bytes
    base_img = alloc_stats("image").live_bytes
    base_lat = alloc_stats("latent").live_bytes
    t0 = time.perf_counter()
    fn()
    dt = time.perf_counter() - t0
    peak = alloc_stats().peak_bytes - base
    peak_img = alloc_stats("image").peak_bytes - base_img
    peak_lat = alloc_stats("latent").peak_bytes - base_lat
    return peak, peak_img, peak_lat, dt


def run_bench(resolutions, net: NetworkSpec, store: WeightStore, w_p: int,
              seed: int = 0, budget_bytes: int = 4 << 30):
    """Measure both paths at each NxN resolution.

    Returns (rows, notes); notes describe skipped resolutions."""
    rows, notes = [], []
    for n in resolutions:
        est = estimate_full_bytes(net, n, n)
        if est > budget_bytes:
            notes.append(f"skipped {n}: estimated full-path "
                         f"{est} bytes exceeds budget {budget_bytes}")
            continue
        img = synthetic_image(n, n, seed)
        peak_t, img_t, lat_t, dt = _measure(
            lambda: codec.encode_tiled(img, net, store, w_p, allow_pad=True))
        peak_f, img_f, _lat_f, _ = _measure(
            lambda: codec.encode_full(img, net, store, w_p, allow_pad=True))
        rows.append(BenchRow(n, peak_t, peak_f, dt, img_t, lat_t, img_f))
    return rows, notes


def to_csv(rows) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for r in rows:
        buf.write(f"{r.resolution},{r.peak_bytes_tiled},"
                  f"{r.peak_bytes_full},{r.wall_time:.6f}\n")
    return buf.getvalue()
