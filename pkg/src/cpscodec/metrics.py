"""Distortion metrics: MSE, PSNR and PSNR-B with explicit boundary sets.

PSNR-B variant used here (documented precisely since conventions differ):
the blocking-effect factor is computed on the second (reconstructed)
image as eta * max(0, D_B - D_NB), where D_B is the mean squared
difference across boundary-adjacent pixel pairs, D_NB the same across
all other neighbor pairs, and eta = N_B / (N_B + N_NB) is the boundary
share of neighbor pairs. PSNR-B = 10*log10(255^2 / (MSE + BEF)), so
PSNR-B <= PSNR always.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation

PSNR_CAP = 100.0


@dataclass(frozen=True)
class MetricReport:
    mse: float
    psnr: float
    psnr_b: float
    bef: float
    bpp: float | None = None

    def as_text(self) -> str:
        lines = [f"mse: {self.mse:.6f}", f"psnr: {self.psnr:.4f}",
                 f"psnr_b: {self.psnr_b:.4f}", f"bef: {self.bef:.6f}"]
        if self.bpp is not None:
            lines.append(f"bpp: {self.bpp:.6f}")
        return "\n".join(lines) + "\n"


def _check_pair(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise ContractViolation(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.dtype != np.uint8 or b.dtype != np.uint8:
        raise ContractViolation("metrics operate on 8-bit images")


def mse(a: np.ndarray, b: np.ndarray) -> float:
    _check_pair(a, b)
    d = a.astype(np.float64) - b.astype(np.float64)
    return float(np.mean(d * d))


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """10*log10(255^2 / MSE), capped at 100 dB for identical images."""
    m = mse(a, b)
    if m == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(255.0 ** 2 / m))


def _pair_means(img: np.ndarray, boundaries: set[int], axis: int):
    """(boundary, non-boundary) mean squared neighbor differences along
    one axis plus the pair counts. boundaries holds indices j meaning the
    pair (j-1, j) crosses a block edge."""
    x = img.astype(np.float64)
    d = np.diff(x, axis=axis)
    d2 = d * d
    n = img.shape[axis]
    idx = np.arange(1, n)
    mask = np.isin(idx, list(boundaries))
    take = [slice(None)] * img.ndim
    take[axis] = mask
    db = d2[tuple(take)]
    take[axis] = ~mask
    dn = d2[tuple(take)]
    return (float(db.sum()), db.size), (float(dn.sum()), dn.size)


def blocking_effect_factor(img: np.ndarray, row_bounds: set[int],
                           col_bounds: set[int]) -> float:
    """BEF of one image given boundary row/col indices (a row index i in
    row_bounds marks an edge between rows i-1 and i)."""
    (sb_r, nb_r), (sn_r, nn_r) = _pair_means(img, row_bounds, 0)
    (sb_c, nb_c), (sn_c, nn_c) = _pair_means(img, col_bounds, 1)
    n_b = nb_r + nb_c
    n_nb = nn_r + nn_c
    if n_b == 0:
        return 0.0
    d_b = (sb_r + sb_c) / n_b
    d_nb = (sn_r + sn_c) / n_nb if n_nb else 0.0
    eta = n_b / (n_b + n_nb)
    return eta * max(0.0, d_b - d_nb)


def psnr_b(a: np.ndarray, b: np.ndarray, row_bounds: set[int] | None = None,
           col_bounds: set[int] | None = None) -> float:
    """PSNR penalized by the blocking-effect factor of b at the given
    boundaries. Empty boundary sets reduce to plain PSNR."""
    _check_pair(a, b)
    row_bounds = row_bounds or set()
    col_bounds = col_bounds or set()
    m = mse(a, b)
    bef = blocking_effect_factor(b, row_bounds, col_bounds)
    denom = m + bef
    if denom == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(255.0 ** 2 / denom))


def grid_boundaries(h: int, w: int, block: int = 8):
    """The conventional fixed-grid boundary set."""
    return (set(range(block, h, block)), set(range(block, w, block)))


def plan_boundaries(plan):
    """Tile-edge boundary sets of an encode plan, in image pixels."""
    rows = {t.dst.top * plan.scale for t in plan.tiles if t.dst.top > 0}
    cols = {t.dst.left * plan.scale for t in plan.tiles if t.dst.left > 0}
    return rows, cols


def report(a: np.ndarray, b: np.ndarray, row_bounds=None, col_bounds=None,
           bpp: float | None = None) -> MetricReport:
    m = mse(a, b)
    bef = blocking_effect_factor(b, row_bounds or set(), col_bounds or set())
    return MetricReport(m, psnr(a, b), psnr_b(a, b, row_bounds, col_bounds),
                        bef, bpp)
