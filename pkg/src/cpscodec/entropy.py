"""Quantization, Gaussian conditional model and rate accounting.

Latent values are quantized to integer symbols in [-128, 127] by
mean-conditioned rounding. Symbol probabilities come from zero-mean
Gaussians over 64 log-spaced scale bins (sigma in [0.11, 64.0]); each
bin's CDF is quantized to 16-bit total mass with a floor of one count
per symbol so the range coder can always represent every symbol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ContractViolation, DecodeError
from .rangecoder import TOTAL, RangeDecoder, RangeEncoder
from .tensor import Tensor

SCALE_MIN = 0.11
SCALE_MAX = 64.0
SCALE_BINS = 64
SYMBOL_MIN = -128
SYMBOL_MAX = 127
NUM_SYMBOLS = SYMBOL_MAX - SYMBOL_MIN + 1


@dataclass(frozen=True)
class SymbolPlane:
    """Quantized integers per (c, h, w) position plus saturation flags."""
    values: np.ndarray     # int32 (c, h, w)
    saturated: np.ndarray  # bool (c, h, w)

    @property
    def count(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class CdfTable:
    """Per-bin integer CDFs: cum[b, j] for symbol edges j = 0..256."""
    sigmas: np.ndarray  # float64 (SCALE_BINS,)
    cum: np.ndarray     # uint32 (SCALE_BINS, NUM_SYMBOLS + 1)
    probs: np.ndarray   # float64 quantized probabilities, for rate sums


def quantize(y: Tensor, mu: Tensor | None = None) -> SymbolPlane:
    """symbol = clamp(round(y - mu), -128, 127); round is half-to-even.

    Saturated positions are flagged, not fatal."""
    if y.n != 1:
        raise ContractViolation(f"quantize expects a single plane, n={y.n}")
    data = y.data[0]
    if mu is not None:
        if mu.dims != y.dims:
            raise ContractViolation(
                f"mu shape {mu.dims} does not match y {y.dims}")
        data = data - mu.data[0]
    r = np.rint(data)
    sat = (r < SYMBOL_MIN) | (r > SYMBOL_MAX)
    vals = np.clip(r, SYMBOL_MIN, SYMBOL_MAX).astype(np.int32)
    return SymbolPlane(vals, sat)


def dequantize(plane: SymbolPlane, mu: Tensor | None = None,
               domain: str = "latent") -> Tensor:
    vals = plane.values.astype(np.float32)[None]
    if mu is not None:
        vals = vals + mu.data
    return Tensor(vals, domain)


def _phi(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def _quantize_pmf(p: np.ndarray) -> np.ndarray:
    """16-bit integer counts: floor then min-1, fixing the total mass by
    adjusting the largest counts (ties broken by lower symbol index)."""
    counts = np.floor(p * TOTAL).astype(np.int64)
    counts = np.maximum(counts, 1)
    slack = TOTAL - int(counts.sum())
    if slack > 0:
        counts[int(np.argmax(counts))] += slack
    elif slack < 0:
        order = np.lexsort((np.arange(counts.size), -counts))
        need = -slack
        for idx in order:
            take = min(need, int(counts[idx]) - 1)
            counts[idx] -= take
            need -= take
            if need == 0:
                break
        if need:
            raise ContractViolation("cannot normalize CDF counts")
    return counts.astype(np.uint32)


def gaussian_pmf(sigma: float) -> np.ndarray:
    """Exact symbol probabilities for a zero-mean Gaussian of scale sigma:
    Phi((s + 0.5) / sigma) - Phi((s - 0.5) / sigma), with the tail mass
    folded into the extreme symbols. Sums to 1."""
    edges = np.arange(SYMBOL_MIN, SYMBOL_MAX + 1) - 0.5
    cdf = np.array([_phi(e / sigma) for e in edges])
    p = np.empty(NUM_SYMBOLS)
    p[:-1] = np.diff(cdf)
    p[-1] = 1.0 - cdf[-1]
    p[0] += cdf[0]
    return p


@lru_cache(maxsize=1)
def build_tables() -> CdfTable:
    sigmas = np.geomspace(SCALE_MIN, SCALE_MAX, SCALE_BINS)
    cum = np.zeros((SCALE_BINS, NUM_SYMBOLS + 1), dtype=np.uint32)
    probs = np.zeros((SCALE_BINS, NUM_SYMBOLS), dtype=np.float64)
    for b, sigma in enumerate(sigmas):
        counts = _quantize_pmf(gaussian_pmf(sigma))
        cum[b, 1:] = np.cumsum(counts)
        probs[b] = counts.astype(np.float64) / TOTAL
    return CdfTable(sigmas, cum, probs)


def gaussian_cdf_bin(sigma: float) -> int:
    """Nearest log-spaced bin, clamping sigma into [0.11, 64.0]."""
    return int(bins_for(np.asarray([sigma]))[0])


def bins_for(sigma: np.ndarray) -> np.ndarray:
    """Vectorized bin lookup for an array of scales."""
    s = np.clip(np.asarray(sigma, dtype=np.float64), SCALE_MIN, SCALE_MAX)
    span = math.log(SCALE_MAX) - math.log(SCALE_MIN)
    pos = (np.log(s) - math.log(SCALE_MIN)) / span * (SCALE_BINS - 1)
    return np.rint(pos).astype(np.int32)


def range_encode(symbols: np.ndarray, bins: np.ndarray,
                 tables: CdfTable | None = None) -> bytes:
    """Encode flat symbols with their per-symbol scale bins."""
    if tables is None:
        tables = build_tables()
    symbols = np.asarray(symbols).reshape(-1)
    bins = np.asarray(bins).reshape(-1)
    if symbols.shape != bins.shape:
        raise ContractViolation("symbols and bins must align")
    idx = symbols.astype(np.int64) - SYMBOL_MIN
    if idx.size and (idx.min() < 0 or idx.max() >= NUM_SYMBOLS):
        raise ContractViolation("symbol outside [-128, 127]")
    lo = tables.cum[bins, idx]
    hi = tables.cum[bins, idx + 1]
    enc = RangeEncoder()
    for a, b in zip(lo.tolist(), hi.tolist()):
        enc.encode(a, b)
    return enc.finish()


def range_decode(data: bytes, bins: np.ndarray, count: int,
                 tables: CdfTable | None = None) -> np.ndarray:
    """Decode `count` symbols; bins must replay the encoder's sequence."""
    if tables is None:
        tables = build_tables()
    bins = np.asarray(bins).reshape(-1)
    if bins.size != count:
        raise ContractViolation(f"need {count} bins, got {bins.size}")
    dec = RangeDecoder(data)
    out = np.empty(count, dtype=np.int32)
    cum = tables.cum
    for i in range(count):
        row = cum[bins[i]]
        t = dec.threshold()
        sym = int(np.searchsorted(row, t, side="right")) - 1
        if not 0 <= sym < NUM_SYMBOLS:
            raise DecodeError(f"corrupt stream: no symbol at position {i}")
        dec.consume(int(row[sym]), int(row[sym + 1]))
        out[i] = sym + SYMBOL_MIN
    return out


def rate_bits(symbols: np.ndarray, bins: np.ndarray,
              tables: CdfTable | None = None) -> float:
    """Information content under the quantized tables:
    sum of -log2 p(symbol)."""
    if tables is None:
        tables = build_tables()
    symbols = np.asarray(symbols).reshape(-1)
    bins = np.asarray(bins).reshape(-1)
    idx = symbols.astype(np.int64) - SYMBOL_MIN
    p = tables.probs[bins, idx]
    return float(-np.log2(p).sum())


@dataclass(frozen=True)
class PlaneRate:
    bits: float
    bytes_actual: int


def rate_estimate(symbols: np.ndarray, bins: np.ndarray,
                  tables: CdfTable | None = None) -> PlaneRate:
    """Model bits for a plane plus the size the coder actually produces."""
    payload = range_encode(symbols, bins, tables)
    return PlaneRate(rate_bits(symbols, bins, tables), len(payload))
