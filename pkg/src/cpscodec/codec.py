"""End-to-end encode/decode pipelines and the bitstream container.

Both paths share one pipeline: analysis -> hyper-analysis -> quantize z
-> hyper-synthesis(z_hat) -> (mu, sigma) -> quantize y -> range-code z
then y. The tiled and full paths differ only in how the latent plane is
produced (patch stitching vs one pass) and how it is synthesized back;
their outputs are bit-identical, which the verify command and the test
suite check rather than assume.

Container layout (little-endian): magic "CPS1", u16 version, u32 W,
u32 H (padded processing dims), u8 channels, u16 w_p, u16 o, u16
pad_right, u16 pad_bottom, u64 weight-store hash, u32 len_z, u32 len_y,
u32 crc32 (over the header with a zeroed checksum field plus both
payloads), then payload_z and payload_y.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from . import blocks, calculus, entropy, metrics, ppm, tiling
from .blocks import NetworkSpec, WeightStore
from .errors import FormatError, PlanError
from .ops import crop2d, stitch2d
from .tensor import Tensor

MAGIC = b"CPS1"
VERSION = 1
_HEADER_FMT = "<4sHIIBHHHHQIII"
_HEADER_SIZE = struct.calcsize(_HEADER_FMT)


@dataclass(frozen=True)
class Bitstream:
    width: int           # padded processing width
    height: int          # padded processing height
    channels: int
    w_p: int
    overlap: int
    pad_right: int
    pad_bottom: int
    weights_hash: int
    payload_z: bytes
    payload_y: bytes

    def header_bytes(self, checksum: int) -> bytes:
        return struct.pack(_HEADER_FMT, MAGIC, VERSION, self.width,
                           self.height, self.channels, self.w_p,
                           self.overlap, self.pad_right, self.pad_bottom,
                           self.weights_hash, len(self.payload_z),
                           len(self.payload_y), checksum)

    def to_bytes(self) -> bytes:
        body = self.header_bytes(0) + self.payload_z + self.payload_y
        crc = zlib.crc32(body) & 0xFFFFFFFF
        return self.header_bytes(crc) + self.payload_z + self.payload_y

    @classmethod
    def from_bytes(cls, data: bytes) -> "Bitstream":
        if len(data) < _HEADER_SIZE:
            raise FormatError("bitstream shorter than its header")
        (magic, version, width, height, channels, w_p, ov, pad_r, pad_b,
         whash, len_z, len_y, crc) = struct.unpack(
            _HEADER_FMT, data[:_HEADER_SIZE])
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}")
        if version != VERSION:
            raise FormatError(f"unsupported bitstream version {version}")
        if len(data) != _HEADER_SIZE + len_z + len_y:
            raise FormatError(
                f"payload length mismatch: header says {len_z}+{len_y}, "
                f"got {len(data) - _HEADER_SIZE} bytes")
        bs = cls(width, height, channels, w_p, ov, pad_r, pad_b, whash,
                 data[_HEADER_SIZE:_HEADER_SIZE + len_z],
                 data[_HEADER_SIZE + len_z:])
        body = bs.header_bytes(0) + bs.payload_z + bs.payload_y
        if zlib.crc32(body) & 0xFFFFFFFF != crc:
            raise FormatError("bitstream checksum mismatch")
        return bs

    @property
    def orig_width(self) -> int:
        return self.width - self.pad_right

    @property
    def orig_height(self) -> int:
        return self.height - self.pad_bottom

    def bpp(self) -> float:
        """Bits per pixel over the pre-pad dimensions."""
        return 8.0 * len(self.to_bytes()) / (self.orig_width *
                                             self.orig_height)


@dataclass(frozen=True)
class RateReport:
    bits_y: float
    bits_z: float
    bytes_y: int
    bytes_z: int

    @property
    def total_bits(self) -> float:
        return self.bits_y + self.bits_z


@dataclass(frozen=True)
class CodecResult:
    reconstruction: Tensor
    rate: RateReport
    bpp: float
    mse: float | None = None
    psnr: float | None = None


# -- padding ----------------------------------------------------------------

def required_divisor(net: NetworkSpec) -> int:
    """Processed dims must divide by rho * hyper_rho so both the latent
    grid and the hyper path land on exact sizes."""
    return net.rho_enc * net.hyper_rho

def pad_amounts(h: int, w: int, w_p: int, net: NetworkSpec):
    div = required_divisor(net)
    th = -(-max(h, w_p) // div) * div
    tw = -(-max(w, w_p) // div) * div
    return th - h, tw - w


def pad_image(img: np.ndarray, w_p: int, net: NetworkSpec,
              allow_pad: bool):
    """Edge-replicate img (3, H, W) to the processing grid. Without
    allow_pad, images off the grid are rejected, never silently cropped."""
    _, h, w = img.shape
    pad_b, pad_r = pad_amounts(h, w, w_p, net)
    if (pad_b or pad_r) and not allow_pad:
        raise PlanError(
            f"image {h}x{w} needs (bottom={pad_b}, right={pad_r}) "
            f"edge padding to reach a multiple of "
            f"{required_divisor(net)} at least {w_p}; pass --pad/"
            f"allow_pad to opt in")
    if pad_b or pad_r:
        img = np.pad(img, ((0, 0), (0, pad_b), (0, pad_r)), mode="edge")
    return img, pad_r, pad_b


# -- analysis ---------------------------------------------------------------

def analysis_full(img: np.ndarray, net: NetworkSpec,
                  store: WeightStore) -> Tensor:
    """Whole-image analysis transform; the equivalence reference path."""
    x = Tensor(img[None], "image")
    y = blocks.forward(net.g_a, store, x, "g_a")
    return Tensor(y.data, "latent")


def analysis_tiled(img: np.ndarray, net: NetworkSpec, store: WeightStore,
                   plan: tiling.TilePlan) -> Tensor:
    """Patch-wise analysis: per-tile forward, crop the valid latent
    margins, stitch. Image-domain memory stays at one tile's working set
    regardless of image size."""
    parts = []
    for t in plan.tiles:
        s = t.src
        tile = Tensor(img[None, :, s.top:s.top + s.height,
                          s.left:s.left + s.width], "image")
        lat = blocks.forward(net.g_a, store, tile, "g_a")
        k = t.keep
        kept = crop2d(lat, k.top, k.left, k.height, k.width)
        parts.append((Tensor(kept.data, "latent"), t.dst.top, t.dst.left))
        del tile, lat, kept
    return stitch2d(parts, plan.latent_h, plan.latent_w, domain="latent")


# -- entropy stage ----------------------------------------------------------

def _hyper_dims(net: NetworkSpec, lh: int, lw: int):
    stack = blocks.analysis_stack(net.h_a)
    return calculus.out_size(stack, lh), calculus.out_size(stack, lw)


def _z_bins(net: NetworkSpec, store: WeightStore, zh: int, zw: int):
    sigma_z = store["entropy.z_sigma"]
    per_channel = entropy.bins_for(sigma_z)
    return np.repeat(per_channel, zh * zw)


def _params_from_zhat(net, store, z_hat: Tensor):
    params = blocks.forward(net.h_s, store, z_hat, "h_s")
    c = net.channels
    mu = Tensor(params.data[:, :c], "latent")
    sigma = Tensor(np.abs(params.data[:, c:]), "latent")
    return mu, sigma


def entropy_encode(y: Tensor, net: NetworkSpec, store: WeightStore):
    """Latent plane -> (payload_z, payload_y, RateReport, y_hat)."""
    z = blocks.forward(net.h_a, store, y, "h_a")
    z_plane = entropy.quantize(z)
    bins_z = _z_bins(net, store, z.h, z.w)
    payload_z = entropy.range_encode(z_plane.values, bins_z)

    z_hat = entropy.dequantize(z_plane)
    mu, sigma = _params_from_zhat(net, store, z_hat)
    y_plane = entropy.quantize(y, mu)
    bins_y = entropy.bins_for(sigma.data[0])
    payload_y = entropy.range_encode(y_plane.values, bins_y)

    rate = RateReport(entropy.rate_bits(y_plane.values, bins_y),
                      entropy.rate_bits(z_plane.values, bins_z),
                      len(payload_y), len(payload_z))
    y_hat = entropy.dequantize(y_plane, mu)
    return payload_z, payload_y, rate, y_hat


def entropy_decode(bs: Bitstream, net: NetworkSpec, store: WeightStore):
    """Payloads -> (y_hat, RateReport); exact inverse of entropy_encode."""
    lh, lw = bs.height // net.rho_enc, bs.width // net.rho_enc
    zh, zw = _hyper_dims(net, lh, lw)
    c = net.channels
    bins_z = _z_bins(net, store, zh, zw)
    z_syms = entropy.range_decode(bs.payload_z, bins_z, c * zh * zw)
    z_plane = entropy.SymbolPlane(z_syms.reshape(c, zh, zw),
                                  np.zeros((c, zh, zw), dtype=bool))
    z_hat = entropy.dequantize(z_plane)
    mu, sigma = _params_from_zhat(net, store, z_hat)
    bins_y = entropy.bins_for(sigma.data[0])
    y_syms = entropy.range_decode(bs.payload_y, bins_y, c * lh * lw)
    y_plane = entropy.SymbolPlane(y_syms.reshape(c, lh, lw),
                                  np.zeros((c, lh, lw), dtype=bool))
    y_hat = entropy.dequantize(y_plane, mu)
    rate = RateReport(entropy.rate_bits(y_syms, bins_y),
                      entropy.rate_bits(z_syms, bins_z),
                      len(bs.payload_y), len(bs.payload_z))
    return y_hat, rate


# -- synthesis --------------------------------------------------------------

def synthesis_full(y_hat: Tensor, net: NetworkSpec,
                   store: WeightStore) -> Tensor:
    x = Tensor(y_hat.data, "image")
    return blocks.forward(net.g_s, store, x, "g_s")


def synthesis_tiled(y_hat: Tensor, net: NetworkSpec, store: WeightStore,
                    plan: tiling.DecodePlan) -> Tensor:
    parts = []
    for t in plan.tiles:
        s = t.src
        lat = crop2d(y_hat, s.top, s.left, s.height, s.width)
        lat = Tensor(lat.data, "image")  # tile working set, image-scale
        out = blocks.forward(net.g_s, store, lat, "g_s")
        c = t.crop
        kept = crop2d(out, c.top, c.left, c.height, c.width)
        parts.append((kept, t.dst.top, t.dst.left))
        del lat, out
    return stitch2d(parts, plan.out_h, plan.out_w, domain="image")


# -- public pipelines ---------------------------------------------------------

def encode_tiled(img: np.ndarray, net: NetworkSpec, store: WeightStore,
                 w_p: int, allow_pad: bool = False) -> Bitstream:
    """Patch-parallel encode of a (3, H, W) float32 image in [0, 1]."""
    padded, pad_r, pad_b = pad_image(img, w_p, net, allow_pad)
    _, h, w = padded.shape
    plan = tiling.plan_encode(h, w, w_p, net)
    y = analysis_tiled(padded, net, store, plan)
    payload_z, payload_y, _, _ = entropy_encode(y, net, store)
    return Bitstream(w, h, 3, w_p, net.o, pad_r, pad_b, store.store_hash(),
                     payload_z, payload_y)


def encode_full(img: np.ndarray, net: NetworkSpec, store: WeightStore,
                w_p: int, allow_pad: bool = False) -> Bitstream:
    """Whole-image reference encode. Takes the same w_p so padding and
    header match encode_tiled byte for byte."""
    padded, pad_r, pad_b = pad_image(img, w_p, net, allow_pad)
    _, h, w = padded.shape
    y = analysis_full(padded, net, store)
    payload_z, payload_y, _, _ = entropy_encode(y, net, store)
    return Bitstream(w, h, 3, w_p, net.o, pad_r, pad_b, store.store_hash(),
                     payload_z, payload_y)


def _check_hash(bs: Bitstream, store: WeightStore):
    if bs.weights_hash != store.store_hash():
        raise FormatError(
            f"bitstream was made with weight store "
            f"{bs.weights_hash:016x}, loaded {store.store_hash():016x}")


def _finish(bs: Bitstream, recon: Tensor, rate: RateReport,
            reference: np.ndarray | None) -> CodecResult:
    if bs.pad_bottom or bs.pad_right:
        recon = crop2d(recon, 0, 0, bs.orig_height, bs.orig_width)
    m = p = None
    if reference is not None:
        a = ppm.to_u8(reference)
        b = ppm.to_u8(recon.data[0])
        m = metrics.mse(a, b)
        p = metrics.psnr(a, b)
    return CodecResult(recon, rate, bs.bpp(), m, p)


def decode_tiled(bs: Bitstream, net: NetworkSpec, store: WeightStore,
                 reference: np.ndarray | None = None) -> CodecResult:
    _check_hash(bs, store)
    y_hat, rate = entropy_decode(bs, net, store)
    plan = tiling.plan_decode(y_hat.h, y_hat.w, bs.w_p // net.rho_enc, net)
    recon = synthesis_tiled(y_hat, net, store, plan)
    return _finish(bs, recon, rate, reference)


def decode_full(bs: Bitstream, net: NetworkSpec, store: WeightStore,
                reference: np.ndarray | None = None) -> CodecResult:
    _check_hash(bs, store)
    y_hat, rate = entropy_decode(bs, net, store)
    recon = synthesis_full(y_hat, net, store)
    return _finish(bs, recon, rate, reference)
