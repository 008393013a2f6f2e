"""Residual building blocks, network assembly, weights and their file
format.

Block internals (all padding-free):

* StemConv / StemTconv: one k=2, s=2 layer, optional trailing activation.
* EDRB (down):  main conv(2,2) -> act -> conv(1,1); skip conv(2,2).
* EURB (up):    main tconv(2,2) -> act -> conv(1,1); skip tconv(2,2).
* BRB (keep):   main conv(3,1) -> act -> tconv(3,1); skip conv(1,1).

The canonical encoder [StemConv, BRB, EDRB, BRB, EDRB, BRB, EDRB] has
receptive field 72, scale factor 16 and overlap 64; its decoder is the
exact block-for-block mirror.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import accel, calculus, ops
from .calculus import LayerSpec, conv, tconv
from .errors import ContractViolation, FormatError, SizingError
from .tensor import Tensor

if accel.has_numba:
    from .kernels_numba import splitmix_fill
else:
    from .kernels_numpy import splitmix_fill

BLOCK_KINDS = ("StemConv", "StemTconv", "EDRB", "EURB", "BRB")

WEIGHT_MAGIC = b"CPSW"
WEIGHT_VERSION = 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class BlockSpec:
    kind: str
    c_in: int
    c_out: int
    act_after: bool = False  # stems only
    main_path: tuple[LayerSpec, ...] = field(init=False)
    skip_path: tuple[LayerSpec, ...] = field(init=False)

    def __post_init__(self):
        if self.kind not in BLOCK_KINDS:
            raise ContractViolation(f"unknown block kind {self.kind!r}")
        if self.c_in < 1 or self.c_out < 1:
            raise ContractViolation("channel counts must be >= 1")
        main, skip = {
            "StemConv": ((conv(2, 2),), ()),
            "StemTconv": ((tconv(2, 2),), ()),
            "EDRB": ((conv(2, 2), conv(1, 1)), (conv(2, 2),)),
            "EURB": ((tconv(2, 2), conv(1, 1)), (tconv(2, 2),)),
            "BRB": ((conv(3, 1), tconv(3, 1)), (conv(1, 1),)),
        }[self.kind]
        object.__setattr__(self, "main_path", main)
        object.__setattr__(self, "skip_path", skip)

    def describe(self) -> str:
        act = ",act" if self.act_after else ""
        return f"{self.kind}({self.c_in}->{self.c_out}{act})"


def stem_conv(c_in, c_out, act_after=False):
    return BlockSpec("StemConv", c_in, c_out, act_after)


def stem_tconv(c_in, c_out, act_after=False):
    return BlockSpec("StemTconv", c_in, c_out, act_after)


def edrb(c_in, c_out):
    return BlockSpec("EDRB", c_in, c_out)


def eurb(c_in, c_out):
    return BlockSpec("EURB", c_in, c_out)


def brb(c):
    return BlockSpec("BRB", c, c)


def analysis_stack(blocks) -> tuple[LayerSpec, ...]:
    """Concatenated main paths. For every block kind here the skip path's
    dependency window is contained in the main path's, so this linear
    stack is the correct input for the footprint oracle."""
    out = []
    for blk in blocks:
        out.extend(blk.main_path)
    return tuple(out)


def conv_equivalent(stack) -> tuple[LayerSpec, ...]:
    """Replace stride-1 tconv layers by convs of the same kernel: a
    stride-1 transposed convolution widens the dependency hull by exactly
    k-1, like a conv, so the closed-form receptive-field recursion applies.
    Strided tconvs have no conv equivalent and raise."""
    out = []
    for layer in stack:
        if layer.kind == "tconv":
            if layer.s != 1:
                raise ContractViolation(
                    "strided tconv has no conv-equivalent receptive field")
            out.append(conv(layer.k, 1))
        else:
            out.append(layer)
    return tuple(out)


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    version: int
    channels: int
    g_a: tuple[BlockSpec, ...]
    g_s: tuple[BlockSpec, ...]
    h_a: tuple[BlockSpec, ...]
    h_s: tuple[BlockSpec, ...]

    @property
    def enc_stack(self):
        return analysis_stack(self.g_a)

    @property
    def dec_stack(self):
        return analysis_stack(self.g_s)

    @property
    def r_enc(self) -> int:
        return calculus.receptive_field(conv_equivalent(self.enc_stack))

    @property
    def rho_enc(self) -> int:
        return calculus.scale_factor(self.enc_stack)

    @property
    def two_e(self) -> int:
        return calculus.unreachable(self.r_enc, self.rho_enc)

    @property
    def o(self) -> int:
        return calculus.overlap(self.r_enc, self.rho_enc)

    @property
    def hyper_rho(self) -> int:
        return calculus.scale_factor(analysis_stack(self.h_a))

    def describe(self) -> str:
        parts = [f"cps-net:v{self.version}", f"name={self.name}",
                 f"channels={self.channels}"]
        for label, blocks in (("g_a", self.g_a), ("g_s", self.g_s),
                              ("h_a", self.h_a), ("h_s", self.h_s)):
            parts.append(label + "=" + "|".join(b.describe() for b in blocks))
        return ";".join(parts)

    @property
    def spec_hash(self) -> int:
        return fnv1a64(self.describe().encode())


def build_canonical_network(channels: int = 192,
                            name: str = "canonical") -> NetworkSpec:
    """Canonical configuration: 3 down/up pairs plus 3 size-retaining
    blocks per transform, interleaved so that (r, rho, o) = (72, 16, 64)."""
    if channels < 1:
        raise ContractViolation("channels must be >= 1")
    c = channels
    g_a = (stem_conv(3, c, act_after=True), brb(c), edrb(c, c), brb(c),
           edrb(c, c), brb(c), edrb(c, c))
    g_s = (eurb(c, c), brb(c), eurb(c, c), brb(c), eurb(c, c), brb(c),
           stem_tconv(c, 3))
    h_a = (stem_conv(c, c, act_after=True), stem_conv(c, c))
    h_s = (stem_tconv(c, c, act_after=True), stem_tconv(c, 2 * c))
    return NetworkSpec(name, 1, channels, g_a, g_s, h_a, h_s)


def build_even_network(channels: int = 8, stages: int = 3,
                       name: str = "even") -> NetworkSpec:
    """Stem + EDRB-only encoder (and its mirror): r = rho, so the overlap
    is zero and tiles may abut without any margin."""
    if stages < 1:
        raise ContractViolation("stages must be >= 1")
    c = channels
    g_a = (stem_conv(3, c, act_after=True),) + tuple(
        edrb(c, c) for _ in range(stages - 1))
    g_s = tuple(eurb(c, c) for _ in range(stages - 1)) + (stem_tconv(c, 3),)
    h_a = (stem_conv(c, c, act_after=True), stem_conv(c, c))
    h_s = (stem_tconv(c, c, act_after=True), stem_tconv(c, 2 * c))
    return NetworkSpec(name, 1, channels, g_a, g_s, h_a, h_s)


# -- parameters -----------------------------------------------------------

def _block_params(blk: BlockSpec):
    """(suffix, op, shape) triples for one block, in evaluation order."""
    ci, co = blk.c_in, blk.c_out
    if blk.kind == "StemConv":
        return [("conv", "conv", (co, ci, 2, 2))]
    if blk.kind == "StemTconv":
        return [("conv", "tconv", (ci, co, 2, 2))]
    if blk.kind == "EDRB":
        return [("main0", "conv", (co, ci, 2, 2)),
                ("main1", "conv", (co, co, 1, 1)),
                ("skip", "conv", (co, ci, 2, 2))]
    if blk.kind == "EURB":
        return [("main0", "tconv", (ci, co, 2, 2)),
                ("main1", "conv", (co, co, 1, 1)),
                ("skip", "tconv", (ci, co, 2, 2))]
    # BRB
    return [("main0", "conv", (co, ci, 3, 3)),
            ("main1", "tconv", (ci, co, 3, 3)),
            ("skip", "conv", (co, ci, 1, 1))]


def param_specs(net: NetworkSpec):
    """Every parameter of the network: (name, shape, init_kind) in the
    canonical order used by both init_weights and the file format."""
    out = []
    for label, blocks in (("g_a", net.g_a), ("g_s", net.g_s),
                          ("h_a", net.h_a), ("h_s", net.h_s)):
        for i, blk in enumerate(blocks):
            for suffix, _op, shape in _block_params(blk):
                base = f"{label}.{i}.{suffix}"
                out.append((base + ".w", shape, "weight"))
                c_out = shape[1] if _op == "tconv" else shape[0]
                out.append((base + ".b", (c_out,), "bias"))
    out.append(("entropy.z_sigma", (net.channels,), "sigma"))
    return out


class WeightStore:
    """Ordered name -> float32 array map with deterministic provenance."""

    def __init__(self, arrays: dict[str, np.ndarray], seed: int,
                 spec_hash: int, channels: int | None = None):
        self.arrays = arrays
        self.seed = seed
        self.spec_hash = spec_hash
        self.channels = channels
        self._hash: int | None = None

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def serialize(self) -> bytes:
        chunks = [struct.pack("<4sHQQI", WEIGHT_MAGIC, WEIGHT_VERSION,
                              self.spec_hash, self.seed, len(self.arrays))]
        for name, arr in self.arrays.items():
            nb = name.encode()
            chunks.append(struct.pack("<H", len(nb)))
            chunks.append(nb)
            chunks.append(struct.pack("<B", arr.ndim))
            chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
            chunks.append(arr.astype("<f4", copy=False).tobytes())
        return b"".join(chunks)

    def store_hash(self) -> int:
        if self._hash is None:
            self._hash = fnv1a64(self.serialize())
        return self._hash


def _fan(shape) -> tuple[int, int]:
    k2 = shape[2] * shape[3]
    return shape[1] * k2, shape[0] * k2


def init_weights(net: NetworkSpec, seed: int) -> WeightStore:
    """Fill every parameter from one splitmix64 stream (weights uniform on
    [-a, a] with a = sqrt(6 / (fan_in + fan_out)); per-channel hyper sigma
    uniform on [0.5, 2.0]; biases zero and drawing nothing)."""
    if not 0 <= seed < (1 << 64):
        raise ContractViolation(f"seed must be a u64, got {seed}")
    arrays: dict[str, np.ndarray] = {}
    offset = 0
    useed = np.uint64(seed)
    for name, shape, kind in param_specs(net):
        arr = np.empty(shape, dtype=np.float32)
        if kind == "bias":
            arr[:] = 0.0
        else:
            if kind == "sigma":
                lo, hi = 0.5, 2.0
            else:
                fan_in, fan_out = _fan(shape)
                a = math.sqrt(6.0 / (fan_in + fan_out))
                lo, hi = -a, a
            splitmix_fill(useed, np.uint64(offset), lo, hi, arr.reshape(-1))
            offset += arr.size
        arr.flags.writeable = False
        arrays[name] = arr
    return WeightStore(arrays, seed, net.spec_hash, net.channels)


def save_weights(store: WeightStore, path) -> None:
    with open(path, "wb") as f:
        f.write(store.serialize())


def load_weights(path, expect: NetworkSpec | None = None) -> WeightStore:
    with open(path, "rb") as f:
        data = f.read()
    pos = 0

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise FormatError(f"truncated weight file at byte {pos}")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    magic, version, spec_hash, seed, count = struct.unpack(
        "<4sHQQI", take(struct.calcsize("<4sHQQI")))
    if magic != WEIGHT_MAGIC:
        raise FormatError(f"bad weight magic {magic!r}")
    if version != WEIGHT_VERSION:
        raise FormatError(f"unsupported weight version {version}")
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2))
        name = take(nlen).decode()
        (rank,) = struct.unpack("<B", take(1))
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        n = int(np.prod(dims))
        arr = np.frombuffer(take(4 * n), dtype="<f4").reshape(dims).copy()
        arr.flags.writeable = False
        arrays[name] = arr
    if pos != len(data):
        raise FormatError(f"{len(data) - pos} trailing bytes in weight file")
    if expect is not None:
        if spec_hash != expect.spec_hash:
            raise FormatError(
                f"weight file was built for spec hash {spec_hash:016x}, "
                f"expected {expect.spec_hash:016x}")
        wanted = [(n, s) for n, s, _ in param_specs(expect)]
        got = [(n, a.shape) for n, a in arrays.items()]
        if [(n, tuple(s)) for n, s in wanted] != got:
            raise FormatError("weight entries do not match the network spec")
    return WeightStore(arrays, seed, spec_hash,
                       expect.channels if expect is not None else None)


def get_or_create_weights(net: NetworkSpec, seed: int,
                          path=None) -> WeightStore:
    """Load weights from path if present, otherwise init (and save when a
    path was given)."""
    import os
    if path is not None and os.path.exists(path):
        return load_weights(path, expect=net)
    store = init_weights(net, seed)
    if path is not None:
        save_weights(store, path)
    return store


# -- evaluation -----------------------------------------------------------

def _apply(op: str, x: Tensor, w, b, s: int) -> Tensor:
    if op == "conv":
        return ops.conv2d(x, w, b, s)
    return ops.tconv2d(x, w, b, s)


def block_forward(blk: BlockSpec, store: WeightStore, x: Tensor,
                  base: str, idx: int) -> Tensor:
    g = store.arrays
    try:
        params = _block_params(blk)
        if blk.kind in ("StemConv", "StemTconv"):
            suffix, op, _ = params[0]
            y = _apply(op, x, g[f"{base}.{suffix}.w"], g[f"{base}.{suffix}.b"], 2)
            return ops.activation(y) if blk.act_after else y
        strides = {"EDRB": (2, 1, 2), "EURB": (2, 1, 2), "BRB": (1, 1, 1)}[blk.kind]
        (m0, op0, _), (m1, op1, _), (skp, opk, _) = params
        m = _apply(op0, x, g[f"{base}.{m0}.w"], g[f"{base}.{m0}.b"], strides[0])
        m = ops.activation(m)
        m = _apply(op1, m, g[f"{base}.{m1}.w"], g[f"{base}.{m1}.b"], strides[1])
        sk = _apply(opk, x, g[f"{base}.{skp}.w"], g[f"{base}.{skp}.b"], strides[2])
    except SizingError as e:
        raise SizingError(f"block {idx} ({blk.kind}): {e}") from None
    if m.dims != sk.dims:
        raise SizingError(
            f"block {idx} ({blk.kind}): main {m.dims} vs skip {sk.dims}; "
            f"input size breaks the conv/tconv size-law divisibility")
    return ops.add(m, sk)


def forward(blocks, store: WeightStore, x: Tensor, prefix: str) -> Tensor:
    """Evaluate a block list sequentially; residual blocks return
    main(x) + skip(x)."""
    for i, blk in enumerate(blocks):
        x = block_forward(blk, store, x, f"{prefix}.{i}", i)
    return x
