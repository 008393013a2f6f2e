"""Receptive-field, scale and overlap calculus, plus an exact
dependency-footprint oracle.

All arithmetic is exact integers. The closed-form recursions cover
conv-only stacks; mixed conv/tconv stacks (decoders, bottleneck blocks)
are analyzed by the interval oracle, which composes per-layer dependency
windows backward through the stack:

    conv(k, s) : output i depends on inputs [i*s, i*s + k - 1]
    tconv(k, s): output i depends on inputs [ceil((i-k+1)/s), floor(i/s)]
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ContractViolation, SizingError

KINDS = ("conv", "tconv", "pointwise")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    k: int
    s: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractViolation(f"unknown layer kind {self.kind!r}")
        if self.k < 1 or self.s < 1:
            raise ContractViolation("kernel and stride must be >= 1")
        if self.kind == "pointwise" and (self.k != 1 or self.s != 1):
            raise ContractViolation("pointwise implies k=1, s=1")


def conv(k: int, s: int) -> LayerSpec:
    return LayerSpec("conv", k, s)


def tconv(k: int, s: int) -> LayerSpec:
    return LayerSpec("tconv", k, s)


def pointwise() -> LayerSpec:
    return LayerSpec("pointwise", 1, 1)


@dataclass(frozen=True)
class Footprint:
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ContractViolation(f"empty footprint [{self.lo}, {self.hi}]")

    @property
    def length(self) -> int:
        return self.hi - self.lo + 1


@dataclass(frozen=True)
class StackSummary:
    r: int
    rho: int
    two_e: int
    o: int
    step: int | None  # w_p - o when a patch size was given


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def receptive_field(stack) -> int:
    """r_l = r_{l-1} + (k_l - 1) * prod_{i<l} s_i, r_0 = 1.

    Stated for convolutions only; a tconv layer raises, use footprint()
    for mixed stacks.
    """
    r, jump = 1, 1
    for idx, layer in enumerate(stack):
        if layer.kind == "tconv":
            raise ContractViolation(
                f"layer {idx} is a tconv; the closed-form recursion covers "
                f"conv stacks only - use footprint() for mixed stacks")
        r += (layer.k - 1) * jump
        jump *= layer.s
    return r


def scale_factor(stack) -> int:
    rho = 1
    for layer in stack:
        rho *= layer.s
    return rho


def valid_feature_count(w_p: int, r: int, rho: int) -> int:
    """Number of feature pixels whose full receptive window fits in a
    patch of size w_p: floor((w_p - r) / rho) + 1."""
    if w_p < r:
        raise SizingError(
            f"patch size {w_p} smaller than receptive field {r}")
    return (w_p - r) // rho + 1


def unreachable(r: int, rho: int) -> int:
    """Unreachable feature width 2e = ceil(r / rho) - 1.

    Independent of the patch size by construction (it is not a
    parameter)."""
    if r < 1 or rho < 1:
        raise ContractViolation("r and rho must be >= 1")
    return _ceil_div(r, rho) - 1


def overlap(r: int, rho: int) -> int:
    """Image-domain overlap: r - rho when rho divides r, else
    rho * floor(r / rho). Equals rho * unreachable(r, rho)."""
    if r < 1 or rho < 1:
        raise ContractViolation("r and rho must be >= 1")
    if r % rho == 0:
        return r - rho
    return rho * (r // rho)


def out_size(stack, w_in: int) -> int:
    return layer_sizes(stack, w_in)[-1]


def layer_sizes(stack, w_in: int) -> list[int]:
    """Sizes at every level: index 0 is the input, index len(stack) the
    output. Raises naming the layer whose input is too small."""
    if w_in < 1:
        raise SizingError(f"input size must be >= 1, got {w_in}")
    sizes = [w_in]
    w = w_in
    for idx, layer in enumerate(stack):
        if layer.kind == "tconv":
            w = layer.s * (w - 1) + layer.k
        else:
            if w < layer.k:
                raise SizingError(
                    f"layer {idx} ({layer.kind} k={layer.k} s={layer.s}): "
                    f"input size {w} smaller than kernel")
            w = (w - layer.k) // layer.s + 1
        sizes.append(w)
    return sizes


def _backward(layer: LayerSpec, lo: int, hi: int) -> tuple[int, int]:
    if layer.kind == "tconv":
        return _ceil_div(lo - layer.k + 1, layer.s), hi // layer.s
    return lo * layer.s, hi * layer.s + layer.k - 1


def backward_cones(stack, out_lo: int, out_hi: int) -> list[tuple[int, int]]:
    """Unclipped dependency interval at every level for the output index
    range [out_lo, out_hi]. Returned in level order: index 0 is the input
    level, index len(stack) the output level. Intervals may extend beyond
    the physical extent; callers clip as appropriate."""
    cones = [(out_lo, out_hi)]
    lo, hi = out_lo, out_hi
    for layer in reversed(stack):
        lo, hi = _backward(layer, lo, hi)
        if lo > hi:
            raise ContractViolation(
                f"degenerate dependency interval through {layer}")
        cones.append((lo, hi))
    cones.reverse()
    return cones


def footprint(stack, w_in: int, out_index: int) -> Footprint:
    """Exact interval of input indices that can influence out_index,
    clipped to the valid range at every level."""
    sizes = layer_sizes(stack, w_in)
    if not 0 <= out_index < sizes[-1]:
        raise ContractViolation(
            f"output index {out_index} invalid for output size {sizes[-1]}")
    lo = hi = out_index
    for level in range(len(stack) - 1, -1, -1):
        lo, hi = _backward(stack[level], lo, hi)
        lo = max(lo, 0)
        hi = min(hi, sizes[level] - 1)
        if lo > hi:
            raise ContractViolation(
                f"empty footprint at level {level} for output {out_index}")
    return Footprint(lo, hi)


def forward_extents(stack, start: int, w_in: int) -> list[tuple[int, int]]:
    """Global (start, size) of a window's representation at every level.

    A window [start, start+w_in) of the full input is pushed forward
    through the stack; at each level the computed positions correspond to
    global indices [start_l, start_l + size_l). conv layers require the
    window start to sit on the accumulated stride grid, otherwise the
    tile's outputs would not line up with full-image outputs."""
    sizes = layer_sizes(stack, w_in)
    exts = [(start, w_in)]
    pos = start
    for idx, layer in enumerate(stack):
        if layer.kind == "tconv":
            pos = pos * layer.s
        else:
            if pos % layer.s != 0:
                raise ContractViolation(
                    f"window start {pos} not aligned to stride {layer.s} "
                    f"at layer {idx}")
            pos = pos // layer.s
        exts.append((pos, sizes[idx + 1]))
    return exts


def summarize(stack, w_p: int | None = None) -> StackSummary:
    r = receptive_field(stack)
    rho = scale_factor(stack)
    two_e = unreachable(r, rho)
    o = overlap(r, rho)
    step = None
    if w_p is not None:
        if o >= w_p:
            raise SizingError(f"overlap {o} >= patch size {w_p}")
        step = w_p - o
    return StackSummary(r, rho, two_e, o, step)
