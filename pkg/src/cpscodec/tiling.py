"""Overlapping-patch tiling plans with machine-checkable coverage proofs.

Encode plans place w_p-sized patches at step w_p - o and crop each
patch's latent margins so the kept crops partition the full latent grid;
decode plans split the latent grid, add just enough halo for every
retained output pixel's dependency cone (per the footprint oracle), and
crop the synthesized margins back off.

Both planners verify, at every level of the stack, that each kept
pixel's dependency cone (clipped to the full-image extent) lies inside
the tile's computed extent; this is the exact condition under which the
tile computes bit-identical values to the full-image pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import calculus
from .blocks import NetworkSpec
from .errors import PlanError


@dataclass(frozen=True)
class Rect:
    top: int
    left: int
    height: int
    width: int

    def as_text(self) -> str:
        return f"{self.top},{self.left},{self.height},{self.width}"


@dataclass(frozen=True)
class EncodeTile:
    row: int
    col: int
    src: Rect   # image pixels
    keep: Rect  # this tile's local latent grid
    dst: Rect   # global latent grid


@dataclass(frozen=True)
class TilePlan:
    image_h: int
    image_w: int
    patch: int
    rf: int
    scale: int
    two_e: int
    overlap: int        # net-required overlap from the calculus
    step_h: int         # steps actually used (equal to patch - overlap
    step_w: int         # unless an override probe asked otherwise)
    latent_h: int
    latent_w: int
    grid_rows: int
    grid_cols: int
    tiles: tuple[EncodeTile, ...]


@dataclass(frozen=True)
class DecodeTile:
    row: int
    col: int
    src: Rect   # global latent, halo included
    crop: Rect  # window into this tile's synthesized output
    dst: Rect   # global output pixels


@dataclass(frozen=True)
class DecodePlan:
    latent_h: int
    latent_w: int
    tile_latent: int
    scale: int
    out_h: int
    out_w: int
    grid_rows: int
    grid_cols: int
    tiles: tuple[DecodeTile, ...]


@dataclass(frozen=True)
class PlanCheck:
    name: str
    ok: bool
    detail: str


@dataclass(frozen=True)
class PlanReport:
    ok: bool
    checks: tuple[PlanCheck, ...]

    def as_text(self) -> str:
        lines = [f"{'pass' if c.ok else 'FAIL'} {c.name}: {c.detail}"
                 for c in self.checks]
        lines.append(f"result: {'pass' if self.ok else 'FAIL'}")
        return "\n".join(lines)


# -- oracle-side validity ---------------------------------------------------

def _cone_fits(stack, full_sizes, exts, out_lo, out_hi) -> bool:
    """True iff the dependency cone of global output range
    [out_lo, out_hi], clipped to the full-image extent at every level,
    stays inside the tile's extent at that level. By induction over
    levels this is exactly the condition under which the tile computes
    values bit-equal to the full-image pass."""
    cones = calculus.backward_cones(stack, out_lo, out_hi)
    for lev, (lo, hi) in enumerate(cones):
        lo = max(lo, 0)
        hi = min(hi, full_sizes[lev] - 1)
        start, size = exts[lev]
        if lo < start or hi > start + size - 1:
            return False
    return True


def encode_margins(stack, w_p: int) -> tuple[int, int]:
    """Minimal (left, right) latent margins a w_p patch must drop so the
    kept pixels are bit-equal to full-image values; exact, via the
    oracle on an interior patch embedded in a larger virtual image."""
    full_sizes = calculus.layer_sizes(stack, 3 * w_p)
    exts = calculus.forward_extents(stack, w_p, w_p)
    base, n_out = exts[-1]
    valid = [t for t in range(n_out)
             if _cone_fits(stack, full_sizes, exts, base + t, base + t)]
    if not valid:
        raise PlanError(f"patch size {w_p} keeps no valid latent pixel")
    lo, hi = valid[0], valid[-1]
    if hi - lo + 1 != len(valid):
        raise PlanError("valid latent pixels are not contiguous")
    return lo, n_out - 1 - hi


def _pick_margins(stack, w_p: int, two_e: int) -> tuple[int, int]:
    """Margins summing to two_e: the ceil-left/floor-right split when the
    oracle allows it, otherwise the oracle's own minimal margins."""
    m_lo, m_ro = encode_margins(stack, w_p)
    if m_lo + m_ro > two_e:
        raise PlanError(
            f"oracle margins {m_lo}+{m_ro} exceed the unreachable width "
            f"{two_e}; the overlap bound does not hold for this stack")
    m_l = (two_e + 1) // 2
    m_r = two_e - m_l
    if m_l >= m_lo and m_r >= m_ro:
        return m_l, m_r
    return m_lo, two_e - m_lo


# -- encode planning --------------------------------------------------------

def _axis_starts(dim: int, w_p: int, step: int) -> list[int]:
    starts = list(range(0, dim - w_p + 1, step))
    if starts[-1] != dim - w_p:
        starts.append(dim - w_p)  # clamped tail
    return starts


def _axis_keeps(starts, dim, rho, n_local, m_l, m_r):
    """Per-tile (keep_lo, keep_hi) in local latent indices such that the
    dst windows partition [0, dim/rho)."""
    latent = dim // rho
    out = []
    cursor = 0
    for i, a in enumerate(starts):
        base = a // rho
        lo = cursor - base
        hi = (latent - 1 - base) if i == len(starts) - 1 else (n_local - 1 - m_r)
        if not 0 <= lo <= hi <= n_local - 1:
            raise PlanError(
                f"keep window [{lo},{hi}] invalid for tile {i} "
                f"(local latent size {n_local})")
        out.append((lo, hi))
        cursor = base + hi + 1
    if cursor != latent:
        raise PlanError(f"keeps cover {cursor} of {latent} latent pixels")
    return out


def plan_encode(image_h: int, image_w: int, w_p: int, net: NetworkSpec,
                overlap_override: int | None = None) -> TilePlan:
    """Tile an image_h x image_w image with w_p patches at step w_p - o.

    overlap_override replaces the net-required overlap (used by the
    tightness probe); the returned plan still records the required value
    so verify_plan flags the oversized steps.
    """
    stack = net.enc_stack
    rho = net.rho_enc
    rf = net.r_enc
    two_e = net.two_e
    o = net.o
    for name, v in (("image height", image_h), ("image width", image_w),
                    ("patch size", w_p)):
        if v % rho != 0:
            raise PlanError(f"{name} {v} not divisible by scale factor {rho}")
    if w_p > min(image_h, image_w):
        raise PlanError(f"patch size {w_p} exceeds image {image_h}x{image_w}")
    if w_p < o + rho:
        raise PlanError(f"patch size {w_p} below minimum {o + rho} (o + rho)")
    n_local = calculus.out_size(stack, w_p)
    if n_local * rho != w_p:
        raise PlanError(
            f"encoder maps {w_p} -> {n_local}, not size-consistent with "
            f"scale factor {rho}")

    use_o = o if overlap_override is None else overlap_override
    if use_o != o:
        if use_o < 0 or use_o > o or (o - use_o) % rho != 0:
            raise PlanError(
                "overlap override must be in [0, o] and differ from o by "
                "a multiple of rho")
        m_l, m_r = _pick_margins(stack, w_p, two_e)
        deficit = (o - use_o) // rho
        take_r = min(m_r, deficit)
        m_r -= take_r
        m_l -= deficit - take_r
        if m_l < 0:
            raise PlanError("overlap override larger than available margins")
    else:
        m_l, m_r = _pick_margins(stack, w_p, two_e)
    step = w_p - use_o
    if step < 1:
        raise PlanError(f"step {step} must be positive")

    rows = _axis_starts(image_h, w_p, step)
    cols = _axis_starts(image_w, w_p, step)
    keeps_r = _axis_keeps(rows, image_h, rho, n_local, m_l, m_r)
    keeps_c = _axis_keeps(cols, image_w, rho, n_local, m_l, m_r)

    if overlap_override is None:
        # bit-exactness proof: every kept pixel's cone, clipped to the
        # image, must fit its tile's extent at every level
        for axis, (starts, keeps, dim) in enumerate(
                ((rows, keeps_r, image_h), (cols, keeps_c, image_w))):
            full_sizes = calculus.layer_sizes(stack, dim)
            for i, ((lo, hi), a) in enumerate(zip(keeps, starts)):
                exts = calculus.forward_extents(stack, a, w_p)
                base = exts[-1][0]
                if not _cone_fits(stack, full_sizes, exts,
                                  base + lo, base + hi):
                    raise PlanError(
                        f"axis {axis} tile {i}: kept latent "
                        f"[{lo},{hi}] not independent of the patch border")

    tiles = []
    for r, (a, (rlo, rhi)) in enumerate(zip(rows, keeps_r)):
        for c, (b, (clo, chi)) in enumerate(zip(cols, keeps_c)):
            src = Rect(a, b, w_p, w_p)
            keep = Rect(rlo, clo, rhi - rlo + 1, chi - clo + 1)
            dst = Rect(a // rho + rlo, b // rho + clo,
                       keep.height, keep.width)
            tiles.append(EncodeTile(r, c, src, keep, dst))
    return TilePlan(image_h, image_w, w_p, rf, rho, two_e, o, step, step,
                    image_h // rho, image_w // rho, len(rows), len(cols),
                    tuple(tiles))


# -- decode planning --------------------------------------------------------

def _axis_decode(stack, latent: int, tile_latent: int, rho: int):
    """Per-axis decode tiling: (src_lo, src_hi, dst_lo, dst_hi) in latent
    indices, halo derived from the oracle, validated at every level."""
    sizes_full = calculus.layer_sizes(stack, latent)
    segs = []
    d0 = 0
    while d0 < latent:
        d1 = min(d0 + tile_latent - 1, latent - 1)
        p0, p1 = rho * d0, rho * (d1 + 1) - 1
        clo, chi = calculus.backward_cones(stack, p0, p1)[0]
        u, v = max(0, clo), min(latent - 1, chi)
        for _ in range(8 * len(stack) + 1):
            exts = calculus.forward_extents(stack, u, v - u + 1)
            if _cone_fits(stack, sizes_full, exts, p0, p1):
                break
            u, v = max(0, u - 1), min(latent - 1, v + 1)
        else:
            raise PlanError(
                f"no feasible halo for latent segment [{d0},{d1}]")
        segs.append((u, v, d0, d1))
        d0 = d1 + 1
    return segs


def plan_decode(latent_h: int, latent_w: int, tile_latent: int,
                net: NetworkSpec) -> DecodePlan:
    """Tile the latent grid for synthesis so that stitched tile outputs
    equal the full-latent synthesis bit-exactly."""
    if tile_latent < 1:
        raise PlanError("tile_latent must be >= 1")
    stack = net.dec_stack
    rho = calculus.scale_factor(stack)
    out_h = calculus.out_size(stack, latent_h)
    out_w = calculus.out_size(stack, latent_w)
    if (out_h, out_w) != (rho * latent_h, rho * latent_w):
        raise PlanError("decoder is not size-consistent with its scale")
    segs_r = _axis_decode(stack, latent_h, tile_latent, rho)
    segs_c = _axis_decode(stack, latent_w, tile_latent, rho)
    tiles = []
    for r, (ur, vr, d0r, d1r) in enumerate(segs_r):
        oh = calculus.out_size(stack, vr - ur + 1)
        out_start_r = calculus.forward_extents(stack, ur, vr - ur + 1)[-1][0]
        for c, (uc, vc, d0c, d1c) in enumerate(segs_c):
            ow = calculus.out_size(stack, vc - uc + 1)
            out_start_c = calculus.forward_extents(
                stack, uc, vc - uc + 1)[-1][0]
            src = Rect(ur, uc, vr - ur + 1, vc - uc + 1)
            dst = Rect(rho * d0r, rho * d0c,
                       rho * (d1r - d0r + 1), rho * (d1c - d0c + 1))
            crop = Rect(dst.top - out_start_r, dst.left - out_start_c,
                        dst.height, dst.width)
            if (crop.top < 0 or crop.left < 0
                    or crop.top + crop.height > oh
                    or crop.left + crop.width > ow):
                raise PlanError(f"decode crop {crop} outside tile output "
                                f"{oh}x{ow}")
            tiles.append(DecodeTile(r, c, src, crop, dst))
    return DecodePlan(latent_h, latent_w, tile_latent, rho,
                      out_h, out_w, len(segs_r), len(segs_c), tuple(tiles))


# -- verification -----------------------------------------------------------

def verify_plan(plan) -> PlanReport:
    """Partition and step-bound proof for a plan.

    Checks that dst rectangles cover the target exactly once and (for
    encode plans) that every interior step respects the w_p - o bound;
    the first violated pixel/step is named in the report.
    """
    checks = []
    if isinstance(plan, TilePlan):
        grid_h, grid_w = plan.latent_h, plan.latent_w
        bound = plan.patch - plan.overlap
        for axis, sel in (("row", lambda t: (t.col == 0, t.src.top)),
                          ("col", lambda t: (t.row == 0, t.src.left))):
            starts = sorted({sel(t)[1] for t in plan.tiles if sel(t)[0]})
            steps = [b - a for a, b in zip(starts, starts[1:])]
            bad = [(i, s) for i, s in enumerate(steps) if s > bound]
            if bad:
                checks.append(PlanCheck(
                    f"step-bound-{axis}", False,
                    f"step {bad[0][1]} at index {bad[0][0]} exceeds "
                    f"w_p - o = {bound}"))
            else:
                checks.append(PlanCheck(
                    f"step-bound-{axis}", True,
                    f"all steps <= {bound}"))
    elif isinstance(plan, DecodePlan):
        grid_h, grid_w = plan.out_h, plan.out_w
    else:
        raise TypeError(f"not a plan: {type(plan)!r}")

    cover = np.zeros((grid_h, grid_w), dtype=np.uint16)
    for t in plan.tiles:
        d = t.dst
        cover[d.top:d.top + d.height, d.left:d.left + d.width] += 1
    bad = np.argwhere(cover != 1)
    if bad.size:
        i, j = int(bad[0][0]), int(bad[0][1])
        word = "gap" if cover[i, j] == 0 else "double-cover"
        checks.append(PlanCheck("coverage", False,
                                f"{word} at pixel ({i}, {j})"))
    else:
        checks.append(PlanCheck(
            "coverage", True,
            f"{grid_h}x{grid_w} target covered exactly once"))
    return PlanReport(all(c.ok for c in checks), tuple(checks))


# -- serialization ----------------------------------------------------------

def plan_to_text(plan) -> str:
    """Human-readable key-value serialization, one tile per line."""
    lines = []
    if isinstance(plan, TilePlan):
        lines += [
            "plan: encode",
            f"image: {plan.image_h} {plan.image_w}",
            f"patch: {plan.patch}",
            f"rf: {plan.rf}",
            f"scale: {plan.scale}",
            f"two_e: {plan.two_e}",
            f"overlap: {plan.overlap}",
            f"step: {plan.step_h} {plan.step_w}",
            f"latent: {plan.latent_h} {plan.latent_w}",
            f"grid: {plan.grid_rows} {plan.grid_cols}",
        ]
        for t in plan.tiles:
            lines.append(f"tile: r={t.row} c={t.col} src={t.src.as_text()} "
                         f"keep={t.keep.as_text()} dst={t.dst.as_text()}")
    else:
        lines += [
            "plan: decode",
            f"latent: {plan.latent_h} {plan.latent_w}",
            f"tile_latent: {plan.tile_latent}",
            f"scale: {plan.scale}",
            f"output: {plan.out_h} {plan.out_w}",
            f"grid: {plan.grid_rows} {plan.grid_cols}",
        ]
        for t in plan.tiles:
            lines.append(f"tile: r={t.row} c={t.col} src={t.src.as_text()} "
                         f"crop={t.crop.as_text()} dst={t.dst.as_text()}")
    return "\n".join(lines) + "\n"
