"""Command-line surface: plan, encode, decode, verify, bench.

Exit codes: 0 success, 1 usage, 2 format/contract violation,
3 verification mismatch.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import accel, bench, blocks, codec, metrics, ppm, tiling
from .errors import CodecError, VerifyMismatch


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _add_common(p):
    p.add_argument("--patch-size", type=int, default=128)
    p.add_argument("--channels", type=int, default=192)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weights", help="weight file; created on first use")
    p.add_argument("--net", choices=("canonical", "even"), default="canonical")
    p.add_argument("--even-stages", type=int, default=3)
    p.add_argument("--pad", action="store_true",
                   help="edge-replicate to the processing grid")
    p.add_argument("--threads", type=int)
    p.add_argument("--rd-lambda", type=float,
                   help="rate-distortion tag attached to reports")
    p.add_argument("--boundary-mode", choices=("tiles", "grid8"),
                   default="tiles",
                   help="PSNR-B boundary set: tile edges or fixed 8-grid")


def build_parser():
    ap = _Parser(prog="cpscodec",
                 description="padding-free block-wise image codec")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="print/serialize the tiling plan")
    p.add_argument("--input", help="PPM image to take dimensions from")
    p.add_argument("--height", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--output", help="write the serialized plan here")
    _add_common(p)

    p = sub.add_parser("encode", help="compress a PPM image")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--report", help="write the metric report here")
    _add_common(p)

    p = sub.add_parser("decode", help="decompress a bitstream")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--reference", help="original PPM for distortion metrics")
    p.add_argument("--report")
    _add_common(p)

    p = sub.add_parser("verify", help="check tiled/full bit-exact equality")
    p.add_argument("--input", help="PPM image (synthetic if omitted)")
    p.add_argument("--size", type=int, default=256,
                   help="synthetic image size when no input is given")
    p.add_argument("--overlap-deficit", type=int, default=None,
                   help="shrink the overlap by this many pixels for the "
                        "tightness probe (default: one scale step; 0 "
                        "skips the probe)")
    _add_common(p)

    p = sub.add_parser("bench", help="memory/time benchmark, CSV output")
    p.add_argument("--resolutions", default="256,512,1024",
                   help="comma-separated square sizes")
    p.add_argument("--output", help="CSV path (stdout if omitted)")
    p.add_argument("--budget-bytes", type=int, default=4 << 30)
    _add_common(p)
    return ap


def _net_for(args):
    if args.net == "even":
        return blocks.build_even_network(args.channels, args.even_stages)
    return blocks.build_canonical_network(args.channels)


def _store_for(args, net):
    return blocks.get_or_create_weights(net, args.seed, args.weights)


def _load_image(path) -> np.ndarray:
    return ppm.from_u8(ppm.read_ppm(path))


def _boundary_sets(args, net, h, w):
    if args.boundary_mode == "grid8":
        return metrics.grid_boundaries(h, w)
    plan = tiling.plan_encode(h, w, args.patch_size, net)
    return metrics.plan_boundaries(plan)


def _emit_report(args, text: str):
    if args.rd_lambda is not None:
        text += f"lambda: {args.rd_lambda}\n"
    sys.stdout.write(text)
    if getattr(args, "report", None):
        with open(args.report, "w") as f:
            f.write(text)


def cmd_plan(args) -> int:
    net = _net_for(args)
    if args.input:
        img = ppm.read_ppm(args.input)
        h, w = img.shape[0], img.shape[1]
    elif args.height and args.width:
        h, w = args.height, args.width
    else:
        raise _UsageError("plan needs --input or --height/--width")
    if args.pad:
        pb, pr = codec.pad_amounts(h, w, args.patch_size, net)
        h, w = h + pb, w + pr
    plan = tiling.plan_encode(h, w, args.patch_size, net)
    print(f"r={plan.rf} rho={plan.scale} o={plan.overlap} "
          f"step={plan.step_h} tiles={plan.grid_rows}x{plan.grid_cols}")
    if args.output:
        with open(args.output, "w") as f:
            f.write(tiling.plan_to_text(plan))
    return 0


def cmd_encode(args) -> int:
    net = _net_for(args)
    store = _store_for(args, net)
    img = _load_image(args.input)
    bs = codec.encode_tiled(img, net, store, args.patch_size,
                            allow_pad=args.pad)
    with open(args.output, "wb") as f:
        f.write(bs.to_bytes())
    # distortion requires a decode pass; run it so the report is complete
    res = codec.decode_tiled(bs, net, store, reference=img)
    a = ppm.to_u8(img)
    b = ppm.to_u8(res.reconstruction.data[0])
    rows, cols = _boundary_sets(args, net, bs.height, bs.width)
    rep = metrics.report(a, b, rows, cols, bpp=res.bpp)
    _emit_report(args, rep.as_text())
    return 0


def cmd_decode(args) -> int:
    net = _net_for(args)
    store = _store_for(args, net)
    with open(args.input, "rb") as f:
        bs = codec.Bitstream.from_bytes(f.read())
    ref = _load_image(args.reference) if args.reference else None
    res = codec.decode_tiled(bs, net, store, reference=ref)
    out = ppm.to_u8(res.reconstruction.data[0])
    ppm.write_ppm(args.output, out)
    lines = [f"bpp: {res.bpp:.6f}"]
    if res.psnr is not None:
        lines += [f"mse: {res.mse:.6f}", f"psnr: {res.psnr:.4f}"]
    _emit_report(args, "\n".join(lines) + "\n")
    return 0


def _first_diff(a: np.ndarray, b: np.ndarray):
    idx = np.argwhere(a != b)
    return tuple(int(v) for v in idx[0])


def cmd_verify(args) -> int:
    net = _net_for(args)
    store = _store_for(args, net)
    if args.input:
        img = _load_image(args.input)
    else:
        img = bench.synthetic_image(args.size, args.size, args.seed)
    img, _, _ = codec.pad_image(img, args.patch_size, net,
                                allow_pad=args.pad)
    _, h, w = img.shape
    w_p = args.patch_size

    checks = []
    plan = tiling.plan_encode(h, w, w_p, net)
    y_full = codec.analysis_full(img, net, store)
    y_tiled = codec.analysis_tiled(img, net, store, plan)
    checks.append(("latent", np.array_equal(y_full.data, y_tiled.data),
                   y_full.data, y_tiled.data))
    bs_t = codec.encode_tiled(img, net, store, w_p)
    bs_f = codec.encode_full(img, net, store, w_p)
    checks.append(("bitstream", bs_t.to_bytes() == bs_f.to_bytes(),
                   None, None))
    r_t = codec.decode_tiled(bs_t, net, store)
    r_f = codec.decode_full(bs_f, net, store)
    checks.append(("reconstruction",
                   np.array_equal(r_t.reconstruction.data,
                                  r_f.reconstruction.data),
                   r_t.reconstruction.data, r_f.reconstruction.data))

    failed = False
    for name, ok, a, b in checks:
        print(f"{'pass' if ok else 'FAIL'} {name}")
        if not ok:
            failed = True
            if a is not None:
                print(f"  first differing coordinate: {_first_diff(a, b)}")

    deficit = args.overlap_deficit
    if deficit is None:
        deficit = net.rho_enc
    multi_tile = h > w_p or w > w_p
    if deficit and net.o >= deficit and multi_tile:
        probe = tiling.plan_encode(h, w, w_p, net,
                                   overlap_override=net.o - deficit)
        y_probe = codec.analysis_tiled(img, net, store, probe)
        mismatch = not np.array_equal(y_full.data, y_probe.data)
        print(f"{'pass' if mismatch else 'FAIL'} tightness-probe "
              f"(expected mismatch at overlap o-{deficit})")
        if not mismatch:
            failed = True

    if failed:
        raise VerifyMismatch("tiled and full paths disagree")
    return 0


def cmd_bench(args) -> int:
    net = _net_for(args)
    store = _store_for(args, net)
    try:
        resolutions = [int(tok) for tok in args.resolutions.split(",") if tok]
    except ValueError as e:
        raise _UsageError(f"bad --resolutions: {e}") from None
    rows, notes = bench.run_bench(resolutions, net, store, args.patch_size,
                                  seed=args.seed,
                                  budget_bytes=args.budget_bytes)
    text = bench.to_csv(rows)
    if args.output:
        with open(args.output, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    for note in notes:
        print(note, file=sys.stderr)
    return 0


_COMMANDS = {"plan": cmd_plan, "encode": cmd_encode, "decode": cmd_decode,
             "verify": cmd_verify, "bench": cmd_bench}


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        if getattr(args, "threads", None):
            accel.set_threads(args.threads)
        return _COMMANDS[args.command](args)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except VerifyMismatch as e:
        print(f"verification mismatch: {e}", file=sys.stderr)
        return 3
    except (CodecError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
