"""Throughput comparison of the numba kernels vs the pure-numpy fallback.

Both backends are bit-identical (see tests/test_backends.py); this shows
what the numba path buys. Run:

    python3 benchmarks/compare_backends.py [--channels 16] [--size 64]

Prints one line per kernel with both timings and the speedup.
"""

import argparse
import time

import numpy as np

from cpscodec import kernels_numpy as knp

try:
    from cpscodec import kernels_numba as knb
except ImportError:
    knb = None


def bench_fn(fn, *args, repeats=5):
    fn(*args)  # warm-up / JIT
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--channels", type=int, default=16)
    ap.add_argument("--size", type=int, default=96)
    args = ap.parse_args()
    c, n = args.channels, args.size

    rng = np.random.default_rng(0)
    x = rng.standard_normal((c, n, n)).astype(np.float32)
    b = np.zeros(c, dtype=np.float32)
    cases = [
        ("conv2d k3 s1", "conv2d",
         (x, rng.standard_normal((c, c, 3, 3)).astype(np.float32), b, 1)),
        ("conv2d k2 s2", "conv2d",
         (x, rng.standard_normal((c, c, 2, 2)).astype(np.float32), b, 2)),
        ("tconv2d k3 s1", "tconv2d",
         (x, rng.standard_normal((c, c, 3, 3)).astype(np.float32), b, 1)),
        ("tconv2d k2 s2", "tconv2d",
         (x, rng.standard_normal((c, c, 2, 2)).astype(np.float32), b, 2)),
        ("leaky", "leaky", (x,)),
    ]

    print(f"channels={c} size={n}x{n}")
    print(f"{'kernel':<16}{'numpy':>12}{'numba':>12}{'speedup':>10}")
    for label, name, fargs in cases:
        t_np = bench_fn(getattr(knp, name), *fargs)
        if knb is None:
            print(f"{label:<16}{t_np * 1e3:>10.2f}ms{'n/a':>12}{'':>10}")
            continue
        t_nb = bench_fn(getattr(knb, name), *fargs)
        out_np = getattr(knp, name)(*fargs)
        out_nb = getattr(knb, name)(*fargs)
        assert out_np.tobytes() == out_nb.tobytes(), f"{label}: mismatch"
        print(f"{label:<16}{t_np * 1e3:>10.2f}ms{t_nb * 1e3:>10.2f}ms"
              f"{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
