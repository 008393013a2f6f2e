"""The numba and numpy kernels must agree bit for bit: golden fixtures
and the tiled/full equivalence proof hold on either backend."""

import os
import subprocess
import sys

import numpy as np
import pytest

from cpscodec import accel
from cpscodec import kernels_numpy as knp

numba_missing = not accel.has_numba
if not numba_missing:
    from cpscodec import kernels_numba as knb


@pytest.mark.skipif(numba_missing, reason="numba not importable")
class TestKernelAgreement:
    def test_conv2d(self):
        rng = np.random.default_rng(0)
        for k, s in ((1, 1), (2, 2), (3, 1), (3, 2), (5, 3)):
            x = rng.standard_normal((4, 21, 19)).astype(np.float32)
            w = rng.standard_normal((3, 4, k, k)).astype(np.float32)
            b = rng.standard_normal(3).astype(np.float32)
            a = knb.conv2d(x, w, b, s)
            c = knp.conv2d(x, w, b, s)
            assert a.tobytes() == c.tobytes()

    def test_tconv2d(self):
        rng = np.random.default_rng(1)
        for k, s in ((1, 1), (2, 2), (3, 1), (3, 2)):
            x = rng.standard_normal((4, 9, 8)).astype(np.float32)
            w = rng.standard_normal((4, 3, k, k)).astype(np.float32)
            b = rng.standard_normal(3).astype(np.float32)
            a = knb.tconv2d(x, w, b, s)
            c = knp.tconv2d(x, w, b, s)
            assert a.tobytes() == c.tobytes()

    def test_leaky(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((2, 5, 7, 3)).astype(np.float32)
        assert knb.leaky(x).tobytes() == knp.leaky(x).tobytes()

    def test_splitmix(self):
        a = np.empty(1000, dtype=np.float32)
        b = np.empty(1000, dtype=np.float32)
        knb.splitmix_fill(np.uint64(7), np.uint64(123), -0.5, 0.5, a)
        knp.splitmix_fill(np.uint64(7), np.uint64(123), -0.5, 0.5, b)
        assert a.tobytes() == b.tobytes()

    def test_splitmix_offset_seek(self):
        # the stream is a pure function of (seed, index)
        a = np.empty(100, dtype=np.float32)
        b = np.empty(50, dtype=np.float32)
        knp.splitmix_fill(np.uint64(3), np.uint64(0), 0.0, 1.0, a)
        knp.splitmix_fill(np.uint64(3), np.uint64(50), 0.0, 1.0, b)
        np.testing.assert_array_equal(a[50:], b)


class TestEnvFlag:
    def test_forced_numpy_backend(self):
        env = dict(os.environ, CPSCODEC_BACKEND="numpy")
        out = subprocess.run(
            [sys.executable, "-c",
             "from cpscodec import accel; print(accel.active_backend)"],
            capture_output=True, text=True, env=env, check=True)
        assert out.stdout.strip() == "numpy"

    def test_bad_value_rejected(self):
        env = dict(os.environ, CPSCODEC_BACKEND="cuda")
        out = subprocess.run(
            [sys.executable, "-c", "import cpscodec"],
            capture_output=True, text=True, env=env)
        assert out.returncode != 0

    def test_numpy_backend_bitstream_matches(self):
        """The env flag must not change a single output byte."""
        script = (
            "import numpy as np\n"
            "from cpscodec import bench, blocks, codec\n"
            "net = blocks.build_canonical_network(4)\n"
            "store = blocks.init_weights(net, 0)\n"
            "img = bench.synthetic_image(128, 128, 0)\n"
            "bs = codec.encode_tiled(img, net, store, 128)\n"
            "import sys; sys.stdout.buffer.write(bs.to_bytes())\n")
        outs = []
        for backend in ("numpy", "auto"):
            env = dict(os.environ, CPSCODEC_BACKEND=backend)
            r = subprocess.run([sys.executable, "-c", script],
                               capture_output=True, env=env, check=True)
            outs.append(r.stdout)
        assert outs[0] == outs[1] and len(outs[0]) > 50
