"""Byte-exact regression against the frozen fixtures.

Regenerate with tests/golden/make_golden.py after an intentional format
or numerics change.
"""

import hashlib
import json
import pathlib

import numpy as np

from cpscodec import bench, blocks, codec, entropy, ppm

GOLDEN = pathlib.Path(__file__).parent / "golden"


def test_init_first_values():
    frozen = json.loads((GOLDEN / "init_values.json").read_text())
    for channels, rec in frozen.items():
        net = blocks.build_canonical_network(int(channels))
        store = blocks.init_weights(net, 0)
        name = next(iter(store.arrays))
        assert name == rec["name"]
        head = store.arrays[name].reshape(-1)[:4]
        np.testing.assert_array_equal(
            head, np.asarray(rec["head"], dtype=np.float32))


def test_coder_stream():
    rng = np.random.default_rng(1234)
    sym = rng.integers(-128, 128, size=4096).astype(np.int32)
    bins = rng.integers(0, entropy.SCALE_BINS, size=4096).astype(np.int32)
    assert entropy.range_encode(sym, bins) == \
        (GOLDEN / "coder_stream.bin").read_bytes()


def test_golden_bitstream_and_reconstruction():
    # frozen configuration: canonical architecture, width 16, seed 0,
    # 512x768 synthetic image, patch 128 (see make_golden.py)
    net = blocks.build_canonical_network(16)
    store = blocks.init_weights(net, 0)
    img = bench.synthetic_image(512, 768, 0)
    bs = codec.encode_tiled(img, net, store, 128)
    assert bs.to_bytes() == (GOLDEN / "golden.cps").read_bytes()

    res = codec.decode_tiled(bs, net, store)
    frozen = dict(line.split() for line in
                  (GOLDEN / "golden_recon.sha256").read_text().splitlines())
    assert hashlib.sha256(
        res.reconstruction.data.tobytes()).hexdigest() == frozen["f32"]
    assert hashlib.sha256(
        ppm.to_u8(res.reconstruction.data[0]).tobytes()).hexdigest() == \
        frozen["u8"]
