import gc

import numpy as np
import pytest

from cpscodec import blocks, codec, tiling
from cpscodec.codec import Bitstream, decode_full, decode_tiled, encode_full, encode_tiled
from cpscodec.errors import FormatError, PlanError
from cpscodec.tensor import Tensor, alloc_stats, reset_peak

from conftest import synth


class TestBitstreamContainer:
    def test_roundtrip(self):
        bs = Bitstream(256, 192, 3, 128, 64, 3, 7, 0xDEADBEEF,
                       b"zz-payload", b"yy-payload-bytes")
        back = Bitstream.from_bytes(bs.to_bytes())
        assert back == bs

    def test_checksum_detects_corruption(self):
        bs = Bitstream(64, 64, 3, 64, 0, 0, 0, 1, b"abc", b"defg")
        raw = bytearray(bs.to_bytes())
        raw[-2] ^= 0x40
        with pytest.raises(FormatError, match="checksum"):
            Bitstream.from_bytes(bytes(raw))

    def test_truncation(self):
        bs = Bitstream(64, 64, 3, 64, 0, 0, 0, 1, b"abc", b"defg")
        with pytest.raises(FormatError):
            Bitstream.from_bytes(bs.to_bytes()[:-3])
        with pytest.raises(FormatError):
            Bitstream.from_bytes(b"CPS1")

    def test_bad_magic(self):
        raw = bytearray(Bitstream(64, 64, 3, 64, 0, 0, 0, 1, b"", b"").to_bytes())
        raw[0] = ord("X")
        with pytest.raises(FormatError, match="magic"):
            Bitstream.from_bytes(bytes(raw))

    def test_bpp_uses_prepad_dims(self):
        bs = Bitstream(128, 128, 3, 128, 64, 28, 48, 1, b"x" * 10, b"y" * 20)
        assert bs.orig_width == 100 and bs.orig_height == 80
        assert bs.bpp() == 8.0 * len(bs.to_bytes()) / (100 * 80)


class TestSingleTile:
    def test_tiled_equals_full_degenerate(self, net8, store8):
        img = synth(128, 128, 0)
        a = encode_tiled(img, net8, store8, 128)
        b = encode_full(img, net8, store8, 128)
        assert a.to_bytes() == b.to_bytes()


class TestEquivalence:
    def test_bitstreams_and_reconstructions(self, net8, store8):
        for h, w, w_p, seed in ((192, 256, 128, 1), (256, 192, 80, 2)):
            img = synth(h, w, seed)
            bs_t = encode_tiled(img, net8, store8, w_p)
            bs_f = encode_full(img, net8, store8, w_p)
            assert bs_t.to_bytes() == bs_f.to_bytes()
            r_t = decode_tiled(bs_t, net8, store8)
            r_f = decode_full(bs_f, net8, store8)
            assert np.array_equal(r_t.reconstruction.data,
                                  r_f.reconstruction.data)

    def test_padded_path(self, net8, store8):
        img = synth(200, 250, 3)
        with pytest.raises(PlanError, match="pad"):
            encode_tiled(img, net8, store8, 128)
        bs_t = encode_tiled(img, net8, store8, 128, allow_pad=True)
        bs_f = encode_full(img, net8, store8, 128, allow_pad=True)
        assert (bs_t.height, bs_t.width) == (256, 256)
        assert (bs_t.pad_bottom, bs_t.pad_right) == (56, 6)
        assert bs_t.to_bytes() == bs_f.to_bytes()
        r = decode_tiled(bs_t, net8, store8, reference=img)
        assert r.reconstruction.dims == (1, 3, 200, 250)
        assert r.psnr is not None

    def test_latent_roundtrip_exact(self, net8, store8):
        # decoded y_hat/z_hat equal the encoder's quantized planes
        img = synth(192, 192, 4)
        y = codec.analysis_full(img, net8, store8)
        payload_z, payload_y, rate, y_hat_enc = codec.entropy_encode(
            y, net8, store8)
        bs = Bitstream(192, 192, 3, 128, net8.o, 0, 0,
                       store8.store_hash(), payload_z, payload_y)
        y_hat_dec, rate_dec = codec.entropy_decode(bs, net8, store8)
        np.testing.assert_array_equal(y_hat_enc.data, y_hat_dec.data)
        assert rate == rate_dec


class TestDecodeGuards:
    def test_wrong_weights_rejected(self, net8, store8):
        img = synth(128, 128, 5)
        bs = encode_tiled(img, net8, store8, 128)
        other = blocks.init_weights(net8, 999)
        with pytest.raises(FormatError, match="weight store"):
            decode_tiled(bs, net8, other)


class TestRateAccounting:
    def test_bpp_and_rate_bound(self, net8, store8):
        img = synth(192, 256, 6)
        bs = encode_tiled(img, net8, store8, 128)
        res = decode_tiled(bs, net8, store8)
        assert res.bpp == 8.0 * len(bs.to_bytes()) / (192 * 256)
        assert abs(res.rate.bytes_y * 8 - res.rate.bits_y) <= \
            0.02 * res.rate.bits_y + 64
        assert abs(res.rate.bytes_z * 8 - res.rate.bits_z) <= \
            0.02 * res.rate.bits_z + 64


class TestZeroLatent:
    def test_bias_propagation(self, net8, store8):
        # zero latent -> synthesis depends only on biases/weight structure,
        # identically in the tiled and full paths
        z = Tensor(np.zeros((1, 8, 16, 16), dtype=np.float32), "latent")
        full = codec.synthesis_full(z, net8, store8)
        plan = tiling.plan_decode(16, 16, 8, net8)
        tiled = codec.synthesis_tiled(z, net8, store8, plan)
        np.testing.assert_array_equal(full.data, tiled.data)
        # every spatial position carries the same bias-driven value
        interior = full.data[0, :, 80:-80, 80:-80]
        assert np.ptp(interior.reshape(interior.shape[0], -1), axis=1).max() \
            == 0.0


class TestMemoryBehavior:
    def test_image_domain_flat_latent_scales(self, net8, store8):
        peaks_img, peaks_lat, peaks_full = [], [], []
        for n in (256, 512, 768):
            img = synth(n, n, 7)
            gc.collect()
            reset_peak()
            base_i = alloc_stats("image").live_bytes
            base_l = alloc_stats("latent").live_bytes
            encode_tiled(img, net8, store8, 128)
            peaks_img.append(alloc_stats("image").peak_bytes - base_i)
            peaks_lat.append(alloc_stats("latent").peak_bytes - base_l)
            gc.collect()
            reset_peak()
            base_t = alloc_stats().live_bytes
            encode_full(img, net8, store8, 128)
            peaks_full.append(alloc_stats().peak_bytes - base_t)
        assert max(peaks_img) <= 1.10 * min(peaks_img)
        assert peaks_full[0] < peaks_full[1] < peaks_full[2]
        # latent-plane bytes scale with pixel count / rho^2
        assert peaks_lat[1] / peaks_lat[0] == pytest.approx(4.0, rel=0.3)
