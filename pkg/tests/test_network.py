"""Encoder/decoder contracts, parameter init, and checkpoint serialization."""

import numpy as np
import pytest

from portraitstyle import autodiff as ad
from portraitstyle.autodiff import ShapeError, Tensor
from portraitstyle.network import (
    C4,
    C5,
    Checkpoint,
    CheckpointError,
    StyleNet,
    architecture_digest,
    init_parameters,
    load_checkpoint,
    parameter_shapes,
    save_checkpoint,
)


@pytest.fixture(scope="module")
def net():
    return StyleNet(init_parameters(7))


class TestEncode:
    def test_pyramid_shapes(self, net):
        pyr = net.encode(Tensor(np.random.default_rng(0).uniform(size=(1, 3, 32, 32))))
        assert pyr.f4.shape == (1, C4, 8, 8)
        assert pyr.f5.shape == (1, C5, 4, 4)

    def test_determinism(self, net):
        x = np.random.default_rng(1).uniform(size=(1, 3, 16, 16))
        a = net.encode(Tensor(x))
        b = net.encode(Tensor(x))
        assert np.array_equal(a.f4.data, b.f4.data)
        assert np.array_equal(a.f5.data, b.f5.data)

    def test_zero_parameters_give_zero_features(self):
        ckpt = init_parameters(0)
        zeroed = Checkpoint(params={k: np.zeros_like(v) for k, v in ckpt.params.items()})
        znet = StyleNet(zeroed)
        pyr = znet.encode(Tensor(np.random.default_rng(2).uniform(size=(1, 3, 16, 16))))
        assert np.array_equal(pyr.f4.data, np.zeros_like(pyr.f4.data))
        assert np.array_equal(pyr.f5.data, np.zeros_like(pyr.f5.data))

    def test_indivisible_shape_names_requirement(self, net):
        with pytest.raises(ShapeError, match="divisible by 8"):
            net.encode(Tensor(np.zeros((1, 3, 20, 16))))

    def test_too_small_rejected(self, net):
        with pytest.raises(ShapeError, match=">= 16"):
            net.encode(Tensor(np.zeros((1, 3, 8, 8))))

    @pytest.mark.parametrize("size", [16, 24, 40, 64, 88, 128])
    def test_shape_contract_across_sizes(self, net, size):
        x = Tensor(np.zeros((1, 3, size, size)))
        pyr = net.encode(x)
        assert pyr.f4.shape == (1, C4, size // 4, size // 4)
        assert pyr.f5.shape == (1, C5, size // 8, size // 8)
        assert pyr.f5.shape[2] * 2 == pyr.f4.shape[2]
        out = net.decode(pyr.f4)
        assert out.shape == (1, 3, size, size)


class TestDecode:
    def test_output_shape(self, net):
        out = net.decode(Tensor(np.random.default_rng(3).normal(size=(1, C4, 8, 8))))
        assert out.shape == (1, 3, 32, 32)

    def test_determinism(self, net):
        res = np.random.default_rng(4).normal(size=(1, C4, 4, 4))
        assert np.array_equal(net.decode(Tensor(res)).data, net.decode(Tensor(res)).data)

    def test_channel_mismatch(self, net):
        with pytest.raises(ShapeError):
            net.decode(Tensor(np.zeros((1, 3, 8, 8))))

    def test_gradient_flows_to_input(self):
        tnet = StyleNet(init_parameters(5), trainable=True)
        res0 = np.random.default_rng(6).normal(size=(1, C4, 4, 4)) * 0.3
        res = Tensor(res0, requires_grad=True)
        ad.sum_all(tnet.decode(res)).backward()
        assert np.abs(res.grad).max() > 0
        numeric = ad.finite_diff_grad(lambda t: ad.sum_all(tnet.decode(t)), Tensor(res0))
        denom = np.maximum(np.maximum(np.abs(numeric), np.abs(res.grad)), 1e-3)
        assert (np.abs(res.grad - numeric) / denom).max() <= 1e-4


class TestInitParameters:
    def test_seed_reproducibility(self):
        a, b = init_parameters(7), init_parameters(7)
        assert a.params.keys() == b.params.keys()
        for k in a.params:
            assert np.array_equal(a.params[k], b.params[k])

    def test_distinct_seeds_differ(self):
        a, b = init_parameters(7), init_parameters(8)
        assert any(not np.array_equal(a.params[k], b.params[k]) for k in a.params)

    def test_he_scaling_on_large_layers(self):
        ckpt = init_parameters(11)
        for name, arr in ckpt.params.items():
            if not name.endswith(".weight") or arr.size < 1000:
                continue
            fan_in = arr.shape[1] * arr.shape[2] * arr.shape[3]
            expected = np.sqrt(2.0 / fan_in)
            assert abs(arr.std() - expected) / expected < 0.2, name

    def test_biases_zero(self):
        ckpt = init_parameters(3)
        for name, arr in ckpt.params.items():
            if name.endswith(".bias"):
                assert np.array_equal(arr, np.zeros_like(arr))


class TestCheckpointIO:
    def test_round_trip_exact(self, tmp_path):
        ckpt = init_parameters(9)
        ckpt.step = 123
        path = tmp_path / "net.psty"
        save_checkpoint(ckpt, path)
        back = load_checkpoint(path)
        assert back.step == 123
        assert back.digest == architecture_digest()
        assert back.params.keys() == ckpt.params.keys()
        for k in ckpt.params:
            assert np.array_equal(back.params[k], ckpt.params[k])

    def test_corrupted_version_is_version_error(self, tmp_path):
        path = tmp_path / "net.psty"
        save_checkpoint(init_parameters(0), path)
        blob = bytearray(path.read_bytes())
        blob[4] = 0xEE  # version field
        path.write_bytes(bytes(blob))
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.psty"
        path.write_bytes(b"NOPE" + bytes(32))
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(path)

    def test_crc_corruption(self, tmp_path):
        path = tmp_path / "net.psty"
        save_checkpoint(init_parameters(0), path)
        blob = bytearray(path.read_bytes())
        blob[len(blob) // 2] ^= 0x55
        path.write_bytes(bytes(blob))
        with pytest.raises(CheckpointError, match="CRC"):
            load_checkpoint(path)

    def test_missing_key_named(self, tmp_path):
        ckpt = init_parameters(0)
        del ckpt.params["dec2.bias"]
        path = tmp_path / "partial.psty"
        save_checkpoint(ckpt, path)
        with pytest.raises(CheckpointError, match="dec2.bias"):
            load_checkpoint(path)

    def test_unknown_key_named(self, tmp_path):
        ckpt = init_parameters(0)
        ckpt.params["rogue.weight"] = np.zeros(3)
        path = tmp_path / "extra.psty"
        save_checkpoint(ckpt, path)
        with pytest.raises(CheckpointError, match="rogue.weight"):
            load_checkpoint(path)

    def test_shape_mismatch_detected(self, tmp_path):
        ckpt = init_parameters(0)
        ckpt.params["dec3.bias"] = np.zeros(7)
        path = tmp_path / "warped.psty"
        save_checkpoint(ckpt, path)
        with pytest.raises(CheckpointError, match="dec3.bias"):
            load_checkpoint(path)


def test_parameter_shapes_cover_attention_and_fusion():
    shapes = parameter_shapes()
    assert shapes["attn4.f.weight"] == (C4 // 2, C4, 1, 1)
    assert shapes["attn5.h.weight"] == (C5, C5, 1, 1)
    assert shapes["fuse.proj.weight"] == (C4, C5, 1, 1)


def test_end_to_end_forward_is_differentiable():
    from portraitstyle.attention import FusionWeights

    tnet = StyleNet(init_parameters(21), trainable=True)
    rng = np.random.default_rng(21)
    c = Tensor(rng.uniform(size=(1, 3, 16, 16)))
    s = Tensor(rng.uniform(size=(1, 3, 16, 16)))
    out = tnet.forward(c, s, FusionWeights(1.0, 1.0))
    ad.sum_all(out).backward()
    grads = [t.grad for t in tnet.parameters().values() if t.grad is not None]
    assert grads and any(np.abs(g).max() > 0 for g in grads)
