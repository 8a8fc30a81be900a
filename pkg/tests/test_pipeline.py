"""Two-pass stylization and mask compositing contracts."""

import numpy as np
import pytest

from portraitstyle import assets_root
from portraitstyle.attention import FusionWeights
from portraitstyle.autodiff import ShapeError
from portraitstyle.images import ImageBuffer, read_image
from portraitstyle.masks import Mask
from portraitstyle.network import StyleNet, init_parameters
from portraitstyle.pipeline import (
    BACKGROUND_PRESET,
    PORTRAIT_PRESET,
    PassPreset,
    composite,
    portrait_stylize,
    stylize,
)
from portraitstyle.training import TrainConfig, train


@pytest.fixture(scope="module")
def ckpt():
    return init_parameters(13)


@pytest.fixture(scope="module")
def trained_ckpt():
    corpus = assets_root() / "toy_corpus"
    config = TrainConfig(corpus / "content", corpus / "style", steps=25, seed=3)
    checkpoint, _ = train(config)
    return checkpoint


@pytest.fixture(scope="module")
def sample_pair():
    samples = assets_root() / "samples"
    return read_image(samples / "content_64.ppm"), read_image(samples / "style_64.ppm")


class TestStylize:
    def test_output_shape_follows_content(self, ckpt):
        rng = np.random.default_rng(0)
        content = ImageBuffer(rng.uniform(size=(64, 64, 3)))
        style = ImageBuffer(rng.uniform(size=(32, 32, 3)))
        out = stylize(content, style, FusionWeights(1.0, 1.0), ckpt)
        assert (out.height, out.width, out.channels) == (64, 64, 3)

    def test_determinism(self, ckpt):
        rng = np.random.default_rng(1)
        content = ImageBuffer(rng.uniform(size=(16, 16, 3)))
        style = ImageBuffer(rng.uniform(size=(16, 16, 3)))
        a = stylize(content, style, FusionWeights(0.5, 0.5), ckpt)
        b = stylize(content, style, FusionWeights(0.5, 0.5), ckpt)
        assert np.array_equal(a.data, b.data)

    def test_fusion_weights_change_output(self, trained_ckpt, sample_pair):
        content, style = sample_pair
        low = stylize(content, style, FusionWeights(1.0, 0.0), trained_ckpt)
        high = stylize(content, style, FusionWeights(0.0, 1.0), trained_ckpt)
        assert np.abs(low.data - high.data).max() > 0

    def test_indivisible_dims_rejected(self, ckpt):
        with pytest.raises(ShapeError, match="divisible"):
            stylize(
                ImageBuffer(np.zeros((20, 20, 3))),
                ImageBuffer(np.zeros((16, 16, 3))),
                FusionWeights(1.0, 1.0),
                ckpt,
            )


class TestComposite:
    def test_half_mask_is_mean(self):
        rng = np.random.default_rng(2)
        bg = ImageBuffer(rng.uniform(size=(8, 8, 3)))
        fg = ImageBuffer(rng.uniform(size=(8, 8, 3)))
        out = composite(bg, fg, Mask(np.full((8, 8), 0.5)))
        assert np.abs(out.data - (bg.data + fg.data) / 2).max() <= 1e-12

    def test_equal_passes_ignore_mask(self):
        rng = np.random.default_rng(3)
        img = ImageBuffer(rng.uniform(size=(8, 8, 3)))
        mask = Mask((rng.uniform(size=(8, 8)) > 0.5).astype(np.float64))
        out = composite(img, ImageBuffer(img.data.copy()), mask)
        assert np.array_equal(out.data, img.data)

    def test_matches_per_pixel_loop_oracle(self):
        rng = np.random.default_rng(4)
        bg = ImageBuffer(rng.uniform(size=(5, 6, 3)))
        fg = ImageBuffer(rng.uniform(size=(5, 6, 3)))
        m = rng.uniform(size=(5, 6))
        out = composite(bg, fg, Mask(m))
        expected = np.zeros((5, 6, 3))
        for i in range(5):
            for j in range(6):
                for c in range(3):
                    expected[i, j, c] = m[i, j] * fg.data[i, j, c] + (1 - m[i, j]) * bg.data[i, j, c]
        assert np.abs(out.data - expected).max() <= 1e-12

    def test_convex_combination_bounds(self):
        rng = np.random.default_rng(5)
        bg = ImageBuffer(rng.uniform(size=(8, 8, 3)))
        fg = ImageBuffer(rng.uniform(size=(8, 8, 3)))
        out = composite(bg, fg, Mask(rng.uniform(size=(8, 8))))
        lo = np.minimum(bg.data, fg.data)
        hi = np.maximum(bg.data, fg.data)
        assert (out.data >= lo - 1e-12).all()
        assert (out.data <= hi + 1e-12).all()

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            composite(
                ImageBuffer(np.zeros((8, 8, 3))),
                ImageBuffer(np.zeros((8, 8, 3))),
                Mask(np.zeros((4, 4))),
            )


class TestPortraitStylize:
    @pytest.fixture(scope="class")
    def scene(self, ckpt):
        rng = np.random.default_rng(6)
        content = ImageBuffer(rng.uniform(size=(16, 16, 3)))
        style = ImageBuffer(rng.uniform(size=(16, 16, 3)))
        net = StyleNet(ckpt)
        bg_img = stylize(content, style, BACKGROUND_PRESET.fusion, net)
        fg_img = stylize(content, style, PORTRAIT_PRESET.fusion, net)
        return content, style, net, bg_img, fg_img

    def test_all_ones_mask_is_foreground(self, scene):
        content, style, net, _, fg_img = scene
        out = portrait_stylize(content, style, Mask(np.ones((16, 16))), ckpt=net)
        assert np.array_equal(out.data, fg_img.data)

    def test_all_zeros_mask_is_background(self, scene):
        content, style, net, bg_img, _ = scene
        out = portrait_stylize(content, style, Mask(np.zeros((16, 16))), ckpt=net)
        assert np.array_equal(out.data, bg_img.data)

    @pytest.mark.parametrize("seed", range(4))
    def test_random_binary_masks_select_per_pixel(self, scene, seed):
        content, style, net, bg_img, fg_img = scene
        m = (np.random.default_rng(seed).uniform(size=(16, 16)) > 0.5).astype(np.float64)
        out = portrait_stylize(content, style, Mask(m), ckpt=net)
        sel = m[:, :, None].astype(bool)
        assert np.array_equal(out.data[sel.repeat(3, axis=2)], fg_img.data[sel.repeat(3, axis=2)])
        inv = ~sel
        assert np.array_equal(out.data[inv.repeat(3, axis=2)], bg_img.data[inv.repeat(3, axis=2)])

    def test_identical_presets_reduce_to_single_pass(self, scene):
        content, style, net, _, _ = scene
        preset = PassPreset("same", FusionWeights(0.6, 0.4))
        m = (np.random.default_rng(9).uniform(size=(16, 16)) > 0.5).astype(np.float64)
        two_pass = portrait_stylize(content, style, Mask(m), bg=preset, fg=preset, ckpt=net)
        single = stylize(content, style, preset.fusion, net)
        assert np.array_equal(two_pass.data, single.data)

    def test_output_dims_follow_content(self, ckpt):
        rng = np.random.default_rng(8)
        content = ImageBuffer(rng.uniform(size=(24, 32, 3)))
        style = ImageBuffer(rng.uniform(size=(16, 16, 3)))
        out = portrait_stylize(content, style, Mask(np.ones((24, 32))), ckpt=ckpt)
        assert (out.height, out.width) == (24, 32)

    def test_mask_dimension_mismatch_rejected(self, ckpt):
        with pytest.raises(ShapeError, match="mask"):
            portrait_stylize(
                ImageBuffer(np.zeros((16, 16, 3))),
                ImageBuffer(np.zeros((16, 16, 3))),
                Mask(np.ones((8, 8))),
                ckpt=ckpt,
            )

    def test_empty_mask_degenerates_to_background(self, scene):
        content, style, net, bg_img, _ = scene
        out = portrait_stylize(content, style, Mask(np.zeros((16, 16))), ckpt=net)
        assert np.array_equal(out.data, bg_img.data)

    def test_feathered_mask_blends(self, scene):
        content, style, net, bg_img, fg_img = scene
        m = np.zeros((16, 16))
        m[4:12, 4:12] = 1.0
        out = portrait_stylize(content, style, Mask(m), ckpt=net, feather_radius=2)
        lo = np.minimum(bg_img.data, fg_img.data)
        hi = np.maximum(bg_img.data, fg_img.data)
        assert (out.data >= lo - 1e-12).all() and (out.data <= hi + 1e-12).all()
