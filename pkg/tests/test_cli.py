"""Command surface: exit codes, config merging, and output artifacts."""

import json

import numpy as np
import pytest

from portraitstyle import assets_root
from portraitstyle.cli import main
from portraitstyle.images import ImageBuffer, read_image, write_image
from portraitstyle.network import load_checkpoint


@pytest.fixture(scope="module")
def corpus():
    return assets_root() / "toy_corpus"


@pytest.fixture(scope="module")
def samples():
    return assets_root() / "samples"


@pytest.fixture(scope="module")
def ckpt_path(tmp_path_factory, corpus):
    """Checkpoint shared by the read-only commands: a short training run."""
    path = tmp_path_factory.mktemp("ck") / "net.psty"
    code = main(
        [
            "train",
            "--content-dir", str(corpus / "content"),
            "--style-dir", str(corpus / "style"),
            "--steps", "10",
            "--seed", "1",
            "--out", str(path),
        ]
    )
    assert code == 0
    return path


class TestTrain:
    def test_zero_steps_writes_initial_checkpoint(self, tmp_path, corpus, capsys):
        out = tmp_path / "init.psty"
        code = main(
            [
                "train",
                "--content-dir", str(corpus / "content"),
                "--style-dir", str(corpus / "style"),
                "--steps", "0",
                "--out", str(out),
            ]
        )
        assert code == 0
        assert load_checkpoint(out).step == 0
        assert "checkpoint written" in capsys.readouterr().out

    def test_paper_default_settings_accepted(self, tmp_path, corpus):
        out = tmp_path / "one.psty"
        trace = tmp_path / "trace.csv"
        code = main(
            [
                "train",
                "--content-dir", str(corpus / "content"),
                "--style-dir", str(corpus / "style"),
                "--steps", "1",
                "--lr", "0.0001",
                "--batch", "5",
                "--out", str(out),
                "--trace", str(trace),
            ]
        )
        assert code == 0
        header = trace.read_text().splitlines()[0]
        assert header == "step,pixel_identity,feature_identity,content_aux,style_aux,total"

    def test_missing_corpus_dir_exits_2_naming_path(self, tmp_path, corpus, capsys):
        code = main(
            [
                "train",
                "--content-dir", str(tmp_path / "missing"),
                "--style-dir", str(corpus / "style"),
                "--steps", "1",
                "--out", str(tmp_path / "x.psty"),
            ]
        )
        assert code == 2
        assert "missing" in capsys.readouterr().err

    def test_config_file_provides_values_flags_override(self, tmp_path, corpus):
        cfg = {
            "content_dir": str(corpus / "content"),
            "style_dir": str(corpus / "style"),
            "steps": 3,
            "seed": 4,
        }
        cfg_path = tmp_path / "train.json"
        cfg_path.write_text(json.dumps(cfg))
        out = tmp_path / "cfg.psty"
        code = main(["train", "--config", str(cfg_path), "--steps", "0", "--out", str(out)])
        assert code == 0
        assert load_checkpoint(out).step == 0  # flag overrode the file's 3

    def test_unknown_config_key_exits_2(self, tmp_path, capsys):
        cfg_path = tmp_path / "bad.json"
        cfg_path.write_text(json.dumps({"stepz": 1}))
        code = main(["train", "--config", str(cfg_path), "--steps", "0"])
        assert code == 2
        assert "stepz" in capsys.readouterr().err


class TestStylize:
    def test_low_level_branch_runs(self, tmp_path, samples, ckpt_path):
        out = tmp_path / "low.ppm"
        code = main(
            [
                "stylize",
                "--content", str(samples / "content_64.ppm"),
                "--style", str(samples / "style_64.ppm"),
                "--ckpt", str(ckpt_path),
                "--out", str(out),
                "--w1", "1", "--w2", "0",
            ]
        )
        assert code == 0
        img = read_image(out)
        assert (img.width, img.height) == (64, 64)

    def test_repeat_invocation_byte_identical(self, tmp_path, samples, ckpt_path):
        args = [
            "stylize",
            "--content", str(samples / "content_64.ppm"),
            "--style", str(samples / "style_64.ppm"),
            "--ckpt", str(ckpt_path),
        ]
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_bad_dims_exit_2(self, tmp_path, ckpt_path, capsys):
        odd = tmp_path / "odd.ppm"
        write_image(ImageBuffer(np.zeros((20, 20, 3))), odd)
        code = main(
            [
                "stylize",
                "--content", str(odd),
                "--style", str(odd),
                "--ckpt", str(ckpt_path),
                "--out", str(tmp_path / "o.ppm"),
            ]
        )
        assert code == 2

    def test_missing_required_flag_exit_2(self, tmp_path, capsys):
        code = main(["stylize", "--content", "x.ppm"])
        assert code == 2
        assert "required" in capsys.readouterr().err


class TestPortrait:
    def test_all_ones_mask_equals_foreground_pass(self, tmp_path, samples, ckpt_path):
        ones = tmp_path / "ones.pgm"
        write_image(ImageBuffer(np.ones((64, 64, 1))), ones)
        out = tmp_path / "combo.ppm"
        code = main(
            [
                "portrait",
                "--content", str(samples / "content_64.ppm"),
                "--style", str(samples / "style_64.ppm"),
                "--mask", str(ones),
                "--ckpt", str(ckpt_path),
                "--out", str(out),
                "--debug-passes",
            ]
        )
        assert code == 0
        combo = read_image(out)
        fg = read_image(tmp_path / "combo_fg.ppm")
        assert np.array_equal(combo.data, fg.data)

    def test_background_region_matches_background_pass(self, tmp_path, samples, ckpt_path):
        out = tmp_path / "masked.ppm"
        code = main(
            [
                "portrait",
                "--content", str(samples / "content_64.ppm"),
                "--style", str(samples / "style_64.ppm"),
                "--mask", str(samples / "mask_64.pgm"),
                "--ckpt", str(ckpt_path),
                "--out", str(out),
                "--debug-passes",
            ]
        )
        assert code == 0
        combo = read_image(out).data
        bg = read_image(tmp_path / "masked_bg.ppm").data
        from portraitstyle.masks import load_mask

        m = load_mask(samples / "mask_64.pgm").data.astype(bool)
        outside = ~m
        assert np.array_equal(combo[outside], bg[outside])

    def test_segment_mode_needs_no_mask_file(self, tmp_path, samples, ckpt_path):
        out = tmp_path / "seg.ppm"
        code = main(
            [
                "portrait",
                "--content", str(samples / "content_64.ppm"),
                "--style", str(samples / "style_64.ppm"),
                "--segment", "center_ellipse",
                "--ckpt", str(ckpt_path),
                "--out", str(out),
            ]
        )
        assert code == 0
        assert out.exists()

    def test_empty_segment_mask_exits_2(self, tmp_path, samples, ckpt_path, capsys):
        code = main(
            [
                "portrait",
                "--content", str(samples / "content_64.ppm"),
                "--style", str(samples / "style_64.ppm"),
                "--segment", "luma_threshold",
                "--lo", "2.0", "--hi", "3.0",
                "--ckpt", str(ckpt_path),
                "--out", str(tmp_path / "never.ppm"),
            ]
        )
        assert code == 2
        assert "empty" in capsys.readouterr().err

    def test_requires_mask_or_segment(self, tmp_path, samples, ckpt_path, capsys):
        code = main(
            [
                "portrait",
                "--content", str(samples / "content_64.ppm"),
                "--style", str(samples / "style_64.ppm"),
                "--ckpt", str(ckpt_path),
                "--out", str(tmp_path / "x.ppm"),
            ]
        )
        assert code == 2


class TestSegment:
    def test_writes_mask_file(self, tmp_path, samples):
        out = tmp_path / "m.pgm"
        code = main(["segment", "--input", str(samples / "content_64.ppm"), "--out", str(out)])
        assert code == 0
        img = read_image(out)
        assert img.channels == 1
        assert set(np.unique(img.data)) <= {0.0, 1.0}


class TestGradcheck:
    def test_default_run_passes(self, capsys):
        assert main(["gradcheck", "--seed", "7"]) == 0
        out = capsys.readouterr().out
        assert "full_loss" in out and "FAIL" not in out

    def test_impossible_tolerance_fails(self, capsys):
        assert main(["gradcheck", "--seed", "7", "--tol", "0"]) == 1
        assert "FAIL" in capsys.readouterr().out

    def test_fixed_seed_reports_identically(self, capsys):
        assert main(["gradcheck", "--seed", "3"]) == 0
        first = capsys.readouterr().out
        assert main(["gradcheck", "--seed", "3"]) == 0
        second = capsys.readouterr().out
        assert first == second
