"""Style attention and two-level weighted feature fusion.

Each content position attends over every style position: queries and keys
come from 1x1 convs of instance-normalized features, values from a 1x1 conv
of the raw style features, and the attended result is added back onto the
content features. Fusion combines the two pyramid levels as a weighted sum,
projecting the deeper level to the shallower channel count first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor


@dataclass
class AttentionBlock:
    """1x1 conv parameters for the query (f), key (g), and value (h) maps.

    f and g map C -> C/2 channels; h maps C -> C.
    """

    f_weight: Tensor
    f_bias: Tensor
    g_weight: Tensor
    g_bias: Tensor
    h_weight: Tensor
    h_bias: Tensor

    def __post_init__(self):
        c = self.f_weight.shape[1]
        if c % 2 != 0:
            raise ShapeError(f"attention channel count must be even, got {c}")
        half = c // 2
        for name, t, want in (
            ("f", self.f_weight, (half, c, 1, 1)),
            ("g", self.g_weight, (half, c, 1, 1)),
            ("h", self.h_weight, (c, c, 1, 1)),
        ):
            if t.shape != want:
                raise ShapeError(f"attention map {name} has shape {t.shape}, expected {want}")

    @property
    def channels(self) -> int:
        return self.f_weight.shape[1]


@dataclass(frozen=True)
class FusionWeights:
    """Importance of the low-level (w1) and high-level (w2) branches."""

    w1: float
    w2: float

    def __post_init__(self):
        if self.w1 < 0 or self.w2 < 0:
            raise ValueError(f"fusion weights must be >= 0, got ({self.w1}, {self.w2})")
        if self.w1 == 0 and self.w2 == 0:
            raise ValueError("fusion weights must not both be zero")


def _flatten_positions(x: Tensor) -> Tensor:
    """(1,C,H,W) -> (H*W, C) with spatial positions as rows."""
    _, c, h, w = x.shape
    return ad.transpose2d(ad.reshape(x, (c, h * w)))


def _conv1x1(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    return ad.conv2d(x, weight, bias, stride=1, padding="zero", pad_size=0)


def sanet_attend(block: AttentionBlock, fc: Tensor, fs: Tensor) -> Tensor:
    """Attend content features over style features; residual added back.

    Output shape always equals the content feature shape, for any style
    spatial size. Attention is a set operation over style positions.
    """
    if fc.ndim != 4 or fs.ndim != 4 or fc.shape[0] != 1 or fs.shape[0] != 1:
        raise ShapeError(
            f"attention expects single-sample (1,C,H,W) features, got {fc.shape} and {fs.shape}"
        )
    c = block.channels
    if fc.shape[1] != c or fs.shape[1] != c:
        raise ShapeError(
            f"attention block is for {c} channels, got content {fc.shape[1]} "
            f"and style {fs.shape[1]}"
        )
    _, _, hc, wc = fc.shape
    q = _flatten_positions(_conv1x1(ad.instance_norm(fc), block.f_weight, block.f_bias))
    k = _flatten_positions(_conv1x1(ad.instance_norm(fs), block.g_weight, block.g_bias))
    v = _flatten_positions(_conv1x1(fs, block.h_weight, block.h_bias))
    attn = ad.softmax_rows(ad.matmul(q, ad.transpose2d(k)))
    out = ad.reshape(ad.transpose2d(ad.matmul(attn, v)), (1, c, hc, wc))
    return ad.add(out, fc)


def fuse_levels(
    s4: Tensor,
    s5: Tensor,
    weights: FusionWeights,
    proj_weight: Tensor,
    proj_bias: Tensor,
) -> Tensor:
    """Weighted sum of the two attention outputs at the f4 resolution.

    The deeper level is nearest-upsampled 2x and projected through a learned
    1x1 conv to match the shallow channel count, then
    result = s4*w1 + proj(upsampled s5)*w2.
    """
    if s4.ndim != 4 or s5.ndim != 4:
        raise ShapeError(f"fusion expects (N,C,H,W) inputs, got {s4.shape} and {s5.shape}")
    _, _, h4, w4 = s4.shape
    _, _, h5, w5 = s5.shape
    if h5 * 2 != h4 or w5 * 2 != w4:
        raise ShapeError(
            f"high-level features must be half resolution: got {h5}x{w5} vs {h4}x{w4}"
        )
    if proj_weight.shape[1] != s5.shape[1] or proj_weight.shape[0] != s4.shape[1]:
        raise ShapeError(
            f"projection maps {proj_weight.shape[1]}->{proj_weight.shape[0]} channels, "
            f"features have {s5.shape[1]} and {s4.shape[1]}"
        )
    projected = _conv1x1(ad.upsample_nearest(s5, 2), proj_weight, proj_bias)
    return ad.add(ad.scale(s4, weights.w1), ad.scale(projected, weights.w2))
