"""Two-pass portrait stylization composited through a person mask.

The frame is stylized twice with different fusion weights: a style-dominant
pass for the background and a content-dominant pass for the subject. The
binary mask then blends the two full-frame results pixel by pixel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .attention import FusionWeights
from .autodiff import ShapeError
from .images import ImageBuffer, from_tensor, to_tensor
from .masks import Mask, feather
from .network import Checkpoint, StyleNet


@dataclass(frozen=True)
class PassPreset:
    """A named fusion-weight configuration for one stylization pass."""

    name: str
    fusion: FusionWeights
    description: str = ""


# Default weights are implementation configuration, overridable everywhere;
# low-level emphasis keeps content, high-level emphasis pushes style.
BACKGROUND_PRESET = PassPreset(
    "background", FusionWeights(0.3, 1.0), "style-dominant pass for the backdrop"
)
PORTRAIT_PRESET = PassPreset(
    "portrait", FusionWeights(1.0, 0.2), "content-dominant pass for the subject"
)


def _check_stylizable(img: ImageBuffer, role: str) -> None:
    if img.channels != 3:
        raise ShapeError(f"{role} image must be RGB, got {img.channels} channel(s)")
    if img.height % 8 != 0 or img.width % 8 != 0:
        raise ShapeError(
            f"{role} dimensions must be divisible by 8, got {img.width}x{img.height}"
        )


def _net_of(ckpt) -> StyleNet:
    return ckpt if isinstance(ckpt, StyleNet) else StyleNet(ckpt)


def stylize(
    content: ImageBuffer, style: ImageBuffer, weights: FusionWeights, ckpt: Checkpoint
) -> ImageBuffer:
    """Single transfer pass; output has exactly the content dimensions."""
    _check_stylizable(content, "content")
    _check_stylizable(style, "style")
    net = _net_of(ckpt)
    with ad.no_grad():
        out = net.forward(to_tensor(content), to_tensor(style), weights)
    return from_tensor(out)


def composite(bg: ImageBuffer, fg: ImageBuffer, mask: Mask) -> ImageBuffer:
    """Per-pixel linear blend: mask*fg + (1-mask)*bg, clamped to [0,1]."""
    if bg.data.shape != fg.data.shape:
        raise ShapeError(
            f"pass dimensions differ: {bg.data.shape} vs {fg.data.shape}"
        )
    if (mask.height, mask.width) != (bg.height, bg.width):
        raise ShapeError(
            f"mask {mask.width}x{mask.height} does not match image {bg.width}x{bg.height}"
        )
    m = mask.data[:, :, None]
    return ImageBuffer(np.clip(m * fg.data + (1.0 - m) * bg.data, 0.0, 1.0))


def portrait_stylize(
    content: ImageBuffer,
    style: ImageBuffer,
    mask: Mask,
    bg: PassPreset = BACKGROUND_PRESET,
    fg: PassPreset = PORTRAIT_PRESET,
    ckpt: Checkpoint = None,
    feather_radius: int = 0,
) -> ImageBuffer:
    """Run both passes and composite them through the (optionally feathered) mask.

    An empty mask is permitted and degenerates to the pure background pass.
    """
    if (mask.height, mask.width) != (content.height, content.width):
        raise ShapeError(
            f"mask {mask.width}x{mask.height} does not match content "
            f"{content.width}x{content.height}"
        )
    net = _net_of(ckpt)
    background = stylize(content, style, bg.fusion, net)
    foreground = stylize(content, style, fg.fusion, net)
    return composite(background, foreground, feather(mask, feather_radius))
