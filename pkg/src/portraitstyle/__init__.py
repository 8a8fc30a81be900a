"""Mask-aware arbitrary style transfer for portrait images.

Two stylization passes with different low/high-level feature fusion weights
are composited through a binary person mask: style-dominant background,
content-dominant subject.
"""

from pathlib import Path

from .attention import AttentionBlock, FusionWeights, fuse_levels, sanet_attend
from .autodiff import Tensor, backward, conv2d, finite_diff_grad
from .images import ImageBuffer, from_tensor, read_image, to_tensor, write_image
from .masks import Mask, crop_by_mask, feather, load_mask, trivial_segment
from .network import (
    Checkpoint,
    FeaturePyramid,
    StyleNet,
    init_parameters,
    load_checkpoint,
    save_checkpoint,
)
from .pipeline import (
    BACKGROUND_PRESET,
    PORTRAIT_PRESET,
    PassPreset,
    composite,
    portrait_stylize,
    stylize,
)
from .training import (
    AdamState,
    LossTerms,
    TrainConfig,
    adam_step,
    content_loss,
    identity_loss,
    random_crop,
    style_loss,
    train,
)

__version__ = "0.1.0"


def assets_root() -> Path:
    """Directory holding the bundled toy corpus and demo images."""
    return Path(__file__).parent / "assets"
