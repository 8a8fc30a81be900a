"""Binary person masks: loading, trivial segmentation, cropping, feathering.

A mask is a single-channel raster in [0,1]; 1 marks the subject. Loading
thresholds at the byte level so masks are exactly binary; feathering is the
only operation that introduces fractional values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .images import ImageBuffer, ImageFormatError, read_image


class MaskError(ValueError):
    """Mask cannot be produced or does not fit its image."""


@dataclass
class Mask:
    data: np.ndarray  # (H, W) floats in [0,1]

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise MaskError(f"mask data must be 2-D, got shape {self.data.shape}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class BoundingBox:
    """Pixel rectangle: x/y is the top-left corner, dimensions 8-aligned."""

    x: int
    y: int
    width: int
    height: int


def load_mask(path, threshold: int = 128) -> Mask:
    """Load a grayscale PNG/PGM file and binarize: byte >= threshold -> 1."""
    img = read_image(path)
    if img.channels != 1:
        raise ImageFormatError(
            f"{path}: mask files must be grayscale; convert the RGB image to "
            "a single-channel PNG or PGM first"
        )
    bytes_ = np.floor(img.data[:, :, 0] * 255.0 + 0.5)
    return Mask(np.where(bytes_ >= threshold, 1.0, 0.0))


def trivial_segment(
    img: ImageBuffer, method: str = "center_ellipse", lo: float = 0.0, hi: float = 1.0
) -> Mask:
    """Demo-grade subject masks from geometry or luminance.

    center_ellipse marks an ellipse centered at (W/2, 0.55*H) with semi-axes
    (0.28*W, 0.38*H); luma_threshold marks pixels whose Rec.601 luminance
    falls within [lo, hi].
    """
    h, w = img.height, img.width
    if method == "center_ellipse":
        ys, xs = np.mgrid[0:h, 0:w].astype(np.float64) + 0.5
        cx, cy = w / 2.0, h * 0.55
        ax, ay = w * 0.28, h * 0.38
        inside = ((xs - cx) / ax) ** 2 + ((ys - cy) / ay) ** 2 <= 1.0
        return Mask(inside.astype(np.float64))
    if method == "luma_threshold":
        if img.channels == 3:
            luma = (
                0.299 * img.data[:, :, 0]
                + 0.587 * img.data[:, :, 1]
                + 0.114 * img.data[:, :, 2]
            )
        else:
            luma = img.data[:, :, 0]
        return Mask(((luma >= lo) & (luma <= hi)).astype(np.float64))
    raise MaskError(f"unknown segmentation method {method!r}")


def _align_up(n: int) -> int:
    return ((n + 7) // 8) * 8


def crop_by_mask(img: ImageBuffer, mask: Mask) -> tuple[ImageBuffer, BoundingBox]:
    """Tight subject bounding box grown to 8-aligned dims, plus the fragment."""
    if (mask.height, mask.width) != (img.height, img.width):
        raise MaskError(
            f"mask {mask.width}x{mask.height} does not match image {img.width}x{img.height}"
        )
    on = mask.data > 0.5
    rows = np.flatnonzero(on.any(axis=1))
    cols = np.flatnonzero(on.any(axis=0))
    if rows.size == 0:
        raise MaskError("no subject region: mask is empty")
    y0, y1 = int(rows[0]), int(rows[-1])
    x0, x1 = int(cols[0]), int(cols[-1])
    bh = _align_up(y1 - y0 + 1)
    bw = _align_up(x1 - x0 + 1)
    if bh > img.height or bw > img.width:
        raise MaskError(
            f"8-aligned box {bw}x{bh} does not fit image {img.width}x{img.height}"
        )
    y0 = min(y0, img.height - bh)
    x0 = min(x0, img.width - bw)
    box = BoundingBox(x=x0, y=y0, width=bw, height=bh)
    fragment = ImageBuffer(img.data[y0 : y0 + bh, x0 : x0 + bw, :].copy())
    return fragment, box


def feather(mask: Mask, radius: int = 0) -> Mask:
    """Soften edges: a 3x3 box blur applied ``radius`` times (0 = unchanged)."""
    if radius < 0:
        raise MaskError(f"feather radius must be >= 0, got {radius}")
    data = mask.data.copy()
    for _ in range(radius):
        padded = np.pad(data, 1, mode="edge")
        acc = np.zeros_like(data)
        for dy in range(3):
            for dx in range(3):
                acc += padded[dy : dy + data.shape[0], dx : dx + data.shape[1]]
        data = acc / 9.0
    return Mask(np.clip(data, 0.0, 1.0))
