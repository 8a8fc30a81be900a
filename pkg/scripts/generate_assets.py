"""Regenerate the bundled sample assets deterministically.

Writes the toy training corpus (six 32x32 content images, six 32x32 style
images) and the 64x64 content/style/mask demo triple into
src/portraitstyle/assets/. Output files are committed; rerun only when the
patterns change.
"""

from pathlib import Path

import numpy as np

from portraitstyle.images import ImageBuffer, write_image

ROOT = Path(__file__).resolve().parent.parent / "src" / "portraitstyle" / "assets"


def _grid(size):
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    return ys / (size - 1), xs / (size - 1)


def content_images(size=32):
    out = []
    ys, xs = _grid(size)
    # vertical sky-to-ground gradient with a sun disk
    img = np.stack([0.3 + 0.5 * ys, 0.4 + 0.4 * ys, 0.8 - 0.5 * ys], axis=2)
    disk = (ys - 0.25) ** 2 + (xs - 0.7) ** 2 < 0.02
    img[disk] = [0.95, 0.9, 0.4]
    out.append(img)
    # dark circle on light diagonal gradient
    img = np.stack([0.7 + 0.25 * xs, 0.7 + 0.25 * ys, 0.65 * np.ones_like(xs)], axis=2)
    circ = (ys - 0.55) ** 2 + (xs - 0.45) ** 2 < 0.08
    img[circ] = [0.25, 0.2, 0.3]
    out.append(img)
    # two soft horizontal bands
    img = np.stack(
        [0.35 + 0.3 * np.cos(2 * np.pi * ys), 0.5 * np.ones_like(ys), 0.45 + 0.3 * ys],
        axis=2,
    )
    out.append(img)
    # centered bright square on mid gray
    img = np.full((size, size, 3), 0.45)
    s = size // 4
    img[s : 3 * s, s : 3 * s] = [0.85, 0.7, 0.5]
    out.append(img)
    # radial vignette
    r = np.sqrt((ys - 0.5) ** 2 + (xs - 0.5) ** 2)
    img = np.stack([0.8 - 0.6 * r, 0.7 - 0.5 * r, 0.6 - 0.3 * r], axis=2)
    out.append(img)
    # quadrants
    img = np.zeros((size, size, 3))
    img[: size // 2, : size // 2] = [0.7, 0.4, 0.3]
    img[: size // 2, size // 2 :] = [0.3, 0.6, 0.5]
    img[size // 2 :, : size // 2] = [0.4, 0.4, 0.7]
    img[size // 2 :, size // 2 :] = [0.75, 0.7, 0.45]
    return [np.clip(i, 0, 1) for i in out + [img]]


def style_images(size=32):
    out = []
    ys, xs = _grid(size)
    # diagonal stripes
    img = np.stack(
        [
            0.5 + 0.45 * np.sin(14 * (xs + ys)),
            0.45 + 0.35 * np.sin(14 * (xs + ys) + 2.0),
            0.5 + 0.3 * np.cos(14 * (xs + ys)),
        ],
        axis=2,
    )
    out.append(img)
    # checkerboard
    check = ((ys * 8).astype(int) + (xs * 8).astype(int)) % 2
    img = np.stack([0.2 + 0.7 * check, 0.3 + 0.2 * check, 0.8 - 0.6 * check], axis=2)
    out.append(img)
    # concentric waves
    r = np.sqrt((ys - 0.5) ** 2 + (xs - 0.5) ** 2)
    img = np.stack(
        [0.5 + 0.4 * np.sin(25 * r), 0.35 + 0.3 * np.cos(25 * r), 0.55 + 0.35 * np.sin(25 * r + 1.5)],
        axis=2,
    )
    out.append(img)
    # vertical bars warm palette
    bars = (xs * 6).astype(int) % 3
    img = np.stack([0.85 - 0.25 * bars, 0.5 + 0.15 * bars, 0.25 + 0.1 * bars], axis=2)
    out.append(img)
    # crosshatch
    img = np.stack(
        [
            0.5 + 0.35 * np.sin(20 * xs) * np.sin(20 * ys),
            0.45 + 0.3 * np.sin(20 * xs),
            0.55 + 0.3 * np.sin(20 * ys),
        ],
        axis=2,
    )
    out.append(img)
    # noise blotches, seeded
    rng = np.random.default_rng(1234)
    base = rng.uniform(0.2, 0.8, size=(size // 4, size // 4, 3))
    img = np.repeat(np.repeat(base, 4, axis=0), 4, axis=1)
    out.append(img)
    return [np.clip(i, 0, 1) for i in out]


def demo_triple(size=64):
    ys, xs = _grid(size)
    # content: head-and-shoulders silhouette on a graded backdrop
    content = np.stack([0.35 + 0.3 * ys, 0.45 + 0.25 * ys, 0.75 - 0.35 * ys], axis=2)
    head = ((ys - 0.42) / 0.22) ** 2 + ((xs - 0.5) / 0.16) ** 2 < 1.0
    body = (ys > 0.62) & (np.abs(xs - 0.5) < 0.3 - 0.15 * (0.95 - ys))
    content[head] = [0.85, 0.7, 0.6]
    content[body] = [0.5, 0.3, 0.3]
    eyes = ((ys - 0.4) ** 2 + (xs - 0.44) ** 2 < 0.0008) | (
        (ys - 0.4) ** 2 + (xs - 0.56) ** 2 < 0.0008
    )
    content[eyes] = [0.15, 0.12, 0.12]
    # style: swirling high-contrast bands
    ang = np.arctan2(ys - 0.5, xs - 0.5)
    r = np.sqrt((ys - 0.5) ** 2 + (xs - 0.5) ** 2)
    style = np.stack(
        [
            0.5 + 0.45 * np.sin(6 * ang + 30 * r),
            0.4 + 0.4 * np.sin(6 * ang + 30 * r + 2.1),
            0.6 + 0.35 * np.cos(6 * ang + 30 * r),
        ],
        axis=2,
    )
    mask = np.zeros((size, size, 1))
    mask[head | body] = 1.0
    return np.clip(content, 0, 1), np.clip(style, 0, 1), mask


def main():
    corpus = ROOT / "toy_corpus"
    (corpus / "content").mkdir(parents=True, exist_ok=True)
    (corpus / "style").mkdir(parents=True, exist_ok=True)
    for i, img in enumerate(content_images()):
        write_image(ImageBuffer(img), corpus / "content" / f"content_{i}.ppm")
    for i, img in enumerate(style_images()):
        write_image(ImageBuffer(img), corpus / "style" / f"style_{i}.ppm")
    samples = ROOT / "samples"
    samples.mkdir(parents=True, exist_ok=True)
    content, style, mask = demo_triple()
    write_image(ImageBuffer(content), samples / "content_64.ppm")
    write_image(ImageBuffer(style), samples / "style_64.ppm")
    write_image(ImageBuffer(mask), samples / "mask_64.pgm")
    print(f"assets written under {ROOT}")


if __name__ == "__main__":
    main()
