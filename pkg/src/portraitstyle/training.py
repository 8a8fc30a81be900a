"""Identity-loss objective, auxiliary terms, Adam, crop augmentation, training.

The shipped objective is the identity loss: the network must reproduce an
image when content and style inputs coincide, penalized in pixel space and
across all encoder feature levels (weights 1 and 50). Auxiliary content and
style terms exist but default to weight 0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .attention import FusionWeights
from .autodiff import Tensor
from .images import ImageBuffer, read_image, to_tensor
from .network import Checkpoint, StyleNet, init_parameters


class ConfigError(ValueError):
    """Invalid or unsatisfiable training configuration."""


class NumericError(ArithmeticError):
    """Non-finite value encountered where finite math was required."""


@dataclass
class LossTerms:
    """One objective evaluation; total applies the configured weights."""

    pixel_identity: float
    feature_identity: float
    content_aux: float = 0.0
    style_aux: float = 0.0
    total: float = 0.0


@dataclass
class AdamState:
    """Per-parameter moment buffers and step counter."""

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class TrainConfig:
    content_dir: Path
    style_dir: Path
    steps: int
    lr: float = 1e-4
    batch_size: int = 5
    crop_size: int = 16
    seed: int = 0
    lambda1: float = 1.0
    lambda2: float = 50.0
    content_weight: float = 0.0
    style_weight: float = 0.0
    # fusion weights used while training; both levels fully on
    fusion_w1: float = 1.0
    fusion_w2: float = 1.0

    def __post_init__(self):
        self.content_dir = Path(self.content_dir)
        self.style_dir = Path(self.style_dir)
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.crop_size % 8 != 0:
            raise ConfigError(f"crop_size must be divisible by 8, got {self.crop_size}")
        if self.crop_size < 16:
            raise ConfigError(f"crop_size must be >= 16, got {self.crop_size}")
        if self.steps < 0:
            raise ConfigError(f"steps must be >= 0, got {self.steps}")

    def fusion(self) -> FusionWeights:
        return FusionWeights(self.fusion_w1, self.fusion_w2)


# ---------------------------------------------------------------------------
# objective terms
#
# A "net" here is anything with forward(content, style, fusion) -> Tensor and
# encode_layers(x) -> list[Tensor]; tests substitute stubs.


def _identity_terms(net, ic_t: Tensor, is_t: Tensor, fusion: FusionWeights):
    icc = net.forward(ic_t, ic_t, fusion)
    iss = net.forward(is_t, is_t, fusion)
    pixel = ad.add(ad.l2norm(ad.sub(icc, ic_t)), ad.l2norm(ad.sub(iss, is_t)))
    feat = None
    for gen, ref in ((icc, ic_t), (iss, is_t)):
        gen_feats = net.encode_layers(gen)
        ref_feats = net.encode_layers(ref)
        for fg, fr in zip(gen_feats, ref_feats):
            term = ad.l2norm(ad.sub(fg, fr))
            feat = term if feat is None else ad.add(feat, term)
    return pixel, feat


def _channel_stats(x: Tensor) -> tuple[Tensor, Tensor]:
    """Per-channel spatial mean and population std (as (N,C,1,1) tensors)."""
    mu = ad.mean_axes(x, (2, 3))
    centered = ad.sub(x, mu)
    var = ad.mean_axes(ad.mul(centered, centered), (2, 3))
    # tiny epsilon keeps sqrt differentiable on constant planes
    return mu, ad.sqrt(ad.add(var, Tensor(np.full(var.shape, 1e-12))))


def _content_term(net, ics: Tensor, ic_t: Tensor) -> Tensor:
    gen = ad.instance_norm(net.encode_layers(ics)[-1])
    ref = ad.instance_norm(net.encode_layers(ic_t)[-1])
    return ad.l2norm(ad.sub(gen, ref))


def _style_term(net, ics: Tensor, is_t: Tensor) -> Tensor:
    total = None
    for fg, fs in zip(net.encode_layers(ics), net.encode_layers(is_t)):
        mu_g, sd_g = _channel_stats(fg)
        mu_s, sd_s = _channel_stats(fs)
        term = ad.add(ad.l2norm(ad.sub(mu_g, mu_s)), ad.l2norm(ad.sub(sd_g, sd_s)))
        total = term if total is None else ad.add(total, term)
    return total


def _check_pair(ic: ImageBuffer, is_: ImageBuffer) -> None:
    # divisibility-by-8 is the encoder's contract and is enforced there;
    # stub networks may evaluate the objective on arbitrary sizes
    if (ic.height, ic.width) != (is_.height, is_.width):
        raise ad.ShapeError(
            f"content {ic.width}x{ic.height} and style {is_.width}x{is_.height} dimensions differ"
        )


def identity_loss(
    net,
    ic: ImageBuffer,
    is_: ImageBuffer,
    lambda1: float = 1.0,
    lambda2: float = 50.0,
    fusion: FusionWeights = FusionWeights(1.0, 1.0),
) -> LossTerms:
    """Evaluate the identity objective for one content/style pair."""
    _check_pair(ic, is_)
    with ad.no_grad():
        pixel, feat = _identity_terms(net, to_tensor(ic), to_tensor(is_), fusion)
    p, f = pixel.item(), feat.item()
    return LossTerms(
        pixel_identity=p,
        feature_identity=f,
        total=lambda1 * p + lambda2 * f,
    )


def content_loss(
    net, ic: ImageBuffer, is_: ImageBuffer, fusion: FusionWeights = FusionWeights(1.0, 1.0)
) -> float:
    """Deep-feature distance between the stylized result and the content."""
    _check_pair(ic, is_)
    with ad.no_grad():
        ic_t, is_t = to_tensor(ic), to_tensor(is_)
        return _content_term(net, net.forward(ic_t, is_t, fusion), ic_t).item()


def style_loss(
    net, ic: ImageBuffer, is_: ImageBuffer, fusion: FusionWeights = FusionWeights(1.0, 1.0)
) -> float:
    """Per-layer channel mean/std distance between result and style."""
    _check_pair(ic, is_)
    with ad.no_grad():
        ic_t, is_t = to_tensor(ic), to_tensor(is_)
        return _style_term(net, net.forward(ic_t, is_t, fusion), is_t).item()


# ---------------------------------------------------------------------------
# optimizer


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState) -> None:
    """One Adam update, in place on ``params``; moments grow lazily."""
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for name in sorted(params):
        g = np.asarray(grads[name], dtype=np.float64)
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {name!r}")
        m = state.m.setdefault(name, np.zeros_like(params[name]))
        v = state.v.setdefault(name, np.zeros_like(params[name]))
        m += (1.0 - state.beta1) * (g - m)
        v += (1.0 - state.beta2) * (g * g - v)
        params[name] -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


# ---------------------------------------------------------------------------
# data


def random_crop(img: ImageBuffer, size: int, rng: np.random.Generator) -> ImageBuffer:
    """Uniformly placed size x size sub-rectangle copy."""
    if size % 8 != 0:
        raise ValueError(f"crop size must be divisible by 8, got {size}")
    if size > img.height or size > img.width:
        raise ValueError(
            f"crop size {size} exceeds image {img.width}x{img.height}"
        )
    top = int(rng.integers(0, img.height - size + 1))
    left = int(rng.integers(0, img.width - size + 1))
    return ImageBuffer(img.data[top : top + size, left : left + size, :].copy())


def _load_corpus(directory: Path, crop_size: int) -> list[ImageBuffer]:
    directory = Path(directory)
    if not directory.is_dir():
        raise ConfigError(f"corpus directory {directory} does not exist")
    paths = sorted(
        p for p in directory.iterdir() if p.suffix.lower() in (".png", ".ppm", ".pgm")
    )
    if not paths:
        raise ConfigError(f"no images found in corpus directory {directory}")
    images = []
    for p in paths:
        img = read_image(p)
        if img.channels != 3:
            raise ConfigError(f"{p}: training corpus images must be RGB")
        if img.height < crop_size or img.width < crop_size:
            raise ConfigError(
                f"{p}: image {img.width}x{img.height} smaller than crop size {crop_size}"
            )
        images.append(img)
    return images


# ---------------------------------------------------------------------------
# the loop


def _batch_objective(net, ic_t: Tensor, is_t: Tensor, config: TrainConfig):
    fusion = config.fusion()
    pixel, feat = _identity_terms(net, ic_t, is_t, fusion)
    total = ad.add(ad.scale(pixel, config.lambda1), ad.scale(feat, config.lambda2))
    c_val = s_val = 0.0
    if config.content_weight > 0 or config.style_weight > 0:
        ics = net.forward(ic_t, is_t, fusion)
        if config.content_weight > 0:
            c_term = _content_term(net, ics, ic_t)
            total = ad.add(total, ad.scale(c_term, config.content_weight))
            c_val = c_term.item()
        if config.style_weight > 0:
            s_term = _style_term(net, ics, is_t)
            total = ad.add(total, ad.scale(s_term, config.style_weight))
            s_val = s_term.item()
    terms = LossTerms(
        pixel_identity=pixel.item(),
        feature_identity=feat.item(),
        content_aux=c_val,
        style_aux=s_val,
        total=total.item(),
    )
    return total, terms


def train(config: TrainConfig) -> tuple[Checkpoint, list[LossTerms]]:
    """Run the training loop; returns the final checkpoint and per-step trace.

    Deterministic for a fixed config: corpus order is sorted, sampling comes
    from one seeded generator, and parameters start from the seeded init.
    """
    content = _load_corpus(config.content_dir, config.crop_size)
    style = _load_corpus(config.style_dir, config.crop_size)
    net = StyleNet(init_parameters(config.seed), trainable=True)
    state = AdamState(lr=config.lr)
    rng = np.random.default_rng(config.seed)
    trace: list[LossTerms] = []
    params = net.parameters()
    for step in range(config.steps):
        for t in params.values():
            t.zero_grad()
        sums = np.zeros(5)
        for _ in range(config.batch_size):
            ci = int(rng.integers(0, len(content)))
            si = int(rng.integers(0, len(style)))
            ic = random_crop(content[ci], config.crop_size, rng)
            is_ = random_crop(style[si], config.crop_size, rng)
            total, terms = _batch_objective(net, to_tensor(ic), to_tensor(is_), config)
            if not np.isfinite(terms.total):
                raise NumericError(f"non-finite loss at step {step}")
            total.backward()
            sums += (
                terms.pixel_identity,
                terms.feature_identity,
                terms.content_aux,
                terms.style_aux,
                terms.total,
            )
        grads = {name: t.grad / config.batch_size for name, t in params.items()}
        adam_step({name: t.data for name, t in params.items()}, grads, state)
        avg = sums / config.batch_size
        trace.append(LossTerms(*avg))
    return net.to_checkpoint(step=config.steps), trace


def write_trace_csv(trace: list[LossTerms], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["step", "pixel_identity", "feature_identity", "content_aux", "style_aux", "total"]
        )
        for i, t in enumerate(trace):
            writer.writerow(
                [i, t.pixel_identity, t.feature_identity, t.content_aux, t.style_aux, t.total]
            )
