"""Encoder/decoder blocks, parameter initialization, and checkpoint files.

The encoder is a four-stage conv stack producing a two-level feature pyramid:
stage 3 output (f4, 48 channels at 1/4 resolution) and stage 4 output
(f5, 64 channels at 1/8 resolution). Downsampling stages use 4x4 stride-2
convs with pad 1 so even dimensions halve exactly. The decoder mirrors it
with nearest upsampling and reflect-padded 3x3 convs; its first conv doubles
as the post-fusion 3x3 convolution.
"""

from __future__ import annotations

import hashlib
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .attention import AttentionBlock, FusionWeights, fuse_levels, sanet_attend
from .autodiff import ShapeError, Tensor

C4 = 48
C5 = 64

# name, (out_ch, in_ch, kh, kw), stride, pad, pad mode
_CONV_SPECS = [
    ("enc1", (16, 3, 3, 3), 1, 1, "zero"),
    ("enc2", (32, 16, 4, 4), 2, 1, "zero"),
    ("enc3", (C4, 32, 4, 4), 2, 1, "zero"),
    ("enc4", (C5, C4, 4, 4), 2, 1, "zero"),
    ("attn4.f", (C4 // 2, C4, 1, 1), 1, 0, "zero"),
    ("attn4.g", (C4 // 2, C4, 1, 1), 1, 0, "zero"),
    ("attn4.h", (C4, C4, 1, 1), 1, 0, "zero"),
    ("attn5.f", (C5 // 2, C5, 1, 1), 1, 0, "zero"),
    ("attn5.g", (C5 // 2, C5, 1, 1), 1, 0, "zero"),
    ("attn5.h", (C5, C5, 1, 1), 1, 0, "zero"),
    ("fuse.proj", (C4, C5, 1, 1), 1, 0, "zero"),
    ("dec1", (32, C4, 3, 3), 1, 1, "reflect"),
    ("dec2", (16, 32, 3, 3), 1, 1, "reflect"),
    ("dec3", (3, 16, 3, 3), 1, 1, "reflect"),
]

_ENCODER_STAGES = ["enc1", "enc2", "enc3", "enc4"]

CHECKPOINT_MAGIC = b"PSTY"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Unreadable, corrupt, or incompatible checkpoint file."""


def _conv_lookup() -> dict[str, tuple]:
    return {name: (shape, stride, pad, mode) for name, shape, stride, pad, mode in _CONV_SPECS}


def parameter_shapes() -> dict[str, tuple[int, ...]]:
    """Stable name -> shape map for every learnable tensor."""
    shapes: dict[str, tuple[int, ...]] = {}
    for name, (out_ch, in_ch, kh, kw), _, _, _ in _CONV_SPECS:
        shapes[f"{name}.weight"] = (out_ch, in_ch, kh, kw)
        shapes[f"{name}.bias"] = (out_ch,)
    return shapes


def architecture_digest() -> str:
    blob = repr(_CONV_SPECS).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class Checkpoint:
    params: dict[str, np.ndarray]
    step: int = 0
    digest: str = field(default_factory=architecture_digest)


@dataclass
class FeaturePyramid:
    """The two fused feature levels: f5 spatial dims are half of f4's."""

    f4: Tensor
    f5: Tensor


def init_parameters(seed: int) -> Checkpoint:
    """He-scaled weights (std = sqrt(2/fan_in)), zero biases, seeded."""
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    for name, (out_ch, in_ch, kh, kw), _, _, _ in _CONV_SPECS:
        fan_in = in_ch * kh * kw
        std = np.sqrt(2.0 / fan_in)
        params[f"{name}.weight"] = rng.normal(0.0, std, size=(out_ch, in_ch, kh, kw))
        params[f"{name}.bias"] = np.zeros(out_ch)
    return Checkpoint(params=params, step=0)


# ---------------------------------------------------------------------------
# checkpoint serialization: PSTY magic, u16 version, little-endian doubles,
# length-prefixed names, CRC32 trailer


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    out = bytearray()
    out += CHECKPOINT_MAGIC
    out += struct.pack("<H", CHECKPOINT_VERSION)
    out += struct.pack("<Q", ckpt.step)
    digest = ckpt.digest.encode()
    out += struct.pack("<I", len(digest)) + digest
    out += struct.pack("<I", len(ckpt.params))
    for name in sorted(ckpt.params):
        arr = np.ascontiguousarray(ckpt.params[name], dtype="<f8")
        encoded = name.encode()
        out += struct.pack("<I", len(encoded)) + encoded
        out += struct.pack("<B", arr.ndim)
        out += struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += arr.tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    Path(path).write_bytes(bytes(out))


def load_checkpoint(path) -> Checkpoint:
    buf = Path(path).read_bytes()
    if len(buf) < 4 or buf[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    if len(buf) < 10:
        raise CheckpointError(f"{path}: truncated header")
    (version,) = struct.unpack_from("<H", buf, 4)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )
    (stored_crc,) = struct.unpack_from("<I", buf, len(buf) - 4)
    if stored_crc != zlib.crc32(buf[:-4]):
        raise CheckpointError(f"{path}: CRC mismatch, file is corrupt")
    pos = 6
    (step,) = struct.unpack_from("<Q", buf, pos)
    pos += 8
    (dlen,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    digest = buf[pos : pos + dlen].decode()
    pos += dlen
    (count,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    params: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (nlen,) = struct.unpack_from("<I", buf, pos)
            pos += 4
            name = buf[pos : pos + nlen].decode()
            pos += nlen
            (ndim,) = struct.unpack_from("<B", buf, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}I", buf, pos)
            pos += 4 * ndim
            n = int(np.prod(shape)) if ndim else 1
            arr = np.frombuffer(buf, dtype="<f8", count=n, offset=pos).reshape(shape)
            pos += 8 * n
            params[name] = arr.astype(np.float64)
    except (struct.error, ValueError) as exc:
        raise CheckpointError(f"{path}: truncated parameter table: {exc}") from exc

    expected = parameter_shapes()
    for name in expected:
        if name not in params:
            raise CheckpointError(f"{path}: missing parameter {name!r}")
    for name in params:
        if name not in expected:
            raise CheckpointError(f"{path}: unknown parameter {name!r}")
        if params[name].shape != expected[name]:
            raise CheckpointError(
                f"{path}: parameter {name!r} has shape {params[name].shape}, "
                f"expected {expected[name]}"
            )
    if digest != architecture_digest():
        raise CheckpointError(f"{path}: architecture digest mismatch ({digest})")
    return Checkpoint(params=params, step=step, digest=digest)


# ---------------------------------------------------------------------------
# the network


class StyleNet:
    """The full transfer network: encoder, two attention levels, fusion, decoder.

    Parameters are held as Tensors; with ``trainable=True`` they carry
    gradients and can be updated in place by an optimizer.
    """

    def __init__(self, checkpoint: Checkpoint, trainable: bool = False):
        expected = parameter_shapes()
        for name, shape in expected.items():
            if name not in checkpoint.params:
                raise CheckpointError(f"checkpoint missing parameter {name!r}")
            if checkpoint.params[name].shape != shape:
                raise CheckpointError(
                    f"parameter {name!r} has shape {checkpoint.params[name].shape}, "
                    f"expected {shape}"
                )
        self.params: dict[str, Tensor] = {
            name: Tensor(checkpoint.params[name].copy(), requires_grad=trainable, name=name)
            for name in expected
        }
        self.step = checkpoint.step
        self._convs = _conv_lookup()

    def parameters(self) -> dict[str, Tensor]:
        return self.params

    def to_checkpoint(self, step: int | None = None) -> Checkpoint:
        return Checkpoint(
            params={name: t.data.copy() for name, t in self.params.items()},
            step=self.step if step is None else step,
        )

    def _conv(self, name: str, x: Tensor) -> Tensor:
        _, stride, pad, mode = self._convs[name]
        return ad.conv2d(
            x,
            self.params[f"{name}.weight"],
            self.params[f"{name}.bias"],
            stride=stride,
            padding=mode,
            pad_size=pad,
        )

    def encode_layers(self, x: Tensor) -> list[Tensor]:
        """All four encoder stage activations (ReLU outputs), shallow to deep."""
        if x.ndim != 4 or x.shape[1] != 3:
            raise ShapeError(f"encoder input must be (N,3,H,W), got {x.shape}")
        _, _, h, w = x.shape
        if h % 8 != 0 or w % 8 != 0:
            raise ShapeError(f"encoder needs H and W divisible by 8, got {h}x{w}")
        if h < 16 or w < 16:
            raise ShapeError(f"encoder needs H and W >= 16, got {h}x{w}")
        feats = []
        cur = x
        for name in _ENCODER_STAGES:
            cur = ad.relu(self._conv(name, cur))
            feats.append(cur)
        return feats

    def encode(self, x: Tensor) -> FeaturePyramid:
        feats = self.encode_layers(x)
        return FeaturePyramid(f4=feats[2], f5=feats[3])

    def decode(self, res: Tensor) -> Tensor:
        """Fused f4-level features -> image tensor at 4x the spatial size."""
        if res.ndim != 4 or res.shape[1] != C4:
            raise ShapeError(f"decoder input must be (N,{C4},h,w), got {res.shape}")
        y = ad.relu(self._conv("dec1", res))
        y = ad.relu(self._conv("dec2", ad.upsample_nearest(y, 2)))
        return self._conv("dec3", ad.upsample_nearest(y, 2))

    def attention_block(self, level: int) -> AttentionBlock:
        prefix = f"attn{level}"
        return AttentionBlock(
            f_weight=self.params[f"{prefix}.f.weight"],
            f_bias=self.params[f"{prefix}.f.bias"],
            g_weight=self.params[f"{prefix}.g.weight"],
            g_bias=self.params[f"{prefix}.g.bias"],
            h_weight=self.params[f"{prefix}.h.weight"],
            h_bias=self.params[f"{prefix}.h.bias"],
        )

    def fuse(self, s4: Tensor, s5: Tensor, weights: FusionWeights) -> Tensor:
        return fuse_levels(
            s4, s5, weights, self.params["fuse.proj.weight"], self.params["fuse.proj.bias"]
        )

    def forward(self, content: Tensor, style: Tensor, weights: FusionWeights) -> Tensor:
        """Stylized image tensor for one content/style pair."""
        cpyr = self.encode(content)
        spyr = cpyr if style is content else self.encode(style)
        s4 = sanet_attend(self.attention_block(4), cpyr.f4, spyr.f4)
        s5 = sanet_attend(self.attention_block(5), cpyr.f5, spyr.f5)
        return self.decode(self.fuse(s4, s5, weights))
