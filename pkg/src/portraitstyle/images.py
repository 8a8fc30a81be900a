"""Image buffers and file codecs (PNG subset, PPM P6, PGM P5).

Pixels live as float64 in [0,1], row-major and channel-interleaved. Bytes map
to floats via v/255 on read and round-half-up on write, so byte-exact images
round-trip exactly. PNG support is deliberately narrow: 8-bit, RGB or gray,
non-interlaced.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import Tensor

_PNG_SIG = b"\x89PNG\r\n\x1a\n"


class ImageFormatError(ValueError):
    """Unsupported or malformed image file."""


class ImageDecodeError(ValueError):
    """Stream ended early or contents are inconsistent."""


@dataclass
class ImageBuffer:
    """Decoded raster: ``data`` has shape (height, width, channels)."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3 or self.data.shape[2] not in (1, 3):
            raise ImageFormatError(
                f"image data must be (H,W,1) or (H,W,3), got {self.data.shape}"
            )

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


def _bytes_to_floats(raw: np.ndarray) -> np.ndarray:
    return raw.astype(np.float64) / 255.0


def _floats_to_bytes(data: np.ndarray) -> np.ndarray:
    clamped = np.clip(data, 0.0, 1.0)
    # round-half-up, not banker's rounding
    return np.floor(clamped * 255.0 + 0.5).astype(np.uint8)


# ---------------------------------------------------------------------------
# PPM / PGM


def _read_pnm_header(buf: bytes, magic: bytes):
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(buf) and buf[pos : pos + 1].isspace():
            pos += 1
        if pos < len(buf) and buf[pos : pos + 1] == b"#":
            while pos < len(buf) and buf[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageDecodeError(f"truncated {magic.decode()} header")
        fields.append(int(buf[start:pos]))
    pos += 1  # single whitespace after maxval
    return fields[0], fields[1], fields[2], pos


def _decode_pnm(buf: bytes) -> ImageBuffer:
    magic = buf[:2]
    channels = 3 if magic == b"P6" else 1
    width, height, maxval, pos = _read_pnm_header(buf, magic)
    if maxval != 255:
        raise ImageFormatError(f"only maxval 255 supported, got {maxval}")
    need = width * height * channels
    raw = buf[pos : pos + need]
    if len(raw) != need:
        raise ImageDecodeError(
            f"truncated pixel data: expected {need} bytes, got {len(raw)}"
        )
    arr = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, channels)
    return ImageBuffer(_bytes_to_floats(arr))


def _encode_pnm(img: ImageBuffer, channels: int) -> bytes:
    if img.channels != channels:
        kind = "P6/PPM" if channels == 3 else "P5/PGM"
        raise ImageFormatError(f"{kind} needs {channels} channels, image has {img.channels}")
    magic = b"P6" if channels == 3 else b"P5"
    header = magic + b"\n%d %d\n255\n" % (img.width, img.height)
    return header + _floats_to_bytes(img.data).tobytes()


# ---------------------------------------------------------------------------
# PNG (8-bit gray/RGB, non-interlaced)


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    if pb <= pc:
        return b
    return c


def _decode_png(buf: bytes) -> ImageBuffer:
    if buf[:8] != _PNG_SIG:
        raise ImageFormatError("not a PNG stream")
    pos = 8
    width = height = None
    channels = 0
    idat = bytearray()
    seen_end = False
    while pos < len(buf):
        if pos + 8 > len(buf):
            raise ImageDecodeError("truncated chunk header")
        (length,) = struct.unpack(">I", buf[pos : pos + 4])
        ctype = buf[pos + 4 : pos + 8]
        data = buf[pos + 8 : pos + 8 + length]
        if len(data) != length or pos + 12 + length > len(buf):
            raise ImageDecodeError(f"truncated {ctype!r} chunk")
        (crc,) = struct.unpack(">I", buf[pos + 8 + length : pos + 12 + length])
        if crc != zlib.crc32(ctype + data):
            raise ImageDecodeError(f"CRC mismatch in {ctype!r} chunk")
        pos += 12 + length
        if ctype == b"IHDR":
            width, height, depth, color, comp, filt, interlace = struct.unpack(
                ">IIBBBBB", data
            )
            if depth != 8:
                raise ImageFormatError(f"only 8-bit PNG supported, got depth {depth}")
            if color == 0:
                channels = 1
            elif color == 2:
                channels = 3
            else:
                raise ImageFormatError(
                    f"only gray (0) and RGB (2) PNG color types supported, got {color}"
                )
            if interlace != 0:
                raise ImageFormatError("interlaced PNG not supported")
            if comp != 0 or filt != 0:
                raise ImageFormatError("nonstandard PNG compression/filter method")
        elif ctype == b"IDAT":
            idat.extend(data)
        elif ctype == b"IEND":
            seen_end = True
            break
    if width is None:
        raise ImageDecodeError("missing IHDR chunk")
    if not seen_end:
        raise ImageDecodeError("missing IEND chunk")
    try:
        raw = zlib.decompress(bytes(idat))
    except zlib.error as exc:
        raise ImageDecodeError(f"bad IDAT stream: {exc}") from exc
    stride = width * channels
    if len(raw) != (stride + 1) * height:
        raise ImageDecodeError(
            f"scanline data has {len(raw)} bytes, expected {(stride + 1) * height}"
        )
    out = np.empty((height, stride), dtype=np.uint8)
    prev = bytearray(stride)
    bpp = channels
    for y in range(height):
        ftype = raw[y * (stride + 1)]
        line = bytearray(raw[y * (stride + 1) + 1 : (y + 1) * (stride + 1)])
        if ftype == 0:
            pass
        elif ftype == 1:
            for i in range(bpp, stride):
                line[i] = (line[i] + line[i - bpp]) & 0xFF
        elif ftype == 2:
            for i in range(stride):
                line[i] = (line[i] + prev[i]) & 0xFF
        elif ftype == 3:
            for i in range(stride):
                left = line[i - bpp] if i >= bpp else 0
                line[i] = (line[i] + ((left + prev[i]) >> 1)) & 0xFF
        elif ftype == 4:
            for i in range(stride):
                left = line[i - bpp] if i >= bpp else 0
                up_left = prev[i - bpp] if i >= bpp else 0
                line[i] = (line[i] + _paeth(left, prev[i], up_left)) & 0xFF
        else:
            raise ImageDecodeError(f"unknown scanline filter {ftype}")
        out[y] = np.frombuffer(bytes(line), dtype=np.uint8)
        prev = line
    arr = out.reshape(height, width, channels)
    return ImageBuffer(_bytes_to_floats(arr))


def _encode_png(img: ImageBuffer) -> bytes:
    arr = _floats_to_bytes(img.data)
    height, width, channels = arr.shape
    color = 2 if channels == 3 else 0
    ihdr = struct.pack(">IIBBBBB", width, height, 8, color, 0, 0, 0)
    rows = arr.reshape(height, width * channels)
    scanlines = b"".join(b"\x00" + rows[y].tobytes() for y in range(height))
    idat = zlib.compress(scanlines)

    def chunk(ctype: bytes, data: bytes) -> bytes:
        return (
            struct.pack(">I", len(data))
            + ctype
            + data
            + struct.pack(">I", zlib.crc32(ctype + data))
        )

    return _PNG_SIG + chunk(b"IHDR", ihdr) + chunk(b"IDAT", idat) + chunk(b"IEND", b"")


# ---------------------------------------------------------------------------
# public API


def read_image(path) -> ImageBuffer:
    """Decode a PNG (8-bit RGB/gray) or PPM P6 / PGM P5 file."""
    buf = Path(path).read_bytes()
    if buf[:8] == _PNG_SIG:
        return _decode_png(buf)
    if buf[:2] in (b"P6", b"P5"):
        return _decode_pnm(buf)
    raise ImageFormatError(f"unknown magic bytes {buf[:8]!r} in {path}")


def write_image(img: ImageBuffer, path, format: str | None = None) -> None:
    """Encode to png, ppm, or pgm; format defaults to the path suffix."""
    path = Path(path)
    fmt = format or path.suffix.lstrip(".").lower()
    if fmt == "png":
        payload = _encode_png(img)
    elif fmt == "ppm":
        payload = _encode_pnm(img, 3)
    elif fmt == "pgm":
        payload = _encode_pnm(img, 1)
    else:
        raise ImageFormatError(f"unsupported output format {fmt!r}")
    path.write_bytes(payload)


def to_tensor(img: ImageBuffer) -> Tensor:
    """(H,W,C) interleaved floats -> channel-planar Tensor (1,C,H,W)."""
    return Tensor(np.ascontiguousarray(img.data.transpose(2, 0, 1))[None, :, :, :])


def from_tensor(t: Tensor) -> ImageBuffer:
    """Tensor (1,C,H,W) -> ImageBuffer, values clamped into [0,1]."""
    data = t.data if isinstance(t, Tensor) else np.asarray(t)
    if data.ndim != 4 or data.shape[0] != 1 or data.shape[1] not in (1, 3):
        raise ImageFormatError(f"expected tensor shaped (1,1|3,H,W), got {data.shape}")
    planar = np.clip(data[0], 0.0, 1.0)
    return ImageBuffer(planar.transpose(1, 2, 0))
