"""Image decode, resize, and normalization into model input tensors.

Supported formats: binary PPM (P6, maxval 255) and PNG (8-bit RGB or RGBA,
non-interlaced; alpha is dropped). Both codecs are implemented here against
the format specifications so decoding is deterministic and dependency-free.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import DecodeError, DimensionError, UnsupportedFormatError

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


@dataclass
class ImageBuffer:
    """Row-major 8-bit RGB image; pixels has shape (height, width, 3)."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise DimensionError(
                f"image dimensions must be positive, got {self.width}x{self.height}")
        if self.pixels.shape != (self.height, self.width, 3) or self.pixels.dtype != np.uint8:
            raise DimensionError(
                f"pixels must be uint8 of shape ({self.height}, {self.width}, 3), "
                f"got {self.pixels.dtype} {self.pixels.shape}")


def decode_image(data: bytes) -> ImageBuffer:
    """Decode PPM (P6) or PNG bytes into an ImageBuffer with exact pixel values."""
    if data[:2] == b"P6":
        return _decode_ppm(data)
    if data[:8] == _PNG_SIGNATURE:
        return _decode_png(data)
    head = data[:8]
    raise UnsupportedFormatError(
        f"unknown image format (leading bytes {head!r}); expected PPM P6 or PNG")


# ---------------------------------------------------------------------------
# PPM P6
# ---------------------------------------------------------------------------

def _decode_ppm(data: bytes) -> ImageBuffer:
    pos = 2
    fields = []
    while len(fields) < 3:
        # skip whitespace and '#' comment lines between header fields
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        token = data[start:pos]
        if not token.isdigit():
            raise DecodeError(f"malformed PPM header token {token!r}")
        fields.append(int(token))
    width, height, maxval = fields
    if maxval != 255:
        raise DecodeError(f"unsupported PPM maxval {maxval}, expected 255")
    if width < 1 or height < 1:
        raise DecodeError(f"invalid PPM dimensions {width}x{height}")
    pos += 1  # exactly one whitespace byte separates header and raster
    need = width * height * 3
    raster = data[pos:pos + need]
    if len(raster) != need:
        raise DecodeError(
            f"PPM raster truncated: need {need} bytes, found {len(raster)}")
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3).copy()
    return ImageBuffer(width, height, pixels)


def encode_ppm(img: ImageBuffer) -> bytes:
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(img.pixels).tobytes()


# ---------------------------------------------------------------------------
# PNG (8-bit RGB / RGBA, non-interlaced)
# ---------------------------------------------------------------------------

def _png_chunks(data: bytes):
    pos = 8
    while pos < len(data):
        if pos + 8 > len(data):
            raise DecodeError("PNG chunk header truncated")
        (length,) = struct.unpack_from(">I", data, pos)
        ctype = data[pos + 4:pos + 8]
        end = pos + 8 + length
        if end + 4 > len(data):
            raise DecodeError(f"PNG chunk {ctype!r} truncated")
        payload = data[pos + 8:end]
        (crc,) = struct.unpack_from(">I", data, end)
        if zlib.crc32(ctype + payload) & 0xFFFFFFFF != crc:
            raise DecodeError(f"PNG chunk {ctype!r} fails CRC check")
        yield ctype, payload
        pos = end + 4
        if ctype == b"IEND":
            return
    raise DecodeError("PNG stream ended without IEND chunk")


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    if pb <= pc:
        return b
    return c


def _unfilter(raw: bytes, width: int, height: int, bpp: int) -> np.ndarray:
    stride = width * bpp
    if len(raw) != height * (stride + 1):
        raise DecodeError(
            f"PNG pixel data has {len(raw)} bytes, expected {height * (stride + 1)}")
    out = np.zeros((height, width, bpp), dtype=np.uint8)
    prev = np.zeros((width, bpp), dtype=np.uint8)
    for y in range(height):
        ftype = raw[y * (stride + 1)]
        row = np.frombuffer(
            raw, dtype=np.uint8, count=stride, offset=y * (stride + 1) + 1
        ).reshape(width, bpp).copy()
        if ftype == 0:
            pass
        elif ftype == 1:  # Sub
            for x in range(1, width):
                row[x] += row[x - 1]
        elif ftype == 2:  # Up
            row += prev
        elif ftype == 3:  # Average
            row[0] += prev[0] // 2
            for x in range(1, width):
                row[x] += ((row[x - 1].astype(np.uint16) + prev[x]) // 2).astype(np.uint8)
        elif ftype == 4:  # Paeth
            for x in range(width):
                left = row[x - 1] if x else np.zeros(bpp, dtype=np.uint8)
                upleft = prev[x - 1] if x else np.zeros(bpp, dtype=np.uint8)
                for k in range(bpp):
                    pred = _paeth(int(left[k]), int(prev[x, k]), int(upleft[k]))
                    row[x, k] = (int(row[x, k]) + pred) & 0xFF
        else:
            raise DecodeError(f"PNG row {y} uses unknown filter type {ftype}")
        out[y] = row
        prev = row
    return out


def _decode_png(data: bytes) -> ImageBuffer:
    ihdr = None
    idat = []
    for ctype, payload in _png_chunks(data):
        if ctype == b"IHDR":
            ihdr = payload
        elif ctype == b"IDAT":
            idat.append(payload)
    if ihdr is None or len(ihdr) != 13:
        raise DecodeError("PNG is missing a valid IHDR chunk")
    width, height, depth, color, compression, filt, interlace = struct.unpack(
        ">IIBBBBB", ihdr)
    if depth != 8:
        raise DecodeError(f"unsupported PNG bit depth {depth}, expected 8")
    if color not in (2, 6):
        raise DecodeError(
            f"unsupported PNG color type {color}, expected 2 (RGB) or 6 (RGBA)")
    if compression != 0 or filt != 0:
        raise DecodeError("unsupported PNG compression/filter method")
    if interlace != 0:
        raise DecodeError("interlaced PNG is not supported")
    if not idat:
        raise DecodeError("PNG has no IDAT data")
    try:
        raw = zlib.decompress(b"".join(idat))
    except zlib.error as exc:
        raise DecodeError(f"PNG pixel data fails to decompress: {exc}") from exc
    bpp = 3 if color == 2 else 4
    pixels = _unfilter(raw, width, height, bpp)
    if bpp == 4:
        pixels = pixels[:, :, :3].copy()  # alpha dropped
    return ImageBuffer(int(width), int(height), pixels)


def _png_chunk(ctype: bytes, payload: bytes) -> bytes:
    return (struct.pack(">I", len(payload)) + ctype + payload
            + struct.pack(">I", zlib.crc32(ctype + payload) & 0xFFFFFFFF))


def encode_png(img: ImageBuffer) -> bytes:
    """Minimal PNG writer: 8-bit RGB, filter 0 rows, one IDAT chunk."""
    ihdr = struct.pack(">IIBBBBB", img.width, img.height, 8, 2, 0, 0, 0)
    rows = np.ascontiguousarray(img.pixels)
    raw = b"".join(b"\x00" + rows[y].tobytes() for y in range(img.height))
    return (_PNG_SIGNATURE
            + _png_chunk(b"IHDR", ihdr)
            + _png_chunk(b"IDAT", zlib.compress(raw))
            + _png_chunk(b"IEND", b""))


# ---------------------------------------------------------------------------
# resize / normalize
# ---------------------------------------------------------------------------

def resize_bilinear(img: ImageBuffer, out_w: int, out_h: int) -> ImageBuffer:
    """Bilinear resize with half-pixel-centered sampling.

    A same-size resize returns a bitwise-identical copy.
    """
    if out_w < 1 or out_h < 1:
        raise DimensionError(f"resize target must be positive, got {out_w}x{out_h}")
    if (out_w, out_h) == (img.width, img.height):
        return ImageBuffer(img.width, img.height, img.pixels.copy())
    src = img.pixels.astype(np.float64)
    xs = np.clip((np.arange(out_w) + 0.5) * (img.width / out_w) - 0.5, 0, img.width - 1)
    ys = np.clip((np.arange(out_h) + 0.5) * (img.height / out_h) - 0.5, 0, img.height - 1)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x1 = np.minimum(x0 + 1, img.width - 1)
    y1 = np.minimum(y0 + 1, img.height - 1)
    fx = (xs - x0)[None, :, None]
    fy = (ys - y0)[:, None, None]
    top = src[y0[:, None], x0[None, :]] * (1 - fx) + src[y0[:, None], x1[None, :]] * fx
    bot = src[y1[:, None], x0[None, :]] * (1 - fx) + src[y1[:, None], x1[None, :]] * fx
    blended = top * (1 - fy) + bot * fy
    pixels = np.clip(np.floor(blended + 0.5), 0, 255).astype(np.uint8)
    return ImageBuffer(out_w, out_h, pixels)


def normalize(img: ImageBuffer) -> np.ndarray:
    """Map 8-bit RGB to a 1xHxWx3 float32 tensor in [-1, 1] via x/127.5 - 1."""
    out = img.pixels.astype(np.float32) / np.float32(127.5) - np.float32(1.0)
    return out[None, :, :, :]


def denormalize(tensor: np.ndarray) -> np.ndarray:
    """Inverse of normalize, rounding back to the original byte values."""
    return np.clip(np.floor((tensor + 1.0) * 127.5 + 0.5), 0, 255).astype(np.uint8)
