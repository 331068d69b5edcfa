"""Grayscale raster type, PGM/PPM codecs, bilinear resizing and iris occlusion."""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

# Working resolution: 120 columns by 160 rows (19,200 pixels).
CANONICAL_WIDTH = 120
CANONICAL_HEIGHT = 160


class DecodeError(ValueError):
    """Raised for malformed or unsupported image files."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit single-channel image stored row-major as a ``(height, width)`` array."""

    width: int
    height: int
    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.size != self.width * self.height:
            raise ValueError(
                f"pixel count {arr.size} does not match {self.width}x{self.height}"
            )
        if arr.size and (arr.min() < 0 or arr.max() > 255):
            raise ValueError("intensities must lie in [0, 255]")
        arr = np.array(arr, dtype=np.uint8).reshape(self.height, self.width)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, arr) -> "GrayImage":
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise ValueError("expected a 2-D array")
        return cls(arr.shape[1], arr.shape[0], arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    def pixels(self) -> list[int]:
        return self.data.ravel().tolist()

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.data, other.data)

    def __repr__(self):
        return f"GrayImage({self.width}x{self.height})"


@dataclass(frozen=True)
class OcclusionCircle:
    cx: float
    cy: float
    r: float

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("occlusion radius must be non-negative")


_WS = b" \t\r\n\v\f"


def _read_header_tokens(buf: bytes, count: int) -> tuple[list[int], int]:
    """Read ``count`` integer header tokens, skipping whitespace and ``#`` comments.

    Returns the tokens and the offset of the single whitespace byte that
    terminates the last token.
    """
    tokens = []
    pos = 2
    n = len(buf)
    while len(tokens) < count:
        while pos < n and buf[pos] in _WS:
            pos += 1
        if pos >= n:
            raise DecodeError("truncated header", pos)
        if buf[pos] == ord("#"):
            while pos < n and buf[pos] not in b"\r\n":
                pos += 1
            continue
        start = pos
        while pos < n and buf[pos] not in _WS and buf[pos] != ord("#"):
            pos += 1
        tok = buf[start:pos]
        if not tok.isdigit():
            raise DecodeError(f"invalid header field {tok!r}", start)
        tokens.append(int(tok))
    return tokens, pos


def decode_image(buf: bytes) -> GrayImage:
    """Decode a binary (P5) or ASCII (P2) PGM with maxval 255."""
    if len(buf) < 2 or buf[:1] != b"P" or buf[1:2] not in (b"2", b"5"):
        raise DecodeError("not a P2/P5 PGM file", 0)
    binary = buf[1:2] == b"5"
    (width, height, maxval), pos = _read_header_tokens(buf, 3)
    if width < 1 or height < 1:
        raise DecodeError("image dimensions must be positive", pos)
    if maxval != 255:
        raise DecodeError(f"unsupported maxval {maxval}", pos)
    npix = width * height
    if binary:
        if pos >= len(buf) or buf[pos] not in _WS:
            raise DecodeError("missing whitespace after header", pos)
        start = pos + 1
        payload = buf[start:start + npix]
        if len(payload) < npix:
            raise DecodeError(
                f"truncated payload: expected {npix} bytes, got {len(payload)}",
                start + len(payload),
            )
        values = np.frombuffer(payload, dtype=np.uint8)
    else:
        body = buf[pos:]
        body = re.sub(rb"#[^\r\n]*", b"", body)
        fields = body.split()
        if len(fields) < npix:
            raise DecodeError(
                f"truncated payload: expected {npix} samples, got {len(fields)}", len(buf)
            )
        try:
            values = np.array([int(f) for f in fields[:npix]], dtype=np.int64)
        except ValueError:
            raise DecodeError("non-integer sample in ASCII payload", pos) from None
        if values.min() < 0 or values.max() > 255:
            raise DecodeError("sample exceeds maxval", pos)
    return GrayImage(width, height, values.reshape(height, width))


def _comment_lines(comment: str | None) -> str:
    if not comment:
        return ""
    return "".join(f"# {line}\n" for line in comment.splitlines())


def encode_pgm(img: GrayImage, binary: bool = True, comment: str | None = None) -> bytes:
    header = f"P{5 if binary else 2}\n{_comment_lines(comment)}{img.width} {img.height}\n255\n".encode()
    if binary:
        return header + img.data.tobytes()
    rows = [" ".join(str(v) for v in row) for row in img.data.tolist()]
    return header + ("\n".join(rows) + "\n").encode()


def encode_ppm(rgb: np.ndarray, comment: str | None = None) -> bytes:
    """Encode an ``(h, w, 3)`` uint8 array as binary PPM (P6), with optional header comment."""
    rgb = np.asarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("expected an (h, w, 3) array")
    h, w, _ = rgb.shape
    return f"P6\n{_comment_lines(comment)}{w} {h}\n255\n".encode() + rgb.tobytes()


def decode_ppm(buf: bytes) -> np.ndarray:
    if buf[:2] != b"P6":
        raise DecodeError("not a P6 PPM file", 0)
    (w, h, maxval), pos = _read_header_tokens(buf, 3)
    if maxval != 255:
        raise DecodeError(f"unsupported maxval {maxval}", pos)
    start = pos + 1
    payload = buf[start:start + 3 * w * h]
    if len(payload) < 3 * w * h:
        raise DecodeError("truncated payload", start + len(payload))
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3)


def read_image(path) -> GrayImage:
    with open(path, "rb") as fh:
        return decode_image(fh.read())


def write_image(path, img: GrayImage, binary: bool = True) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_pgm(img, binary=binary))


def _axis_weights(n_in: int, n_out: int):
    # pixel-center alignment; same-size resize maps every sample onto itself
    pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    pos = np.clip(pos, 0.0, n_in - 1)
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, pos - lo


def resize_bilinear(img: GrayImage, out_w: int, out_h: int) -> GrayImage:
    """Resample to ``out_w`` x ``out_h`` with bilinear weights and half-up rounding."""
    if out_w < 1 or out_h < 1:
        raise ValueError("target dimensions must be at least 1")
    if (out_w, out_h) == (img.width, img.height):
        return img
    src = img.data.astype(np.float64)
    x0, x1, fx = _axis_weights(img.width, out_w)
    y0, y1, fy = _axis_weights(img.height, out_h)
    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bot = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    out = top * (1 - fy)[:, None] + bot * fy[:, None]
    out = np.clip(np.floor(out + 0.5), 0, 255)
    return GrayImage(out_w, out_h, out.astype(np.uint8))


def occlusion_mask(width: int, height: int, circle: OcclusionCircle) -> np.ndarray:
    """Boolean ``(height, width)`` mask of pixels whose centers fall inside the disk."""
    ys = np.arange(height)[:, None] + 0.5
    xs = np.arange(width)[None, :] + 0.5
    return (xs - circle.cx) ** 2 + (ys - circle.cy) ** 2 <= circle.r ** 2


def apply_occlusion(img: GrayImage, circle: OcclusionCircle) -> GrayImage:
    mask = occlusion_mask(img.width, img.height, circle)
    if not mask.any():
        return img
    out = img.data.copy()
    out[mask] = 0
    return GrayImage(img.width, img.height, out)
