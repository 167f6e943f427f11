"""Image decoding, RGB to YUV conversion and planar YUV file I/O.

Conversion uses the full-range BT.601 matrix with Cb/Cr centred at
2^(bit_depth-1).  All rounding in this module is half away from zero so
that dataset preparation is reproducible across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

SUPPORTED_FORMATS = ("PNG", "PPM")

# Full-range BT.601 (rows: Y, Cb, Cr; columns: R, G, B).
_RGB_TO_YUV = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168736, -0.331264, 0.5],
        [0.5, -0.418688, -0.081312],
    ],
    dtype=np.float64,
)


def round_half_away(x: np.ndarray) -> np.ndarray:
    """Round to nearest integer with ties going away from zero."""
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


@dataclass
class RgbImage:
    """Decoded 8-bit RGB raster, `samples` shaped (height, width, 3)."""

    width: int
    height: int
    samples: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be at least 1x1")
        if self.samples.shape != (self.height, self.width, 3):
            raise ValueError(
                f"samples shape {self.samples.shape} does not match "
                f"{self.height}x{self.width}x3"
            )
        if self.samples.dtype != np.uint8:
            raise ValueError("samples must be 8-bit")


@dataclass
class Frame:
    """Planar YUV frame with unsigned integer sample planes."""

    y: np.ndarray
    cb: np.ndarray
    cr: np.ndarray
    bit_depth: int = 10
    chroma_format: int = 444

    def __post_init__(self):
        if self.chroma_format not in (444, 420):
            raise ValueError(f"unsupported chroma format {self.chroma_format}")
        h, w = self.y.shape
        if self.chroma_format == 444:
            expected = (h, w)
        else:
            if h % 2 or w % 2:
                raise ValueError("4:2:0 requires even luma dimensions")
            expected = (h // 2, w // 2)
        if self.cb.shape != expected or self.cr.shape != expected:
            raise ValueError(
                f"chroma plane shape {self.cb.shape} does not match {expected}"
            )
        peak = 1 << self.bit_depth
        for plane in (self.y, self.cb, self.cr):
            if plane.max(initial=0) >= peak:
                raise ValueError(f"sample exceeds {self.bit_depth}-bit range")

    @property
    def width(self) -> int:
        return self.y.shape[1]

    @property
    def height(self) -> int:
        return self.y.shape[0]


def decode_image(path) -> RgbImage:
    """Decode a PNG or PPM file into an 8-bit RGB raster.

    Anything that is not an 8-bit PNG/PPM (including 16-bit or
    alpha-carrying variants) is rejected rather than silently converted.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            if im.format not in SUPPORTED_FORMATS:
                raise ValueError(
                    f"unsupported image format {im.format!r} "
                    f"(expected one of {SUPPORTED_FORMATS})"
                )
            if im.mode not in ("RGB", "L", "P", "1"):
                raise ValueError(
                    f"unsupported pixel mode {im.mode!r} (8-bit RGB/gray only)"
                )
            rgb = im.convert("RGB")
            samples = np.asarray(rgb, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise ValueError(f"{path}: not a decodable image") from exc
    except OSError as exc:
        # Pillow raises OSError both for unreadable files and for streams
        # that are truncated mid-decode.
        raise ValueError(f"{path}: corrupt or unreadable image stream") from exc
    height, width = samples.shape[:2]
    return RgbImage(width=width, height=height, samples=samples)


def rgb_to_yuv444(img: RgbImage, bit_depth: int = 10) -> Frame:
    """Convert an 8-bit RGB image to a full-range BT.601 4:4:4 frame.

    8-bit channels are first rescaled to `bit_depth` by (2^bit_depth - 1)/255
    with half-away-from-zero rounding, then run through the matrix.
    """
    if bit_depth not in (8, 10):
        raise ValueError(f"unsupported bit depth {bit_depth}")
    peak = (1 << bit_depth) - 1
    center = 1 << (bit_depth - 1)
    rgb = img.samples.astype(np.float64)
    if bit_depth != 8:
        rgb = round_half_away(rgb * (peak / 255.0))
    yuv = rgb @ _RGB_TO_YUV.T
    yuv[..., 1] += center
    yuv[..., 2] += center
    planes = np.clip(round_half_away(yuv), 0, peak).astype(np.uint16)
    return Frame(
        y=planes[..., 0],
        cb=planes[..., 1],
        cr=planes[..., 2],
        bit_depth=bit_depth,
        chroma_format=444,
    )


def subsample_420(frame: Frame) -> Frame:
    """Down-sample a 4:4:4 frame to 4:2:0 by 2x2 chroma means.

    Odd frames are cropped (right/bottom) to even dimensions first; no
    synthetic samples are ever introduced.
    """
    if frame.chroma_format != 444:
        raise ValueError("input frame must be 4:4:4")
    h = frame.height - frame.height % 2
    w = frame.width - frame.width % 2
    if h == 0 or w == 0:
        raise ValueError("frame too small for 4:2:0 subsampling")
    y = frame.y[:h, :w]
    peak = (1 << frame.bit_depth) - 1

    def pool(plane):
        quads = plane[:h, :w].astype(np.float64).reshape(h // 2, 2, w // 2, 2)
        mean = quads.mean(axis=(1, 3))
        return np.clip(round_half_away(mean), 0, peak).astype(np.uint16)

    return Frame(
        y=y.copy(),
        cb=pool(frame.cb),
        cr=pool(frame.cr),
        bit_depth=frame.bit_depth,
        chroma_format=420,
    )


def _sample_dtype(bit_depth: int):
    # >8-bit samples are stored as 16-bit little-endian words.
    return np.dtype("<u2") if bit_depth > 8 else np.dtype("u1")


def yuv_file_size(width: int, height: int, bit_depth: int, chroma_format: int) -> int:
    """Exact byte size of a planar YUV file with the layout used here."""
    per_sample = _sample_dtype(bit_depth).itemsize
    luma = width * height
    if chroma_format == 444:
        chroma = luma
    elif chroma_format == 420:
        chroma = (width // 2) * (height // 2)
    else:
        raise ValueError(f"unsupported chroma format {chroma_format}")
    return (luma + 2 * chroma) * per_sample


def write_yuv(frame: Frame, path) -> None:
    """Write a frame as planar Y then Cb then Cr."""
    dtype = _sample_dtype(frame.bit_depth)
    with open(path, "wb") as f:
        for plane in (frame.y, frame.cb, frame.cr):
            f.write(np.ascontiguousarray(plane, dtype=dtype).tobytes())


def read_yuv(path, width: int, height: int, bit_depth: int = 10,
             chroma_format: int = 420) -> Frame:
    """Read a planar YUV file; the file length must match the layout exactly."""
    expected = yuv_file_size(width, height, bit_depth, chroma_format)
    data = Path(path).read_bytes()
    if len(data) != expected:
        raise ValueError(
            f"{path}: size mismatch, got {len(data)} bytes, expected {expected}"
        )
    dtype = _sample_dtype(bit_depth)
    raw = np.frombuffer(data, dtype=dtype)
    if chroma_format == 444:
        ch, cw = height, width
    else:
        ch, cw = height // 2, width // 2
    ny = width * height
    nc = cw * ch
    y = raw[:ny].reshape(height, width)
    cb = raw[ny:ny + nc].reshape(ch, cw)
    cr = raw[ny + nc:].reshape(ch, cw)
    return Frame(
        y=y.astype(np.uint16),
        cb=cb.astype(np.uint16),
        cr=cr.astype(np.uint16),
        bit_depth=bit_depth,
        chroma_format=chroma_format,
    )
