"""Binary dataset container for block samples plus a JSON sidecar manifest.

Layout (all little-endian):

    magic "CHRB" | version u16 | chroma_format u16 | record count u32 |
    size-table length u16 | size-table entries (side u16, count u32) |
    records

Each record:

    side u16 | origin_x u32 | origin_y u32 |
    luma block   float32[L*L]           L = 2*side (4:2:0) or side (4:4:4)
    luma bound   float32[2L+1] + u8[2L+1] availability flags
    cb bound     float32[2*side+1] + u8[...]
    cr bound     float32[2*side+1] + u8[...]
    cb target    float32[side*side]
    cr target    float32[side*side]

Boundary coordinates are not stored; they are a pure function of the side
and are rebuilt on read.  Values are float32, so a write/read round trip
is bit-identical.
"""

from __future__ import annotations

import json
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .blocks import BlockSample, BoundaryArray, boundary_coords

MAGIC = b"CHRB"
VERSION = 1

_HEADER = struct.Struct("<4sHHIH")
_SIZE_ENTRY = struct.Struct("<HI")
_RECORD_HEAD = struct.Struct("<HII")


@dataclass
class DatasetHeader:
    version: int
    chroma_format: int
    count: int
    histogram: dict[int, int]


def manifest_path(path) -> Path:
    return Path(str(path) + ".json")


def write_dataset(samples: list[BlockSample], path, manifest: dict | None = None) -> None:
    """Write samples to `path` and a JSON manifest to `path`.json."""
    if not samples:
        raise ValueError("refusing to write an empty dataset")
    fmt = samples[0].chroma_format
    if any(s.chroma_format != fmt for s in samples):
        raise ValueError("all samples in a dataset must share one chroma format")
    histogram = Counter(s.n for s in samples)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, fmt, len(samples), len(histogram)))
        for side in sorted(histogram):
            f.write(_SIZE_ENTRY.pack(side, histogram[side]))
        for s in samples:
            f.write(_RECORD_HEAD.pack(s.n, s.origin[0], s.origin[1]))
            f.write(np.ascontiguousarray(s.luma_block, dtype="<f4").tobytes())
            for b in (s.b_y, s.b_cb, s.b_cr):
                f.write(np.ascontiguousarray(b.values, dtype="<f4").tobytes())
                f.write(np.ascontiguousarray(b.available, dtype="u1").tobytes())
            f.write(np.ascontiguousarray(s.target_cb, dtype="<f4").tobytes())
            f.write(np.ascontiguousarray(s.target_cr, dtype="<f4").tobytes())
    meta = {
        "records": len(samples),
        "chroma_format": fmt,
        "histogram": {str(k): v for k, v in sorted(histogram.items())},
    }
    if manifest:
        meta.update(manifest)
    manifest_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True))


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, nbytes: int) -> bytes:
        if self.pos + nbytes > len(self.data):
            raise ValueError(f"{self.path}: truncated dataset file")
        chunk = self.data[self.pos:self.pos + nbytes]
        self.pos += nbytes
        return chunk

    def floats(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(4 * count), dtype="<f4").copy()

    def flags(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(count), dtype="u1").astype(bool)


def _read_header(r: _Reader) -> DatasetHeader:
    magic, version, fmt, count, nsizes = _HEADER.unpack(r.take(_HEADER.size))
    if magic != MAGIC:
        raise ValueError(f"{r.path}: bad magic {magic!r}, not a dataset file")
    if version != VERSION:
        raise ValueError(f"{r.path}: unsupported dataset version {version}")
    histogram = {}
    for _ in range(nsizes):
        side, n = _SIZE_ENTRY.unpack(r.take(_SIZE_ENTRY.size))
        histogram[side] = n
    return DatasetHeader(version=version, chroma_format=fmt, count=count,
                         histogram=histogram)


def read_dataset_header(path) -> DatasetHeader:
    data = Path(path).read_bytes()
    return _read_header(_Reader(data, path))


def read_dataset(path) -> list[BlockSample]:
    """Read back every sample; value-identical to what was written."""
    data = Path(path).read_bytes()
    r = _Reader(data, path)
    header = _read_header(r)
    samples = []
    for _ in range(header.count):
        n, ox, oy = _RECORD_HEAD.unpack(r.take(_RECORD_HEAD.size))
        luma_side = 2 * n if header.chroma_format == 420 else n
        luma = r.floats(luma_side * luma_side).reshape(luma_side, luma_side)

        def bound(side):
            ln = 2 * side + 1
            return BoundaryArray(values=r.floats(ln), available=r.flags(ln),
                                 coords=boundary_coords(side))

        b_y = bound(luma_side)
        b_cb = bound(n)
        b_cr = bound(n)
        target_cb = r.floats(n * n).reshape(n, n)
        target_cr = r.floats(n * n).reshape(n, n)
        samples.append(BlockSample(
            n=n,
            chroma_format=header.chroma_format,
            luma_block=luma,
            b_y=b_y,
            b_cb=b_cb,
            b_cr=b_cr,
            target_cb=target_cb,
            target_cr=target_cr,
            origin=(ox, oy),
        ))
    if r.pos != len(data):
        raise ValueError(f"{path}: {len(data) - r.pos} trailing bytes after "
                         f"{header.count} records")
    actual = Counter(s.n for s in samples)
    if dict(actual) != header.histogram:
        raise ValueError(f"{path}: header histogram does not match records")
    return samples
