"""Block sample extraction: single-line boundaries, DC fill, boundary
pooling, location maps and per-variant input assembly.

Boundary ordering convention used throughout: left column bottom to top,
then the top-left corner, then the top row left to right, giving 2M+1
entries for a block of side M.  Reference samples outside the frame are
substituted with the mid-range (DC) value, normalized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .media import Frame

#: Chroma block sides supported by the dataset pipeline and the models.
BLOCK_SIZES = (4, 8, 16)


def dc_fill_normalized(bit_depth: int = 10) -> float:
    """Mid-range substitute for unavailable reference samples, in [0,1]."""
    return float(1 << (bit_depth - 1)) / float((1 << bit_depth) - 1)


def boundary_coords(side: int) -> np.ndarray:
    """Pixel offsets of the 2*side+1 boundary entries relative to the block
    origin, ordered left column bottom->top, corner, top row left->right.

    Returns an int array of shape (2*side+1, 2) holding (x, y) pairs.
    """
    if side < 1:
        raise ValueError("side must be at least 1")
    coords = np.empty((2 * side + 1, 2), dtype=np.int64)
    coords[:side, 0] = -1
    coords[:side, 1] = np.arange(side - 1, -1, -1)
    coords[side] = (-1, -1)
    coords[side + 1:, 0] = np.arange(side)
    coords[side + 1:, 1] = -1
    return coords


@dataclass
class BoundaryArray:
    """Single reference line around a block in one sample plane."""

    values: np.ndarray     # normalized samples, unavailable entries DC-filled
    available: np.ndarray  # bool per entry
    coords: np.ndarray     # (x, y) offsets relative to the block origin

    def __post_init__(self):
        n = len(self.values)
        if n % 2 != 1:
            raise ValueError("boundary length must be odd (2M+1)")
        if len(self.available) != n or self.coords.shape != (n, 2):
            raise ValueError("boundary field lengths disagree")

    @property
    def side(self) -> int:
        return (len(self.values) - 1) // 2


def build_boundary(plane: np.ndarray, origin: tuple[int, int], side: int,
                   bit_depth: int = 10) -> BoundaryArray:
    """Collect the single reference line of a block at `origin` (x0, y0).

    An entry is available iff its pixel lies inside `plane`; by
    construction every boundary pixel is already above or left of the
    block.  Unavailable entries hold the normalized DC value.
    """
    h, w = plane.shape
    x0, y0 = origin
    if x0 < 0 or y0 < 0 or x0 + side > w or y0 + side > h:
        raise ValueError(
            f"block origin {origin} with side {side} not inside {w}x{h} plane"
        )
    coords = boundary_coords(side)
    xs = coords[:, 0] + x0
    ys = coords[:, 1] + y0
    available = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
    values = np.full(len(coords), dc_fill_normalized(bit_depth),
                     dtype=plane.dtype)
    values[available] = plane[ys[available], xs[available]]
    return BoundaryArray(values=values, available=available, coords=coords)


def pool_luma_boundary(b_y: np.ndarray) -> np.ndarray:
    """Average-pool a luma boundary of length 4N+1 down to 2N+1.

    The array is first extended to length 4N+2 by replicating its final
    (top-rightmost) sample, then adjacent pairs are averaged:
    out(i) = (b[2i] + b[2i+1]) / 2.
    """
    b_y = np.asarray(b_y)
    if b_y.ndim != 1 or len(b_y) < 5 or (len(b_y) - 1) % 4 != 0:
        raise ValueError(f"expected a 1-D boundary of length 4N+1, got {b_y.shape}")
    padded = np.concatenate([b_y, b_y[-1:]])
    return (padded[0::2] + padded[1::2]) / 2


@dataclass
class LocationMaps:
    """Normalized abscissa/ordinate maps for a block and its boundary.

    Block maps hold a(i,j) = j/N and o(i,j) = i/N; boundary maps apply the
    same 1/N normalization to the boundary pixel offsets, so the left
    column carries abscissa -1/N and the top row ordinate -1/N.
    """

    a_block: np.ndarray
    o_block: np.ndarray
    a_bound: np.ndarray
    o_bound: np.ndarray


def build_location_maps(n: int) -> LocationMaps:
    if n < 1:
        raise ValueError("block side must be at least 1")
    idx = np.arange(n, dtype=np.float64) / n
    a_block = np.tile(idx, (n, 1))
    o_block = a_block.T.copy()
    coords = boundary_coords(n)
    a_bound = coords[:, 0].astype(np.float64) / n
    o_bound = coords[:, 1].astype(np.float64) / n
    return LocationMaps(
        a_block=a_block.astype(np.float32),
        o_block=o_block.astype(np.float32),
        a_bound=a_bound.astype(np.float32),
        o_bound=o_bound.astype(np.float32),
    )


@dataclass
class BlockSample:
    """One training/evaluation instance extracted from a frame.

    Under 4:2:0 the collocated luma block is 2Nx2N and its boundary has
    4N+1 entries; under 4:4:4 both match the chroma geometry (NxN, 2N+1).
    All values are normalized to [0, 1].
    """

    n: int
    chroma_format: int
    luma_block: np.ndarray
    b_y: BoundaryArray
    b_cb: BoundaryArray
    b_cr: BoundaryArray
    target_cb: np.ndarray
    target_cr: np.ndarray
    origin: tuple[int, int] = field(default=(0, 0))

    def __post_init__(self):
        if self.chroma_format not in (444, 420):
            raise ValueError(f"unsupported chroma format {self.chroma_format}")
        luma_side = 2 * self.n if self.chroma_format == 420 else self.n
        if self.luma_block.shape != (luma_side, luma_side):
            raise ValueError(
                f"luma block shape {self.luma_block.shape} does not match "
                f"side {luma_side}"
            )
        if len(self.b_y.values) != 2 * luma_side + 1:
            raise ValueError("luma boundary length does not match luma block")
        for b in (self.b_cb, self.b_cr):
            if len(b.values) != 2 * self.n + 1:
                raise ValueError("chroma boundary length does not match block")
        for t in (self.target_cb, self.target_cr):
            if t.shape != (self.n, self.n):
                raise ValueError("target shape does not match block side")


def _normalized_planes(frame: Frame) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    peak = np.float32((1 << frame.bit_depth) - 1)
    return (
        frame.y.astype(np.float32) / peak,
        frame.cb.astype(np.float32) / peak,
        frame.cr.astype(np.float32) / peak,
    )


def _extract_at(y, cb, cr, chroma_format, bit_depth, n, origin) -> BlockSample:
    x0, y0 = origin
    if chroma_format == 420:
        luma_origin = (2 * x0, 2 * y0)
        luma_side = 2 * n
    else:
        luma_origin = (x0, y0)
        luma_side = n
    lx, ly = luma_origin
    luma_block = y[ly:ly + luma_side, lx:lx + luma_side].copy()
    return BlockSample(
        n=n,
        chroma_format=chroma_format,
        luma_block=luma_block,
        b_y=build_boundary(y, luma_origin, luma_side, bit_depth),
        b_cb=build_boundary(cb, origin, n, bit_depth),
        b_cr=build_boundary(cr, origin, n, bit_depth),
        target_cb=cb[y0:y0 + n, x0:x0 + n].copy(),
        target_cr=cr[y0:y0 + n, x0:x0 + n].copy(),
        origin=(x0, y0),
    )


def extract_block(frame: Frame, n: int, origin: tuple[int, int]) -> BlockSample:
    """Extract the single block whose chroma-plane origin is `origin`."""
    y, cb, cr = _normalized_planes(frame)
    hc, wc = cb.shape
    x0, y0 = origin
    if x0 < 0 or y0 < 0 or x0 + n > wc or y0 + n > hc:
        raise ValueError(
            f"block origin {origin} with side {n} not inside "
            f"{wc}x{hc} chroma plane"
        )
    return _extract_at(y, cb, cr, frame.chroma_format, frame.bit_depth, n, origin)


def extract_samples(frame: Frame, n: int, count: int, seed: int) -> list[BlockSample]:
    """Draw `count` block samples with origins uniform over the frame.

    Deterministic for a given seed.  Raises if the chroma plane cannot
    hold a single NxN block.
    """
    if n < 1:
        raise ValueError("block side must be at least 1")
    if count < 0:
        raise ValueError("count must be non-negative")
    y, cb, cr = _normalized_planes(frame)
    hc, wc = cb.shape
    if wc < n or hc < n:
        raise ValueError(
            f"frame chroma plane {wc}x{hc} smaller than {n}x{n} block"
        )
    rng = np.random.default_rng(seed)
    xs = rng.integers(0, wc - n + 1, size=count)
    ys = rng.integers(0, hc - n + 1, size=count)
    return [
        _extract_at(y, cb, cr, frame.chroma_format, frame.bit_depth, n,
                    (int(x0), int(y0)))
        for x0, y0 in zip(xs, ys)
    ]


def assemble_scheme_a(sample: BlockSample) -> tuple[np.ndarray, np.ndarray]:
    """Inputs for the down-sampling-branch variant from a 4:2:0 sample.

    Returns the cross-component boundary volume S of shape (3, 2N+1) with
    rows (pooled luma boundary, Cb boundary, Cr boundary), and the raw
    2Nx2N luma block X.
    """
    if sample.chroma_format != 420:
        raise ValueError("scheme-A assembly requires a 4:2:0 sample")
    pooled = pool_luma_boundary(sample.b_y.values)
    s = np.stack([pooled, sample.b_cb.values, sample.b_cr.values])
    return s, sample.luma_block


def assemble_baseline(sample: BlockSample) -> tuple[np.ndarray, np.ndarray]:
    """Inputs for the plain attention variant from a 4:4:4 sample.

    Returns S of shape (3, 2N+1) with rows (luma, Cb, Cr boundaries) and
    the NxN luma block X.
    """
    if sample.chroma_format != 444:
        raise ValueError("baseline assembly requires a 4:4:4 sample")
    s = np.stack([sample.b_y.values, sample.b_cb.values, sample.b_cr.values])
    return s, sample.luma_block


def required_chroma_format(variant: str) -> int:
    """Chroma format a model variant consumes (scheme_a: 420, others: 444)."""
    if variant == "scheme_a":
        return 420
    if variant in ("baseline", "scheme_b"):
        return 444
    raise ValueError(f"unknown variant {variant!r}")


def assemble_inputs(sample: BlockSample, variant: str) -> tuple[np.ndarray, np.ndarray]:
    """Dispatch to the assembly routine matching a model variant."""
    if variant == "baseline":
        return assemble_baseline(sample)
    if variant == "scheme_a":
        return assemble_scheme_a(sample)
    if variant == "scheme_b":
        return assemble_scheme_b(sample)
    raise ValueError(f"unknown variant {variant!r}")


def assemble_scheme_b(sample: BlockSample) -> tuple[np.ndarray, np.ndarray]:
    """Inputs for the location-map variant from a 4:4:4 sample.

    Returns S1 of shape (5, 2N+1) with channels (luma, Cb, Cr boundaries,
    boundary abscissa map, boundary ordinate map), and X1 of shape
    (N, N, 3) with channels (luma block, abscissa map, ordinate map).
    """
    if sample.chroma_format != 444:
        raise ValueError("scheme-B assembly requires a 4:4:4 sample")
    maps = build_location_maps(sample.n)
    dtype = sample.luma_block.dtype
    s1 = np.stack([
        sample.b_y.values,
        sample.b_cb.values,
        sample.b_cr.values,
        maps.a_bound.astype(dtype),
        maps.o_bound.astype(dtype),
    ])
    x1 = np.stack([
        sample.luma_block,
        maps.a_block.astype(dtype),
        maps.o_block.astype(dtype),
    ], axis=-1)
    return s1, x1
