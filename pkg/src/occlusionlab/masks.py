"""Binary pixel masks: rasterization, run-length coding, text records.

Conventions used throughout the toolkit:

* a mask is an ``H x W`` boolean array; ``bits[row, col]`` is True for
  occluded/selected pixels;
* run-length encoding is COCO-style: column-major (Fortran) scan,
  alternating run lengths starting with the count of zeros;
* a polygon covers a pixel iff the pixel center ``(col + 0.5, row + 0.5)``
  lies inside it under the even-odd (ray crossing) rule.
"""

from __future__ import annotations

import numpy as np

from .errors import GeometryError, ValidationError


class BinaryMask:
    """H x W boolean mask with a cached popcount."""

    __slots__ = ("bits", "_popcount")

    def __init__(self, bits: np.ndarray):
        bits = np.asarray(bits)
        if bits.ndim != 2:
            raise ValidationError(f"mask must be 2-D, got shape {bits.shape}")
        self.bits = bits.astype(bool, copy=False)
        self._popcount: int | None = None

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def popcount(self) -> int:
        if self._popcount is None:
            self._popcount = int(np.count_nonzero(self.bits))
        return self._popcount

    def fraction(self) -> float:
        """Occupied fraction of the canvas, in [0, 1]."""
        return self.popcount / (self.width * self.height)

    def is_empty(self) -> bool:
        return self.popcount == 0

    @classmethod
    def zeros(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def ones(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.ones((height, width), dtype=bool))

    def union(self, other: "BinaryMask") -> "BinaryMask":
        self._check_dims(other)
        return BinaryMask(self.bits | other.bits)

    def intersection(self, other: "BinaryMask") -> "BinaryMask":
        self._check_dims(other)
        return BinaryMask(self.bits & other.bits)

    def _check_dims(self, other: "BinaryMask") -> None:
        if self.bits.shape != other.bits.shape:
            raise ValidationError(
                f"mask shape mismatch: {self.bits.shape} vs {other.bits.shape}"
            )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.bits.shape == other.bits.shape and bool(
            np.array_equal(self.bits, other.bits)
        )

    def __repr__(self) -> str:
        return f"BinaryMask({self.width}x{self.height}, popcount={self.popcount})"


def rle_encode(bits: np.ndarray) -> list[int]:
    """Encode a boolean array as COCO-style uncompressed RLE counts.

    Column-major scan; counts alternate starting with zeros, so a mask
    whose first pixel is set begins with a literal 0.
    """
    flat = np.asarray(bits, dtype=bool).flatten(order="F")
    if flat.size == 0:
        return []
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    boundaries = np.concatenate(([0], changes, [flat.size]))
    runs = np.diff(boundaries).tolist()
    if flat[0]:
        runs = [0] + runs
    return [int(r) for r in runs]


def rle_decode(counts: list[int], width: int, height: int) -> BinaryMask:
    """Decode COCO-style uncompressed RLE counts into a BinaryMask."""
    total = sum(counts)
    if total != width * height:
        raise ValidationError(
            f"RLE counts sum to {total}, expected {width * height} "
            f"for a {width}x{height} mask"
        )
    if any(c < 0 for c in counts):
        raise ValidationError("RLE counts must be non-negative")
    flat = np.zeros(width * height, dtype=bool)
    pos = 0
    value = False
    for run in counts:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    return BinaryMask(flat.reshape((height, width), order="F"))


def mask_record(image_id: str, mask: BinaryMask) -> str:
    """Serialize a mask as a one-line text record: id, dims, RLE counts."""
    counts = ",".join(str(c) for c in rle_encode(mask.bits))
    return f"{image_id} {mask.width} {mask.height} {counts}"


def parse_mask_record(line: str) -> tuple[str, BinaryMask]:
    """Inverse of :func:`mask_record`."""
    parts = line.strip().split(" ")
    if len(parts) != 4:
        raise ValidationError(f"bad mask record (expected 4 fields): {line!r}")
    image_id, width_s, height_s, counts_s = parts
    try:
        width, height = int(width_s), int(height_s)
        counts = [int(c) for c in counts_s.split(",")] if counts_s else []
    except ValueError as exc:
        raise ValidationError(f"bad mask record numbers: {line!r}") from exc
    return image_id, rle_decode(counts, width, height)


def _polygon_inside(xs: np.ndarray, ys: np.ndarray, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Even-odd inside test for pixel centers px (W,) x py (H,).

    Returns an (H, W) boolean array. Classic ray-crossing test against
    each polygon edge, vectorized over the pixel grid.
    """
    inside = np.zeros((py.size, px.size), dtype=bool)
    n = xs.size
    for i in range(n):
        x1, y1 = xs[i], ys[i]
        x2, y2 = xs[(i + 1) % n], ys[(i + 1) % n]
        straddles = (y1 > py) != (y2 > py)
        if not straddles.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = (x2 - x1) * (py - y1) / (y2 - y1) + x1
        hit = straddles[:, None] & (px[None, :] < x_cross[:, None])
        inside ^= hit
    return inside


def rasterize_polygons(polygons: list[list[float]], width: int, height: int) -> BinaryMask:
    """Rasterize COCO-style polygons (union) onto a width x height canvas.

    Each polygon is a flat ``[x0, y0, x1, y1, ...]`` list. Raises
    :class:`GeometryError` when the geometry covers pixel centers
    outside the canvas, reporting how many pixels were clipped.
    """
    bits = np.zeros((height, width), dtype=bool)
    clipped = 0
    for poly in polygons:
        if len(poly) < 6 or len(poly) % 2 != 0:
            continue  # degenerate; validate_partset flags zero-area parts
        xs = np.asarray(poly[0::2], dtype=np.float64)
        ys = np.asarray(poly[1::2], dtype=np.float64)
        col_lo = int(np.floor(xs.min())) - 1
        col_hi = int(np.ceil(xs.max())) + 1
        row_lo = int(np.floor(ys.min())) - 1
        row_hi = int(np.ceil(ys.max())) + 1
        px = np.arange(col_lo, col_hi + 1, dtype=np.float64) + 0.5
        py = np.arange(row_lo, row_hi + 1, dtype=np.float64) + 0.5
        inside = _polygon_inside(xs, ys, px, py)
        cols = np.arange(col_lo, col_hi + 1)
        rows = np.arange(row_lo, row_hi + 1)
        in_canvas = (cols >= 0) & (cols < width)
        in_canvas_r = (rows >= 0) & (rows < height)
        clipped += int(inside.sum() - inside[np.ix_(in_canvas_r, in_canvas)].sum())
        sub = inside[np.ix_(in_canvas_r, in_canvas)]
        bits[np.ix_(rows[in_canvas_r], cols[in_canvas])] |= sub
    if clipped > 0:
        raise GeometryError(
            f"polygon geometry covers {clipped} pixels outside the "
            f"{width}x{height} canvas",
            clipped_pixels=clipped,
        )
    return BinaryMask(bits)
