"""Binary mask algebra: IoU, boxes, connected components, hole filling, morphology.

A BinaryMask is an immutable value wrapping a read-only boolean array in
(height, width) layout. Everything in this module is a pure function, so
masks can be shared freely across worker threads.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import EmptyMaskError, ShapeMismatchError

_STRUCT_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_STRUCT_8 = np.ones((3, 3), dtype=bool)


class BinaryMask:
    """Dense binary raster of one instance on a fixed canvas."""

    __slots__ = ("_arr", "_area", "_bounds_cache")

    def __init__(self, pixels) -> None:
        arr = np.array(pixels, dtype=bool, copy=True)
        if arr.ndim != 2:
            raise ValueError(f"mask must be 2-d, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("mask canvas must be at least 1x1")
        arr.setflags(write=False)
        self._arr = arr
        self._area = None
        self._bounds_cache = False

    @staticmethod
    def _wrap(arr: np.ndarray) -> "BinaryMask":
        # Zero-copy constructor for arrays this package created itself.
        m = object.__new__(BinaryMask)
        if arr.dtype != bool:
            arr = arr.astype(bool)
        arr.setflags(write=False)
        m._arr = arr
        m._area = None
        m._bounds_cache = False
        return m

    @classmethod
    def zeros(cls, width: int, height: int) -> "BinaryMask":
        return cls._wrap(np.zeros((height, width), dtype=bool))

    @property
    def width(self) -> int:
        return self._arr.shape[1]

    @property
    def height(self) -> int:
        return self._arr.shape[0]

    @property
    def area(self) -> int:
        if self._area is None:
            self._area = int(np.count_nonzero(self._arr))
        return self._area

    @property
    def is_empty(self) -> bool:
        return self.area == 0

    def _bounds(self) -> tuple[int, int, int, int] | None:
        """Cached (y0, y1, x0, x1) inclusive bounds, or None when empty."""
        if self._bounds_cache is False:
            ys, xs = np.nonzero(self._arr)
            if ys.size == 0:
                self._bounds_cache = None
            else:
                self._bounds_cache = (
                    int(ys.min()),
                    int(ys.max()),
                    int(xs.min()),
                    int(xs.max()),
                )
        return self._bounds_cache

    def to_array(self) -> np.ndarray:
        """Read-only (height, width) boolean view."""
        return self._arr

    def first_pixel(self) -> tuple[int, int] | None:
        """Smallest (y, x) set pixel in row-major order, or None if empty."""
        flat = np.argmax(self._arr)
        if not self._arr.ravel()[flat]:
            return None
        return int(flat // self.width), int(flat % self.width)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self._arr.shape == other._arr.shape and bool(
            np.array_equal(self._arr, other._arr)
        )

    __hash__ = None  # equality is by content; keep masks unhashable

    def __repr__(self) -> str:
        return f"BinaryMask({self.width}x{self.height}, area={self.area})"


@dataclass(frozen=True)
class PixelBox:
    """Inclusive pixel-index bounding box."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self) -> None:
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"invalid box {self}")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def height(self) -> int:
        return self.y_max - self.y_min + 1

    @property
    def area(self) -> int:
        return self.width * self.height


def _require_same_canvas(a: BinaryMask, b: BinaryMask) -> None:
    if a.to_array().shape != b.to_array().shape:
        raise ShapeMismatchError(
            f"mask canvases differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


def iou_mask(a: BinaryMask, b: BinaryMask) -> float:
    """|a mask b| / |a union b|; 0.0 when the union is empty."""
    _require_same_canvas(a, b)
    aa, bb = a.to_array(), b.to_array()
    inter = int(np.count_nonzero(aa & bb))
    union = int(np.count_nonzero(aa | bb))
    if union == 0:
        return 0.0
    return inter / union


def iou_box(a: PixelBox, b: PixelBox) -> float:
    """IoU of two inclusive pixel boxes by pixel counts."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min) + 1
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min) + 1
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union


def bounding_box(m: BinaryMask) -> PixelBox:
    """Tightest inclusive box around the set pixels."""
    bounds = m._bounds()
    if bounds is None:
        raise EmptyMaskError("mask has no set pixels")
    y0, y1, x0, x1 = bounds
    return PixelBox(x0, y0, x1, y1)


def connected_components(m: BinaryMask, connectivity: int = 8) -> list[BinaryMask]:
    """Split a mask into connected components on the original canvas.

    Components are ordered by descending area, ties broken by the smallest
    (y, x) pixel, so downstream reports are reproducible byte for byte.
    """
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    arr = m.to_array()
    structure = _STRUCT_8 if connectivity == 8 else _STRUCT_4
    labels, n = ndimage.label(arr, structure=structure)
    if n == 0:
        return []
    flat = labels.ravel()
    areas = np.bincount(flat, minlength=n + 1)[1:]
    first = np.full(n, flat.size, dtype=np.int64)
    idx = np.flatnonzero(flat)
    np.minimum.at(first, flat[idx] - 1, idx)
    order = sorted(range(n), key=lambda k: (-int(areas[k]), int(first[k])))
    return [BinaryMask._wrap(labels == k + 1) for k in order]


def fill_holes(m: BinaryMask) -> BinaryMask:
    """Set background regions that cannot reach the canvas border (4-connectivity)."""
    arr = m.to_array()
    bg = ~arr
    labels, n = ndimage.label(bg, structure=_STRUCT_4)
    if n == 0:
        return m
    border = np.unique(
        np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]])
    )
    reaches_border = np.zeros(n + 1, dtype=bool)
    reaches_border[border[border > 0]] = True
    holes = (labels > 0) & ~reaches_border[labels]
    return BinaryMask._wrap(arr | holes)


def disc(radius: int) -> np.ndarray:
    """Disc structuring element: (dx, dy) included iff dx^2 + dy^2 <= radius^2."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    r = int(radius)
    dy, dx = np.mgrid[-r : r + 1, -r : r + 1]
    return dx * dx + dy * dy <= r * r


def dilate(m: BinaryMask, radius: int) -> BinaryMask:
    """Disc dilation, clipped at the canvas. Radius 0 is the identity."""
    if radius <= 0:
        return m
    return BinaryMask._wrap(ndimage.binary_dilation(m.to_array(), structure=disc(radius)))


def erode(m: BinaryMask, radius: int) -> BinaryMask:
    """Disc erosion; pixels outside the canvas count as background."""
    if radius <= 0:
        return m
    return BinaryMask._wrap(
        ndimage.binary_erosion(m.to_array(), structure=disc(radius), border_value=0)
    )


def morphological_close(m: BinaryMask, radius: int) -> BinaryMask:
    """Dilation then erosion with a disc.

    Computed on a canvas padded by the radius so the result equals the
    unbounded-plane closing restricted to the canvas; this keeps the
    operation extensive even for shapes touching the border.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0:
        return m
    fp = disc(radius)
    padded = np.pad(m.to_array(), radius)
    padded = ndimage.binary_dilation(padded, structure=fp)
    padded = ndimage.binary_erosion(padded, structure=fp, border_value=0)
    return BinaryMask._wrap(padded[radius:-radius, radius:-radius])
