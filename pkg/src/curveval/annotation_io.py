"""Annotation parsing and geometry/mask conversion.

Supported inputs:
  * COCO instance JSON (ground truth) and COCO results arrays (predictions),
    with polygon and run-length segmentations, including the compressed
    variable-length text encoding of run lengths.
  * YOLO segmentation text, one ``class x1 y1 ... xn yn [conf]`` line per
    instance with coordinates normalized to [0, 1].
  * A raster manifest: a JSON list of (image_id, PNG path, optional score)
    records, one 8-bit grayscale PNG per instance, nonzero = foreground.

Parsing is pure and deterministic; instances keep their source order and
carry their rasterized mask so downstream evaluation never re-rasterizes.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    FormatError,
    GeometryError,
    ParseError,
    RleCodecError,
    RleLengthError,
    SchemaError,
    ScoreRangeError,
    UnknownIdError,
)
from .mask_ops import BinaryMask


class ClampWarning(UserWarning):
    """Out-of-range coordinates were clamped instead of rejected."""


@dataclass(frozen=True)
class ImageInfo:
    id: int
    width: int
    height: int
    file_name: str


@dataclass(frozen=True)
class Category:
    id: int
    name: str


@dataclass(frozen=True)
class DatasetDescriptor:
    images: tuple[ImageInfo, ...]
    categories: tuple[Category, ...]

    def __post_init__(self) -> None:
        seen = set()
        for img in self.images:
            if img.id in seen:
                raise SchemaError(f"duplicate image id {img.id}")
            seen.add(img.id)
            if img.width < 1 or img.height < 1:
                raise SchemaError(
                    f"image {img.id} has invalid size {img.width}x{img.height}"
                )

    def image(self, image_id: int) -> ImageInfo:
        for img in self.images:
            if img.id == image_id:
                return img
        raise UnknownIdError(f"unknown image_id {image_id}")

    def has_image(self, image_id: int) -> bool:
        return any(img.id == image_id for img in self.images)

    def has_category(self, category_id: int) -> bool:
        return any(cat.id == category_id for cat in self.categories)


@dataclass(frozen=True)
class PolygonGeometry:
    """One or more rings of (x, y) vertices; rings are unioned when filled."""

    rings: tuple[tuple[tuple[float, float], ...], ...]

    def __post_init__(self) -> None:
        for ring in self.rings:
            if len(ring) < 3:
                raise GeometryError(f"degenerate ring with {len(ring)} vertices")


@dataclass(frozen=True)
class RleGeometry:
    """Column-major run lengths starting with a (possibly zero) background run."""

    size: tuple[int, int]  # (height, width)
    counts: tuple[int, ...] | str


SegmentationGeometry = PolygonGeometry | RleGeometry


@dataclass(frozen=True)
class GtInstance:
    annotation_id: int
    image_id: int
    category_id: int
    geometry: SegmentationGeometry
    mask: BinaryMask | None = field(default=None, compare=False)


@dataclass(frozen=True)
class PredInstance:
    image_id: int
    category_id: int
    geometry: SegmentationGeometry
    score: float
    mask: BinaryMask | None = field(default=None, compare=False)


# --------------------------------------------------------------------------
# run-length codec


def rle_encode(mask: BinaryMask, compressed: bool = False) -> RleGeometry:
    """Column-major run-length encoding; round-trips bit-exactly."""
    flat = mask.to_array().ravel(order="F")
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    counts = np.diff(bounds).tolist()
    if flat[0]:
        counts = [0] + counts
    if compressed:
        return RleGeometry(
            (mask.height, mask.width), rle_counts_to_string(counts)
        )
    return RleGeometry((mask.height, mask.width), tuple(int(c) for c in counts))


def rle_decode(rle: RleGeometry) -> BinaryMask:
    """Inverse of rle_encode; accepts integer-list and compressed-text counts."""
    h, w = rle.size
    counts = (
        rle_string_to_counts(rle.counts)
        if isinstance(rle.counts, str)
        else list(rle.counts)
    )
    total = int(sum(counts))
    if total != h * w:
        raise RleLengthError(f"rle length mismatch: counts sum {total} != {h * w}")
    values = np.zeros(len(counts), dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, counts)
    return BinaryMask._wrap(flat.reshape((h, w), order="F"))


def rle_counts_to_string(counts) -> str:
    """Compressed text form: 5 data bits per char, ascii 48..111, with the
    fourth and later counts stored as deltas against the count two back."""
    chars: list[str] = []
    counts = [int(c) for c in counts]
    for i, c in enumerate(counts):
        x = c - (counts[i - 2] if i > 2 else 0)
        more = True
        while more:
            piece = x & 0x1F
            x >>= 5
            more = (x != -1) if piece & 0x10 else (x != 0)
            if more:
                piece |= 0x20
            chars.append(chr(piece + 48))
    return "".join(chars)


def rle_string_to_counts(text: str) -> list[int]:
    """Decode the compressed text form back to integer counts."""
    if not text:
        return []
    try:
        raw = text.encode("latin-1")
    except UnicodeEncodeError as exc:
        raise RleCodecError(
            f"invalid rle character {text[exc.start]!r} at index {exc.start}"
        ) from exc
    codes = np.frombuffer(raw, dtype=np.uint8).astype(np.int64) - 48
    bad = np.flatnonzero((codes < 0) | (codes > 63))
    if bad.size:
        p = int(bad[0])
        raise RleCodecError(f"invalid rle character {text[p]!r} at index {p}")
    more = (codes & 0x20) != 0
    if more[-1]:
        start = int(np.flatnonzero(~more)[-1]) + 1 if (~more).any() else 0
        raise RleCodecError(
            f"truncated rle sequence starting at character index {start}"
        )
    # group chars into values: a group ends at each char without the
    # continuation bit; each char contributes 5 data bits, low first
    group = np.concatenate([[0], np.cumsum(~more)[:-1]])
    starts = np.concatenate([[0], np.flatnonzero(~more)[:-1] + 1])
    shift = 5 * (np.arange(codes.size) - starts[group])
    pieces = (codes & 0x1F) << shift
    values = np.zeros(starts.size, dtype=np.int64)
    np.add.at(values, group, pieces)
    # sign-extend values whose final char carries the sign bit
    last = np.flatnonzero(~more)
    signed = (codes[last] & 0x10) != 0
    width = 5 * (last - starts + 1)
    values[signed] |= (-1) << width[signed]
    # counts after the third are deltas against the count two back, which
    # makes each parity chain a running sum
    counts = values.copy()
    counts[1::2] = np.cumsum(values[1::2])
    counts[2::2] = np.cumsum(values[2::2])
    out = counts.tolist()
    bad_idx = next((i for i, c in enumerate(out) if c < 0), None)
    if bad_idx is not None:
        raise RleCodecError(
            f"negative run length decoded at character index {int(starts[bad_idx])}"
        )
    return out


# --------------------------------------------------------------------------
# rasterization


def rasterize(geometry: SegmentationGeometry, width: int, height: int) -> BinaryMask:
    """Rasterize a geometry onto a (width x height) canvas.

    Polygons are filled with the even-odd rule sampled at pixel centers:
    pixel (i, j) is set iff the point (i + 0.5, j + 0.5) is inside. Rings of
    one instance are unioned. Run-length geometries are decoded column-major.
    """
    if width < 1 or height < 1:
        raise GeometryError(f"canvas must be at least 1x1, got {width}x{height}")
    if isinstance(geometry, RleGeometry):
        if geometry.size != (height, width):
            raise GeometryError(
                f"rle size {geometry.size} does not match canvas {width}x{height}"
            )
        return rle_decode(geometry)
    out = np.zeros((height, width), dtype=bool)
    for ring in geometry.rings:
        out |= _fill_ring(ring, width, height)
    return BinaryMask._wrap(out)


def _fill_ring(
    ring: tuple[tuple[float, float], ...], width: int, height: int
) -> np.ndarray:
    verts = np.asarray(ring, dtype=float)
    x1 = verts[:, 0]
    y1 = verts[:, 1]
    x2 = np.roll(x1, -1)
    y2 = np.roll(y1, -1)
    out = np.zeros((height, width), dtype=bool)
    centers = np.arange(width) + 0.5
    for j in range(height):
        yc = j + 0.5
        # half-open span rule keeps vertices on a scanline from double counting
        hit = ((y1 <= yc) & (yc < y2)) | ((y2 <= yc) & (yc < y1))
        if not hit.any():
            continue
        xs = x1[hit] + (yc - y1[hit]) * (x2[hit] - x1[hit]) / (y2[hit] - y1[hit])
        xs.sort()
        crossings_right = xs.size - np.searchsorted(xs, centers, side="right")
        out[j] = crossings_right % 2 == 1
    return out


# --------------------------------------------------------------------------
# COCO parsing


def _loads(document: str):
    try:
        return json.loads(document)
    except json.JSONDecodeError as exc:
        byte_offset = len(document[: exc.pos].encode("utf-8"))
        raise ParseError(
            f"malformed JSON at byte offset {byte_offset}: {exc.msg}"
        ) from exc


def _get(record, key: str, context: str):
    if not isinstance(record, dict) or key not in record:
        raise SchemaError(f"missing required key '{key}' in {context}")
    return record[key]


def _clamp_ring(flat, width: int, height: int, context: str):
    if len(flat) % 2 != 0:
        raise GeometryError(
            f"{context}: ring coordinate count must be even, got {len(flat)}"
        )
    if len(flat) < 6:
        raise GeometryError(f"{context}: ring needs at least 3 vertices")
    xs = np.clip(np.asarray(flat[0::2], dtype=float), 0.0, float(width))
    ys = np.clip(np.asarray(flat[1::2], dtype=float), 0.0, float(height))
    return tuple((float(x), float(y)) for x, y in zip(xs, ys))


def _parse_segmentation(seg, width: int, height: int, context: str):
    if isinstance(seg, dict):
        size = _get(seg, "size", context)
        counts = _get(seg, "counts", context)
        if tuple(size) != (height, width):
            raise GeometryError(
                f"{context}: rle size {tuple(size)} does not match image "
                f"{width}x{height}"
            )
        if isinstance(counts, str):
            return RleGeometry((height, width), counts)
        # the rasterization step validates that the counts sum matches
        return RleGeometry((height, width), tuple(int(c) for c in counts))
    if isinstance(seg, list):
        if seg and isinstance(seg[0], (int, float)):
            seg = [seg]
        rings = tuple(_clamp_ring(ring, width, height, context) for ring in seg)
        if not rings:
            raise GeometryError(f"{context}: empty segmentation")
        return PolygonGeometry(rings)
    raise GeometryError(f"{context}: unsupported segmentation of type {type(seg).__name__}")


def parse_coco_ground_truth(
    document: str,
) -> tuple[DatasetDescriptor, list[GtInstance]]:
    """Parse a COCO instance file into a descriptor plus ground-truth instances.

    Every annotation is validated against the images it references and
    rasterized once; annotations with an empty raster are rejected.
    """
    data = _loads(document)
    if not isinstance(data, dict):
        raise SchemaError("ground-truth document must be a JSON object")
    for key in ("images", "annotations", "categories"):
        if key not in data:
            raise SchemaError(f"missing required key '{key}'")
    images = tuple(
        ImageInfo(
            id=int(_get(img, "id", f"images[{i}]")),
            width=int(_get(img, "width", f"images[{i}]")),
            height=int(_get(img, "height", f"images[{i}]")),
            file_name=str(_get(img, "file_name", f"images[{i}]")),
        )
        for i, img in enumerate(data["images"])
    )
    categories = tuple(
        Category(
            id=int(_get(cat, "id", f"categories[{i}]")),
            name=str(_get(cat, "name", f"categories[{i}]")),
        )
        for i, cat in enumerate(data["categories"])
    )
    descriptor = DatasetDescriptor(images, categories)
    by_id = {img.id: img for img in descriptor.images}
    instances: list[GtInstance] = []
    for i, ann in enumerate(data["annotations"]):
        ctx = f"annotations[{i}]"
        ann_id = int(_get(ann, "id", ctx))
        image_id = int(_get(ann, "image_id", ctx))
        category_id = int(_get(ann, "category_id", ctx))
        if image_id not in by_id:
            raise UnknownIdError(
                f"annotation {ann_id} references unknown image_id {image_id}"
            )
        if not descriptor.has_category(category_id):
            raise UnknownIdError(
                f"annotation {ann_id} references unknown category_id {category_id}"
            )
        img = by_id[image_id]
        geometry = _parse_segmentation(
            _get(ann, "segmentation", ctx), img.width, img.height, ctx
        )
        mask = rasterize(geometry, img.width, img.height)
        if mask.area < 1:
            raise GeometryError(
                f"annotation {ann_id} rasterizes to an empty mask"
            )
        instances.append(GtInstance(ann_id, image_id, category_id, geometry, mask))
    return descriptor, instances


def parse_coco_predictions(
    document: str, descriptor: DatasetDescriptor
) -> list[PredInstance]:
    """Parse a COCO results array into predictions validated against a descriptor."""
    data = _loads(document)
    if not isinstance(data, list):
        raise SchemaError("predictions document must be a JSON array")
    by_id = {img.id: img for img in descriptor.images}
    preds: list[PredInstance] = []
    for i, rec in enumerate(data):
        ctx = f"results[{i}]"
        image_id = int(_get(rec, "image_id", ctx))
        category_id = int(_get(rec, "category_id", ctx))
        score = float(_get(rec, "score", ctx))
        if not 0.0 <= score <= 1.0:
            raise ScoreRangeError(f"{ctx}: score {score} outside [0, 1]")
        if image_id not in by_id:
            raise UnknownIdError(f"{ctx} references unknown image_id {image_id}")
        img = by_id[image_id]
        geometry = _parse_segmentation(
            _get(rec, "segmentation", ctx), img.width, img.height, ctx
        )
        mask = rasterize(geometry, img.width, img.height)
        if mask.area < 1:
            raise GeometryError(f"{ctx} rasterizes to an empty mask")
        preds.append(PredInstance(image_id, category_id, geometry, score, mask))
    return preds


# --------------------------------------------------------------------------
# YOLO segmentation text


def parse_yolo_segmentation(
    lines: str,
    image_width: int,
    image_height: int,
    with_confidence: bool = False,
    image_id: int = 0,
) -> list[PredInstance]:
    """Parse YOLO segmentation lines, denormalizing by the image dimensions.

    Coordinates outside [0, 1] are clamped and counted; a single ClampWarning
    reports the total. Without a confidence column the score defaults to 1.0.
    """
    instances: list[PredInstance] = []
    clamped = 0
    for line_no, raw in enumerate(lines.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped:
            continue
        parts = stripped.split()
        try:
            category_id = int(parts[0])
        except ValueError as exc:
            raise FormatError(f"line {line_no}: bad class id {parts[0]!r}") from exc
        try:
            values = [float(p) for p in parts[1:]]
        except ValueError as exc:
            raise FormatError(f"line {line_no}: non-numeric value") from exc
        score = 1.0
        if with_confidence:
            if not values:
                raise FormatError(f"line {line_no}: missing confidence")
            score = values[-1]
            values = values[:-1]
            if not 0.0 <= score <= 1.0:
                raise ScoreRangeError(
                    f"line {line_no}: confidence {score} outside [0, 1]"
                )
        if len(values) % 2 != 0:
            raise FormatError(
                f"line {line_no}: odd coordinate count ({len(values)})"
            )
        if len(values) < 6:
            raise FormatError(f"line {line_no}: ring needs at least 3 vertices")
        coords = np.asarray(values, dtype=float).reshape(-1, 2)
        out_of_range = (coords < 0.0) | (coords > 1.0)
        clamped += int(out_of_range.sum())
        coords = np.clip(coords, 0.0, 1.0)
        ring = tuple(
            (float(x) * image_width, float(y) * image_height) for x, y in coords
        )
        geometry = PolygonGeometry((ring,))
        mask = rasterize(geometry, image_width, image_height)
        if mask.area < 1:
            raise GeometryError(f"line {line_no}: polygon rasterizes to an empty mask")
        instances.append(PredInstance(image_id, category_id, geometry, score, mask))
    if clamped:
        warnings.warn(
            f"{clamped} coordinate(s) outside [0, 1] were clamped", ClampWarning
        )
    return instances


# --------------------------------------------------------------------------
# raster manifest + PNG helpers


def read_mask_png(path: str | Path) -> BinaryMask:
    """Load an 8-bit grayscale PNG; nonzero pixels are foreground."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"))
    return BinaryMask._wrap(arr > 0)


def write_mask_png(path: str | Path, mask: BinaryMask) -> None:
    arr = (mask.to_array() * np.uint8(255)).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


def load_raster_manifest(
    path: str | Path, with_scores: bool = False
) -> tuple[DatasetDescriptor, list[GtInstance], list[PredInstance]]:
    """Load a raster-manifest file.

    The manifest is a JSON object with an ``instances`` array of
    ``{"image_id": int, "path": str, "score": float?}`` records (paths are
    relative to the manifest) and an optional ``images`` array; when absent,
    image dimensions are taken from the PNGs themselves.

    Returns (descriptor, gt_instances, pred_instances); the prediction list
    is populated only when ``with_scores`` is set.
    """
    path = Path(path)
    data = _loads(path.read_text(encoding="utf-8"))
    if not isinstance(data, dict) or "instances" not in data:
        raise SchemaError("missing required key 'instances'")
    base = path.parent
    records = []
    for i, rec in enumerate(data["instances"]):
        ctx = f"instances[{i}]"
        image_id = int(_get(rec, "image_id", ctx))
        png_path = base / str(_get(rec, "path", ctx))
        score = float(rec.get("score", 1.0))
        if not 0.0 <= score <= 1.0:
            raise ScoreRangeError(f"{ctx}: score {score} outside [0, 1]")
        mask = read_mask_png(png_path)
        if mask.area < 1:
            raise GeometryError(f"{ctx}: mask {png_path} is empty")
        records.append((image_id, mask, score))
    if "images" in data:
        images = tuple(
            ImageInfo(
                id=int(_get(img, "id", f"images[{i}]")),
                width=int(_get(img, "width", f"images[{i}]")),
                height=int(_get(img, "height", f"images[{i}]")),
                file_name=str(img.get("file_name", "")),
            )
            for i, img in enumerate(data["images"])
        )
    else:
        seen: dict[int, tuple[int, int]] = {}
        for image_id, mask, _ in records:
            dims = (mask.width, mask.height)
            if image_id in seen and seen[image_id] != dims:
                raise GeometryError(
                    f"image {image_id} has inconsistent mask sizes "
                    f"{seen[image_id]} vs {dims}"
                )
            seen.setdefault(image_id, dims)
        images = tuple(
            ImageInfo(id=i, width=w, height=h, file_name="")
            for i, (w, h) in sorted(seen.items())
        )
    categories = tuple(
        Category(int(_get(c, "id", "categories")), str(_get(c, "name", "categories")))
        for c in data.get("categories", [{"id": 1, "name": "curve"}])
    )
    descriptor = DatasetDescriptor(images, categories)
    for image_id, mask, _ in records:
        img = descriptor.image(image_id)  # raises UnknownIdError when absent
        if (mask.width, mask.height) != (img.width, img.height):
            raise GeometryError(
                f"mask for image {image_id} is {mask.width}x{mask.height}, "
                f"expected {img.width}x{img.height}"
            )
    gts = [
        GtInstance(i + 1, image_id, 1, rle_encode(mask), mask)
        for i, (image_id, mask, _) in enumerate(records)
    ]
    preds = []
    if with_scores:
        preds = [
            PredInstance(image_id, 1, rle_encode(mask), score, mask)
            for image_id, mask, score in records
        ]
    return descriptor, gts, preds
