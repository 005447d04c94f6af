"""Synthetic curvilinear scenes with analytically known centerline lengths.

Instances are composite quadratic Bezier curves (smooth, bounded turning)
rendered as tubes of an odd pixel width, so every curve carries its own
length oracle: the arc length of the centerline, computed by dense
parametric sampling that is refined until doubling the sample count changes
the value by less than 0.01 percent. Generated curves sweep their heading
almost linearly over a wide arc, which spreads their direction over the
digital length metric's full response and keeps measured lengths comparable
across orientations. Perturbations model typical prediction failures:
erosion, dilation, fracture into fragments, translation, dropped and
duplicated detections.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .annotation_io import GtInstance, PredInstance, rle_encode
from .errors import PlacementError
from .mask_ops import BinaryMask, dilate, erode, iou_mask
from .skeleton import GeodesicChain, skeleton_length, skeletonize, trace_diameter_path


@dataclass(frozen=True)
class CurveSpec:
    """One renderable curve: control points, stroke width, canvas, seed.

    The optional waviness triple (amplitude, wavelength, phase) superimposes
    a normal-direction oscillation on the smooth path, the way thin physical
    lines rarely run perfectly straight. It is part of the centerline: the
    analytic length integrates it, and so does the rendered tube's medial
    axis.
    """

    control_points: tuple[tuple[float, float], ...]
    width: int
    canvas: tuple[int, int]
    seed: int = 0
    waviness: tuple[float, float, float] | None = None

    def __post_init__(self) -> None:
        if len(self.control_points) < 3:
            raise ValueError("a curve needs at least 3 control points")
        if self.width < 1 or self.width % 2 == 0:
            raise ValueError("width must be an odd integer >= 1")
        if self.waviness is not None:
            amplitude, wavelength, _ = self.waviness
            if amplitude < 0 or wavelength <= 0:
                raise ValueError("waviness needs amplitude >= 0 and wavelength > 0")


@dataclass(frozen=True)
class Erode:
    radius: int

    def __post_init__(self) -> None:
        if self.radius < 0:
            raise ValueError("radius must be >= 0")


@dataclass(frozen=True)
class Dilate:
    radius: int

    def __post_init__(self) -> None:
        if self.radius < 0:
            raise ValueError("radius must be >= 0")


@dataclass(frozen=True)
class Fracture:
    gap_px: float
    position_fraction: float

    def __post_init__(self) -> None:
        if self.gap_px < 0:
            raise ValueError("gap_px must be >= 0")
        if not 0.0 < self.position_fraction < 1.0:
            raise ValueError("position_fraction must be in (0, 1)")


@dataclass(frozen=True)
class Shift:
    dx: int
    dy: int


@dataclass(frozen=True)
class Drop:
    pass


@dataclass(frozen=True)
class Duplicate:
    score_delta: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.score_delta <= 1.0:
            raise ValueError("score_delta must be in [0, 1]")


PerturbationSpec = Erode | Dilate | Fracture | Shift | Drop | Duplicate


def composite_bezier(
    control_points: np.ndarray, samples_per_segment: int
) -> np.ndarray:
    """Sample a smooth curve through the midpoints of a control polygon.

    Each quadratic piece runs midpoint-to-midpoint using the shared control
    vertex, plus straight caps at both ends; tangents are continuous and the
    turning of the curve never exceeds the turning of the control polygon.
    """
    pts = np.asarray(control_points, dtype=float)
    k = len(pts)
    mids = (pts[:-1] + pts[1:]) / 2.0
    t = np.linspace(0.0, 1.0, samples_per_segment, endpoint=False)[:, None]
    pieces = [np.linspace(pts[0], mids[0], samples_per_segment, endpoint=False)]
    for i in range(1, k - 1):
        a, c, b = mids[i - 1], pts[i], mids[i]
        pieces.append((1 - t) ** 2 * a + 2 * (1 - t) * t * c + t**2 * b)
    pieces.append(np.linspace(mids[-1], pts[-1], samples_per_segment, endpoint=False))
    pieces.append(pts[-1][None, :])
    return np.concatenate(pieces, axis=0)


def _apply_waviness(
    samples: np.ndarray, waviness: tuple[float, float, float] | None
) -> np.ndarray:
    if waviness is None:
        return samples
    amplitude, wavelength, phase = waviness
    if amplitude == 0.0:
        return samples
    deltas = np.diff(samples, axis=0)
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(deltas, axis=1))])
    tangents = np.gradient(samples, axis=0)
    norms = np.linalg.norm(tangents, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    tangents /= norms
    normals = np.stack([-tangents[:, 1], tangents[:, 0]], axis=1)
    offset = amplitude * np.sin(2.0 * np.pi * arc / wavelength + phase)
    return samples + normals * offset[:, None]


def centerline_samples(
    control_points: np.ndarray,
    samples_per_segment: int,
    waviness: tuple[float, float, float] | None = None,
) -> np.ndarray:
    """Dense (n, 2) centerline samples, waviness included."""
    return _apply_waviness(
        composite_bezier(control_points, samples_per_segment), waviness
    )


def curve_length(
    control_points: np.ndarray,
    rel_tol: float = 1e-4,
    waviness: tuple[float, float, float] | None = None,
) -> float:
    """Centerline arc length by dense sampling, refined to convergence."""
    samples = 64
    prev = _chord_length(centerline_samples(control_points, samples, waviness))
    for _ in range(16):
        samples *= 2
        cur = _chord_length(centerline_samples(control_points, samples, waviness))
        if prev > 0 and abs(cur - prev) / cur < rel_tol:
            return cur
        prev = cur
    return prev


def _chord_length(samples: np.ndarray) -> float:
    return float(np.linalg.norm(np.diff(samples, axis=0), axis=1).sum())


def render_curve_mask(
    control_points: np.ndarray,
    width: int,
    canvas: tuple[int, int],
    waviness: tuple[float, float, float] | None = None,
) -> BinaryMask:
    """Rasterize the curve as a tube of the given odd width with round caps.

    A pixel is set when its center lies within width/2 of the densely
    sampled centerline, so the tube is equally wide in every direction.
    """
    cw, ch = canvas
    rough = centerline_samples(control_points, 64, waviness)
    n = max(int(_chord_length(rough) / 0.25), 32)
    per_segment = max(n // max(len(control_points), 1), 8)
    samples = centerline_samples(control_points, per_segment, waviness)
    radius = width / 2.0
    x0 = max(int(np.floor(samples[:, 0].min() - radius)) - 1, 0)
    x1 = min(int(np.ceil(samples[:, 0].max() + radius)) + 1, cw - 1)
    y0 = max(int(np.floor(samples[:, 1].min() - radius)) - 1, 0)
    y1 = min(int(np.ceil(samples[:, 1].max() + radius)) + 1, ch - 1)
    arr = np.zeros((ch, cw), dtype=bool)
    if x1 >= x0 and y1 >= y0:
        gx, gy = np.meshgrid(
            np.arange(x0, x1 + 1, dtype=float), np.arange(y0, y1 + 1, dtype=float)
        )
        centers = np.stack([gx.ravel(), gy.ravel()], axis=1)
        tree = cKDTree(samples)
        dist, _ = tree.query(centers, k=1)
        arr[y0 : y1 + 1, x0 : x1 + 1] = (dist <= radius).reshape(gx.shape)
    return BinaryMask._wrap(arr)


def realize(spec: CurveSpec) -> tuple[BinaryMask, float]:
    """Render a CurveSpec and return (mask, analytic centerline length)."""
    pts = np.asarray(spec.control_points, dtype=float)
    cw, ch = spec.canvas
    margin = spec.width
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    if lo[0] < margin or lo[1] < margin or hi[0] > cw - margin or hi[1] > ch - margin:
        raise PlacementError(
            f"curve does not fit canvas {cw}x{ch} with margin {margin}"
        )
    return (
        render_curve_mask(pts, spec.width, spec.canvas, spec.waviness),
        curve_length(pts, waviness=spec.waviness),
    )


def _tube_self_touches(samples: np.ndarray, width: int) -> bool:
    """True when arc-distant parts of the tube come closer than its width.

    A self-touching tube merges with itself, producing junctions in the
    skeleton, so such curves are rejection-sampled away.
    """
    arc = np.concatenate(
        [[0.0], np.cumsum(np.linalg.norm(np.diff(samples, axis=0), axis=1))]
    )
    step = max(len(samples) // 128, 1)
    pts = samples[::step]
    arcs = arc[::step]
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    arc_gap = np.abs(arcs[:, None] - arcs[None, :])
    limit = float(width) + 2.0
    close = (d2 < limit * limit) & (arc_gap > 3.0 * limit)
    return bool(close.any())


def _sample_control_points(
    rng: np.random.Generator, target_length: float
) -> np.ndarray:
    """Random arc-like control polygon sweeping its heading over >= 170 degrees.

    Near-constant per-segment drift keeps every joint turning well under 45
    degrees while the heading progresses almost linearly over a wide arc, so
    the curve spends about equal arc length in every direction; no curve
    lingers near a single orientation.
    """
    n_segments = int(rng.integers(12, 17))
    step = target_length / n_segments
    heading = rng.uniform(0.0, 2.0 * np.pi)
    sweep = rng.uniform(3.0, 4.5) * (1 if rng.random() < 0.5 else -1)
    drift = sweep / n_segments
    pts = [np.zeros(2)]
    for _ in range(n_segments):
        heading += drift + rng.uniform(-0.06, 0.06)
        pts.append(pts[-1] + step * np.array([np.cos(heading), np.sin(heading)]))
    return np.asarray(pts)


def generate_scene(
    seed: int,
    n_instances: int,
    canvas: tuple[int, int] = (512, 512),
    width_range: tuple[int, int] = (3, 7),
    length_range: tuple[float, float] = (80.0, 200.0),
    image_id: int = 1,
    max_overlap: float = 0.3,
) -> tuple[list[GtInstance], list[float]]:
    """Generate a deterministic scene of non-self-crossing curve instances.

    Instances are rejection-sampled so that pairwise mask IoU stays below
    ``max_overlap``; each carries its analytic centerline length. Raises
    PlacementError when the canvas cannot host an instance within the
    attempt budget.
    """
    if n_instances < 0:
        raise ValueError("n_instances must be >= 0")
    if width_range[0] > width_range[1] or length_range[0] > length_range[1]:
        raise ValueError("ranges must be non-empty")
    rng = np.random.default_rng(seed)
    cw, ch = canvas
    instances: list[GtInstance] = []
    lengths: list[float] = []
    masks: list[BinaryMask] = []
    for k in range(n_instances):
        placed = False
        for _ in range(1000):
            widths = [w for w in range(width_range[0], width_range[1] + 1) if w % 2]
            width = int(rng.choice(widths))
            target = float(rng.uniform(length_range[0], length_range[1]))
            pts = _sample_control_points(rng, target)
            pts = pts * (target / curve_length(pts))
            analytic = curve_length(pts)
            dense = centerline_samples(pts, 32)
            if _tube_self_touches(dense, width):
                continue
            lo = dense.min(axis=0)
            hi = dense.max(axis=0)
            margin = float(width)
            span = hi - lo
            if span[0] > cw - 2 * margin or span[1] > ch - 2 * margin:
                continue
            offset = np.array(
                [
                    rng.uniform(margin - lo[0], cw - margin - hi[0]),
                    rng.uniform(margin - lo[1], ch - margin - hi[1]),
                ]
            )
            pts_placed = pts + offset
            mask = render_curve_mask(pts_placed, width, canvas)
            if any(iou_mask(mask, other) >= max_overlap for other in masks):
                continue
            instances.append(
                GtInstance(
                    annotation_id=k + 1,
                    image_id=image_id,
                    category_id=1,
                    geometry=rle_encode(mask),
                    mask=mask,
                )
            )
            lengths.append(analytic)
            masks.append(mask)
            placed = True
            break
        if not placed:
            raise PlacementError(
                f"could not place instance {k + 1} of {n_instances} on {cw}x{ch}"
            )
    return instances, lengths


def _fracture_mask(mask: BinaryMask, gap_px: float, fraction: float) -> BinaryMask:
    """Clear a band perpendicular to the centerline at an arc-length fraction."""
    skel = skeletonize(mask)
    path = np.asarray(trace_diameter_path(skel), dtype=float)
    if len(path) < 2:
        return mask
    seg = np.linalg.norm(np.diff(path, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    target = fraction * cum[-1]
    i = int(np.searchsorted(cum, target))
    i = min(max(i, 0), len(path) - 1)
    lo, hi = max(i - 4, 0), min(i + 4, len(path) - 1)
    tangent = path[hi] - path[lo]
    norm = np.linalg.norm(tangent)
    if norm == 0:
        return mask
    tangent /= norm
    geo = skeleton_length(skel, GeodesicChain())
    est_width = mask.area / max(geo, 1.0)
    half_span = 2.0 * est_width + 2.0
    centre = path[i]
    ys, xs = np.nonzero(mask.to_array())
    rel = np.stack([xs - centre[0], ys - centre[1]], axis=1)
    along = rel @ tangent
    across = rel @ np.array([-tangent[1], tangent[0]])
    cut = (np.abs(along) <= gap_px / 2.0) & (np.abs(across) <= half_span)
    arr = mask.to_array().copy()
    arr[ys[cut], xs[cut]] = False
    return BinaryMask._wrap(arr)


def _shift_mask(mask: BinaryMask, dx: int, dy: int) -> BinaryMask:
    arr = mask.to_array()
    out = np.zeros_like(arr)
    h, w = arr.shape
    ys, xs = np.nonzero(arr)
    ys = ys + dy
    xs = xs + dx
    ok = (ys >= 0) & (ys < h) & (xs >= 0) & (xs < w)
    out[ys[ok], xs[ok]] = True
    return BinaryMask._wrap(out)


def perturb(
    instance: GtInstance, spec: PerturbationSpec, seed: int = 0
) -> list[PredInstance]:
    """Derive predictions from a ground-truth instance.

    Deterministic for a given (instance, spec); the seed parameter is kept
    for interface stability with randomized variants. An empty perturbed
    mask (e.g. erosion that swallows the instance) yields no prediction.
    """
    mask = instance.mask
    if mask is None:
        raise ValueError("instance carries no rasterized mask")

    def pred(m: BinaryMask, score: float = 1.0) -> PredInstance:
        return PredInstance(
            image_id=instance.image_id,
            category_id=instance.category_id,
            geometry=rle_encode(m),
            score=score,
            mask=m,
        )

    if isinstance(spec, Drop):
        return []
    if isinstance(spec, Duplicate):
        return [pred(mask, 1.0), pred(mask, 1.0 - spec.score_delta)]
    if isinstance(spec, Shift):
        out = _shift_mask(mask, spec.dx, spec.dy)
    elif isinstance(spec, Erode):
        out = erode(mask, spec.radius)
    elif isinstance(spec, Dilate):
        out = dilate(mask, spec.radius)
    elif isinstance(spec, Fracture):
        out = _fracture_mask(mask, spec.gap_px, spec.position_fraction)
    else:
        raise TypeError(f"unknown perturbation {spec!r}")
    if out.is_empty:
        return []
    return [pred(out)]
