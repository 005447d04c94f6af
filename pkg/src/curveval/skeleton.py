"""Topology-preserving thinning and skeleton length estimation.

The thinning peels pixels in increasing distance-transform order, which
anchors the surviving ridge on the medial axis. A pixel is removed only when
it is locally "simple" (its removal keeps the foreground 8-connected and the
background 4-connected in its 3x3 neighbourhood), so topology is preserved
by construction. Pixels with a single neighbour are endpoints and normally
protected; a lone tip still erodes while it sits strictly downhill on the
distance transform, which parks path endpoints on the medial ridge instead
of the rounded tube extremes. Within one pass the four parity subfields run
one after the other; pixels of one subfield are at least two apart, so
deleting them simultaneously equals deleting them one by one. Parity is
taken relative to the mask's bounding box, making the result exactly
translation invariant, and a converged output is a fixed point, making
skeletonization idempotent.

Lengths come in three flavours: raw pixel count, the weighted geodesic
diameter of the pixel graph (axial step 1, diagonal step sqrt(2)), and the
Euclidean length of a Douglas-Peucker simplification of the diameter path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import DegeneratePathError, EmptyMaskError
from .mask_ops import BinaryMask

_SQRT2 = math.sqrt(2.0)
_STRUCT_8 = np.ones((3, 3), dtype=bool)

# Ring offsets (dy, dx) around a pixel; bit i of a neighbourhood code is the
# i-th offset. The order is fixed because the lookup tables depend on it.
_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))
_AXIAL_BITS = (1, 3, 4, 6)
_OFF_ARR = np.asarray(_OFFSETS, dtype=np.int64)
_BIT_WEIGHTS = (1 << np.arange(8)).astype(np.int64)


def _ring_components(cells: list[int], four_connected: bool) -> int:
    def adjacent(a: int, b: int) -> bool:
        dy = abs(_OFFSETS[a][0] - _OFFSETS[b][0])
        dx = abs(_OFFSETS[a][1] - _OFFSETS[b][1])
        if four_connected:
            return dy + dx == 1
        return max(dy, dx) == 1

    remaining = set(cells)
    comps = []
    while remaining:
        seed = remaining.pop()
        comp = {seed}
        frontier = [seed]
        while frontier:
            cur = frontier.pop()
            for other in list(remaining):
                if adjacent(cur, other):
                    remaining.discard(other)
                    comp.add(other)
                    frontier.append(other)
        comps.append(comp)
    return comps


def _build_luts() -> tuple[np.ndarray, np.ndarray]:
    simple = np.zeros(256, dtype=bool)
    counts = np.zeros(256, dtype=np.uint8)
    for code in range(256):
        fg = [i for i in range(8) if code >> i & 1]
        counts[code] = len(fg)
        if not fg:
            continue
        if len(_ring_components(fg, four_connected=False)) != 1:
            continue
        bg = [i for i in range(8) if not code >> i & 1]
        bg_comps = _ring_components(bg, four_connected=True)
        touching = [c for c in bg_comps if any(i in c for i in _AXIAL_BITS)]
        simple[code] = len(touching) == 1
    return simple, counts


_SIMPLE_LUT, _NEIGHBOUR_LUT = _build_luts()


@dataclass(frozen=True)
class Skeleton:
    """A thin mask plus the area of the mask it was derived from."""

    mask: BinaryMask
    source_area: int


@dataclass(frozen=True)
class PixelCount:
    """Length as the number of skeleton pixels (over-counts diagonals)."""


@dataclass(frozen=True)
class GeodesicChain:
    """Length as the weighted diameter of the skeleton pixel graph."""


@dataclass(frozen=True)
class PolylineFit:
    """Length of a Douglas-Peucker fit to the diameter path."""

    epsilon: float = 1.5

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")


LengthEstimator = PixelCount | GeodesicChain | PolylineFit


def _thin_inplace(arr: np.ndarray) -> None:
    """Thin a cropped mask that carries a one-pixel false border."""
    dist = ndimage.distance_transform_edt(arr)
    fy, fx = np.nonzero(arr)
    if fy.size == 0:
        return
    # parity is anchored per component so that fragments thin exactly the
    # way they would as isolated masks (components never interact anyway)
    labels, _ = ndimage.label(arr, structure=_STRUCT_8)
    slices = ndimage.find_objects(labels)
    comp_y0 = np.asarray([sl[0].start for sl in slices], dtype=np.int64)
    comp_x0 = np.asarray([sl[1].start for sl in slices], dtype=np.int64)
    lab = labels[fy, fx] - 1
    par_y = (fy - comp_y0[lab]) % 2
    par_x = (fx - comp_x0[lab]) % 2
    dvals = dist[fy, fx]
    levels = np.unique(dvals)
    by_level = [np.flatnonzero(dvals == level) for level in levels]
    parities = ((0, 0), (0, 1), (1, 0), (1, 1))
    for _ in range(256):  # converges in a few sweeps; bound is a safety net
        removed = False
        for idx in by_level:
            lys = fy[idx]
            lxs = fx[idx]
            lpy = par_y[idx]
            lpx = par_x[idx]
            while True:
                level_removed = False
                for py, px in parities:
                    live = arr[lys, lxs] & (lpy == py) & (lpx == px)
                    if not live.any():
                        continue
                    cys = lys[live]
                    cxs = lxs[live]
                    nys = cys[:, None] + _OFF_ARR[:, 0]
                    nxs = cxs[:, None] + _OFF_ARR[:, 1]
                    nbr = arr[nys, nxs]
                    code = nbr @ _BIT_WEIGHTS
                    deletable = _SIMPLE_LUT[code]
                    if not deletable.any():
                        continue
                    ncnt = _NEIGHBOUR_LUT[code]
                    endpoint = ncnt < 2
                    if endpoint.any():
                        nb_dist = np.where(nbr, dist[nys, nxs], -np.inf).max(axis=1)
                        keep_tip = endpoint & ~(dist[cys, cxs] < nb_dist)
                        deletable &= ~keep_tip
                    if deletable.any():
                        arr[cys[deletable], cxs[deletable]] = False
                        level_removed = True
                        removed = True
                if not level_removed:
                    break
        if not removed:
            return


def skeletonize(m: BinaryMask) -> Skeleton:
    """Reduce a mask to a one-pixel-wide, topology-preserving centerline.

    Deterministic, idempotent on its own output, and exactly equivariant
    under in-bounds translations of the input.
    """
    arr = m.to_array()
    bounds = m._bounds()
    if bounds is None:
        return Skeleton(m, 0)
    y0, y1, x0, x1 = bounds
    crop = np.zeros((y1 - y0 + 3, x1 - x0 + 3), dtype=bool)
    crop[1:-1, 1:-1] = arr[y0 : y1 + 1, x0 : x1 + 1]
    _thin_inplace(crop)
    out = np.zeros_like(arr)
    out[y0 : y1 + 1, x0 : x1 + 1] = crop[1:-1, 1:-1]
    return Skeleton(BinaryMask._wrap(out), m.area)


def _component_crops(
    mask: BinaryMask,
) -> list[tuple[np.ndarray, tuple[int, int]]]:
    """Cropped 8-connected components with their (y, x) offsets.

    Ordered by descending pixel count, ties by the smallest (y, x) pixel, to
    match the public connected-components contract. Labelling runs on the
    bounding-box crop, which keeps the cost proportional to the content.
    """
    bounds = mask._bounds()
    if bounds is None:
        return []
    y0, y1, x0, x1 = bounds
    window = mask.to_array()[y0 : y1 + 1, x0 : x1 + 1]
    labels, n = ndimage.label(window, structure=_STRUCT_8)
    slices = ndimage.find_objects(labels)
    flat = labels.ravel()
    areas = np.bincount(flat, minlength=n + 1)[1:]
    first = np.full(n, flat.size, dtype=np.int64)
    nz = np.flatnonzero(flat)
    np.minimum.at(first, flat[nz] - 1, nz)
    order = sorted(range(n), key=lambda k: (-int(areas[k]), int(first[k])))
    out = []
    for k in order:
        sl = slices[k]
        out.append(
            (labels[sl] == k + 1, (y0 + sl[0].start, x0 + sl[1].start))
        )
    return out


def _component_graph(coords: np.ndarray) -> coo_matrix:
    """Sparse weighted adjacency of skeleton pixels (axial 1, diagonal sqrt 2).

    ``coords`` is an (n, 2) array of (y, x) positions sorted row-major, so
    node index order equals lexicographic (y, x) order.
    """
    n = coords.shape[0]
    ys = coords[:, 0] + 1
    xs = coords[:, 1] + 1
    grid = np.full((ys.max() + 2, xs.max() + 2), -1, dtype=np.int64)
    grid[ys, xs] = np.arange(n)
    rows, cols, weights = [], [], []
    for dy, dx, wgt in ((0, 1, 1.0), (1, 0, 1.0), (1, 1, _SQRT2), (1, -1, _SQRT2)):
        nb = grid[ys + dy, xs + dx]
        ok = nb >= 0
        rows.append(np.flatnonzero(ok))
        cols.append(nb[ok])
        weights.append(np.full(int(ok.sum()), wgt))
    return coo_matrix(
        (np.concatenate(weights), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )


def _diameter(component: np.ndarray) -> tuple[float, list[tuple[int, int]]]:
    """Weighted diameter and a realizing path for one connected component.

    Shortest-path searches start from every degree <= 1 pixel (exact on
    trees); a pure cycle falls back to the lexicographically smallest pixel.
    Ties are broken by the smallest (y, x) source, then target.
    """
    coords = np.argwhere(component)
    n = coords.shape[0]
    if n == 1:
        y, x = map(int, coords[0])
        return 0.0, [(y, x)]
    graph = _component_graph(coords)
    degree = np.bincount(
        np.concatenate([graph.row, graph.col]), minlength=n
    )
    sources = np.flatnonzero(degree <= 1)
    if sources.size == 0:
        sources = np.array([0])
    dist, preds = dijkstra(
        graph.tocsr(), directed=False, indices=sources, return_predecessors=True
    )
    dist = np.atleast_2d(dist)
    preds = np.atleast_2d(preds)
    best = float(dist.max())
    si, ti = np.argwhere(dist == dist.max())[0]
    path_nodes = []
    cur = int(ti)
    while cur >= 0:
        path_nodes.append(cur)
        cur = int(preds[si, cur])
    path_nodes.reverse()
    return best, [(int(coords[k, 0]), int(coords[k, 1])) for k in path_nodes]


def _polyline_length(points: list[tuple[float, float]]) -> float:
    total = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        total += math.hypot(x1 - x0, y1 - y0)
    return total


def _path_length(
    component: np.ndarray, estimator: LengthEstimator
) -> float:
    """Geodesic or polyline length of one cropped component."""
    length, path = _diameter(component)
    if isinstance(estimator, GeodesicChain):
        return length
    if len(path) < 2:
        return 0.0
    simplified = simplify_polyline([(x, y) for y, x in path], estimator.epsilon)
    return _polyline_length(simplified)


def skeleton_length(s: Skeleton, estimator: LengthEstimator = GeodesicChain()) -> float:
    """Estimate the line length of a skeleton in pixels.

    PixelCount counts every set pixel; the path estimators measure the
    diameter of the largest 8-connected component. Empty skeletons measure
    0; a single pixel measures 1 under PixelCount and 0 otherwise.
    """
    if isinstance(estimator, PixelCount):
        return float(s.mask.area)
    crops = _component_crops(s.mask)
    if not crops:
        return 0.0
    return _path_length(crops[0][0], estimator)


def longest_fragment_length(
    m: BinaryMask, estimator: LengthEstimator = GeodesicChain()
) -> float:
    """Skeletonize, split into 8-connected fragments, return the longest length."""
    skel = skeletonize(m)
    crops = _component_crops(skel.mask)
    if not crops:
        return 0.0
    if isinstance(estimator, PixelCount):
        return float(max(int(comp.sum()) for comp, _ in crops))
    return max(_path_length(comp, estimator) for comp, _ in crops)


def trace_diameter_path(s: Skeleton) -> list[tuple[int, int]]:
    """Ordered (x, y) pixels realizing the geodesic diameter of the largest component."""
    crops = _component_crops(s.mask)
    if not crops:
        raise EmptyMaskError("cannot trace a path on an empty skeleton")
    comp, (oy, ox) = crops[0]
    _, path = _diameter(comp)
    return [(x + ox, y + oy) for y, x in path]


def _point_segment_distances(
    pts: np.ndarray, a: np.ndarray, b: np.ndarray
) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(pts - a, axis=1)
    t = np.clip((pts - a) @ ab / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.linalg.norm(pts - proj, axis=1)


def simplify_polyline(
    path: list[tuple[float, float]], epsilon: float
) -> list[tuple[float, float]]:
    """Douglas-Peucker simplification keeping both endpoints.

    Every input point ends up within epsilon of the output polyline
    (point-to-segment distance).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    if len(path) < 2:
        raise DegeneratePathError(f"polyline needs >= 2 points, got {len(path)}")
    pts = np.asarray(path, dtype=float)
    keep = np.zeros(len(pts), dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, len(pts) - 1)]
    while stack:
        i, j = stack.pop()
        if j <= i + 1:
            continue
        dists = _point_segment_distances(pts[i + 1 : j], pts[i], pts[j])
        k = int(np.argmax(dists))
        if dists[k] > epsilon:
            k += i + 1
            keep[k] = True
            stack.append((i, k))
            stack.append((k, j))
    return [(float(x), float(y)) for x, y in pts[keep]]
