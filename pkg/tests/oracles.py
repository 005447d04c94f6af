"""Slow, independent reference implementations used as test oracles.

Everything here is deliberately written from first principles (plain loops,
no lookup tables, no shared helpers with the package) so a bug in the
production code cannot hide in its oracle.
"""
from __future__ import annotations

import heapq
import math

import numpy as np

SQRT2 = math.sqrt(2.0)

_RING = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


def _neighbours(arr, y, x):
    h, w = arr.shape
    out = []
    for dy, dx in _RING:
        ny, nx = y + dy, x + dx
        out.append(bool(arr[ny, nx]) if 0 <= ny < h and 0 <= nx < w else False)
    return out


def _is_simple(arr, y, x):
    """8-simple test by explicit component counting in the 3x3 ring."""
    ring = _neighbours(arr, y, x)
    fg = [i for i in range(8) if ring[i]]
    if not fg:
        return False

    def count(cells, four):
        remaining = set(cells)
        comps = 0
        while remaining:
            comps += 1
            stack = [remaining.pop()]
            while stack:
                a = stack.pop()
                for b in list(remaining):
                    dy = abs(_RING[a][0] - _RING[b][0])
                    dx = abs(_RING[a][1] - _RING[b][1])
                    near = (dy + dx == 1) if four else (max(dy, dx) == 1)
                    if near:
                        remaining.discard(b)
                        stack.append(b)
        return comps

    if count(fg, four=False) != 1:
        return False
    bg = [i for i in range(8) if not ring[i]]
    axial = (1, 3, 4, 6)
    remaining = set(bg)
    touching = 0
    while remaining:
        stack = [remaining.pop()]
        comp = {stack[0]}
        while stack:
            a = stack.pop()
            for b in list(remaining):
                dy = abs(_RING[a][0] - _RING[b][0])
                dx = abs(_RING[a][1] - _RING[b][1])
                if dy + dx == 1:
                    remaining.discard(b)
                    comp.add(b)
                    stack.append(b)
        if any(i in comp for i in axial):
            touching += 1
    return touching == 1


def ref_thin(mask_arr: np.ndarray) -> np.ndarray:
    """Sequential raster-order thinning deleting simple non-endpoint pixels."""
    arr = mask_arr.copy()
    changed = True
    while changed:
        changed = False
        ys, xs = np.nonzero(arr)
        for y, x in zip(ys.tolist(), xs.tolist()):
            if not arr[y, x]:
                continue
            ring = _neighbours(arr, y, x)
            if sum(ring) < 2:
                continue
            if _is_simple(arr, y, x):
                arr[y, x] = False
                changed = True
    return arr


def brute_point_in_polygon(px: float, py: float, ring) -> bool:
    """Even-odd rule: odd number of edge crossings strictly right of the point."""
    crossings = 0
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        if (y1 <= py < y2) or (y2 <= py < y1):
            xc = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if xc > px:
                crossings += 1
    return crossings % 2 == 1


def brute_rasterize(rings, width: int, height: int) -> np.ndarray:
    out = np.zeros((height, width), dtype=bool)
    for j in range(height):
        for i in range(width):
            for ring in rings:
                if brute_point_in_polygon(i + 0.5, j + 0.5, ring):
                    out[j, i] = True
                    break
    return out


def brute_fill_holes(mask_arr: np.ndarray) -> np.ndarray:
    """Flood the background from the border with 4-connectivity."""
    h, w = mask_arr.shape
    reach = np.zeros((h, w), dtype=bool)
    stack = []
    for x in range(w):
        for y in (0, h - 1):
            if not mask_arr[y, x]:
                stack.append((y, x))
    for y in range(h):
        for x in (0, w - 1):
            if not mask_arr[y, x]:
                stack.append((y, x))
    while stack:
        y, x = stack.pop()
        if reach[y, x] or mask_arr[y, x]:
            continue
        reach[y, x] = True
        for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ny, nx = y + dy, x + dx
            if 0 <= ny < h and 0 <= nx < w and not reach[ny, nx] and not mask_arr[ny, nx]:
                stack.append((ny, nx))
    return mask_arr | (~mask_arr & ~reach)


def _disc_offsets(radius: int):
    out = []
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            if dx * dx + dy * dy <= radius * radius:
                out.append((dy, dx))
    return out


def brute_dilate(mask_arr: np.ndarray, radius: int) -> np.ndarray:
    h, w = mask_arr.shape
    out = np.zeros((h, w), dtype=bool)
    offs = _disc_offsets(radius)
    for y, x in zip(*np.nonzero(mask_arr)):
        for dy, dx in offs:
            ny, nx = y + dy, x + dx
            if 0 <= ny < h and 0 <= nx < w:
                out[ny, nx] = True
    return out


def brute_erode(mask_arr: np.ndarray, radius: int) -> np.ndarray:
    h, w = mask_arr.shape
    out = np.zeros((h, w), dtype=bool)
    offs = _disc_offsets(radius)
    for y in range(h):
        for x in range(w):
            if not mask_arr[y, x]:
                continue
            ok = True
            for dy, dx in offs:
                ny, nx = y + dy, x + dx
                if not (0 <= ny < h and 0 <= nx < w and mask_arr[ny, nx]):
                    ok = False
                    break
            out[y, x] = ok
    return out


def brute_close(mask_arr: np.ndarray, radius: int) -> np.ndarray:
    """Closing on the unbounded plane, restricted back to the canvas."""
    pad = radius
    big = np.zeros(
        (mask_arr.shape[0] + 2 * pad, mask_arr.shape[1] + 2 * pad), dtype=bool
    )
    big[pad : pad + mask_arr.shape[0], pad : pad + mask_arr.shape[1]] = mask_arr
    big = brute_erode(brute_dilate(big, radius), radius)
    return big[pad : pad + mask_arr.shape[0], pad : pad + mask_arr.shape[1]]


def brute_iou(a: np.ndarray, b: np.ndarray) -> float:
    sa = {(y, x) for y, x in zip(*np.nonzero(a))}
    sb = {(y, x) for y, x in zip(*np.nonzero(b))}
    union = sa | sb
    if not union:
        return 0.0
    return len(sa & sb) / len(union)


def brute_box_iou(a: np.ndarray, b: np.ndarray) -> float:
    def box(m):
        ys, xs = np.nonzero(m)
        return {(y, x) for y in range(ys.min(), ys.max() + 1)
                for x in range(xs.min(), xs.max() + 1)}

    ba, bb = box(a), box(b)
    return len(ba & bb) / len(ba | bb)


def brute_all_pairs_diameter(mask_arr: np.ndarray):
    """Exact weighted diameter over ALL pixel pairs of one component."""
    coords = [(int(y), int(x)) for y, x in zip(*np.nonzero(mask_arr))]
    index = {c: i for i, c in enumerate(coords)}
    n = len(coords)
    adj = [[] for _ in range(n)]
    for (y, x), i in index.items():
        for dy, dx in _RING:
            j = index.get((y + dy, x + dx))
            if j is not None:
                adj[i].append((j, SQRT2 if dy and dx else 1.0))
    best = 0.0
    best_pair = (coords[0], coords[0])
    for src in range(n):
        dist = [math.inf] * n
        dist[src] = 0.0
        heap = [(0.0, src)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u]:
                continue
            for v, w in adj[u]:
                nd = d + w
                if nd < dist[v] - 1e-12:
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
        far = max(range(n), key=lambda k: dist[k])
        if dist[far] > best:
            best = dist[far]
            best_pair = (coords[src], coords[far])
    return best, best_pair


def brute_average_precision(gt_arrays, scored_pred_arrays, threshold, kind="mask"):
    """Score-ordered greedy matching plus naive 101-point interpolation."""
    order = sorted(
        range(len(scored_pred_arrays)),
        key=lambda i: (-scored_pred_arrays[i][1], i),
    )
    matched = [False] * len(gt_arrays)
    flags = []
    for i in order:
        pred = scored_pred_arrays[i][0]
        best_j, best_iou = None, -1.0
        for j, gt in enumerate(gt_arrays):
            if matched[j]:
                continue
            iou = brute_iou(gt, pred) if kind == "mask" else brute_box_iou(gt, pred)
            if iou > best_iou:
                best_j, best_iou = j, iou
        if best_j is not None and best_iou >= threshold:
            matched[best_j] = True
            flags.append(True)
        else:
            flags.append(False)
    n_gt = len(gt_arrays)
    if n_gt == 0 or not flags:
        return 0.0
    points = []
    tp = fp = 0
    for f in flags:
        tp += int(f)
        fp += int(not f)
        points.append((tp / n_gt, tp / (tp + fp)))
    total = 0.0
    for k in range(101):
        r = k / 100
        candidates = [p for rec, p in points if rec >= r - 1e-12]
        total += max(candidates) if candidates else 0.0
    return total / 101


def ref_rle_string_encode(counts) -> str:
    """Transliteration of the reference variable-length chunk encoding."""
    chars = []
    counts = [int(c) for c in counts]
    for i in range(len(counts)):
        x = counts[i]
        if i > 2:
            x -= counts[i - 2]
        more = True
        while more:
            c = x & 0x1F
            x >>= 5
            more = (x != -1) if (c & 0x10) else (x != 0)
            if more:
                c |= 0x20
            c += 48
            chars.append(chr(c))
    return "".join(chars)


def ref_rle_string_decode(text: str):
    counts = []
    p = 0
    while p < len(text):
        x = 0
        k = 0
        more = True
        while more:
            c = ord(text[p]) - 48
            x |= (c & 0x1F) << (5 * k)
            more = bool(c & 0x20)
            p += 1
            k += 1
            if not more and (c & 0x10):
                x |= -1 << (5 * k)
        if len(counts) > 2:
            x += counts[-2]
        counts.append(x)
    return counts
