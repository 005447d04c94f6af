from __future__ import annotations

import numpy as np
import pytest

from curveval import BinaryMask, generate_scene
from curveval.synth import _sample_control_points, centerline_samples, render_curve_mask


def mask_from_text(art: str) -> BinaryMask:
    """Build a mask from ascii art; '#' marks foreground."""
    import textwrap

    rows = [line for line in textwrap.dedent(art).strip("\n").splitlines()]
    width = max(len(r) for r in rows)
    arr = np.zeros((len(rows), width), dtype=bool)
    for y, row in enumerate(rows):
        for x, ch in enumerate(row):
            if ch == "#":
                arr[y, x] = True
    return BinaryMask(arr)


def horizontal_bar(length: int, thickness: int, canvas: tuple[int, int]) -> BinaryMask:
    w, h = canvas
    arr = np.zeros((h, w), dtype=bool)
    y0 = h // 2 - thickness // 2
    x0 = (w - length) // 2
    arr[y0 : y0 + thickness, x0 : x0 + length] = True
    return BinaryMask(arr)


def diagonal_bar(
    n: int, thickness: int, canvas: tuple[int, int], x_offset: int = 0
) -> BinaryMask:
    """A 45-degree bar rendered as a thickened digital diagonal."""
    w, h = canvas
    arr = np.zeros((h, w), dtype=bool)
    for i in range(n):
        for t in range(thickness):
            x, y = i + x_offset + t, i
            if 0 <= x < w and 0 <= y < h:
                arr[y, x] = True
    return BinaryMask(arr)


def random_blob_mask(rng: np.random.Generator, size: int = 48) -> BinaryMask:
    """Union of a few random discs, occasionally with a hole punched in."""
    arr = np.zeros((size, size), dtype=bool)
    yy, xx = np.mgrid[0:size, 0:size]
    for _ in range(int(rng.integers(1, 4))):
        cy, cx = rng.integers(8, size - 8, 2)
        r = int(rng.integers(3, 9))
        arr |= (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    if rng.random() < 0.3:
        cy, cx = rng.integers(10, size - 10, 2)
        r = int(rng.integers(2, 4))
        arr &= ~((yy - cy) ** 2 + (xx - cx) ** 2 <= r * r)
    return BinaryMask(arr)


def random_curve_mask(rng: np.random.Generator) -> BinaryMask:
    width = int(rng.choice([3, 5, 7, 9]))
    length = float(rng.uniform(40, 140))
    pts = _sample_control_points(rng, length)
    dense = centerline_samples(pts, 16)
    lo = dense.min(axis=0)
    pts = pts - lo + width + 3
    hi = centerline_samples(pts, 16).max(axis=0)
    canvas = (int(hi[0]) + width + 4, int(hi[1]) + width + 4)
    return render_curve_mask(pts, width, canvas)


def random_synthetic_mask(rng: np.random.Generator) -> BinaryMask:
    """Mixture used for the skeleton invariant sweeps: curves, blobs, bars."""
    kind = rng.random()
    if kind < 0.55:
        return random_curve_mask(rng)
    if kind < 0.85:
        return random_blob_mask(rng)
    thickness = int(rng.integers(1, 5))
    length = int(rng.integers(5, 60))
    if rng.random() < 0.5:
        return horizontal_bar(length, thickness, (length + 10, thickness + 10))
    return diagonal_bar(length, thickness, (length + thickness + 10, length + 10))


@pytest.fixture
def small_scene():
    instances, lengths = generate_scene(11, 4, canvas=(320, 320))
    return instances, lengths
