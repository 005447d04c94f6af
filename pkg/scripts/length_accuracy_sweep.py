#!/usr/bin/env python3
"""Measure skeleton length estimator accuracy by width and rotation.

For random synthetic curves with analytically known centerline lengths,
reports the relative error of each estimator, grouped by tube width, plus a
rotation sweep of one curve. Run: python scripts/length_accuracy_sweep.py
"""
from __future__ import annotations

import argparse
import math

import numpy as np

from curveval import (
    GeodesicChain,
    PixelCount,
    PolylineFit,
    curve_length,
    skeleton_length,
    skeletonize,
)
from curveval.synth import _sample_control_points, centerline_samples, render_curve_mask


def render(pts, width):
    dense = centerline_samples(pts, 16)
    pts = pts - dense.min(axis=0) + width + 4
    hi = centerline_samples(pts, 16).max(axis=0)
    canvas = (int(hi[0]) + width + 6, int(hi[1]) + width + 6)
    return render_curve_mask(pts, width, canvas), curve_length(pts)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--curves", type=int, default=40, help="curves per width")
    args = parser.parse_args()

    estimators = [
        ("pixel-count", PixelCount()),
        ("geodesic", GeodesicChain()),
        ("polyline", PolylineFit()),
    ]
    print(f"{'width':>5} " + " ".join(f"{name:>18}" for name, _ in estimators))
    for width in (3, 5, 7, 9):
        errors = {name: [] for name, _ in estimators}
        rng = np.random.default_rng(width)
        for _ in range(args.curves):
            pts = _sample_control_points(rng, float(rng.uniform(80, 300)))
            mask, analytic = render(pts, width)
            skel = skeletonize(mask)
            for name, est in estimators:
                measured = skeleton_length(skel, est)
                errors[name].append((measured - analytic) / analytic)
        cells = []
        for name, _ in estimators:
            err = np.asarray(errors[name])
            cells.append(f"{100 * err.mean():+6.2f}% (sd {100 * err.std():4.2f})")
        print(f"{width:>5} " + " ".join(f"{c:>18}" for c in cells))

    print("\nrotation sweep of one width-5 curve (geodesic):")
    rng = np.random.default_rng(123)
    pts = _sample_control_points(rng, 150.0)
    pts = pts * (150.0 / curve_length(pts))
    center = pts.mean(axis=0)
    for deg in range(0, 91, 15):
        th = math.radians(deg)
        rot = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        mask, analytic = render((pts - center) @ rot.T, 5)
        measured = skeleton_length(skeletonize(mask), GeodesicChain())
        print(f"  {deg:3d} deg: measured {measured:7.2f}  analytic {analytic:7.2f}  "
              f"err {100 * (measured - analytic) / analytic:+5.2f}%")


if __name__ == "__main__":
    main()
