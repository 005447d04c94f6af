"""Command-line front end.

Subcommands: evaluate, skeletonize, nms, synth, lengths. Exit codes: 0 on
success, 1 on input or usage errors, 2 on internal errors. Reports are byte
reproducible: identical inputs and flags produce identical output files.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .annotation_io import (
    Category,
    DatasetDescriptor,
    GtInstance,
    ImageInfo,
    PredInstance,
    load_raster_manifest,
    parse_coco_ground_truth,
    parse_coco_predictions,
    parse_yolo_segmentation,
    read_mask_png,
    rle_encode,
    write_mask_png,
)
from .errors import CurveEvalError, FormatError, SchemaError
from .metrics import (
    EvaluationReport,
    MatchConfig,
    MatchingMode,
    evaluate_dataset,
    mask_nms_indices,
)
from .skeleton import (
    GeodesicChain,
    PixelCount,
    PolylineFit,
    skeleton_length,
    skeletonize,
    trace_diameter_path,
)
from .synth import Dilate, Drop, Duplicate, Erode, Fracture, Shift, generate_scene, perturb

_FORMATS = ("coco", "yolo", "raster-manifest")


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that exits with code 1 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_estimator_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--estimator",
        choices=("pixel", "geodesic", "polyline"),
        default="geodesic",
        help="skeleton length estimator (default: geodesic)",
    )
    parser.add_argument(
        "--epsilon",
        type=float,
        default=1.5,
        help="polyline simplification tolerance in pixels (default: 1.5)",
    )


def _estimator_from_args(args):
    if args.estimator == "pixel":
        return PixelCount()
    if args.estimator == "polyline":
        return PolylineFit(epsilon=args.epsilon)
    return GeodesicChain()


def build_parser() -> _Parser:
    parser = _Parser(prog="curveval", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p_eval = sub.add_parser("evaluate", help="evaluate predictions against ground truth")
    p_eval.add_argument("--gt", required=True, help="ground-truth file (or directory for yolo)")
    p_eval.add_argument("--pred", required=True, help="prediction file (or directory for yolo)")
    p_eval.add_argument("--format", choices=_FORMATS, default="coco")
    p_eval.add_argument("--image-size", type=int, nargs=2, metavar=("W", "H"),
                        help="canvas size, required for yolo inputs")
    p_eval.add_argument("--iou-thresh", type=float, default=0.5)
    p_eval.add_argument("--mode", choices=[m.value for m in MatchingMode],
                        default=MatchingMode.ORDERED.value)
    p_eval.add_argument("--score-thresh", type=float, default=0.0)
    _add_estimator_flags(p_eval)
    p_eval.add_argument("--threads", type=int, default=1,
                    help="worker threads for per-image evaluation (default: 1)")
    p_eval.add_argument("--out", help="report path (default: stdout)")
    p_eval.add_argument("--out-format", choices=("json", "csv"), default="json")

    p_skel = sub.add_parser("skeletonize", help="skeletonize a PNG mask")
    p_skel.add_argument("--mask", required=True, help="input mask PNG")
    p_skel.add_argument("--out-mask", help="output skeleton PNG")
    p_skel.add_argument("--out-json", help="output length record JSON")
    p_skel.add_argument("--epsilon", type=float, default=1.5)

    p_nms = sub.add_parser("nms", help="non-maximum suppression over predictions")
    p_nms.add_argument("--pred", required=True)
    p_nms.add_argument("--format", choices=("coco", "raster-manifest"), default="coco")
    p_nms.add_argument("--images", help="COCO file providing image sizes (coco format)")
    p_nms.add_argument("--level", choices=("mask", "box"), default="mask")
    p_nms.add_argument("--overlap-thresh", type=float, default=0.6)
    p_nms.add_argument("--out", help="filtered predictions path (default: stdout)")

    p_synth = sub.add_parser("synth", help="generate a synthetic evaluation fixture")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--images", type=int, default=1, help="number of scenes")
    p_synth.add_argument("--instances", type=int, default=5, help="instances per scene")
    p_synth.add_argument("--canvas", type=int, nargs=2, default=(512, 512), metavar=("W", "H"))
    p_synth.add_argument("--width-range", type=int, nargs=2, default=(3, 7), metavar=("LO", "HI"))
    p_synth.add_argument("--length-range", type=float, nargs=2, default=(80.0, 200.0),
                         metavar=("LO", "HI"))
    p_synth.add_argument("--perturb", default="none",
                         help="perturbation applied to every instance: none, erode:R, "
                              "dilate:R, fracture:GAP:FRAC, shift:DX:DY, drop, duplicate:DELTA")
    p_synth.add_argument("--render", action="store_true", help="write per-scene PNG renders")
    p_synth.add_argument("--out-dir", required=True)

    p_len = sub.add_parser("lengths", help="skeleton lengths for every ground-truth instance")
    p_len.add_argument("--gt", required=True)
    p_len.add_argument("--format", choices=_FORMATS, default="coco")
    p_len.add_argument("--image-size", type=int, nargs=2, metavar=("W", "H"))
    p_len.add_argument("--epsilon", type=float, default=1.5)
    p_len.add_argument("--out", help="output path (default: stdout)")
    p_len.add_argument("--out-format", choices=("json", "csv"), default="json")
    return parser


# --------------------------------------------------------------------------
# loading helpers


def _load_yolo_dir(path: Path, image_size, with_confidence: bool):
    if image_size is None:
        raise FormatError("yolo inputs need --image-size W H")
    if not path.is_dir():
        raise FormatError(f"yolo input {path} must be a directory of .txt files")
    width, height = image_size
    files = sorted(p for p in path.iterdir() if p.suffix == ".txt")
    out: dict[str, list[PredInstance]] = {}
    for f in files:
        out[f.stem] = parse_yolo_segmentation(
            f.read_text(encoding="utf-8"), width, height,
            with_confidence=with_confidence,
        )
    return out, width, height


def _load_ground_truth(path_str: str, fmt: str, image_size):
    path = Path(path_str)
    if fmt == "coco":
        return parse_coco_ground_truth(path.read_text(encoding="utf-8"))
    if fmt == "raster-manifest":
        descriptor, gts, _ = load_raster_manifest(path)
        return descriptor, gts
    per_file, width, height = _load_yolo_dir(path, image_size, with_confidence=False)
    images = []
    gts: list[GtInstance] = []
    ann_id = 1
    for image_id, (stem, preds) in enumerate(sorted(per_file.items()), start=1):
        images.append(ImageInfo(image_id, width, height, stem))
        for p in preds:
            gts.append(GtInstance(ann_id, image_id, p.category_id, p.geometry, p.mask))
            ann_id += 1
    descriptor = DatasetDescriptor(tuple(images), (Category(0, "curve"),))
    return descriptor, gts


def _load_predictions(path_str: str, fmt: str, descriptor: DatasetDescriptor, image_size):
    path = Path(path_str)
    if fmt == "coco":
        return parse_coco_predictions(path.read_text(encoding="utf-8"), descriptor)
    if fmt == "raster-manifest":
        _, _, preds = load_raster_manifest(path, with_scores=True)
        return preds
    per_file, _, _ = _load_yolo_dir(path, image_size, with_confidence=True)
    by_name = {img.file_name: img.id for img in descriptor.images}
    preds: list[PredInstance] = []
    for stem in sorted(per_file):
        if stem not in by_name:
            raise SchemaError(f"prediction file {stem}.txt matches no ground-truth image")
        image_id = by_name[stem]
        for p in per_file[stem]:
            preds.append(PredInstance(image_id, p.category_id, p.geometry, p.score, p.mask))
    return preds


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _report_text(report: EvaluationReport, out_format: str) -> str:
    if out_format == "json":
        return json.dumps(report.to_json_dict(), indent=2) + "\n"
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(report.to_csv_rows())
    return buf.getvalue()


# --------------------------------------------------------------------------
# subcommand implementations


def _cmd_evaluate(args) -> int:
    descriptor, gts = _load_ground_truth(args.gt, args.format, args.image_size)
    preds = _load_predictions(args.pred, args.format, descriptor, args.image_size)
    config = MatchConfig(
        iou_threshold=args.iou_thresh,
        matching_mode=MatchingMode(args.mode),
        estimator=_estimator_from_args(args),
        score_threshold=args.score_thresh,
    )
    report = evaluate_dataset(descriptor, gts, preds, config, threads=max(args.threads, 1))
    _write_text(args.out, _report_text(report, args.out_format))
    return 0


def _cmd_skeletonize(args) -> int:
    mask = read_mask_png(args.mask)
    skel = skeletonize(mask)
    record = {
        "pixel_count": skeleton_length(skel, PixelCount()),
        "geodesic_length": skeleton_length(skel, GeodesicChain()),
        "polyline_length": skeleton_length(skel, PolylineFit(epsilon=args.epsilon)),
        "diameter_path": (
            [] if skel.mask.is_empty else [list(p) for p in trace_diameter_path(skel)]
        ),
    }
    if args.out_mask:
        write_mask_png(args.out_mask, skel.mask)
    _write_text(args.out_json, json.dumps(record, indent=2) + "\n")
    return 0


def _cmd_nms(args) -> int:
    if args.format == "coco":
        if not args.images:
            raise SchemaError("nms with --format coco needs --images for canvas sizes")
        descriptor, _ = parse_coco_ground_truth(Path(args.images).read_text(encoding="utf-8"))
        raw = json.loads(Path(args.pred).read_text(encoding="utf-8"))
        preds = parse_coco_predictions(Path(args.pred).read_text(encoding="utf-8"), descriptor)
    else:
        _, _, preds = load_raster_manifest(args.pred, with_scores=True)
        raw = json.loads(Path(args.pred).read_text(encoding="utf-8"))["instances"]
    kept: list[int] = []
    by_image: dict[int, list[int]] = {}
    for idx, p in enumerate(preds):
        by_image.setdefault(p.image_id, []).append(idx)
    for image_id in sorted(by_image):
        idxs = by_image[image_id]
        pairs = [(preds[i].mask, preds[i].score) for i in idxs]
        for local in mask_nms_indices(pairs, args.overlap_thresh, args.level):
            kept.append(idxs[local])
    kept.sort(key=lambda i: (-preds[i].score, i))
    filtered = [raw[i] for i in kept]
    if args.format == "raster-manifest":
        filtered = {"instances": filtered}
    _write_text(args.out, json.dumps(filtered, indent=2) + "\n")
    return 0


def _parse_perturbation(text: str):
    parts = text.split(":")
    kind = parts[0]
    try:
        if kind == "none":
            return None
        if kind == "erode":
            return Erode(int(parts[1]))
        if kind == "dilate":
            return Dilate(int(parts[1]))
        if kind == "fracture":
            return Fracture(float(parts[1]), float(parts[2]))
        if kind == "shift":
            return Shift(int(parts[1]), int(parts[2]))
        if kind == "drop":
            return Drop()
        if kind == "duplicate":
            return Duplicate(float(parts[1]))
    except (IndexError, ValueError) as exc:
        raise FormatError(f"bad perturbation spec {text!r}") from exc
    raise FormatError(f"unknown perturbation {kind!r}")


def _cmd_synth(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = _parse_perturbation(args.perturb)
    images = []
    annotations = []
    results = []
    for k in range(args.images):
        image_id = k + 1
        instances, _lengths = generate_scene(
            seed=args.seed + k,
            n_instances=args.instances,
            canvas=tuple(args.canvas),
            width_range=tuple(args.width_range),
            length_range=tuple(args.length_range),
            image_id=image_id,
        )
        images.append(
            {
                "id": image_id,
                "width": args.canvas[0],
                "height": args.canvas[1],
                "file_name": f"scene_{image_id:04d}.png",
            }
        )
        for inst in instances:
            rle = rle_encode(inst.mask, compressed=True)
            annotations.append(
                {
                    "id": len(annotations) + 1,
                    "image_id": image_id,
                    "category_id": 1,
                    "segmentation": {"size": list(rle.size), "counts": rle.counts},
                    "area": inst.mask.area,
                    "iscrowd": 0,
                }
            )
            if spec is None:
                pred_instances = perturb(inst, Shift(0, 0))
            else:
                pred_instances = perturb(inst, spec)
            for p in pred_instances:
                prle = rle_encode(p.mask, compressed=True)
                results.append(
                    {
                        "image_id": image_id,
                        "category_id": 1,
                        "segmentation": {"size": list(prle.size), "counts": prle.counts},
                        "score": p.score,
                    }
                )
        if args.render:
            import numpy as np

            union = np.zeros((args.canvas[1], args.canvas[0]), dtype=bool)
            for inst in instances:
                union |= inst.mask.to_array()
            from .mask_ops import BinaryMask

            write_mask_png(out_dir / f"scene_{image_id:04d}.png", BinaryMask._wrap(union))
    gt_doc = {
        "images": images,
        "annotations": annotations,
        "categories": [{"id": 1, "name": "curve"}],
    }
    (out_dir / "gt.json").write_text(json.dumps(gt_doc, indent=2) + "\n", encoding="utf-8")
    (out_dir / "pred.json").write_text(json.dumps(results, indent=2) + "\n", encoding="utf-8")
    return 0


def _cmd_lengths(args) -> int:
    descriptor, gts = _load_ground_truth(args.gt, args.format, args.image_size)
    rows = []
    for inst in gts:
        skel = skeletonize(inst.mask)
        rows.append(
            {
                "image_id": inst.image_id,
                "annotation_id": inst.annotation_id,
                "category_id": inst.category_id,
                "area": inst.mask.area,
                "pixel_count": skeleton_length(skel, PixelCount()),
                "geodesic_length": skeleton_length(skel, GeodesicChain()),
                "polyline_length": skeleton_length(skel, PolylineFit(epsilon=args.epsilon)),
            }
        )
    if args.out_format == "json":
        _write_text(args.out, json.dumps(rows, indent=2) + "\n")
    else:
        import io

        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["image_id", "annotation_id", "category_id", "area",
                  "pixel_count", "geodesic_length", "polyline_length"]
        writer.writerow(header)
        for r in rows:
            writer.writerow([r[h] for h in header])
        _write_text(args.out, buf.getvalue())
    return 0


_COMMANDS = {
    "evaluate": _cmd_evaluate,
    "skeletonize": _cmd_skeletonize,
    "nms": _cmd_nms,
    "synth": _cmd_synth,
    "lengths": _cmd_lengths,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except CurveEvalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # anything else is a bug, not bad input
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
