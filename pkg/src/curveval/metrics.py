"""Length-aware recall, COCO-style average precision, and mask/box NMS.

Length-aware recall (LAR) walks the ground-truth instances in order, pairs
each with the remaining prediction of highest mask IoU, and, when the IoU
clears the threshold, scores the pair by the complement of the relative
error between the skeleton length of the ground truth and the longest
skeleton fragment of the prediction. Unmatched ground truths score zero.

Three consumption modes are provided because removing a failed candidate
from the pool is a policy choice, not a theorem:

  * ``ordered``        - a prediction is consumed only by a successful match.
  * ``ordered-strict`` - the best-IoU candidate is consumed even when the
                         match fails the threshold.
  * ``global-greedy``  - all (gt, pred) pairs above the threshold are sorted
                         by IoU and assigned greedily, making the result
                         independent of input order.

Average precision follows the 101-point interpolation convention over the
precision envelope, with greedy score-ordered matching at a fixed IoU
threshold; the mAP summary averages thresholds 0.50 to 0.90 in steps of
0.05.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .annotation_io import DatasetDescriptor, GtInstance, PredInstance, rasterize
from .errors import ShapeMismatchError, UnknownIdError
from .mask_ops import BinaryMask, PixelBox, bounding_box, iou_box, iou_mask
from .skeleton import (
    GeodesicChain,
    LengthEstimator,
    longest_fragment_length,
    skeleton_length,
    skeletonize,
)

MAP_THRESHOLDS = tuple(t / 100 for t in range(50, 95, 5))


class MatchingMode(str, Enum):
    ORDERED = "ordered"
    ORDERED_STRICT = "ordered-strict"
    GLOBAL_GREEDY = "global-greedy"


@dataclass(frozen=True)
class MatchConfig:
    iou_threshold: float = 0.5
    matching_mode: MatchingMode = MatchingMode.ORDERED
    estimator: LengthEstimator = field(default_factory=GeodesicChain)
    score_threshold: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ValueError("iou_threshold must be in (0, 1]")
        if not 0.0 <= self.score_threshold <= 1.0:
            raise ValueError("score_threshold must be in [0, 1]")

    def to_dict(self) -> dict:
        est: dict[str, object] = {"kind": type(self.estimator).__name__}
        if hasattr(self.estimator, "epsilon"):
            est["epsilon"] = self.estimator.epsilon
        return {
            "iou_threshold": self.iou_threshold,
            "matching_mode": self.matching_mode.value,
            "estimator": est,
            "score_threshold": self.score_threshold,
        }


@dataclass(frozen=True)
class MatchRecord:
    """Matching outcome for one ground-truth instance.

    ``relative_error`` is 1.0 by convention for unmatched instances (so
    ``lar == max(0, 1 - relative_error)`` holds across the board) and
    ``pred_length`` is None. ``flag`` carries diagnostics such as a
    zero-length ground-truth skeleton.
    """

    gt_id: int
    image_id: int
    matched_pred_index: int | None
    iou: float
    gt_length: float
    pred_length: float | None
    relative_error: float
    lar: float
    flag: str | None = None


@dataclass(frozen=True)
class PrCurve:
    """Score-ordered (recall, precision) points at a fixed IoU threshold."""

    points: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class MapSummary:
    map50: float
    map50_90: float
    ap_by_threshold: dict[float, float]


@dataclass(frozen=True)
class EvaluationReport:
    mean_lar: float
    per_instance: list[MatchRecord]
    ap_by_threshold: dict[str, dict[float, float]]
    map50: float
    map50_90: float
    box_map50: float
    box_map50_90: float
    config: MatchConfig
    n_images: int
    n_gt: int
    n_pred: int
    n_matched: int

    SCHEMA_VERSION = 1

    def to_json_dict(self) -> dict:
        return {
            "schema_version": self.SCHEMA_VERSION,
            "config": self.config.to_dict(),
            "counts": {
                "n_images": self.n_images,
                "n_gt": self.n_gt,
                "n_pred": self.n_pred,
                "n_matched": self.n_matched,
            },
            "mean_lar": self.mean_lar,
            "map50": self.map50,
            "map50_90": self.map50_90,
            "box_map50": self.box_map50,
            "box_map50_90": self.box_map50_90,
            "ap_by_threshold": {
                kind: {f"{t:.2f}": ap for t, ap in table.items()}
                for kind, table in self.ap_by_threshold.items()
            },
            "per_instance": [
                {
                    "image_id": r.image_id,
                    "gt_id": r.gt_id,
                    "matched_pred_index": r.matched_pred_index,
                    "iou": r.iou,
                    "gt_length": r.gt_length,
                    "pred_length": r.pred_length,
                    "relative_error": r.relative_error,
                    "lar": r.lar,
                    "flag": r.flag,
                }
                for r in self.per_instance
            ],
        }

    def to_csv_rows(self) -> list[list[str]]:
        """Fixed schema: image_id, gt_id, matched, iou, gt_length, pred_length, e_i, lar_i."""
        rows = [
            ["image_id", "gt_id", "matched", "iou", "gt_length", "pred_length", "e_i", "lar_i"]
        ]
        for r in self.per_instance:
            rows.append(
                [
                    str(r.image_id),
                    str(r.gt_id),
                    "true" if r.matched_pred_index is not None else "false",
                    repr(r.iou),
                    repr(r.gt_length),
                    "" if r.pred_length is None else repr(r.pred_length),
                    repr(r.relative_error),
                    repr(r.lar),
                ]
            )
        return rows


# --------------------------------------------------------------------------
# IoU matrices


class _MaskBatch:
    """Per-mask arrays, boxes and areas computed once and reused."""

    def __init__(self, masks: list[BinaryMask]):
        self.masks = masks
        self.arrays = [m.to_array() for m in masks]
        self.boxes = [bounding_box(m) if not m.is_empty else None for m in masks]
        self.areas = [m.area for m in masks]

    def __len__(self) -> int:
        return len(self.masks)


def _mask_iou_from_batches(a: _MaskBatch, b: _MaskBatch) -> np.ndarray:
    """Pairwise mask IoU, skipping pairs whose bounding boxes are disjoint."""
    out = np.zeros((len(a), len(b)))
    for i, ab in enumerate(a.boxes):
        for j, bb in enumerate(b.boxes):
            if ab is None or bb is None:
                continue
            x0 = max(ab.x_min, bb.x_min)
            x1 = min(ab.x_max, bb.x_max)
            y0 = max(ab.y_min, bb.y_min)
            y1 = min(ab.y_max, bb.y_max)
            if x0 > x1 or y0 > y1:
                continue
            window_a = a.arrays[i][y0 : y1 + 1, x0 : x1 + 1]
            window_b = b.arrays[j][y0 : y1 + 1, x0 : x1 + 1]
            inter = int(np.count_nonzero(window_a & window_b))
            if inter == 0:
                continue
            union = a.areas[i] + b.areas[j] - inter
            out[i, j] = inter / union
    return out


def _box_iou_from_batches(a: _MaskBatch, b: _MaskBatch) -> np.ndarray:
    out = np.zeros((len(a), len(b)))
    for i, ab in enumerate(a.boxes):
        for j, bb in enumerate(b.boxes):
            if ab is not None and bb is not None:
                out[i, j] = iou_box(ab, bb)
    return out


def _mask_iou_matrix(gts: list[BinaryMask], preds: list[BinaryMask]) -> np.ndarray:
    if not gts or not preds:
        return np.zeros((len(gts), len(preds)))
    return _mask_iou_from_batches(_MaskBatch(gts), _MaskBatch(preds))


def _box_iou_matrix(gts: list[BinaryMask], preds: list[BinaryMask]) -> np.ndarray:
    if not gts or not preds:
        return np.zeros((len(gts), len(preds)))
    return _box_iou_from_batches(_MaskBatch(gts), _MaskBatch(preds))


def _require_shared_canvas(masks: list[BinaryMask]) -> None:
    shapes = {m.to_array().shape for m in masks}
    if len(shapes) > 1:
        raise ShapeMismatchError(f"masks span multiple canvases: {sorted(shapes)}")


def _mask_anchor(m: BinaryMask) -> tuple[int, int]:
    first = m.first_pixel()
    return first if first is not None else (-1, -1)


# --------------------------------------------------------------------------
# length-aware recall


def _lar_from_lengths(gt_len: float, pred_len: float) -> tuple[float, float, str | None]:
    """(relative error, lar, flag) for a matched pair of skeleton lengths."""
    if gt_len == 0.0:
        if pred_len == 0.0:
            return 0.0, 1.0, "zero-length ground-truth skeleton"
        return math.inf, 0.0, "zero-length ground-truth skeleton"
    err = abs(gt_len - pred_len) / gt_len
    return err, max(0.0, 1.0 - err), None


def _match_from_iou(
    iou: np.ndarray,
    gts: list[BinaryMask],
    preds: list[BinaryMask],
    config: MatchConfig,
) -> list[MatchRecord]:
    n_gt, n_pred = iou.shape
    estimator = config.estimator
    t = config.iou_threshold
    _gt_len_cache: dict[int, float] = {}

    def gt_len(i: int) -> float:
        if i not in _gt_len_cache:
            _gt_len_cache[i] = skeleton_length(skeletonize(gts[i]), estimator)
        return _gt_len_cache[i]

    assignments: dict[int, int | None] = {}
    best_unassigned: dict[int, float] = {}

    if config.matching_mode is MatchingMode.GLOBAL_GREEDY:
        pairs = [
            (i, j)
            for i in range(n_gt)
            for j in range(n_pred)
            if iou[i, j] >= t
        ]
        # anchors, not list indices, break IoU ties so the assignment is
        # invariant under permutations of either input list
        g_anchor = [_mask_anchor(g) for g in gts]
        p_anchor = [_mask_anchor(p) for p in preds]
        pairs.sort(key=lambda ij: (-iou[ij[0], ij[1]], g_anchor[ij[0]], p_anchor[ij[1]]))
        used_gt: set[int] = set()
        used_pred: set[int] = set()
        for i, j in pairs:
            if i in used_gt or j in used_pred:
                continue
            assignments[i] = j
            used_gt.add(i)
            used_pred.add(j)
        for i in range(n_gt):
            if i not in assignments:
                free = [j for j in range(n_pred) if j not in used_pred]
                best_unassigned[i] = max((iou[i, j] for j in free), default=0.0)
    else:
        available = np.ones(n_pred, dtype=bool)
        for i in range(n_gt):
            if not available.any():
                assignments[i] = None
                best_unassigned[i] = 0.0
                continue
            row = np.where(available, iou[i], -1.0)
            j = int(np.argmax(row))
            best = float(row[j])
            if best >= t:
                assignments[i] = j
                available[j] = False
            else:
                assignments[i] = None
                best_unassigned[i] = max(best, 0.0)
                if config.matching_mode is MatchingMode.ORDERED_STRICT:
                    # the candidate is consumed even by a failed match
                    available[j] = False

    records: list[MatchRecord] = []
    for i in range(n_gt):
        j = assignments.get(i)
        if j is None:
            records.append(
                MatchRecord(
                    gt_id=i,
                    image_id=0,
                    matched_pred_index=None,
                    iou=float(best_unassigned.get(i, 0.0)),
                    gt_length=gt_len(i),
                    pred_length=None,
                    relative_error=1.0,
                    lar=0.0,
                    flag="empty ground-truth mask" if gts[i].is_empty else None,
                )
            )
            continue
        pred_len = longest_fragment_length(preds[j], estimator)
        err, lar, flag = _lar_from_lengths(gt_len(i), pred_len)
        records.append(
            MatchRecord(
                gt_id=i,
                image_id=0,
                matched_pred_index=j,
                iou=float(iou[i, j]),
                gt_length=gt_len(i),
                pred_length=pred_len,
                relative_error=err,
                lar=lar,
                flag=flag,
            )
        )
    return records


def match_lar(
    gts: list[BinaryMask],
    preds: list[BinaryMask],
    config: MatchConfig = MatchConfig(),
) -> tuple[list[MatchRecord], float]:
    """Match predictions to ground truths and compute length-aware recall.

    Returns one record per ground-truth instance (gt_id is the list index)
    plus the arithmetic mean of the per-instance scores; unmatched instances
    contribute zero. An empty ground-truth list yields ([], 0.0).
    """
    _require_shared_canvas(list(gts) + list(preds))
    iou = _mask_iou_matrix(list(gts), list(preds))
    records = _match_from_iou(iou, list(gts), list(preds), config)
    mean = sum(r.lar for r in records) / len(records) if records else 0.0
    return records, mean


# --------------------------------------------------------------------------
# average precision


def _greedy_tp_flags(
    iou: np.ndarray, order: np.ndarray, threshold: float
) -> list[bool]:
    n_gt = iou.shape[0]
    used = np.zeros(n_gt, dtype=bool)
    flags = []
    for j in order:
        if n_gt == 0:
            flags.append(False)
            continue
        row = np.where(~used, iou[:, j], -1.0)
        i = int(np.argmax(row))
        if row[i] >= threshold:
            used[i] = True
            flags.append(True)
        else:
            flags.append(False)
    return flags


def _interpolated_ap(tp_flags: list[bool], n_gt: int) -> float:
    """101-point interpolation of the precision envelope over recall."""
    if n_gt == 0 or not tp_flags:
        return 0.0
    tp = np.cumsum(np.asarray(tp_flags, dtype=np.int64))
    fp = np.cumsum(~np.asarray(tp_flags, dtype=bool))
    recall = tp / n_gt
    precision = tp / (tp + fp)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    grid = np.linspace(0.0, 1.0, 101)
    idx = np.searchsorted(recall, grid, side="left")
    sampled = np.zeros(101)
    valid = idx < len(recall)
    sampled[valid] = envelope[idx[valid]]
    return float(sampled.mean())


def precision_recall_curve(
    gts: list[BinaryMask],
    preds: list[tuple[BinaryMask, float]],
    iou_threshold: float,
    iou_kind: str = "mask",
) -> PrCurve:
    """PR points after each score-ordered detection at one IoU threshold."""
    masks = [m for m, _ in preds]
    scores = np.asarray([s for _, s in preds], dtype=float)
    iou = _iou_by_kind(list(gts), masks, iou_kind)
    order = np.argsort(-scores, kind="stable")
    flags = _greedy_tp_flags(iou, order, iou_threshold)
    n_gt = len(gts)
    points = []
    tp = fp = 0
    for flag in flags:
        tp += int(flag)
        fp += int(not flag)
        recall = tp / n_gt if n_gt else 0.0
        points.append((recall, tp / (tp + fp)))
    return PrCurve(tuple(points))


def _iou_by_kind(gts, preds, kind: str) -> np.ndarray:
    if kind == "mask":
        return _mask_iou_matrix(gts, preds)
    if kind == "box":
        return _box_iou_matrix(gts, preds)
    raise ValueError(f"iou_kind must be 'mask' or 'box', got {kind!r}")


def average_precision(
    gts: list[BinaryMask],
    preds: list[tuple[BinaryMask, float]],
    iou_threshold: float,
    iou_kind: str = "mask",
) -> float:
    """COCO-convention AP on a single shared canvas."""
    if not gts:
        warnings.warn("average precision is undefined without ground truth; returning 0")
        return 0.0
    masks = [m for m, _ in preds]
    scores = np.asarray([s for _, s in preds], dtype=float)
    iou = _iou_by_kind(list(gts), masks, iou_kind)
    order = np.argsort(-scores, kind="stable")
    flags = _greedy_tp_flags(iou, order, iou_threshold)
    return _interpolated_ap(flags, len(gts))


def map_summary(
    gts: list[BinaryMask],
    preds: list[tuple[BinaryMask, float]],
    iou_kind: str = "mask",
) -> MapSummary:
    """AP at thresholds 0.50..0.90 (step 0.05) plus the two headline means."""
    table = {
        t: average_precision(gts, preds, t, iou_kind) for t in MAP_THRESHOLDS
    }
    return MapSummary(
        map50=table[0.5],
        map50_90=sum(table.values()) / len(table),
        ap_by_threshold=table,
    )


# --------------------------------------------------------------------------
# non-maximum suppression


def mask_nms_indices(
    preds: list[tuple[BinaryMask, float]],
    overlap_threshold: float,
    level: str = "mask",
) -> list[int]:
    """Greedy NMS; returns surviving indices in descending score order."""
    if level not in ("mask", "box"):
        raise ValueError(f"level must be 'mask' or 'box', got {level!r}")
    scores = [s for _, s in preds]
    order = sorted(range(len(preds)), key=lambda i: -scores[i])
    boxes: list[PixelBox | None] = []
    if level == "box":
        boxes = [
            bounding_box(m) if not m.is_empty else None for m, _ in preds
        ]
    alive = [True] * len(preds)
    kept: list[int] = []
    for pos, i in enumerate(order):
        if not alive[i]:
            continue
        kept.append(i)
        for j in order[pos + 1 :]:
            if not alive[j]:
                continue
            if level == "mask":
                overlap = iou_mask(preds[i][0], preds[j][0])
            else:
                overlap = (
                    iou_box(boxes[i], boxes[j])
                    if boxes[i] is not None and boxes[j] is not None
                    else 0.0
                )
            if overlap > overlap_threshold:
                alive[j] = False
    return kept


def mask_nms(
    preds: list[tuple[BinaryMask, float]],
    overlap_threshold: float,
    level: str = "mask",
) -> list[tuple[BinaryMask, float]]:
    """Greedy NMS over (mask, score) pairs at mask or box level."""
    return [preds[i] for i in mask_nms_indices(preds, overlap_threshold, level)]


# --------------------------------------------------------------------------
# dataset evaluation


def _instance_mask(inst, descriptor: DatasetDescriptor) -> BinaryMask:
    if inst.mask is not None:
        return inst.mask
    img = descriptor.image(inst.image_id)
    return rasterize(inst.geometry, img.width, img.height)


def _evaluate_image(
    image_id: int,
    gts: list[GtInstance],
    preds: list[PredInstance],
    descriptor: DatasetDescriptor,
    config: MatchConfig,
):
    gt_masks = [_instance_mask(g, descriptor) for g in gts]
    pred_masks = [_instance_mask(p, descriptor) for p in preds]
    gt_batch = _MaskBatch(gt_masks)
    pred_batch = _MaskBatch(pred_masks)
    mask_iou = _mask_iou_from_batches(gt_batch, pred_batch)
    box_iou = _box_iou_from_batches(gt_batch, pred_batch)
    kept = [i for i, p in enumerate(preds) if p.score >= config.score_threshold]
    records = _match_from_iou(
        mask_iou[:, kept] if kept else np.zeros((len(gts), 0)),
        gt_masks,
        [pred_masks[i] for i in kept],
        config,
    )
    records = [
        replace(
            r,
            gt_id=gts[k].annotation_id,
            image_id=image_id,
            matched_pred_index=(
                kept[r.matched_pred_index]
                if r.matched_pred_index is not None
                else None
            ),
        )
        for k, r in enumerate(records)
    ]
    return records, mask_iou, box_iou


def evaluate_dataset(
    descriptor: DatasetDescriptor,
    gts: list[GtInstance],
    preds: list[PredInstance],
    config: MatchConfig = MatchConfig(),
    threads: int = 1,
) -> EvaluationReport:
    """Evaluate a dataset: per-instance LAR records plus dataset-wide AP.

    LAR is matched per image and averaged over every ground-truth instance;
    AP pools predictions across images in global score order (ties broken by
    input order) with greedy per-image matching. Image-level work may run on
    a thread pool; results are identical to sequential execution.
    """
    for inst in gts:
        if not descriptor.has_image(inst.image_id):
            raise UnknownIdError(
                f"annotation {inst.annotation_id} references unknown image_id "
                f"{inst.image_id}"
            )
    for i, inst in enumerate(preds):
        if not descriptor.has_image(inst.image_id):
            raise UnknownIdError(
                f"prediction {i} references unknown image_id {inst.image_id}"
            )

    image_ids = sorted(
        {g.image_id for g in gts} | {p.image_id for p in preds}
    )
    gts_by_image: dict[int, list[GtInstance]] = {i: [] for i in image_ids}
    preds_by_image: dict[int, list[PredInstance]] = {i: [] for i in image_ids}
    pred_global_index: dict[int, list[int]] = {i: [] for i in image_ids}
    for g in gts:
        gts_by_image[g.image_id].append(g)
    for idx, p in enumerate(preds):
        preds_by_image[p.image_id].append(p)
        pred_global_index[p.image_id].append(idx)

    def job(image_id: int):
        return _evaluate_image(
            image_id,
            gts_by_image[image_id],
            preds_by_image[image_id],
            descriptor,
            config,
        )

    if threads > 1 and len(image_ids) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, image_ids))
    else:
        results = [job(i) for i in image_ids]
    per_image = dict(zip(image_ids, results))

    records = [r for image_id in image_ids for r in per_image[image_id][0]]
    mean_lar = sum(r.lar for r in records) / len(records) if records else 0.0

    # dataset-wide AP: global score order, gts contested only within an image
    flat = []  # (score, global index, image_id, column in the image matrix)
    for image_id in image_ids:
        for col, gidx in enumerate(pred_global_index[image_id]):
            flat.append((preds_by_image[image_id][col].score, gidx, image_id, col))
    flat.sort(key=lambda rec: (-rec[0], rec[1]))
    n_gt_total = len(gts)

    ap_tables: dict[str, dict[float, float]] = {}
    for kind, matrix_idx in (("mask", 1), ("box", 2)):
        table: dict[float, float] = {}
        for t in MAP_THRESHOLDS:
            used = {
                image_id: np.zeros(len(gts_by_image[image_id]), dtype=bool)
                for image_id in image_ids
            }
            flags: list[bool] = []
            for _, _, image_id, col in flat:
                iou = per_image[image_id][matrix_idx]
                if iou.shape[0] == 0:
                    flags.append(False)
                    continue
                row = np.where(~used[image_id], iou[:, col], -1.0)
                i = int(np.argmax(row))
                if row[i] >= t:
                    used[image_id][i] = True
                    flags.append(True)
                else:
                    flags.append(False)
            table[t] = _interpolated_ap(flags, n_gt_total)
        ap_tables[kind] = table

    if n_gt_total == 0 and preds:
        warnings.warn("dataset has predictions but no ground truth")

    n_matched = sum(1 for r in records if r.matched_pred_index is not None)
    mask_table = ap_tables["mask"]
    box_table = ap_tables["box"]
    return EvaluationReport(
        mean_lar=mean_lar,
        per_instance=records,
        ap_by_threshold=ap_tables,
        map50=mask_table[0.5],
        map50_90=sum(mask_table.values()) / len(mask_table),
        box_map50=box_table[0.5],
        box_map50_90=sum(box_table.values()) / len(box_table),
        config=config,
        n_images=len(image_ids),
        n_gt=len(gts),
        n_pred=len(preds),
        n_matched=n_matched,
    )
