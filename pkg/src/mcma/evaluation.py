"""Metrics and the motion-partitioned evaluation protocol.

mIoU (classes absent from both prediction and ground truth are excluded),
per-class false-positive rate, and the 20%/80% motion-quantile split of
evaluated frames by mean flow-vector length.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from .core import FlowField, SegmentationMask

SUBSETS = ("all", "low20", "mid60", "high20")


def _labels(mask) -> np.ndarray:
    return mask.labels if isinstance(mask, SegmentationMask) else np.asarray(mask)


def _confusion_counts(pred, gt, num_classes: int):
    p = _labels(pred).astype(np.int64)
    g = _labels(gt).astype(np.int64)
    if p.shape != g.shape:
        raise ValueError("mask dimensions must match")
    if p.max() >= num_classes or g.max() >= num_classes:
        raise ValueError("label out of range")
    inter = np.zeros(num_classes, np.int64)
    union = np.zeros(num_classes, np.int64)
    for cls in range(num_classes):
        pi = p == cls
        gi = g == cls
        inter[cls] = np.count_nonzero(pi & gi)
        union[cls] = np.count_nonzero(pi | gi)
    return inter, union


def _iou_from_counts(inter, union):
    ious = np.full(len(inter), np.nan)
    present = union > 0
    ious[present] = inter[present] / union[present]
    mean = float(np.nanmean(ious)) if present.any() else float("nan")
    return mean, ious


def miou(pred, gt, num_classes: int):
    """Returns (mean IoU, per-class IoU vector with NaN for absent classes)."""
    return _iou_from_counts(*_confusion_counts(pred, gt, num_classes))


def fp_rate(pred, gt, target_class: int) -> float:
    """Fraction of all pixels predicted as target_class where gt disagrees."""
    p = _labels(pred)
    g = _labels(gt)
    if p.shape != g.shape:
        raise ValueError("mask dimensions must match")
    fp = np.count_nonzero((p == target_class) & (g != target_class))
    return fp / p.size


@dataclass
class MotionPartition:
    low: List[int]
    mid: List[int]
    high: List[int]
    low_threshold: float
    high_threshold: float
    degenerate: bool = False


def motion_quantile_partition(per_frame_motion: Sequence[float],
                              low_q: float = 0.2,
                              high_q: float = 0.8) -> MotionPartition:
    """Split frame indices by empirical motion quantiles (linear
    interpolation between order statistics)."""
    motion = np.asarray(per_frame_motion, np.float64)
    if motion.size < 5:
        raise ValueError("need at least 5 samples")
    q_lo, q_hi = np.quantile(motion, [low_q, high_q], method="linear")
    if np.all(motion == motion[0]):
        warnings.warn("degenerate motion distribution: every frame sits on "
                      "both quantile boundaries")
        idx = list(range(motion.size))
        return MotionPartition(idx, [], list(idx), float(q_lo), float(q_hi),
                               degenerate=True)
    low = [i for i, m in enumerate(motion) if m <= q_lo]
    high = [i for i, m in enumerate(motion) if m >= q_hi and m > q_lo]
    taken = set(low) | set(high)
    mid = [i for i in range(motion.size) if i not in taken]
    return MotionPartition(low, mid, high, float(q_lo), float(q_hi))


def motion_in_input_pixels(flow: FlowField, input_h: int, input_w: int) -> float:
    """Mean displacement length after rescaling the field's units to input
    pixels, so evaluation sees the motion exactly as the pipeline did."""
    su = input_w / flow.width
    sv = input_h / flow.height
    mag = np.hypot(flow.u.astype(np.float64) * su,
                   flow.v.astype(np.float64) * sv)
    return float(mag.mean())


def evaluate_run(preds_by_method: Mapping[str, Sequence],
                 gts: Sequence, flows: Sequence[Optional[FlowField]],
                 num_classes: int,
                 video_ids: Optional[Sequence] = None):
    """Motion-partitioned mIoU table over the labeled frames.

    All sequences are aligned: entry k of every prediction list, of gts and
    of flows belongs to the same labeled frame. Returns rows of
    (method, subset, miou). With video_ids, quantiles are computed per video
    instead of over the whole run.
    """
    n = len(gts)
    if len(flows) != n:
        raise ValueError("need one flow per labeled frame")
    for k, fl in enumerate(flows):
        if fl is None:
            raise ValueError(f"missing flow for labeled frame {k}")
    for method, preds in preds_by_method.items():
        if len(preds) != n:
            raise ValueError(f"method {method!r} has {len(preds)} masks, "
                             f"expected {n}")

    h, w = _labels(gts[0]).shape
    motions = [motion_in_input_pixels(fl, h, w) for fl in flows]

    if video_ids is None:
        part = motion_quantile_partition(motions)
        subsets = {"all": list(range(n)), "low20": part.low,
                   "mid60": part.mid, "high20": part.high}
    else:
        if len(video_ids) != n:
            raise ValueError("need one video id per labeled frame")
        subsets = {name: [] for name in SUBSETS}
        subsets["all"] = list(range(n))
        for vid in sorted(set(video_ids), key=str):
            idx = [i for i in range(n) if video_ids[i] == vid]
            part = motion_quantile_partition([motions[i] for i in idx])
            subsets["low20"] += [idx[i] for i in part.low]
            subsets["mid60"] += [idx[i] for i in part.mid]
            subsets["high20"] += [idx[i] for i in part.high]

    rows = []
    for method, preds in preds_by_method.items():
        for name in SUBSETS:
            idx = subsets[name]
            if not idx:
                rows.append((method, name, float("nan")))
                continue
            inter = np.zeros(num_classes, np.int64)
            union = np.zeros(num_classes, np.int64)
            for i in idx:
                it, un = _confusion_counts(preds[i], gts[i], num_classes)
                inter += it
                union += un
            rows.append((method, name, _iou_from_counts(inter, union)[0]))
    return rows


def report_csv(rows) -> str:
    buf = io.StringIO()
    buf.write("method,subset,miou\n")
    for method, subset, value in rows:
        buf.write(f"{method},{subset},{value:.6f}\n")
    return buf.getvalue()


def metrics_jsonl(preds_by_method, gts, flows, num_classes: int) -> str:
    """Optional per-frame dump: one JSON object per labeled frame."""
    import json

    h, w = _labels(gts[0]).shape
    lines = []
    for i, gt in enumerate(gts):
        entry = {"frame": i,
                 "motion": motion_in_input_pixels(flows[i], h, w)}
        for method, preds in preds_by_method.items():
            entry[f"miou_{method}"] = miou(preds[i], gt, num_classes)[0]
        lines.append(json.dumps(entry))
    return "\n".join(lines) + "\n"
