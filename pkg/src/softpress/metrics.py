"""Scores comparing estimated pressure images against ground truth.

Conventions: an IoU whose denominator is empty (no contact / no pressure in
either image) is 1.0, and sequence scores average the per-frame values with
equal weight per frame.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import LengthMismatch
from .pressure import DEFAULT_CONTACT_THRESHOLD, as_array, check_same_shape, contact_mask

REPORT_SCHEMA = "softpress.metrics/1"


def temporal_accuracy(gt_seq, est_seq, threshold: float = DEFAULT_CONTACT_THRESHOLD) -> float:
    """Fraction of frames whose contact/no-contact state agrees."""
    if len(gt_seq) != len(est_seq):
        raise LengthMismatch(f"{len(gt_seq)} ground-truth frames vs {len(est_seq)} estimates")
    if len(gt_seq) == 0:
        raise LengthMismatch("sequences must contain at least one frame")
    agree = sum(
        bool(contact_mask(g, threshold).any()) == bool(contact_mask(e, threshold).any())
        for g, e in zip(gt_seq, est_seq)
    )
    return agree / len(gt_seq)


def contact_iou(gt, est, threshold: float = DEFAULT_CONTACT_THRESHOLD) -> float:
    check_same_shape(gt, est)
    mg = contact_mask(gt, threshold)
    me = contact_mask(est, threshold)
    union = np.count_nonzero(mg | me)
    if union == 0:
        return 1.0
    return np.count_nonzero(mg & me) / union


def volumetric_iou(gt, est) -> float:
    """Sum of pixelwise minima over sum of pixelwise maxima."""
    check_same_shape(gt, est)
    g, e = as_array(gt), as_array(est)
    denom = np.maximum(g, e).sum()
    if denom == 0.0:
        return 1.0
    return float(np.minimum(g, e).sum() / denom)


def mae(gt, est) -> float:
    """Mean absolute error in Pa over every pixel, zero-pressure pixels included."""
    check_same_shape(gt, est)
    return float(np.mean(np.abs(as_array(gt) - as_array(est))))


@dataclass
class MetricsReport:
    temporal_accuracy: float
    contact_iou: float
    volumetric_iou: float
    mae: float
    n_frames: int
    threshold: float
    per_frame: list = field(default_factory=list, repr=False)
    schema: str = REPORT_SCHEMA
    conventions: dict = field(default_factory=lambda: {
        "empty_iou": 1.0, "frame_averaging": "macro", "mae_pixels": "all"})

    def to_dict(self, per_frame: bool = False) -> dict:
        d = asdict(self)
        if not per_frame:
            d.pop("per_frame")
        return d

    def to_json(self, per_frame: bool = False) -> str:
        return json.dumps(self.to_dict(per_frame), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["frame", "gt_contact", "est_contact", "contact_iou",
                         "volumetric_iou", "mae"])
        for row in self.per_frame:
            writer.writerow([row["frame"], int(row["gt_contact"]), int(row["est_contact"]),
                             repr(row["contact_iou"]), repr(row["volumetric_iou"]),
                             repr(row["mae"])])
        return buf.getvalue()


def evaluate_sequence(gt_seq, est_seq, threshold: float = DEFAULT_CONTACT_THRESHOLD) -> MetricsReport:
    ta = temporal_accuracy(gt_seq, est_seq, threshold)
    rows = []
    for i, (g, e) in enumerate(zip(gt_seq, est_seq)):
        rows.append({
            "frame": i,
            "gt_contact": bool(contact_mask(g, threshold).any()),
            "est_contact": bool(contact_mask(e, threshold).any()),
            "contact_iou": contact_iou(g, e, threshold),
            "volumetric_iou": volumetric_iou(g, e),
            "mae": mae(g, e),
        })
    n = len(rows)
    return MetricsReport(
        temporal_accuracy=ta,
        contact_iou=sum(r["contact_iou"] for r in rows) / n,
        volumetric_iou=sum(r["volumetric_iou"] for r in rows) / n,
        mae=sum(r["mae"] for r in rows) / n,
        n_frames=n,
        threshold=float(threshold),
        per_frame=rows,
    )
