"""Late fusion of two detectors' outputs.

:func:`join` is the tensor-level join (mean or concatenation) for callers
holding feature maps; :func:`fuse_detections` applies the mean join at the
detection level, pairing boxes from a real-data and a generated-data detector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .boxes import Box3D, iou_bev, normalize_angle
from .exceptions import ConfigError, ShapeMismatchError
from .kitti_io import DetectionRecord

JOIN_KINDS = ("mean", "concat")


def join(a, b, kind="mean"):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if kind == "mean":
        if a.shape != b.shape:
            raise ShapeMismatchError(f"mean join needs equal shapes, got {list(a.shape)} and {list(b.shape)}")
        return (a + b) / 2.0
    if kind == "concat":
        if a.ndim == 0 or a.ndim != b.ndim or a.shape[1:] != b.shape[1:]:
            raise ShapeMismatchError(
                f"concat join needs shapes equal past the first axis, got {list(a.shape)} and {list(b.shape)}"
            )
        return np.concatenate([a, b], axis=0)
    raise ConfigError(f"join kind must be one of {JOIN_KINDS}, got {kind!r}")


@dataclass(frozen=True)
class FusionSpec:
    join_kind: str = "mean"
    match_iou: float = 0.5
    unmatched_score_scale: float = 1.0

    def __post_init__(self):
        if self.join_kind not in JOIN_KINDS:
            raise ConfigError(f"join_kind must be one of {JOIN_KINDS}")
        if not 0 < self.match_iou <= 1:
            raise ConfigError("match_iou must lie in (0, 1]")
        if not 0 < self.unmatched_score_scale <= 1:
            raise ConfigError("unmatched_score_scale must lie in (0, 1]")


def _mean_yaw(primary, secondary):
    """Circular mean of two headings; a box's heading is only defined up to
    pi, so ``secondary`` is first flipped to within a quarter turn of
    ``primary``."""
    diff = normalize_angle(secondary - primary)
    if abs(diff) > math.pi / 2:
        diff = normalize_angle(diff - math.pi)
    return normalize_angle(primary + diff / 2.0)


def _fuse_pair(a: DetectionRecord, b: DetectionRecord) -> DetectionRecord:
    lead, other = (a, b) if a.score >= b.score else (b, a)
    box = Box3D(
        center=tuple((p + q) / 2.0 for p, q in zip(a.box3d.center, b.box3d.center)),
        dims=tuple((p + q) / 2.0 for p, q in zip(a.box3d.dims, b.box3d.dims)),
        yaw=_mean_yaw(lead.box3d.yaw, other.box3d.yaw),
    )
    bbox = None
    if a.bbox2d is not None and b.bbox2d is not None:
        bbox = tuple((p + q) / 2.0 for p, q in zip(a.bbox2d, b.bbox2d))
    alpha = a.alpha if a == b else None
    return DetectionRecord(a.class_tag, box, (a.score + b.score) / 2.0, alpha=alpha, bbox2d=bbox)


def pair_detections(real, generated, match_iou=0.5):
    """Greedy cross-set pairing by descending BEV IoU (ties: real index, then
    generated index). Returns ``(pairs, unmatched_real, unmatched_generated)``."""
    candidates = []
    for i, r in enumerate(real):
        for j, g in enumerate(generated):
            if r.class_tag != g.class_tag:
                continue
            iou = iou_bev(r.box3d, g.box3d)
            if iou >= match_iou:
                candidates.append((-iou, i, j))
    candidates.sort()
    used_r, used_g, pairs = set(), set(), []
    for _, i, j in candidates:
        if i in used_r or j in used_g:
            continue
        used_r.add(i)
        used_g.add(j)
        pairs.append((i, j))
    unmatched_r = [i for i in range(len(real)) if i not in used_r]
    unmatched_g = [j for j in range(len(generated)) if j not in used_g]
    return pairs, unmatched_r, unmatched_g


def fuse_detections(real, generated, spec: FusionSpec | None = None):
    """Fuse one frame's detections from the real-data and generated-data detectors.

    Paired boxes are averaged (center, dims, score, heading); unpaired boxes
    are kept with their score scaled by ``unmatched_score_scale``. Output is
    sorted by descending score, real-set members first on ties.
    """
    spec = spec or FusionSpec()
    if spec.join_kind != "mean":
        raise ConfigError("detection-level fusion implements the mean join only")
    pairs, un_r, un_g = pair_detections(real, generated, spec.match_iou)
    keyed = []
    for i, j in pairs:
        keyed.append(((0, i), _fuse_pair(real[i], generated[j])))
    scale = spec.unmatched_score_scale
    for i in un_r:
        d = real[i]
        keyed.append(((0, i), DetectionRecord(d.class_tag, d.box3d, d.score * scale, d.alpha, d.bbox2d)))
    for j in un_g:
        d = generated[j]
        keyed.append(((1, j), DetectionRecord(d.class_tag, d.box3d, d.score * scale, d.alpha, d.bbox2d)))
    keyed.sort(key=lambda kv: (-kv[1].score, kv[0]))
    return [det for _, det in keyed]
