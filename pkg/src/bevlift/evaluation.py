"""KITTI-style detection evaluation: difficulty strata, greedy matching and
interpolated average precision for BEV (AP_loc), 3D (AP_3D) and 2D boxes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .boxes import iou_2d, iou_3d, iou_bev, project_to_image
from .exceptions import ConfigError, FrameMismatchError

DIFFICULTIES = ("Easy", "Moderate", "Hard")
OVERLAP_KINDS = ("bev", "3d", "2d")
AP_MODES = ("11-point", "40-point")


@dataclass(frozen=True)
class DifficultyRule:
    min_bbox_height: float
    max_occlusion: int
    max_truncation: float

    def admits(self, gt):
        return (
            gt.bbox_height >= self.min_bbox_height
            and gt.occlusion <= self.max_occlusion
            and gt.truncation <= self.max_truncation
        )


# Constants of the official KITTI object devkit (evaluate_object.cpp).
KITTI_DIFFICULTY_RULES = {
    "Easy": DifficultyRule(40, 0, 0.15),
    "Moderate": DifficultyRule(25, 1, 0.30),
    "Hard": DifficultyRule(25, 2, 0.50),
}

# Ground truth of these classes neither counts nor penalizes.
NEIGHBOR_CLASSES = {"Car": ("Van",), "Pedestrian": ("Person_sitting",)}


@dataclass(frozen=True)
class EvalSpec:
    class_tag: str = "Car"
    iou_threshold: float = 0.7
    overlap_kind: str = "bev"
    difficulty: str = "Moderate"
    ap_mode: str = "11-point"

    def __post_init__(self):
        if not 0 < self.iou_threshold <= 1:
            raise ConfigError(f"iou_threshold must lie in (0, 1], got {self.iou_threshold}")
        if self.overlap_kind not in OVERLAP_KINDS:
            raise ConfigError(f"overlap_kind must be one of {OVERLAP_KINDS}")
        if self.difficulty not in DIFFICULTIES:
            raise ConfigError(f"difficulty must be one of {DIFFICULTIES}")
        if self.ap_mode not in AP_MODES:
            raise ConfigError(f"ap_mode must be one of {AP_MODES}")


@dataclass
class ApResult:
    ap: float
    pr_points: list = field(default_factory=list)  # (recall, precision)
    tp: int = 0
    fp: int = 0
    fn: int = 0
    ignored: int = 0
    no_ground_truth: bool = False

    @property
    def counts(self):
        return (self.tp, self.fp, self.fn, self.ignored)


@dataclass
class FrameMatch:
    outcomes: list  # per detection, input order: "TP" | "FP" | "ignored" | None (other class)
    scores: list
    n_gt: int

    @property
    def n_tp(self):
        return self.outcomes.count("TP")

    @property
    def n_fn(self):
        return self.n_gt - self.n_tp


def assign_difficulty(gt, rules=None):
    """Strictest difficulty whose thresholds ``gt`` passes, else ``"Ignored"``."""
    rules = rules or KITTI_DIFFICULTY_RULES
    if gt.class_tag == "DontCare":
        return "Ignored"
    for level in DIFFICULTIES:
        if rules[level].admits(gt):
            return level
    return "Ignored"


def _det_bbox2d(det, calib):
    if det.bbox2d is not None and det.bbox2d[2] > det.bbox2d[0] and det.bbox2d[3] > det.bbox2d[1]:
        return det.bbox2d
    if calib is None:
        return None
    return project_to_image(det.box3d, calib)


def _overlap_fn(kind, gts, calib):
    """``overlap(det, j)`` against ground truth ``gts[j]``."""
    if kind == "2d":
        def overlap_2d(det, j):
            box = _det_bbox2d(det, calib)
            return 0.0 if box is None else iou_2d(box, gts[j].bbox2d)

        return overlap_2d
    cache = {}
    iou = iou_bev if kind == "bev" else iou_3d

    def overlap_box(det, j):
        if j not in cache:
            cache[j] = gts[j].box3d(calib)
        return 0.0 if cache[j] is None else iou(det.box3d, cache[j])

    return overlap_box


def _dontcare_overlap(det_box, region):
    # Fraction of the detection's own area inside the region.
    iw = min(det_box[2], region[2]) - max(det_box[0], region[0])
    ih = min(det_box[3], region[3]) - max(det_box[1], region[1])
    area = (det_box[2] - det_box[0]) * (det_box[3] - det_box[1])
    if iw <= 0 or ih <= 0 or area <= 0:
        return 0.0
    return iw * ih / area


def split_ground_truth(gts, spec: EvalSpec, rules=None):
    """Partition ground truth into (valid, ignored, dontcare) index lists."""
    rules = rules or KITTI_DIFFICULTY_RULES
    valid, ignored, dontcare = [], [], []
    neighbors = NEIGHBOR_CLASSES.get(spec.class_tag, ())
    for j, gt in enumerate(gts):
        if gt.class_tag == "DontCare":
            dontcare.append(j)
        elif gt.class_tag == spec.class_tag:
            (valid if rules[spec.difficulty].admits(gt) else ignored).append(j)
        elif gt.class_tag in neighbors:
            ignored.append(j)
    return valid, ignored, dontcare


def match_frame(dets, gts, spec: EvalSpec, calib=None, rules=None) -> FrameMatch:
    """Greedy score-ordered matching of one frame's detections.

    Each detection of the evaluated class, by descending score (ties: input
    order), takes the unmatched valid ground truth of highest overlap at or
    above the threshold (TP). Failing that, an unmatched ignored ground truth
    (harder difficulty or neighbor class) or a DontCare region absorbs it
    (ignored); otherwise it is a false positive.
    """
    valid, ignored, dontcare = split_ground_truth(gts, spec, rules)
    overlap = _overlap_fn(spec.overlap_kind, gts, calib)
    thr = spec.iou_threshold
    outcomes = [None] * len(dets)
    order = sorted(
        (i for i, d in enumerate(dets) if d.class_tag == spec.class_tag),
        key=lambda i: -dets[i].score,
    )
    used = set()

    def best(det, pool):
        choice, best_ov = None, -1.0
        for j in pool:
            if j in used:
                continue
            ov = overlap(det, j)
            if ov >= thr and ov > best_ov:
                choice, best_ov = j, ov
        return choice

    for i in order:
        det = dets[i]
        j = best(det, valid)
        if j is not None:
            used.add(j)
            outcomes[i] = "TP"
            continue
        j = best(det, ignored)
        if j is not None:
            used.add(j)
            outcomes[i] = "ignored"
            continue
        box = _det_bbox2d(det, calib) if dontcare else None
        if box is not None and any(_dontcare_overlap(box, gts[j].bbox2d) >= thr for j in dontcare):
            outcomes[i] = "ignored"
            continue
        outcomes[i] = "FP"
    return FrameMatch(outcomes, [d.score for d in dets], len(valid))


def recall_thresholds(ap_mode):
    if ap_mode == "11-point":
        return [i / 10 for i in range(11)]
    if ap_mode == "40-point":
        return [i / 40 for i in range(1, 41)]
    raise ConfigError(f"ap_mode must be one of {AP_MODES}")


def average_precision(tp_fp_sequence, num_gt, ap_mode="11-point") -> ApResult:
    """Interpolated AP of a score-ordered TP/FP sequence.

    ``tp_fp_sequence`` holds truthy entries for true positives, in descending
    score order. AP is the mean over the recall thresholds of the highest
    precision reached at recall >= threshold (0 when never reached).
    """
    thresholds = recall_thresholds(ap_mode)
    seq = [bool(v) for v in tp_fp_sequence]
    tp = sum(seq)
    fp = len(seq) - tp
    if num_gt <= 0:
        return ApResult(0.0, [], tp, fp, 0, 0, no_ground_truth=True)
    points = []
    n_tp = 0
    for k, is_tp in enumerate(seq, start=1):
        n_tp += is_tp
        points.append((n_tp / num_gt, n_tp / k))
    # Running max of precision from the tail gives the interpolated envelope.
    envelope = [0.0] * len(points)
    running = 0.0
    for k in range(len(points) - 1, -1, -1):
        running = max(running, points[k][1])
        envelope[k] = running
    values = []
    k = 0
    for r in thresholds:
        while k < len(points) and points[k][0] < r:
            k += 1
        values.append(envelope[k] if k < len(points) else 0.0)
    ap = math.fsum(values) / len(values)
    return ApResult(ap, points, tp, fp, num_gt - tp, 0)


def evaluate(dets_by_frame, gts_by_frame, spec: EvalSpec, calibs=None, rules=None) -> ApResult:
    """Pool matches across frames by global score order and compute AP.

    Frames are visited in sorted id order; ties in score keep that order and
    then the within-frame input order.
    """
    det_ids, gt_ids = set(dets_by_frame), set(gts_by_frame)
    if det_ids != gt_ids:
        raise FrameMismatchError(gt_ids - det_ids, det_ids - gt_ids)
    calibs = calibs or {}
    pooled = []
    num_gt = 0
    n_ignored = 0
    for f_idx, fid in enumerate(sorted(gt_ids)):
        match = match_frame(dets_by_frame[fid], gts_by_frame[fid], spec, calibs.get(fid), rules)
        num_gt += match.n_gt
        for i, outcome in enumerate(match.outcomes):
            if outcome == "ignored":
                n_ignored += 1
            elif outcome is not None:
                pooled.append((-match.scores[i], f_idx, i, outcome == "TP"))
    pooled.sort(key=lambda t: t[:3])
    result = average_precision([t[3] for t in pooled], num_gt, spec.ap_mode)
    result.ignored = n_ignored
    return result


def evaluate_table(dets_by_frame, gts_by_frame, class_tag="Car", overlap_kinds=("bev", "3d"),
                   thresholds=(0.5, 0.7), difficulties=DIFFICULTIES, ap_mode="11-point",
                   calibs=None, rules=None):
    """AP for every (overlap kind, IoU threshold, difficulty) combination."""
    table = {}
    for kind in overlap_kinds:
        for thr in thresholds:
            for diff in difficulties:
                spec = EvalSpec(class_tag, thr, kind, diff, ap_mode)
                table[(kind, thr, diff)] = evaluate(dets_by_frame, gts_by_frame, spec, calibs, rules)
    return table


_KIND_LABEL = {"bev": "AP_loc", "3d": "AP_3D", "2d": "AP_2D"}


def format_report(table, title="", class_tag="Car"):
    """Aligned text table: one row per overlap kind, Easy/Moderate/Hard per IoU."""
    kinds = sorted({k for k, _, _ in table}, key=OVERLAP_KINDS.index)
    thresholds = sorted({t for _, t, _ in table})
    diffs = [d for d in DIFFICULTIES if any(d == dd for _, _, dd in table)]
    label_w = max(12, len(title))
    head1 = " " * label_w + "".join(f" | {'IoU=' + format(t, 'g'):^{9 * len(diffs) - 1}}" for t in thresholds)
    head2 = f"{title or class_tag:<{label_w}}" + "".join(
        " | " + " ".join(f"{d:>8}" for d in diffs) for _ in thresholds
    )
    lines = [head1, head2, "-" * len(head2)]
    for kind in kinds:
        row = f"{_KIND_LABEL[kind]:<{label_w}}"
        for t in thresholds:
            row += " | " + " ".join(f"{100.0 * table[(kind, t, d)].ap:8.2f}" for d in diffs)
        lines.append(row)
    return "\n".join(lines) + "\n"


def format_report_kv(table, class_tag="Car"):
    lines = []
    for (kind, thr, diff), res in sorted(table.items(), key=lambda kv: (OVERLAP_KINDS.index(kv[0][0]), kv[0][1], DIFFICULTIES.index(kv[0][2]))):
        key = f"{class_tag}.{kind}.iou{thr:g}.{diff.lower()}"
        lines.append(f"{key}.ap = {100.0 * res.ap:.4f}")
        lines.append(f"{key}.tp = {res.tp}")
        lines.append(f"{key}.fp = {res.fp}")
        lines.append(f"{key}.fn = {res.fn}")
        lines.append(f"{key}.ignored = {res.ignored}")
    return "\n".join(lines) + "\n"
