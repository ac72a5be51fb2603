"""Randomized micro-instances for evaluator-vs-reference checks."""

import math

from bevlift.boxes import BevBox, Box3D
from bevlift.kitti_io import DetectionRecord, GroundTruthObject, box3d_to_camera

GT_CLASSES = ["Car"] * 5 + ["Van", "Pedestrian", "DontCare"]


def _bbox(rng, height=None):
    left, top = rng.uniform(0, 1000), rng.uniform(0, 300)
    h = height if height is not None else float(rng.choice([20.0, 30.0, 45.0, 60.0])) + rng.uniform(0, 4)
    return (left, top, left + rng.uniform(20, 150), top + h)


def random_instance(rng, max_frames=5, max_dets=20, max_gts=10):
    """``(dets_by_frame, gts_by_frame, reference_frames)``."""
    dets_by_frame, gts_by_frame, ref = {}, {}, {}
    for k in range(int(rng.integers(1, max_frames + 1))):
        fid = f"{int(rng.integers(0, 10**6)):06d}"
        while fid in ref:
            fid = f"{int(rng.integers(0, 10**6)):06d}"
        gts, ref_gts, footprints = [], [], []
        for _ in range(int(rng.integers(0, max_gts + 1))):
            cls = str(rng.choice(GT_CLASSES))
            bbox = _bbox(rng)
            if cls == "DontCare":
                gts.append(GroundTruthObject("DontCare", -1.0, -1, -10.0, bbox, (-1.0, -1.0, -1.0),
                                             (-1000.0, -1000.0, -1000.0), -10.0))
                ref_gts.append(("DontCare", None, bbox, -1, -1.0))
                continue
            yaw = float(rng.choice([0.0, math.pi / 2]))
            box = Box3D((rng.uniform(5, 30), rng.uniform(-8, 8), -1.0),
                        (rng.uniform(3, 5), rng.uniform(1.4, 2.0), 1.5), yaw)
            occ, trunc = int(rng.integers(0, 4)), float(rng.uniform(0, 0.6))
            loc, dims, ry = box3d_to_camera(box)
            gts.append(GroundTruthObject(cls, trunc, occ, 0.0, bbox, dims, loc, ry))
            ref_gts.append((cls, BevBox(box.center[:2], box.dims[:2], yaw), bbox, occ, trunc))
            footprints.append((box, bbox))
        dets, ref_dets = [], []
        for _ in range(int(rng.integers(0, max_dets + 1))):
            cls = "Car" if rng.random() < 0.85 else "Pedestrian"
            if footprints and rng.random() < 0.6:
                src, src_bbox = footprints[int(rng.integers(len(footprints)))]
                jitter = rng.uniform(-0.8, 0.8, 2) * (rng.random() < 0.8)
                center = (src.center[0] + jitter[0], src.center[1] + jitter[1], src.center[2])
                dims, yaw = src.dims, src.yaw
            else:
                center = (rng.uniform(5, 30), rng.uniform(-8, 8), -1.0)
                dims, yaw = (rng.uniform(3, 5), rng.uniform(1.4, 2.0), 1.5), float(rng.choice([0.0, math.pi / 2]))
            dontcares = [g[2] for g in ref_gts if g[0] == "DontCare"]
            if dontcares and rng.random() < 0.5:
                r = dontcares[int(rng.integers(len(dontcares)))]
                dx, dy = rng.uniform(-30, 30, 2)
                bbox = (r[0] + dx, r[1] + dy, r[0] + dx + rng.uniform(10, 80), r[1] + dy + rng.uniform(10, 80))
            else:
                bbox = _bbox(rng)
            score = round(float(rng.uniform(0, 1)), 2)  # coarse scores create ties
            dets.append(DetectionRecord(cls, Box3D(center, dims, yaw), score, bbox2d=bbox))
            ref_dets.append((cls, BevBox(center[:2], dims[:2], yaw), score, bbox))
        dets_by_frame[fid], gts_by_frame[fid], ref[fid] = dets, gts, (ref_dets, ref_gts)
    return dets_by_frame, gts_by_frame, ref
