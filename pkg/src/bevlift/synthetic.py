"""Procedurally generated KITTI-layout scenes for smoke tests and demos.

Each scene is flat ground at a fixed sensor height, a few upright cars
standing on it, roadside clutter and one DontCare region, written with the
standard ``velodyne/``, ``label_2/``, ``calib/`` layout plus a split file.
"""

import math
import os

import numpy as np

from .boxes import BevBox, Box3D, bev_from_3d, iou_bev, project_to_image
from .kitti_io import (
    Calibration,
    GroundTruthObject,
    box3d_to_camera,
    format_calibration,
    format_label_file,
    observation_angle,
    write_velodyne,
)

GROUND_Z = -1.73
CAR_DIMS = (3.9, 1.6, 1.53)


def _sample_box_surface(box: Box3D, n, rng):
    """Points on the top and the four sides of an upright box."""
    length, width, height = box.dims
    local = rng.uniform(-0.5, 0.5, size=(n, 3)) * np.array([length, width, height])
    face = rng.integers(0, 5, size=n)
    local[face == 0, 2] = 0.5 * height
    local[face == 1, 0] = 0.5 * length
    local[face == 2, 0] = -0.5 * length
    local[face == 3, 1] = 0.5 * width
    local[face == 4, 1] = -0.5 * width
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    xy = local[:, :2] @ np.array([[c, s], [-s, c]])
    return np.column_stack([xy + np.asarray(box.center[:2]), local[:, 2] + box.center[2]])


def make_scene(rng, n_cars=3, calib=None):
    """One synthetic frame: ``(cloud, boxes)`` with boxes in the sensor frame."""
    calib = calib or Calibration.nominal()
    boxes = []
    attempts = 0
    while len(boxes) < n_cars and attempts < 200:
        attempts += 1
        x = rng.uniform(8.0, 20.0)
        y = rng.uniform(-0.35, 0.35) * x
        yaw = rng.uniform(-math.pi, math.pi)
        box = Box3D((x, y, GROUND_Z + 0.5 * CAR_DIMS[2]), CAR_DIMS, yaw)
        if any(iou_bev(box, b) > 0 or _too_close(box, b) for b in boxes):
            continue
        if project_to_image(box, calib) is None:
            continue
        boxes.append(box)

    n_ground = 6000
    gx = rng.uniform(2.0, 40.0, n_ground)
    gy = rng.uniform(-1.0, 1.0, n_ground) * gx
    gz = GROUND_Z + rng.normal(0.0, 0.01, n_ground)
    parts = [np.column_stack([gx, gy, gz])]
    for box in boxes:
        parts.append(_sample_box_surface(box, 400, rng))
    n_clutter = 800
    side = rng.choice([-1.0, 1.0], n_clutter)
    parts.append(np.column_stack([
        rng.uniform(5.0, 40.0, n_clutter),
        side * rng.uniform(12.0, 16.0, n_clutter),
        rng.uniform(GROUND_Z, 2.0, n_clutter),
    ]))
    xyz = np.vstack(parts)
    refl = rng.uniform(0.0, 1.0, len(xyz))
    cloud = np.column_stack([xyz, refl]).astype(np.float32)
    return cloud, boxes


def _too_close(a, b, margin=0.5):
    ca, cb = np.asarray(a.center[:2]), np.asarray(b.center[:2])
    ra = 0.5 * math.hypot(*a.dims[:2])
    rb = 0.5 * math.hypot(*b.dims[:2])
    return np.linalg.norm(ca - cb) < ra + rb + margin


def boxes_to_labels(boxes, calib=None, class_tag="Car"):
    calib = calib or Calibration.nominal()
    labels = []
    for box in boxes:
        location, dims, ry = box3d_to_camera(box, calib)
        bbox = project_to_image(box, calib)
        labels.append(GroundTruthObject(
            class_tag=class_tag, truncation=0.0, occlusion=0,
            alpha=observation_angle(location, ry), bbox2d=bbox,
            dims=dims, location=location, rotation_y=ry,
        ))
    labels.append(GroundTruthObject(
        "DontCare", -1.0, -1, -10.0, (10.0, 150.0, 40.0, 170.0),
        (-1.0, -1.0, -1.0), (-1000.0, -1000.0, -1000.0), -10.0,
    ))
    return labels


def write_mini_dataset(root, n_frames=5, seed=0, n_cars=3):
    """Write a synthetic dataset under ``root``; returns the frame ids."""
    rng = np.random.default_rng(seed)
    calib = Calibration.nominal()
    for sub in ("velodyne", "label_2", "calib"):
        os.makedirs(os.path.join(root, sub), exist_ok=True)
    ids = []
    for k in range(n_frames):
        fid = f"{k:06d}"
        cloud, boxes = make_scene(rng, n_cars, calib)
        with open(os.path.join(root, "velodyne", fid + ".bin"), "wb") as fh:
            fh.write(write_velodyne(cloud))
        with open(os.path.join(root, "label_2", fid + ".txt"), "w", encoding="utf-8") as fh:
            fh.write(format_label_file(boxes_to_labels(boxes, calib)))
        with open(os.path.join(root, "calib", fid + ".txt"), "w", encoding="utf-8") as fh:
            fh.write(format_calibration(calib))
        ids.append(fid)
    with open(os.path.join(root, "split.txt"), "w", encoding="utf-8") as fh:
        fh.write("".join(fid + "\n" for fid in ids))
    return ids


def planted_bev_detections(labels, calib=None, jitter=0.0, rng=None, score_base=0.9):
    """BEV detections copied from ground truth, optionally shifted by
    ``jitter`` meters along both x and y with random signs."""
    rng = rng if rng is not None else np.random.default_rng(0)
    dets = []
    cars = [o for o in labels if o.class_tag != "DontCare"]
    for k, obj in enumerate(cars):
        bev = bev_from_3d(obj.box3d(calib))
        if jitter:
            sx, sy = rng.choice([-1.0, 1.0], 2)
            bev = BevBox((bev.center[0] + sx * jitter, bev.center[1] + sy * jitter), bev.size, bev.yaw)
        dets.append((obj.class_tag, bev, score_base - 0.01 * k))
    return dets

