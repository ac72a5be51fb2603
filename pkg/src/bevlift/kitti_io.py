"""Readers and writers for the KITTI object benchmark formats.

* velodyne scans: headerless little-endian float32 ``(x, y, z, reflectance)``
* label files: 15 whitespace-separated fields per object (devkit order)
* calibration files: ``key: v1 v2 ...`` lines
* result files: the label schema plus a trailing score

Labels and results are expressed in the rectified camera frame (location is
the bottom-center of the box); :class:`DetectionRecord` holds boxes in the
sensor frame, and the adapters below convert through a :class:`Calibration`.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from .boxes import BevBox, Box3D, normalize_angle, project_to_image
from .exceptions import (
    CalibrationError,
    KittiFormatError,
    LabelParseError,
    MalformedFileError,
    MalformedPointError,
    SerializationError,
)
from .pointcloud import camera_to_velo, velo_to_camera

CLASS_TAGS = (
    "Car", "Van", "Truck", "Pedestrian", "Person_sitting", "Cyclist", "Tram", "Misc", "DontCare",
)
_RECORD = np.dtype("<f4")


# --------------------------------------------------------------------------
# velodyne


def read_velodyne(blob: bytes, return_clamped=False):
    """Decode a velodyne scan into an ``(N, 4)`` float32 array.

    Reflectance outside ``[0, 1]`` is clamped and counted; with
    ``return_clamped`` the count is returned alongside the cloud.
    """
    blob = bytes(blob)
    if len(blob) % 16:
        raise MalformedFileError(f"velodyne blob length {len(blob)} is not a multiple of 16")
    cloud = np.frombuffer(blob, dtype=_RECORD).reshape(-1, 4).astype(np.float32)
    finite = np.isfinite(cloud).all(axis=1)
    if not finite.all():
        raise MalformedPointError(int(np.flatnonzero(~finite)[0]))
    refl = cloud[:, 3]
    bad = (refl < 0) | (refl > 1)
    n_clamped = int(bad.sum())
    if n_clamped:
        cloud[:, 3] = np.clip(refl, 0.0, 1.0)
        warnings.warn(f"clamped {n_clamped} reflectance values to [0, 1]", RuntimeWarning, stacklevel=2)
    return (cloud, n_clamped) if return_clamped else cloud


def write_velodyne(cloud) -> bytes:
    cloud = np.asarray(cloud)
    if cloud.ndim != 2 or cloud.shape[1] != 4:
        raise SerializationError(f"velodyne cloud must be (N, 4), got {cloud.shape}")
    out = np.ascontiguousarray(cloud, dtype=_RECORD)
    if not np.isfinite(out).all():
        raise SerializationError("cloud contains non-finite values")
    return out.tobytes()


def load_velodyne(path):
    with open(path, "rb") as fh:
        return read_velodyne(fh.read())


# --------------------------------------------------------------------------
# labels


@dataclass
class GroundTruthObject:
    class_tag: str
    truncation: float
    occlusion: int
    alpha: float
    bbox2d: tuple[float, float, float, float]  # left, top, right, bottom
    dims: tuple[float, float, float]  # height, width, length
    location: tuple[float, float, float]  # camera frame, bottom center
    rotation_y: float

    @property
    def is_dontcare(self):
        return self.class_tag == "DontCare"

    @property
    def bbox_height(self):
        return self.bbox2d[3] - self.bbox2d[1]

    def box3d(self, calib=None):
        """Sensor-frame box, or ``None`` for DontCare regions."""
        if self.is_dontcare or min(self.dims) <= 0:
            return None
        return camera_to_box3d(self.location, self.dims, self.rotation_y, calib)


def _decode(text):
    if isinstance(text, (bytes, bytearray)):
        try:
            return bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise KittiFormatError(f"file is not UTF-8: {exc}") from exc
    return text


def _floats(fields, line_no):
    try:
        values = [float(f) for f in fields]
    except ValueError as exc:
        raise LabelParseError(line_no, f"non-numeric field ({exc})") from exc
    if not all(math.isfinite(v) for v in values):
        raise LabelParseError(line_no, "non-finite field")
    return values


def _parse_object_fields(fields, line_no):
    tag = fields[0]
    if tag not in CLASS_TAGS:
        raise LabelParseError(line_no, f"unknown class tag {tag!r}")
    v = _floats(fields[1:15], line_no)
    if v[1] != int(v[1]):
        raise LabelParseError(line_no, f"occlusion must be an integer, got {fields[2]}")
    obj = GroundTruthObject(
        class_tag=tag,
        truncation=v[0],
        occlusion=int(v[1]),
        alpha=v[2],
        bbox2d=tuple(v[3:7]),
        dims=tuple(v[7:10]),
        location=tuple(v[10:13]),
        rotation_y=v[13],
    )
    if tag != "DontCare":
        _check_object(obj, line_no)
    return obj


def _check_object(obj, line_no):
    left, top, right, bottom = obj.bbox2d
    if right < left or bottom < top:
        raise LabelParseError(line_no, "2D box has right < left or bottom < top")
    if min(obj.dims) < 0:
        raise LabelParseError(line_no, "negative dimensions")
    if not 0.0 <= obj.truncation <= 1.0:
        raise LabelParseError(line_no, f"truncation {obj.truncation} outside [0, 1]")
    if obj.occlusion not in (0, 1, 2, 3):
        raise LabelParseError(line_no, f"occlusion {obj.occlusion} not in {{0, 1, 2, 3}}")


def parse_label_file(text):
    objects = []
    for line_no, line in enumerate(_decode(text).splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 15:
            raise LabelParseError(line_no, f"expected 15 fields, got {len(fields)}")
        objects.append(_parse_object_fields(fields, line_no))
    return objects


def _fmt(values):
    out = []
    for v in values:
        v = float(v)
        if not math.isfinite(v):
            raise SerializationError(f"non-finite value {v}")
        out.append(f"{v:.6f}")
    return " ".join(out)


def format_label_file(objects) -> str:
    lines = []
    for o in objects:
        lines.append(
            f"{o.class_tag} {_fmt([o.truncation])} {int(o.occlusion)} "
            + _fmt([o.alpha, *o.bbox2d, *o.dims, *o.location, o.rotation_y])
        )
    return "".join(line + "\n" for line in lines)


def load_labels(path):
    with open(path, "rb") as fh:
        return parse_label_file(fh.read())


# --------------------------------------------------------------------------
# calibration


@dataclass
class Calibration:
    p2: np.ndarray = field(default_factory=lambda: NOMINAL_P2.copy())
    r0_rect: np.ndarray = field(default_factory=lambda: np.eye(3))
    tr_velo_to_cam: np.ndarray = field(default_factory=lambda: NOMINAL_TR.copy())

    def __post_init__(self):
        self.p2 = np.asarray(self.p2, dtype=np.float64).reshape(3, 4)
        self.r0_rect = np.asarray(self.r0_rect, dtype=np.float64).reshape(3, 3)
        self.tr_velo_to_cam = np.asarray(self.tr_velo_to_cam, dtype=np.float64).reshape(3, 4)
        for name in ("p2", "r0_rect", "tr_velo_to_cam"):
            if not np.isfinite(getattr(self, name)).all():
                raise CalibrationError(f"{name} has non-finite entries")
        r0 = self.r0_rect
        if np.max(np.abs(r0.T @ r0 - np.eye(3))) >= 1e-3:
            raise CalibrationError("R0_rect is not orthonormal")

    @classmethod
    def nominal(cls):
        """Axis permutation between sensor and camera with a KITTI-like P2."""
        return cls()


# Typical KITTI left-color intrinsics; sensor x -> camera z, y -> -x, z -> -y.
NOMINAL_P2 = np.array([
    [721.5377, 0.0, 609.5593, 0.0],
    [0.0, 721.5377, 172.854, 0.0],
    [0.0, 0.0, 1.0, 0.0],
])
NOMINAL_TR = np.array([
    [0.0, -1.0, 0.0, 0.0],
    [0.0, 0.0, -1.0, 0.0],
    [1.0, 0.0, 0.0, 0.0],
])

_CALIB_KEYS = {
    "P2": ("p2", 12, ()),
    "R0_rect": ("r0_rect", 9, ("R_rect",)),
    "Tr_velo_to_cam": ("tr_velo_to_cam", 12, ("Tr_velo_cam",)),
}


def parse_calibration(text) -> Calibration:
    entries = {}
    for line_no, line in enumerate(_decode(text).splitlines(), start=1):
        if ":" not in line:
            continue
        key, _, rest = line.partition(":")
        entries[key.strip()] = (line_no, rest.split())
    values = {}
    for key, (attr, count, aliases) in _CALIB_KEYS.items():
        found = next((k for k in (key, *aliases) if k in entries), None)
        if found is None:
            raise CalibrationError(f"missing calibration key {key!r}")
        line_no, fields = entries[found]
        if len(fields) != count:
            raise CalibrationError(f"{key} needs {count} numbers, got {len(fields)} (line {line_no})")
        try:
            values[attr] = np.array([float(f) for f in fields])
        except ValueError as exc:
            raise CalibrationError(f"{key}: non-numeric entry ({exc})") from exc
    return Calibration(**values)


def format_calibration(calib: Calibration) -> str:
    def row(m):
        return " ".join(f"{v:.12e}" for v in np.asarray(m).ravel())

    return (
        f"P2: {row(calib.p2)}\n"
        f"R0_rect: {row(calib.r0_rect)}\n"
        f"Tr_velo_to_cam: {row(calib.tr_velo_to_cam)}\n"
    )


def load_calibration(path):
    with open(path, "rb") as fh:
        return parse_calibration(fh.read())


# --------------------------------------------------------------------------
# camera-frame <-> sensor-frame box adapters


def _rotation(calib):
    return calib.r0_rect @ calib.tr_velo_to_cam[:, :3]


def box3d_to_camera(box: Box3D, calib=None):
    """``(location, dims_hwl, rotation_y)`` of a sensor-frame box."""
    calib = calib or Calibration.nominal()
    bottom = np.array([box.center[0], box.center[1], box.bottom])
    location = velo_to_camera(bottom, calib)
    heading = _rotation(calib) @ np.array([math.cos(box.yaw), math.sin(box.yaw), 0.0])
    ry = normalize_angle(math.atan2(-heading[2], heading[0]))
    length, width, height = box.dims
    return tuple(float(v) for v in location), (height, width, length), ry


def camera_to_box3d(location, dims_hwl, rotation_y, calib=None) -> Box3D:
    calib = calib or Calibration.nominal()
    height, width, length = (float(d) for d in dims_hwl)
    bottom = camera_to_velo(np.asarray(location, dtype=np.float64), calib)
    heading_cam = np.array([math.cos(rotation_y), 0.0, -math.sin(rotation_y)])
    heading = np.linalg.solve(_rotation(calib), heading_cam)
    yaw = math.atan2(heading[1], heading[0])
    return Box3D(
        center=(bottom[0], bottom[1], bottom[2] + 0.5 * height),
        dims=(length, width, height),
        yaw=yaw,
    )


def observation_angle(location, rotation_y):
    return normalize_angle(rotation_y - math.atan2(location[0], location[2]))


# --------------------------------------------------------------------------
# detections


@dataclass
class DetectionRecord:
    class_tag: str
    box3d: Box3D  # sensor frame
    score: float
    alpha: float | None = None
    bbox2d: tuple[float, float, float, float] | None = None

    def __post_init__(self):
        self.score = float(self.score)
        if not math.isfinite(self.score):
            raise ValueError("detection score must be finite")


def write_detections(dets, calib=None) -> str:
    """Serialize detections as a KITTI result file (16 fields per line).

    Missing ``alpha`` is derived from the box; a missing 2D box is the
    projection through ``calib`` (all zeros when the box is behind the camera).
    """
    calib = calib or Calibration.nominal()
    lines = []
    for det in dets:
        location, dims, ry = box3d_to_camera(det.box3d, calib)
        alpha = det.alpha if det.alpha is not None else observation_angle(location, ry)
        bbox = det.bbox2d
        if bbox is None:
            bbox = project_to_image(det.box3d, calib) or (0.0, 0.0, 0.0, 0.0)
        lines.append(
            f"{det.class_tag} -1 -1 " + _fmt([alpha, *bbox, *dims, *location, ry, det.score])
        )
    return "".join(line + "\n" for line in lines)


def parse_detections(text, calib=None):
    dets = []
    for line_no, line in enumerate(_decode(text).splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 16:
            raise LabelParseError(line_no, f"expected 16 fields, got {len(fields)}")
        v = _floats(fields[1:16], line_no)
        try:
            box = camera_to_box3d(v[10:13], v[7:10], v[13], calib)
        except ValueError as exc:
            raise LabelParseError(line_no, str(exc)) from exc
        dets.append(DetectionRecord(fields[0], box, v[14], alpha=v[2], bbox2d=tuple(v[3:7])))
    return dets


def load_detections(path, calib=None):
    with open(path, "rb") as fh:
        return parse_detections(fh.read(), calib)


# --------------------------------------------------------------------------
# dataset layout


@dataclass
class RawFrame:
    frame_id: str
    cloud: np.ndarray
    labels: list | None = None
    calib: Calibration | None = None

    def __post_init__(self):
        if not self.frame_id.isdigit():
            raise ValueError(f"frame id {self.frame_id!r} is not a non-negative integer")


def frame_paths(root, frame_id):
    return {
        "velodyne": os.path.join(root, "velodyne", f"{frame_id}.bin"),
        "label": os.path.join(root, "label_2", f"{frame_id}.txt"),
        "calib": os.path.join(root, "calib", f"{frame_id}.txt"),
    }


def load_frame(root, frame_id, with_labels=True):
    paths = frame_paths(root, frame_id)
    cloud = load_velodyne(paths["velodyne"])
    labels = load_labels(paths["label"]) if with_labels and os.path.exists(paths["label"]) else None
    calib = load_calibration(paths["calib"]) if os.path.exists(paths["calib"]) else None
    return RawFrame(frame_id, cloud, labels, calib)


def read_split(path):
    """Frame ids listed one per line (blank lines ignored)."""
    with open(path, encoding="utf-8") as fh:
        ids = [line.strip() for line in fh if line.strip()]
    for fid in ids:
        if not fid.isdigit():
            raise KittiFormatError(f"split file entry {fid!r} is not a frame id")
    return ids


# --------------------------------------------------------------------------
# BEV detections (sensor frame, before lifting)

BEV_FIELDS = 7


def write_bev_detections(dets) -> str:
    """One ``class x y length width yaw score`` line per ``(class, BevBox, score)``."""
    lines = []
    for tag, box, score in dets:
        lines.append(f"{tag} " + _fmt([*box.center, *box.size, box.yaw, score]))
    return "".join(line + "\n" for line in lines)


def parse_bev_detections(text):
    dets = []
    for line_no, line in enumerate(_decode(text).splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != BEV_FIELDS:
            raise LabelParseError(line_no, f"expected {BEV_FIELDS} fields, got {len(fields)}")
        v = _floats(fields[1:], line_no)
        try:
            box = BevBox((v[0], v[1]), (v[2], v[3]), v[4])
        except ValueError as exc:
            raise LabelParseError(line_no, str(exc)) from exc
        dets.append((fields[0], box, v[5]))
    return dets
