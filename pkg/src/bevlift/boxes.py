"""Oriented boxes: BEV footprints, upright 3D cuboids, lifting and overlap.

All boxes live in the sensor frame (+x forward, +y left, +z up) and rotate
about the up axis; ``yaw`` is measured from +x toward +y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError

_AREA_EPS = 1e-12


def normalize_angle(angle: float) -> float:
    """Wrap an angle to ``(-pi, pi]``."""
    a = math.remainder(float(angle), 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    return a


@dataclass(frozen=True)
class BevBox:
    center: tuple[float, float]
    size: tuple[float, float]  # (length, width)
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "size", (float(self.size[0]), float(self.size[1])))
        if not all(s > 0 and math.isfinite(s) for s in self.size):
            raise ValueError(f"box size must be positive, got {self.size}")
        object.__setattr__(self, "yaw", normalize_angle(self.yaw))

    @property
    def area(self):
        return self.size[0] * self.size[1]


@dataclass(frozen=True)
class Box3D:
    center: tuple[float, float, float]  # geometric center
    dims: tuple[float, float, float]  # (length, width, height)
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "dims", tuple(float(d) for d in self.dims))
        if len(self.center) != 3 or len(self.dims) != 3:
            raise ValueError("Box3D needs a 3-vector center and (length, width, height) dims")
        if not all(d > 0 and math.isfinite(d) for d in self.dims):
            raise ValueError(f"box dims must be positive, got {self.dims}")
        object.__setattr__(self, "yaw", normalize_angle(self.yaw))

    @property
    def bottom(self):
        return self.center[2] - 0.5 * self.dims[2]

    @property
    def top(self):
        return self.center[2] + 0.5 * self.dims[2]

    @property
    def volume(self):
        return self.dims[0] * self.dims[1] * self.dims[2]


@dataclass
class ClassHeightPrior:
    """Per-class default box height and the policy used to pick a height.

    ``policy`` is ``"plane"`` (use the default height) or ``"height-channel"``
    (read the tallest BEV cell inside the footprint, falling back to the
    default when the footprint is empty).
    """

    heights: dict = field(
        default_factory=lambda: {"Car": 1.53, "Pedestrian": 1.76, "Cyclist": 1.74}
    )
    policy: dict = field(default_factory=dict)
    fallback_height: float = 1.5

    def __post_init__(self):
        for tag, h in self.heights.items():
            if not h > 0:
                raise ConfigError(f"height prior for {tag} must be positive")
        for tag, p in self.policy.items():
            if p not in ("plane", "height-channel"):
                raise ConfigError(f"unknown height policy {p!r} for {tag}")

    def height_for(self, class_tag):
        return float(self.heights.get(class_tag, self.fallback_height))

    def policy_for(self, class_tag):
        return self.policy.get(class_tag, "plane")

    @classmethod
    def from_labels(cls, objects, **kwargs):
        """Build the prior from label-set mean heights (DontCare excluded)."""
        sums, counts = {}, {}
        for obj in objects:
            if obj.class_tag == "DontCare" or obj.dims[0] <= 0:
                continue
            sums[obj.class_tag] = sums.get(obj.class_tag, 0.0) + obj.dims[0]
            counts[obj.class_tag] = counts.get(obj.class_tag, 0) + 1
        heights = {tag: sums[tag] / counts[tag] for tag in sums}
        return cls(heights=heights, **kwargs)


def bev_from_3d(box: Box3D) -> BevBox:
    return BevBox(center=box.center[:2], size=box.dims[:2], yaw=box.yaw)


def lift_to_3d(bev: BevBox, plane, height: float) -> Box3D:
    """Stand a BEV footprint on ``plane`` with the given height.

    The bottom face is horizontal and touches the plane at the footprint
    center; on tilted ground the corners float or sink accordingly.
    """
    height = float(height)
    if not height > 0:
        raise ValueError(f"height must be positive, got {height}")
    ground = plane.height_at(*bev.center)
    return Box3D(
        center=(bev.center[0], bev.center[1], ground + 0.5 * height),
        dims=(bev.size[0], bev.size[1], height),
        yaw=bev.yaw,
    )


def corners_bev(box) -> np.ndarray:
    """Counterclockwise footprint corners as a ``(4, 2)`` array."""
    if isinstance(box, Box3D):
        box = bev_from_3d(box)
    hl, hw = 0.5 * box.size[0], 0.5 * box.size[1]
    local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.asarray(box.center)


def corners_3d(box: Box3D) -> np.ndarray:
    """``(8, 3)`` corners: bottom face CCW, then top face CCW."""
    xy = corners_bev(box)
    bottom = np.column_stack([xy, np.full(4, box.bottom)])
    top = np.column_stack([xy, np.full(4, box.top)])
    return np.vstack([bottom, top])


def polygon_area(poly) -> float:
    """Signed shoelace area (positive for counterclockwise vertices)."""
    if len(poly) < 3:
        return 0.0
    x = [p[0] for p in poly]
    y = [p[1] for p in poly]
    n = len(poly)
    return 0.5 * sum(x[i] * y[(i + 1) % n] - x[(i + 1) % n] * y[i] for i in range(n))


def _clip_convex(subject, clipper):
    # Sutherland-Hodgman; clipper must be counterclockwise.
    output = [tuple(p) for p in subject]
    n = len(clipper)
    for i in range(n):
        ax, ay = clipper[i]
        bx, by = clipper[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        inp, output = output, []
        if not inp:
            break
        prev = inp[-1]
        prev_side = ex * (prev[1] - ay) - ey * (prev[0] - ax)
        for cur in inp:
            cur_side = ex * (cur[1] - ay) - ey * (cur[0] - ax)
            if cur_side >= 0:
                if prev_side < 0:
                    t = prev_side / (prev_side - cur_side)
                    output.append((prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])))
                output.append(cur)
            elif prev_side >= 0:
                t = prev_side / (prev_side - cur_side)
                output.append((prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])))
            prev, prev_side = cur, cur_side
    return output


def intersection_area_bev(a, b) -> float:
    """Exact overlap area of two oriented rectangles (``BevBox`` or ``Box3D``)."""
    pa, pb = corners_bev(a), corners_bev(b)
    # Cheap reject on bounding circles.
    ra = 0.5 * math.hypot(*_size(a))
    rb = 0.5 * math.hypot(*_size(b))
    ca, cb = pa.mean(axis=0), pb.mean(axis=0)
    if math.hypot(*(ca - cb)) > ra + rb:
        return 0.0
    area = polygon_area(_clip_convex(pa.tolist(), pb.tolist()))
    if area <= _AREA_EPS * max(_size(a)[0] * _size(a)[1], _size(b)[0] * _size(b)[1]):
        return 0.0
    return area


def _size(box):
    return box.size if isinstance(box, BevBox) else box.dims[:2]


def iou_bev(a, b) -> float:
    inter = intersection_area_bev(a, b)
    if inter == 0.0:
        return 0.0
    sa, sb = _size(a), _size(b)
    union = sa[0] * sa[1] + sb[0] * sb[1] - inter
    return min(1.0, max(0.0, inter / union))


def iou_3d(a: Box3D, b: Box3D) -> float:
    dz = min(a.top, b.top) - max(a.bottom, b.bottom)
    if dz <= 0:
        return 0.0
    inter = intersection_area_bev(a, b) * dz
    if inter == 0.0:
        return 0.0
    union = a.volume + b.volume - inter
    return min(1.0, max(0.0, inter / union))


def iou_2d(a, b) -> float:
    """Axis-aligned IoU of ``(left, top, right, bottom)`` pixel boxes."""
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union if union > 0 else 0.0


def project_to_image(box: Box3D, calib, min_depth=0.1):
    """Axis-aligned pixel hull of the projected corners, or ``None`` when any
    corner lies within ``min_depth`` of (or behind) the camera."""
    from .pointcloud import velo_to_camera

    cam = velo_to_camera(corners_3d(box), calib)
    if np.any(cam[:, 2] <= min_depth):
        return None
    uvw = np.hstack([cam, np.ones((8, 1))]) @ np.asarray(calib.p2).T
    u = uvw[:, 0] / uvw[:, 2]
    v = uvw[:, 1] / uvw[:, 2]
    return (float(u.min()), float(v.min()), float(u.max()), float(v.max()))
