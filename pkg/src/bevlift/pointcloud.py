"""Point-cloud preprocessing: field-of-view crop, range clipping and the
LiDAR <-> rectified-camera transforms.

The filters are order-preserving row selections; the transformer classes wrap
them so they can sit in a scikit-learn ``Pipeline`` ahead of an encoder.
"""

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import CalibrationError, ConfigError
from .validation import check_cloud, check_positive

CLIP_METRICS = ("forward", "euclidean-xy")


def _check_fov(horizontal_fov):
    fov = float(horizontal_fov)
    if not 0 < fov <= 180:
        raise ConfigError(f"horizontal_fov must lie in (0, 180], got {fov}")
    return fov


def fov_mask(cloud, horizontal_fov=90.0, require_forward=True):
    cloud = check_cloud(cloud)
    half = math.radians(_check_fov(horizontal_fov)) / 2.0
    x, y = cloud[:, 0], cloud[:, 1]
    mask = np.abs(np.arctan2(y, x)) <= half
    if require_forward:
        mask &= x > 0
    return mask


def crop_to_fov(cloud, horizontal_fov=90.0, require_forward=True):
    """Keep points inside the forward horizontal cone ``|atan2(y, x)| <= fov/2``."""
    cloud = check_cloud(cloud)
    return cloud[fov_mask(cloud, horizontal_fov, require_forward)]


def range_distance(points, metric="forward"):
    """Distance used by the range clip: ``|x|`` or the planar norm."""
    points = np.asarray(points, dtype=np.float64)
    if metric == "forward":
        return np.abs(points[..., 0])
    if metric == "euclidean-xy":
        return np.hypot(points[..., 0], points[..., 1])
    raise ConfigError(f"unknown clip metric {metric!r}; expected one of {CLIP_METRICS}")


def clip_range(cloud, max_distance=25.0, metric="forward"):
    """Drop points farther than ``max_distance``; points on the threshold stay."""
    cloud = check_cloud(cloud)
    max_distance = check_positive("max_distance", max_distance)
    return cloud[range_distance(cloud, metric) <= max_distance]


def clip_boxes(boxes, max_distance=25.0, metric="forward"):
    """Companion label filter: keep boxes whose center is within range."""
    max_distance = check_positive("max_distance", max_distance)
    return [b for b in boxes if range_distance(np.asarray(b.center[:2]), metric) <= max_distance]


def _check_rectification(calib):
    r0 = np.asarray(calib.r0_rect, dtype=np.float64)
    if not np.all(np.isfinite(r0)) or np.max(np.abs(r0.T @ r0 - np.eye(3))) >= 1e-3:
        raise CalibrationError("R0_rect is not orthonormal")
    return r0


def velo_to_camera(points, calib):
    """Map sensor-frame points (``(3,)`` or ``(N, 3)``) to the rectified camera frame."""
    r0 = _check_rectification(calib)
    tr = np.asarray(calib.tr_velo_to_cam, dtype=np.float64)
    p = np.asarray(points, dtype=np.float64)[..., :3]
    return (p @ tr[:, :3].T + tr[:, 3]) @ r0.T


def camera_to_velo(points, calib):
    """Inverse of :func:`velo_to_camera`."""
    r0 = _check_rectification(calib)
    tr = np.asarray(calib.tr_velo_to_cam, dtype=np.float64)
    p = np.asarray(points, dtype=np.float64)[..., :3]
    unrect = np.linalg.solve(r0, p.reshape(-1, 3).T)
    velo = np.linalg.solve(tr[:, :3], unrect - tr[:, 3:4]).T
    return velo.reshape(p.shape)


def crop_to_image(cloud, calib, image_size=(1242, 375), min_depth=0.0):
    """Calibrated frustum crop: keep points that project inside the image."""
    cloud = check_cloud(cloud)
    cam = velo_to_camera(cloud[:, :3], calib)
    uvw = np.hstack([cam, np.ones((len(cam), 1))]) @ np.asarray(calib.p2, dtype=np.float64).T
    in_front = cam[:, 2] > min_depth
    with np.errstate(divide="ignore", invalid="ignore"):
        u = uvw[:, 0] / uvw[:, 2]
        v = uvw[:, 1] / uvw[:, 2]
    width, height = image_size
    mask = in_front & (u >= 0) & (u < width) & (v >= 0) & (v < height)
    return cloud[mask]


class FovCrop(TransformerMixin, BaseEstimator):
    """Transformer form of :func:`crop_to_fov`."""

    def __init__(self, horizontal_fov=90.0, require_forward=True):
        self.horizontal_fov = horizontal_fov
        self.require_forward = require_forward

    def fit(self, X=None, y=None):
        _check_fov(self.horizontal_fov)
        return self

    def transform(self, X):
        return crop_to_fov(X, self.horizontal_fov, self.require_forward)


class RangeClip(TransformerMixin, BaseEstimator):
    """Transformer form of :func:`clip_range`."""

    def __init__(self, max_distance=25.0, metric="forward"):
        self.max_distance = max_distance
        self.metric = metric

    def fit(self, X=None, y=None):
        check_positive("max_distance", self.max_distance)
        if self.metric not in CLIP_METRICS:
            raise ConfigError(f"unknown clip metric {self.metric!r}")
        return self

    def transform(self, X):
        return clip_range(X, self.max_distance, self.metric)
