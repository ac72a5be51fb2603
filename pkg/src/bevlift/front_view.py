"""Cylindrical front-view projection of a point cloud.

Each point maps to (azimuth, elevation) cells; a cell keeps the values of its
nearest point: height ``z``, planar distance and reflectance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .validation import cell_count, check_cloud, check_positive, check_range

FV_TAGS = ("fv_height", "fv_distance", "fv_intensity")


@dataclass(frozen=True)
class FrontViewConfig:
    azimuth_resolution: float = math.radians(0.08)
    elevation_resolution: float = math.radians(0.4)
    azimuth_span: tuple[float, float] = (math.radians(-45.0), math.radians(45.0))
    # -25.2 deg rather than -24.9 keeps the row count integral at 0.4 deg.
    elevation_span: tuple[float, float] = (math.radians(-25.2), math.radians(2.0))
    n_rows: int = field(init=False, repr=False)
    n_cols: int = field(init=False, repr=False)

    def __post_init__(self):
        az = check_range("azimuth_span", self.azimuth_span)
        el = check_range("elevation_span", self.elevation_span)
        d_az = check_positive("azimuth_resolution", self.azimuth_resolution)
        d_el = check_positive("elevation_resolution", self.elevation_resolution)
        object.__setattr__(self, "azimuth_span", az)
        object.__setattr__(self, "elevation_span", el)
        object.__setattr__(self, "azimuth_resolution", d_az)
        object.__setattr__(self, "elevation_resolution", d_el)
        object.__setattr__(self, "n_rows", cell_count("elevation_span", el[1] - el[0], d_el))
        object.__setattr__(self, "n_cols", cell_count("azimuth_span", az[1] - az[0], d_az))

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)


@dataclass
class FrontViewGrid:
    channels: np.ndarray  # (3, rows, cols) float32
    config: FrontViewConfig
    channel_semantics: tuple = FV_TAGS

    def __post_init__(self):
        self.channel_semantics = tuple(self.channel_semantics)
        if self.channels.shape != (3, *self.config.shape):
            raise ValueError(f"front view raster must be (3, {self.config.shape}), got {self.channels.shape}")

    def channel(self, tag):
        return self.channels[self.channel_semantics.index(tag)]


def front_view_indices(cloud, config: FrontViewConfig):
    """``(rows, cols, in_span)`` of every point."""
    x, y, z = cloud[:, 0], cloud[:, 1], cloud[:, 2]
    theta = np.arctan2(y, x)
    phi = np.arctan2(z, np.hypot(x, y))
    cols = np.floor((config.azimuth_span[1] - theta) / config.azimuth_resolution)
    rows = np.floor((config.elevation_span[1] - phi) / config.elevation_resolution)
    valid = (rows >= 0) & (rows < config.n_rows) & (cols >= 0) & (cols < config.n_cols)
    return rows.astype(np.int64), cols.astype(np.int64), valid


def encode_front_view(cloud, config: FrontViewConfig | None = None) -> FrontViewGrid:
    config = config or FrontViewConfig()
    cloud = check_cloud(cloud)
    rows, cols, valid = front_view_indices(cloud, config)
    idx = np.flatnonzero(valid)
    flat = rows[idx] * config.n_cols + cols[idx]
    rng = np.sqrt(np.sum(cloud[idx, :3] ** 2, axis=1))
    order = np.lexsort((idx, rng, flat))
    n = config.n_rows * config.n_cols
    channels = np.zeros((3, n), dtype=np.float32)
    if len(order):
        flat_s = flat[order]
        starts = np.flatnonzero(np.r_[True, flat_s[1:] != flat_s[:-1]])
        winner = idx[order[starts]]
        cells = flat_s[starts]
        channels[0, cells] = cloud[winner, 2]
        channels[1, cells] = np.hypot(cloud[winner, 0], cloud[winner, 1])
        channels[2, cells] = cloud[winner, 3]
    return FrontViewGrid(channels.reshape(3, *config.shape), config)


class FrontViewEncoder(TransformerMixin, BaseEstimator):
    """Stateless transformer: point cloud -> :class:`FrontViewGrid`."""

    def __init__(self, azimuth_resolution=math.radians(0.08), elevation_resolution=math.radians(0.4),
                 azimuth_span=(math.radians(-45.0), math.radians(45.0)),
                 elevation_span=(math.radians(-25.2), math.radians(2.0))):
        self.azimuth_resolution = azimuth_resolution
        self.elevation_resolution = elevation_resolution
        self.azimuth_span = azimuth_span
        self.elevation_span = elevation_span

    def fit(self, X=None, y=None):
        self.config_ = FrontViewConfig(
            self.azimuth_resolution, self.elevation_resolution,
            tuple(self.azimuth_span), tuple(self.elevation_span),
        )
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        if isinstance(X, (list, tuple)):
            return [encode_front_view(c, self.config_) for c in X]
        return encode_front_view(X, self.config_)
