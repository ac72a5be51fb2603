"""Bird's-eye-view rasterization.

Two encodings share one grid: the 3-channel (height, density, intensity)
layout used by BirdNet-style detectors and the (M + 2)-channel layout with M
per-slab height maps used by MV3D-style detectors.

Row 0 is the far edge of the forward extent and column 0 the leftmost edge,
so a rendered grid shows the vehicle at the bottom. Cells are half-open
toward the sensor: ``row = floor((x_max - x) / resolution)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ConfigError
from .validation import cell_count, check_cloud, check_positive, check_range

DENSITY_LOG_BASE = 64.0
DENSITY_MODES = ("log", "linear")
BASE_TAGS = ("height", "density", "intensity")
DEFAULT_SLICES = 8
_SLICE_RE = re.compile(r"^height_slice\((\d+)\)$")


@dataclass(frozen=True)
class GridConfig:
    x_range: tuple[float, float] = (0.0, 70.4)
    y_range: tuple[float, float] = (-40.0, 40.0)
    z_range: tuple[float, float] = (-2.73, 1.27)
    resolution: float = 0.1
    n_slices: int = DEFAULT_SLICES
    density: str = "log"
    n_rows: int = field(init=False, repr=False)
    n_cols: int = field(init=False, repr=False)

    def __post_init__(self):
        x = check_range("x_range", self.x_range)
        y = check_range("y_range", self.y_range)
        z = check_range("z_range", self.z_range)
        res = check_positive("resolution", self.resolution)
        if int(self.n_slices) < 1 or int(self.n_slices) != self.n_slices:
            raise ConfigError(f"n_slices must be a positive integer, got {self.n_slices}")
        if self.density not in DENSITY_MODES:
            raise ConfigError(f"density must be one of {DENSITY_MODES}, got {self.density!r}")
        object.__setattr__(self, "x_range", x)
        object.__setattr__(self, "y_range", y)
        object.__setattr__(self, "z_range", z)
        object.__setattr__(self, "resolution", res)
        object.__setattr__(self, "n_slices", int(self.n_slices))
        object.__setattr__(self, "n_rows", cell_count("x_range", x[1] - x[0], res))
        object.__setattr__(self, "n_cols", cell_count("y_range", y[1] - y[0], res))

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    @property
    def extents(self):
        return (*self.x_range, *self.y_range, *self.z_range)

    def slab_edges(self):
        """Lower edges of the M height slabs plus ``z_max``."""
        z_min, z_max = self.z_range
        delta = (z_max - z_min) / self.n_slices
        return [z_min + i * delta for i in range(self.n_slices)] + [z_max], delta

    def cell_center(self, row, col):
        """Sensor-frame ``(x, y)`` of a cell's center."""
        x_max, y_max = self.x_range[1], self.y_range[1]
        return x_max - (row + 0.5) * self.resolution, y_max - (col + 0.5) * self.resolution


@dataclass
class BevGrid:
    channels: np.ndarray  # (C, rows, cols) float32
    config: GridConfig
    channel_semantics: tuple

    def __post_init__(self):
        self.channel_semantics = tuple(self.channel_semantics)
        if self.channels.ndim != 3 or self.channels.shape[0] != len(self.channel_semantics):
            raise ValueError("channel count does not match channel_semantics")
        if self.channels.shape[1:] != self.config.shape:
            raise ValueError(
                f"channel raster {self.channels.shape[1:]} does not match config {self.config.shape}"
            )

    def channel(self, tag):
        return self.channels[self.channel_semantics.index(tag)]

    @property
    def occupied(self):
        """Boolean mask of cells that received at least one point."""
        return self.channel("density") > 0


def cell_indices(x, y, config: GridConfig):
    """Vectorized cell addressing: ``(rows, cols, in_extent)``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    res = config.resolution
    rows = np.floor((config.x_range[1] - x) / res)
    cols = np.floor((config.y_range[1] - y) / res)
    valid = (rows >= 0) & (rows < config.n_rows) & (cols >= 0) & (cols < config.n_cols)
    return rows.astype(np.int64), cols.astype(np.int64), valid


def cell_index(x, y, config: GridConfig | None = None):
    """``(row, col)`` of the cell containing ``(x, y)``, or ``None`` outside the grid."""
    config = config or GridConfig()
    res = config.resolution
    row = math.floor((config.x_range[1] - x) / res)
    col = math.floor((config.y_range[1] - y) / res)
    if 0 <= row < config.n_rows and 0 <= col < config.n_cols:
        return row, col
    return None


def density_values(counts, mode="log"):
    counts = np.asarray(counts, dtype=np.float64)
    if mode == "log":
        return np.minimum(1.0, np.log(counts + 1.0) / math.log(DENSITY_LOG_BASE))
    if mode == "linear":
        return np.minimum(1.0, counts / DENSITY_LOG_BASE)
    raise ConfigError(f"unknown density mode {mode!r}")


def _bin_top_points(cloud, config, keys=None):
    """Group in-grid points by cell (and optional extra key) and find each
    group's highest point, ties broken by lowest input index.

    Returns ``(flat_cell, key, top_index, count)`` per group, plus the mask of
    points that were binned.
    """
    x, y, z = cloud[:, 0], cloud[:, 1], cloud[:, 2]
    rows, cols, valid = cell_indices(x, y, config)
    z_min, z_max = config.z_range
    valid &= (z >= z_min) & (z <= z_max)
    idx = np.flatnonzero(valid)
    flat = rows[idx] * config.n_cols + cols[idx]
    key = np.zeros_like(flat) if keys is None else keys[idx]
    order = np.lexsort((idx, -z[idx], key, flat))
    flat_s, key_s = flat[order], key[order]
    if len(order) == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty, empty, valid
    new_group = np.r_[True, (flat_s[1:] != flat_s[:-1]) | (key_s[1:] != key_s[:-1])]
    starts = np.flatnonzero(new_group)
    counts = np.diff(np.r_[starts, len(order)])
    return flat_s[starts], key_s[starts], idx[order[starts]], counts, valid


def _density_intensity(cloud, config):
    cells, _, top, counts, _ = _bin_top_points(cloud, config)
    n = config.n_rows * config.n_cols
    density = np.zeros(n, dtype=np.float32)
    intensity = np.zeros(n, dtype=np.float32)
    density[cells] = density_values(counts, config.density)
    intensity[cells] = cloud[top, 3]
    return cells, top, density, intensity


def encode_birdnet(cloud, config: GridConfig | None = None) -> BevGrid:
    """3-channel grid: normalized max height, log density, top-point reflectance."""
    config = config or GridConfig()
    cloud = check_cloud(cloud)
    cells, top, density, intensity = _density_intensity(cloud, config)
    z_min, z_max = config.z_range
    height = np.zeros(config.n_rows * config.n_cols, dtype=np.float32)
    height[cells] = np.clip((cloud[top, 2] - z_min) / (z_max - z_min), 0.0, 1.0)
    channels = np.stack([height, density, intensity]).reshape(3, *config.shape)
    return BevGrid(channels, config, BASE_TAGS)


def slab_index(z, config: GridConfig):
    """Slab of each z: slab i covers ``[edge_i, edge_i+1)``, the top slab is closed."""
    edges, _ = config.slab_edges()
    return np.searchsorted(np.asarray(edges[1:-1]), np.asarray(z, dtype=np.float64), side="right")


def encode_mv3d(cloud, config: GridConfig | None = None) -> BevGrid:
    """(M + 2)-channel grid: per-slab heights (bottom-up), density, intensity.

    Each slab's height is normalized within the slab so every channel lies in
    ``[0, 1]``. Density and intensity are computed over the whole z extent,
    identically to :func:`encode_birdnet`.
    """
    config = config or GridConfig()
    cloud = check_cloud(cloud)
    m = config.n_slices
    edges, delta = config.slab_edges()
    slabs = slab_index(cloud[:, 2], config)
    cells, slab_of, top, _, _ = _bin_top_points(cloud, config, keys=slabs)
    floors = np.asarray(edges[:-1])[slab_of]
    heights = np.zeros((m, config.n_rows * config.n_cols), dtype=np.float32)
    heights[slab_of, cells] = np.clip((cloud[top, 2] - floors) / delta, 0.0, 1.0)
    _, _, density, intensity = _density_intensity(cloud, config)
    channels = np.vstack([heights, density[None], intensity[None]]).reshape(m + 2, *config.shape)
    tags = tuple(f"height_slice({i})" for i in range(m)) + ("density", "intensity")
    return BevGrid(channels, config, tags)


def _tag_rank(tag):
    match = _SLICE_RE.match(tag)
    if match:
        return (0, int(match.group(1)))
    return (BASE_TAGS.index(tag), 0)


def select_channels(grid: BevGrid, keep) -> BevGrid:
    """Restrict a grid to the requested channels, in canonical order.

    ``"height"`` selects the single height channel or every height slice.
    """
    keep = set(keep)
    if not keep:
        raise ConfigError("channel selection must not be empty")
    chosen = []
    for tag in keep:
        if tag == "height":
            matches = [t for t in grid.channel_semantics if t == "height" or _SLICE_RE.match(t)]
        elif tag in grid.channel_semantics:
            matches = [tag]
        else:
            matches = []
        if not matches:
            raise ConfigError(f"unknown channel tag {tag!r} for grid with {grid.channel_semantics}")
        chosen.extend(matches)
    chosen = sorted(set(chosen), key=_tag_rank)
    index = [grid.channel_semantics.index(t) for t in chosen]
    return BevGrid(grid.channels[index].copy(), grid.config, tuple(chosen))


class _GridEncoder(TransformerMixin, BaseEstimator):
    def _config(self, n_slices):
        return GridConfig(
            x_range=tuple(self.x_range),
            y_range=tuple(self.y_range),
            z_range=tuple(self.z_range),
            resolution=self.resolution,
            n_slices=n_slices,
            density=self.density,
        )

    def transform(self, X):
        """Encode one cloud (``(N, 4)`` array) or a list of clouds."""
        check_is_fitted(self, "config_")
        if isinstance(X, (list, tuple)):
            return [self._encode(c, self.config_) for c in X]
        return self._encode(X, self.config_)


class BirdNetEncoder(_GridEncoder):
    """Stateless transformer: point cloud -> 3-channel :class:`BevGrid`."""

    def __init__(self, x_range=(0.0, 70.4), y_range=(-40.0, 40.0), z_range=(-2.73, 1.27),
                 resolution=0.1, density="log"):
        self.x_range = x_range
        self.y_range = y_range
        self.z_range = z_range
        self.resolution = resolution
        self.density = density

    def fit(self, X=None, y=None):
        self.config_ = self._config(DEFAULT_SLICES)
        self.channel_semantics_ = BASE_TAGS
        return self

    @staticmethod
    def _encode(cloud, config):
        return encode_birdnet(cloud, config)


class MV3DEncoder(_GridEncoder):
    """Stateless transformer: point cloud -> (M + 2)-channel :class:`BevGrid`."""

    def __init__(self, x_range=(0.0, 70.4), y_range=(-40.0, 40.0), z_range=(-2.73, 1.27),
                 resolution=0.1, n_slices=8, density="log"):
        self.x_range = x_range
        self.y_range = y_range
        self.z_range = z_range
        self.resolution = resolution
        self.n_slices = n_slices
        self.density = density

    def fit(self, X=None, y=None):
        self.config_ = self._config(self.n_slices)
        self.channel_semantics_ = tuple(
            f"height_slice({i})" for i in range(self.config_.n_slices)
        ) + ("density", "intensity")
        return self

    @staticmethod
    def _encode(cloud, config):
        return encode_mv3d(cloud, config)


class ChannelSelector(TransformerMixin, BaseEstimator):
    """Transformer form of :func:`select_channels` for channel ablations."""

    def __init__(self, keep=BASE_TAGS):
        self.keep = keep

    def fit(self, X=None, y=None):
        if not self.keep:
            raise ConfigError("channel selection must not be empty")
        return self

    def transform(self, X):
        if isinstance(X, (list, tuple)):
            return [select_channels(g, self.keep) for g in X]
        return select_channels(X, self.keep)
