"""The ``BEVT`` tensor container shared by BEV grids, front views and
externally generated rasters.

Layout (little-endian)::

    magic   4s   b"BEVT"
    version u16  1
    C, R, W u32 x3
    res     f64
    extents f64 x6
    tags    C x (u16 byte length, UTF-8 bytes)
    payload C*R*W float32, row-major

BEV grids store ``x_min, x_max, y_min, y_max, z_min, z_max`` as extents.
Front views store the azimuth resolution in ``res`` and
``az_min, az_max, el_min, el_max, el_res, 0.0`` as extents.
"""

import struct

import numpy as np

from .bev import _SLICE_RE, DEFAULT_SLICES, BevGrid, GridConfig
from .exceptions import TensorFormatError
from .front_view import FV_TAGS, FrontViewConfig, FrontViewGrid

MAGIC = b"BEVT"
VERSION = 1
_HEADER = struct.Struct("<4sHIIId6d")
_TAG_LEN = struct.Struct("<H")


def write_tensor(grid) -> bytes:
    channels = np.ascontiguousarray(grid.channels, dtype="<f4")
    c, r, w = channels.shape
    if isinstance(grid, FrontViewGrid):
        cfg = grid.config
        res = cfg.azimuth_resolution
        extents = (*cfg.azimuth_span, *cfg.elevation_span, cfg.elevation_resolution, 0.0)
    else:
        res = grid.config.resolution
        extents = grid.config.extents
    parts = [_HEADER.pack(MAGIC, VERSION, c, r, w, res, *extents)]
    if len(grid.channel_semantics) != c:
        raise TensorFormatError("channel_semantics length does not match channel count")
    for tag in grid.channel_semantics:
        raw = tag.encode("utf-8")
        parts.append(_TAG_LEN.pack(len(raw)) + raw)
    parts.append(channels.tobytes())
    return b"".join(parts)


def read_tensor_raw(blob: bytes):
    """Decode a container without interpreting it.

    Returns ``(channels, resolution, extents, tags)``.
    """
    if len(blob) < _HEADER.size:
        raise TensorFormatError("truncated header")
    magic, version, c, r, w, res, *extents = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise TensorFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise TensorFormatError(f"unsupported version {version}")
    offset = _HEADER.size
    tags = []
    for _ in range(c):
        if offset + _TAG_LEN.size > len(blob):
            raise TensorFormatError("truncated tag list")
        (n,) = _TAG_LEN.unpack_from(blob, offset)
        offset += _TAG_LEN.size
        if offset + n > len(blob):
            raise TensorFormatError("truncated tag list")
        try:
            tags.append(blob[offset:offset + n].decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise TensorFormatError("channel tag is not UTF-8") from exc
        offset += n
    expected = 4 * c * r * w
    if len(blob) - offset != expected:
        raise TensorFormatError(f"payload has {len(blob) - offset} bytes, expected {expected}")
    channels = np.frombuffer(blob, dtype="<f4", offset=offset).reshape(c, r, w).astype(np.float32)
    return channels, res, tuple(extents), tuple(tags)


def read_tensor(blob: bytes):
    """Decode a container into a :class:`BevGrid` or :class:`FrontViewGrid`."""
    channels, res, extents, tags = read_tensor_raw(blob)
    try:
        if tags == FV_TAGS:
            config = FrontViewConfig(res, extents[4], extents[0:2], extents[2:4])
            return FrontViewGrid(channels, config, tags)
        n_slices = sum(1 for t in tags if _SLICE_RE.match(t))
        config = GridConfig(extents[0:2], extents[2:4], extents[4:6], res, n_slices or DEFAULT_SLICES)
        return BevGrid(channels, config, tags)
    except ValueError as exc:
        raise TensorFormatError(f"header inconsistent with payload: {exc}") from exc


def save_tensor(path, grid):
    with open(path, "wb") as fh:
        fh.write(write_tensor(grid))


def load_tensor(path):
    with open(path, "rb") as fh:
        return read_tensor(fh.read())
