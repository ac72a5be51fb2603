"""Static renderings of grids and box overlays as 8-bit grayscale images."""

import warnings

import numpy as np
from PIL import Image, ImageDraw

from .bev import BevGrid, cell_index
from .boxes import corners_bev

SOURCE_SHADES = (255, 160, 96, 208, 128)


def to_uint8(channel):
    """Linear ``[0, 1] -> [0, 255]`` mapping; out-of-range values are clamped."""
    channel = np.asarray(channel, dtype=np.float64)
    outside = (channel < 0) | (channel > 1)
    if outside.any():
        warnings.warn(f"clamped {int(outside.sum())} values outside [0, 1]", RuntimeWarning, stacklevel=2)
    return np.floor(np.clip(channel, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def _display(grid, i):
    channel = grid.channels[i]
    if not grid.channel_semantics[i].startswith("fv_"):
        return channel
    # front-view channels carry metric values; stretch occupied cells to [0, 1]
    occupied = channel != 0
    if not occupied.any():
        return np.zeros_like(channel)
    lo, hi = float(channel[occupied].min()), float(channel[occupied].max())
    out = np.zeros(channel.shape, dtype=np.float64)
    out[occupied] = (channel[occupied] - lo) / (hi - lo) if hi > lo else 1.0
    return out


def render_channels(grid):
    """``{tag: PIL.Image}`` with one grayscale image per channel."""
    return {tag: Image.fromarray(to_uint8(_display(grid, i)), mode="L")
            for i, tag in enumerate(grid.channel_semantics)}


def box_pixels(box, config):
    """Corner pixels ``(col, row)`` of a box footprint; corners outside the grid are ``None``."""
    out = []
    for x, y in corners_bev(box):
        cell = cell_index(float(x), float(y), config)
        out.append(None if cell is None else (cell[1], cell[0]))
    return out


def _corner_pixel_unclipped(x, y, config):
    res = config.resolution
    return (np.floor((config.y_range[1] - y) / res), np.floor((config.x_range[1] - x) / res))


def render_overlay(grid, box_sources, base_channel=None):
    """Draw box footprints as 1-px outlines over one channel of a BEV grid.

    ``box_sources`` is a sequence of box lists; source ``k`` is drawn with
    shade ``SOURCE_SHADES[k % len(SOURCE_SHADES)]``.
    """
    if not isinstance(grid, BevGrid):
        raise ValueError("box overlays need a bird's-eye-view grid")
    tag = base_channel or grid.channel_semantics[0]
    image = Image.fromarray(to_uint8(grid.channel(tag)), mode="L")
    draw = ImageDraw.Draw(image)
    for k, boxes in enumerate(box_sources):
        shade = SOURCE_SHADES[k % len(SOURCE_SHADES)]
        for box in boxes:
            pts = [tuple(int(v) for v in _corner_pixel_unclipped(x, y, grid.config))
                   for x, y in corners_bev(box)]
            draw.line(pts + [pts[0]], fill=shade, width=1)
            for p in pts:
                draw.point(p, fill=shade)
    return image
