import numpy as np
import pytest

from bevlift.bev import GridConfig, cell_index, encode_birdnet
from bevlift.boxes import BevBox, corners_bev
from bevlift.render import SOURCE_SHADES, box_pixels, render_channels, render_overlay, to_uint8


def test_mapping():
    assert to_uint8(np.zeros((2, 2))).tolist() == [[0, 0], [0, 0]]
    assert to_uint8(np.array([1.0, 0.5, 0.0])).tolist() == [255, 128, 0]
    with pytest.warns(RuntimeWarning):
        assert to_uint8(np.array([1.5, -1.0])).tolist() == [255, 0]


def test_render_channels():
    grid = encode_birdnet(np.zeros((0, 4)))
    images = render_channels(grid)
    assert set(images) == {"height", "density", "intensity"}
    assert images["height"].size == (800, 704) and images["height"].getextrema() == (0, 0)


def test_overlay_corners_match_cell_index(rng):
    cfg = GridConfig()
    grid = encode_birdnet(np.zeros((0, 4)), cfg)
    for _ in range(20):
        box = BevBox((rng.uniform(10, 60), rng.uniform(-30, 30)), (rng.uniform(2, 6), rng.uniform(1, 3)),
                     rng.uniform(-3, 3))
        img = np.asarray(render_overlay(grid, [[box]]))
        expected = [cell_index(float(x), float(y), cfg) for x, y in corners_bev(box)]
        assert box_pixels(box, cfg) == [(c, r) for r, c in expected]
        for r, c in expected:
            assert img[r, c] == SOURCE_SHADES[0]


def test_overlay_sources_distinct():
    grid = encode_birdnet(np.zeros((0, 4)))
    a = BevBox((20, 10), (4, 2), 0.0)
    b = BevBox((40, -10), (4, 2), 0.5)
    img = np.asarray(render_overlay(grid, [[a], [b]]))
    assert set(np.unique(img)) == {0, SOURCE_SHADES[0], SOURCE_SHADES[1]}
