import math

import numpy as np
import pytest
from oracles import brute_front_view

from bevlift.exceptions import ConfigError
from bevlift.front_view import FV_TAGS, FrontViewConfig, FrontViewEncoder, encode_front_view

CFG = FrontViewConfig()


def test_default_shape():
    # 90 / 0.08 columns, (2.0 + 25.2) / 0.4 rows
    assert CFG.shape == (68, 1125)


def test_non_integral_span_rejected():
    with pytest.raises(ConfigError):
        FrontViewConfig(elevation_span=(math.radians(-24.9), math.radians(2.0)))


def test_empty():
    grid = encode_front_view(np.zeros((0, 4)))
    assert grid.channels.shape == (3, 68, 1125) and not grid.channels.any()


def test_on_axis_point():
    grid = encode_front_view(np.array([[10.0, 0.0, 0.0, 1.0]]))
    col = math.floor(math.radians(45.0) / math.radians(0.08))
    row = math.floor(math.radians(2.0) / math.radians(0.4))
    assert (row, col) == (5, 562)
    assert np.argwhere(grid.channels.any(axis=0)).tolist() == [[row, col]]
    assert grid.channel("fv_height")[row, col] == 0.0
    assert grid.channel("fv_distance")[row, col] == 10.0
    assert grid.channel("fv_intensity")[row, col] == 1.0


def test_nearest_point_wins():
    cloud = np.array([[9.0, 0.0, 0.0, 0.2], [5.0, 0.0, 0.0, 0.7]])
    grid = encode_front_view(cloud)
    assert grid.channel("fv_distance").max() == 5.0
    assert grid.channel("fv_intensity").max() == np.float32(0.7)


def _cloud(rng, n):
    az = rng.uniform(-math.radians(50), math.radians(50), n)
    el = rng.uniform(-math.radians(27), math.radians(4), n)
    r = rng.uniform(2, 60, n)
    # clusters of near-identical directions to fill shared cells
    if n:
        az[: n // 3] = az[0] + rng.uniform(0, 1e-3, n // 3)
        el[: n // 3] = el[0]
    return np.column_stack([r * np.cos(el) * np.cos(az), r * np.cos(el) * np.sin(az), r * np.sin(el),
                            rng.uniform(0, 1, n)])


def test_matches_brute_force(rng):
    for _ in range(100):
        cloud = _cloud(rng, int(rng.integers(0, 100)))
        np.testing.assert_array_equal(encode_front_view(cloud).channels, brute_front_view(cloud, CFG))


def test_permutation_invariance_and_locality(rng):
    for _ in range(30):
        cloud = _cloud(rng, 80)
        grid = encode_front_view(cloud)
        assert np.array_equal(grid.channels, encode_front_view(cloud[rng.permutation(80)]).channels)
        assert grid.channel("fv_distance").min() >= 0
        more = encode_front_view(np.vstack([cloud, _cloud(rng, 1)]))
        assert all(np.count_nonzero(ch) <= 1 for ch in grid.channels != more.channels)


def test_transformer():
    enc = FrontViewEncoder().fit()
    out = enc.transform(np.array([[10.0, 0.0, 0.0, 1.0]]))
    assert out.channel_semantics == FV_TAGS
