import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from azil.targets import (DEFAULT_EDGES, PRESETS, BinConfig, bin_vector, class_weights, median_azimuth,
                          segment_zone_label, shape_target_count, zone_label)


def oracle_bits(theta, edges):
    """Brute-force interval membership: [l, r) per bin, last bin closed."""
    n = len(edges) - 1
    return np.array([edges[i] <= theta < edges[i + 1] or (i == n - 1 and theta == edges[-1]) for i in range(n)])


def bits(s):
    return np.array([c == "1" for c in s])


# --- medians -----------------------------------------------------------------


def test_median_examples():
    assert median_azimuth([25.0] * 10) == 25.0
    assert median_azimuth([90, 10, 20]) == 20
    assert median_azimuth([40.0] * 149 + [-100.0]) == 40.0
    assert median_azimuth([1, 2, 3, 4]) == 2  # lower median
    with pytest.raises(ValueError):
        median_azimuth([])


@given(st.lists(st.floats(-180, 180), min_size=1, max_size=50))
def test_median_is_order_independent(xs):
    assert median_azimuth(xs) == median_azimuth(sorted(xs, reverse=True))
    assert median_azimuth(xs) in xs


# --- bins ----------------------------------------------------------------------


def test_bin_vector_examples():
    assert np.array_equal(bin_vector(15.0), bits("000100"))
    assert np.array_equal(bin_vector(-100.0), bits("100000"))
    assert np.array_equal(bin_vector(100.0), bits("000001"))
    assert not bin_vector(150.0).any() and not bin_vector(-100.5).any()
    assert np.array_equal(bin_vector(30.0), bits("000010"))  # half-open boundary
    with pytest.raises(ValueError):
        bin_vector(np.nan)


def test_bin_config():
    assert BinConfig().edges == DEFAULT_EDGES and BinConfig().n_bins == 6
    assert [BinConfig.preset(p).n_bins for p in ("3", "6", "8")] == [3, 6, 8]
    with pytest.raises(ValueError):
        BinConfig((0.0, 0.0, 10.0))
    with pytest.raises(ValueError):
        BinConfig.preset("5")


def test_zone_label_examples():
    medians = [-80.0, -15.0, 15.0, 80.0]
    assert np.array_equal(zone_label([bin_vector(m) for m in medians]), bits("101101"))
    assert np.array_equal(zone_label([bin_vector(10.0), bin_vector(20.0)]), bits("000100"))
    assert np.array_equal(zone_label([bin_vector(-40.0)]), bin_vector(-40.0))
    with pytest.raises(ValueError):
        zone_label([np.zeros(6, bool), np.zeros(3, bool)])
    with pytest.raises(ValueError):
        zone_label([])


def test_matches_interval_oracle_on_random_layouts():
    rng = np.random.default_rng(3)
    for preset, edges in PRESETS.items():
        cfg = BinConfig(edges)
        for _ in range(1000):
            n = rng.integers(1, 5)
            tracks = rng.uniform(-110, 110, size=(n, 1)) + rng.normal(0, 4, size=(n, 150))
            # exact edge hits must be covered too
            if rng.random() < 0.2:
                tracks[0] = rng.choice(edges)
            medians = [np.sort(t)[(len(t) - 1) // 2] for t in tracks]
            expected = np.logical_or.reduce([oracle_bits(m, edges) for m in medians])
            assert np.array_equal(segment_zone_label(tracks, cfg), expected)
            for m in medians:
                assert np.array_equal(bin_vector(m, cfg), oracle_bits(m, edges))


@given(st.lists(st.integers(-400, 399), min_size=1, max_size=4), st.sampled_from([-1, 1]))
def test_one_bin_shift_moves_label_one_slot(quarters, direction):
    # uniform 25-degree bins; positions on a quarter-degree grid keep the arithmetic exact
    cfg = BinConfig.preset("8")
    thetas = [q / 4 for q in quarters]
    label = zone_label([bin_vector(t, cfg) for t in thetas])
    shifted = zone_label([bin_vector(t + direction * 25.0, cfg) for t in thetas])
    expected = np.zeros_like(label)
    if direction > 0:
        expected[1:] = label[:-1]
    else:
        expected[:-1] = label[1:]
    assert np.array_equal(shifted, expected)


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=4))
def test_popcount_bounded_by_partners(medians):
    label = zone_label([bin_vector(m) for m in medians])
    distinct = len({int(np.argmax(bin_vector(m))) for m in medians})
    assert label.sum() == distinct <= len(medians)


# --- target shaping ------------------------------------------------------------


def _vads(seconds, fr=5):
    v = np.zeros((len(seconds), 150), bool)
    for i, s in enumerate(seconds):
        v[i, : int(round(s * fr))] = True
    return v


def test_shape_target_count_examples():
    assert shape_target_count(_vads([10, 20, 5, 2]), 8) == 2
    assert shape_target_count(np.zeros((3, 150), bool), 8) == 0
    assert shape_target_count(_vads([3.0, 20.1, 4.8, 1.8]), 8) == 1
    assert shape_target_count(_vads([8.0]), 8) == 1


@given(st.lists(st.integers(0, 150), min_size=1, max_size=4), st.floats(0, 30), st.floats(0, 30))
def test_shaping_monotone_in_threshold(frames, t1, t2):
    v = _vads([f / 5 for f in frames])
    lo, hi = sorted([t1, t2])
    assert shape_target_count(v, hi) <= shape_target_count(v, lo)


# --- class weights -------------------------------------------------------------


def test_class_weight_examples():
    assert np.allclose(class_weights(np.eye(6, dtype=bool)), 6.0)
    y = np.vstack([np.eye(6, dtype=bool), np.eye(6, dtype=bool)[:1]])
    k = class_weights(y)
    assert np.isclose(k[0] * 2, k[1]) and np.allclose(k[1:], k[1])
    single = class_weights(np.array([[1, 0, 0], [1, 0, 0]], bool))
    assert single[0] == 1 and np.all(single[1:] == 1)
    with pytest.raises(ValueError):
        class_weights(np.zeros((0, 6), bool))


@given(st.integers(0, 2**31))
def test_weights_times_frequency_is_one(seed):
    y = np.random.default_rng(seed).random((40, 6)) < 0.3
    k, f = class_weights(y), y.sum(0) / max(y.sum(), 1)
    observed = f > 0
    assert np.allclose((k * f)[observed], 1.0)
