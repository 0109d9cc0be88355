import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.sparse.csgraph import connected_components

from azil.baselines import DbscanParams, dbscan, min_pts_for, rule_count, rule_localize, sweep_vad_threshold
from azil.targets import bin_vector


def reachability_oracle(X, eps, min_pts):
    """O(n^2) reference: core components, border points and noise."""
    d = np.sqrt(((X[:, None] - X[None]) ** 2).sum(-1))
    adj = d <= eps
    core = adj.sum(1) >= min_pts
    _, comp = connected_components(adj & core[:, None] & core[None, :], directed=False)
    return adj, core, comp


def assert_equivalent(X, params):
    res = dbscan(X, params)
    adj, core, comp = reachability_oracle(X, params.eps, params.min_pts)
    labels = res.labels
    # core points: partition identical to the core connectivity components
    mapping = {}
    for i in np.flatnonzero(core):
        assert labels[i] >= 0
        assert mapping.setdefault(comp[i], labels[i]) == labels[i]
    assert len(set(mapping.values())) == len(mapping) == res.n_clusters
    for i in np.flatnonzero(~core):
        reach = adj[i] & core
        if reach.any():
            # a border point joins the cluster of one of its core neighbours
            assert labels[i] in {labels[j] for j in np.flatnonzero(reach)}
        else:
            assert labels[i] == -1
    for c in range(res.n_clusters):
        assert np.allclose(res.centroids[c], X[labels == c].mean(0))


def test_matches_reachability_oracle_on_random_sets():
    rng = np.random.default_rng(4)
    start = time.time()
    for _ in range(200):
        n = int(rng.integers(1, 301))
        k = int(rng.integers(1, 5))
        centers = rng.uniform(-90, 90, size=(k, 2))
        X = centers[rng.integers(k, size=n)] + rng.normal(0, rng.uniform(1, 8), size=(n, 2))
        params = DbscanParams(eps=float(rng.uniform(2, 12)), min_pts=int(rng.integers(1, 15)))
        assert_equivalent(X, params)
    assert time.time() - start < 10


@given(st.integers(0, 2**31), st.integers(1, 60))
def test_permutation_invariance(seed, n):
    rng = np.random.default_rng(seed)
    X = rng.normal(0, 10, size=(n, 2))
    params = DbscanParams(eps=5.0, min_pts=3)
    a = dbscan(X, params)
    perm = rng.permutation(n)
    b = dbscan(X[perm], params)
    _, core, _ = reachability_oracle(X, 5.0, 3)
    # core memberships agree up to renaming; noise sets agree exactly
    la, lb = a.labels, np.empty(n, int)
    lb[perm] = b.labels
    assert np.array_equal(la == -1, lb == -1)
    pairs = {(x, y) for x, y, c in zip(la, lb, core) if c}
    assert len(pairs) == len({x for x, _ in pairs}) == len({y for _, y in pairs})


def test_dbscan_examples(rng):
    blob = lambda c: c + rng.normal(0, 1, size=(20, 2))
    two = dbscan(np.vstack([blob([0, 0]), blob([30, 0])]), DbscanParams(5, 10))
    assert two.n_clusters == 2
    scattered = dbscan(rng.uniform(-100, 100, size=(5, 2)), DbscanParams(5, 10))
    assert scattered.n_clusters == 0 and np.all(scattered.labels == -1)
    one = blob([12, -3])
    res = dbscan(one, DbscanParams(5, 10))
    assert res.n_clusters == 1 and np.allclose(res.centroids[0], one.mean(0))
    assert dbscan(np.zeros((0, 2))).n_clusters == 0


def test_params_validation():
    with pytest.raises(ValueError):
        DbscanParams(eps=0)
    with pytest.raises(ValueError):
        DbscanParams(min_pts=0)
    assert min_pts_for(2.0) == 10 and min_pts_for(8.0) == 40


def _dwell(parts, rng):
    az = np.concatenate([a + rng.normal(0, 1, size=n) for a, n in parts])
    return az, np.zeros_like(az)


def test_rule_localize_and_count(rng):
    az, el = _dwell([(-45, 60), (-15, 60)], rng)
    listening = np.zeros(az.size, bool)
    label = rule_localize(az, el, listening)
    assert np.array_equal(label, bin_vector(-45) | bin_vector(-15))
    assert rule_count(az, el, listening) == 2
    assert not rule_localize(az, el, np.ones(az.size, bool)).any()
    assert rule_count(az, el, np.ones(az.size, bool)) == 0


def test_sparse_idle_frames_form_no_cluster(rng):
    az, el = _dwell([(20, 100)], rng)
    az = np.concatenate([az, rng.uniform(-20, 20, 5)])
    el = np.concatenate([el, np.full(5, -70.0)])
    assert rule_count(az, el, np.zeros(az.size, bool)) == 1


def test_rule_count_is_clamped(rng):
    az, el = _dwell([(a, 20) for a in (-90, -50, -10, 30, 70)], rng)
    assert rule_count(az, el, np.zeros(az.size, bool)) == 4


@given(st.integers(0, 2**31))
def test_rule_bits_lie_in_visited_bins(seed):
    rng = np.random.default_rng(seed)
    az = rng.choice([-70, -20, 40], size=150) + rng.normal(0, 3, 150)
    el = rng.normal(0, 2, 150)
    listen = rng.random(150) < 0.7
    label = rule_localize(az, el, ~listen)
    visited = np.logical_or.reduce([bin_vector(a) for a in az[listen]]) if listen.any() else np.zeros(6, bool)
    assert not np.any(label & ~visited)


def test_threshold_sweep_rows():
    from azil.scene import SceneConfig, segment_session, simulate_session

    segs = segment_session(simulate_session(SceneConfig(duration=60, group_size=3), 1))
    rows = sweep_vad_threshold(segs, [2, 8])
    assert [r["min_pts"] for r in rows] == [10, 40]
    assert all(0 <= r["accuracy"] <= 1 and r["n_segments"] == 2 for r in rows)
