import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from azil.metrics import (bland_altman, evaluate_multiclass, evaluate_multilabel, hamming_score, logitwise_accuracy,
                          logitwise_f1, macro_f1, multiclass_accuracy, pearson, session_agreement, session_counts)

Y = np.array([[1, 0, 1, 0, 0, 0], [0, 1, 0, 0, 0, 0], [1, 1, 0, 0, 0, 1], [0, 0, 0, 1, 0, 0]], bool)
Y_HAT = np.array([[1, 0, 0, 0, 0, 0], [0, 1, 0, 0, 1, 0], [1, 0, 0, 0, 0, 1], [0, 0, 0, 1, 0, 0]], bool)

labels = st.integers(1, 30).flatmap(
    lambda n: st.tuples(*[st.lists(st.lists(st.booleans(), min_size=6, max_size=6), min_size=n, max_size=n)] * 2))


def test_hand_computed_fixture():
    assert abs(hamming_score(Y, Y_HAT) - 2 / 3) < 1e-9
    assert np.allclose(logitwise_accuracy(Y, Y_HAT), [1, 0.75, 0.75, 1, 0.75, 1], atol=1e-9)
    assert np.allclose(logitwise_f1(Y, Y_HAT), [1, 2 / 3, 0, 1, 0, 1], atol=1e-9)
    assert abs(macro_f1(Y, Y_HAT) - 11 / 18) < 1e-9
    rep = evaluate_multilabel(Y, Y_HAT)
    assert abs(rep.accuracy - 0.25) < 1e-9 and rep.support == [2, 2, 1, 1, 0, 1]


def test_hamming_examples():
    assert hamming_score([[1, 0, 1, 0, 0, 0]], [[1, 0, 0, 0, 0, 0]]) == 0.5
    assert hamming_score(Y, Y) == 1.0
    assert hamming_score([[1, 0, 0]], [[0, 1, 0]]) == 0.0
    assert hamming_score([[0, 0, 0]], [[0, 0, 0]]) == 1.0
    with pytest.raises(ValueError):
        hamming_score([[1, 0]], [[1, 0, 0]])
    with pytest.raises(ValueError):
        hamming_score(np.zeros((0, 6)), np.zeros((0, 6)))


def test_f1_degenerate_cases():
    assert np.array_equal(logitwise_f1([[0, 1]], [[0, 1]]), [1.0, 1.0])
    assert np.array_equal(logitwise_f1([[0, 1]], [[1, 1]]), [0.0, 1.0])


def test_multiclass_examples():
    assert multiclass_accuracy([0, 1, 2], [0, 1, 2]) == 1
    assert multiclass_accuracy([0, 1, 2], [1, 2, 0]) == 0
    assert multiclass_accuracy([0, 1, 2, 3], [0, 1, 2, 0]) == 0.75
    rep = evaluate_multiclass([0, 1, 2, 3], [0, 1, 2, 0], [0, 1, 2, 3])
    # per-class F1: 2/3, 1, 1, 0
    assert abs(rep.macro_f1 - (2 / 3 + 2) / 4) < 1e-9 and rep.support == {"0": 1, "1": 1, "2": 1, "3": 1}


@given(labels)
def test_score_properties(pair):
    y, y_hat = (np.array(a, bool) for a in pair)
    assert hamming_score(y, y) == 1.0
    assert hamming_score(y, y_hat) == hamming_score(y_hat, y)
    f1 = logitwise_f1(y, y_hat)
    assert f1.min() - 1e-12 <= macro_f1(y, y_hat) <= f1.max() + 1e-12
    rep = evaluate_multilabel(y, y_hat)
    for v in [rep.hamming, rep.macro_f1, rep.accuracy, *rep.logitwise_accuracy, *rep.logitwise_f1]:
        assert 0 <= v <= 1


def test_session_counts():
    assert np.array_equal(session_counts(Y[:1]), Y[0].astype(int))
    assert np.array_equal(session_counts(np.repeat(Y[:1], 5, axis=0)), 5 * Y[0].astype(int))
    assert np.array_equal(session_counts(np.zeros((0, 6)), n_bins=6), np.zeros(6))
    with pytest.raises(ValueError):
        session_counts(np.zeros((0, 6)))


@given(labels)
def test_session_counts_additive(pair):
    a, b = (np.array(x, bool) for x in pair)
    assert np.array_equal(session_counts(np.vstack([a, b])), session_counts(a) + session_counts(b))


def test_pearson_and_session_agreement():
    assert abs(pearson([1, 2, 3, 4], [2, 4, 5, 9]) - 11 / np.sqrt(130)) < 1e-9
    assert session_agreement([1, 2, 3, 0, 0, 1], [1, 2, 3, 0, 0, 1]) == (1.0, 0.0)
    assert session_agreement([1, 2, 3, 4, 5, 6], [6, 5, 4, 3, 2, 1])[0] < 0
    r, mae = session_agreement([4, 0, 2, 0, 0, 0], [3, 1, 2, 0, 0, 0])
    assert abs(mae - 1 / 3) < 1e-9
    with pytest.raises(ValueError):
        pearson([1, 1, 1], [1, 2, 3])


def test_bland_altman_fixture():
    rep = bland_altman([0, 0, 0, 0], [1, 2, 3, 4])
    sd = np.sqrt(5 / 3)
    assert abs(rep.mean_diff - 2.5) < 1e-9 and abs(rep.sd_diff - sd) < 1e-9
    assert abs(rep.loa_low - (2.5 - 1.96 * sd)) < 1e-9 and abs(rep.loa_high - (2.5 + 1.96 * sd)) < 1e-9
    assert rep.pct_within == 100.0 and abs(rep.mae - 2.5) < 1e-9 and rep.n == 4


def test_bland_altman_examples(rng):
    same = bland_altman(np.arange(10.0), np.arange(10.0))
    assert same.mean_diff == 0 and same.pct_within == 100
    off = bland_altman(np.arange(10.0), np.arange(10.0) + 3)
    assert abs(off.mean_diff - 3) < 1e-12 and off.sd_diff < 1e-12
    ref = rng.normal(size=10_000)
    gauss = bland_altman(ref, ref + rng.normal(0.2, 1.5, size=10_000))
    assert abs(gauss.pct_within - 95) <= 2
    with pytest.raises(ValueError):
        bland_altman([1.0], [2.0])


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=40), st.integers(0, 2**31))
def test_bland_altman_invariants(ref, seed):
    test = np.asarray(ref) + np.random.default_rng(seed).normal(size=len(ref))
    rep = bland_altman(ref, test)
    assert rep.loa_low <= rep.mean_diff <= rep.loa_high
    assert abs((rep.loa_high - rep.loa_low) - 2 * 1.96 * rep.sd_diff) < 1e-9
