"""Multilabel / multiclass scores, session aggregation and Bland-Altman agreement."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import List

import numpy as np


def _pair(y, y_hat):
    y = np.atleast_2d(np.asarray(y, dtype=bool))
    y_hat = np.atleast_2d(np.asarray(y_hat, dtype=bool))
    if y.shape != y_hat.shape:
        raise ValueError(f"shape mismatch {y.shape} vs {y_hat.shape}")
    if y.shape[0] == 0:
        raise ValueError("empty dataset")
    return y, y_hat


def hamming_score(y, y_hat) -> float:
    """Mean per-sample Jaccard index; two empty label sets count as 1."""
    y, y_hat = _pair(y, y_hat)
    inter = np.sum(y & y_hat, axis=1)
    union = np.sum(y | y_hat, axis=1)
    return float(np.mean(np.where(union == 0, 1.0, inter / np.maximum(union, 1))))


def logitwise_accuracy(y, y_hat) -> np.ndarray:
    y, y_hat = _pair(y, y_hat)
    return np.mean(y == y_hat, axis=0)


def _f1(tp, fp, fn):
    tp, fp, fn = (np.asarray(a, dtype=np.float64) for a in (tp, fp, fn))
    denom = 2 * tp + fp + fn
    # no positives predicted or present: perfect agreement
    return np.where(denom == 0, 1.0, 2 * tp / np.where(denom == 0, 1.0, denom))


def logitwise_f1(y, y_hat) -> np.ndarray:
    y, y_hat = _pair(y, y_hat)
    tp = np.sum(y & y_hat, axis=0)
    fp = np.sum(~y & y_hat, axis=0)
    fn = np.sum(y & ~y_hat, axis=0)
    return _f1(tp, fp, fn)


def macro_f1(y, y_hat) -> float:
    return float(np.mean(logitwise_f1(y, y_hat)))


def multiclass_accuracy(y, y_hat) -> float:
    y = np.asarray(y)
    y_hat = np.asarray(y_hat)
    if y.shape != y_hat.shape or y.size == 0:
        raise ValueError("need equal-length, non-empty label arrays")
    return float(np.mean(y == y_hat))


def multiclass_macro_f1(y, y_hat, classes=None) -> float:
    y = np.asarray(y)
    y_hat = np.asarray(y_hat)
    classes = np.unique(np.concatenate([y, y_hat])) if classes is None else np.asarray(classes)
    onehot = y[:, None] == classes[None, :]
    onehot_hat = y_hat[:, None] == classes[None, :]
    return macro_f1(onehot, onehot_hat)


@dataclass
class EvalReport:
    hamming: float
    logitwise_accuracy: List[float]
    logitwise_f1: List[float]
    macro_f1: float
    accuracy: float  # exact-match (subset) accuracy of the label vectors
    support: List[int] = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def evaluate_multilabel(y, y_hat) -> EvalReport:
    y, y_hat = _pair(y, y_hat)
    return EvalReport(
        hamming=hamming_score(y, y_hat),
        logitwise_accuracy=[float(v) for v in logitwise_accuracy(y, y_hat)],
        logitwise_f1=[float(v) for v in logitwise_f1(y, y_hat)],
        macro_f1=macro_f1(y, y_hat),
        accuracy=float(np.mean(np.all(y == y_hat, axis=1))),
        support=[int(v) for v in y.sum(axis=0)],
    )


@dataclass
class ClassReport:
    accuracy: float
    macro_f1: float
    support: dict

    def to_dict(self):
        return asdict(self)


def evaluate_multiclass(y, y_hat, classes) -> ClassReport:
    y = np.asarray(y)
    return ClassReport(
        accuracy=multiclass_accuracy(y, y_hat),
        macro_f1=multiclass_macro_f1(y, y_hat, classes),
        support={str(int(c)): int(np.sum(y == c)) for c in classes},
    )


# --- session level -----------------------------------------------------------


def session_counts(labels, n_bins: int = None) -> np.ndarray:
    labels = np.asarray(labels, dtype=bool)
    if labels.size == 0:
        if n_bins is None:
            raise ValueError("n_bins is required for an empty session")
        return np.zeros(n_bins, dtype=int)
    return np.atleast_2d(labels).sum(axis=0).astype(int)


def pearson(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.size < 2:
        raise ValueError("need two equal-length series with at least two points")
    da, db = a - a.mean(), b - b.mean()
    sa, sb = np.sqrt(np.sum(da * da)), np.sqrt(np.sum(db * db))
    if sa == 0 or sb == 0:
        raise ValueError("Pearson correlation is undefined for a constant series")
    return float(np.sum(da * db) / (sa * sb))


def session_agreement(c_gt, c_p):
    """(Pearson correlation, mean absolute error) between count vectors."""
    c_gt = np.asarray(c_gt, dtype=np.float64)
    c_p = np.asarray(c_p, dtype=np.float64)
    return pearson(c_gt, c_p), float(np.mean(np.abs(c_gt - c_p)))


# --- agreement ---------------------------------------------------------------

LOA_Z = 1.96


@dataclass
class AgreementReport:
    mean_diff: float
    sd_diff: float
    loa_low: float
    loa_high: float
    pct_within: float  # percent of differences inside the limits
    mae: float
    n: int

    def to_dict(self):
        return asdict(self)


def bland_altman(reference, test) -> AgreementReport:
    """Agreement of ``test`` against ``reference`` (differences are test - reference).

    The SD uses the sample (n - 1) estimator.
    """
    reference = np.asarray(reference, dtype=np.float64).ravel()
    test = np.asarray(test, dtype=np.float64).ravel()
    if reference.shape != test.shape or reference.size < 2:
        raise ValueError("need two aligned series with at least two samples")
    d = test - reference
    mean = float(np.mean(d))
    sd = float(np.std(d, ddof=1))
    lo, hi = mean - LOA_Z * sd, mean + LOA_Z * sd
    within = float(np.mean((d >= lo) & (d <= hi)) * 100.0)
    return AgreementReport(mean, sd, lo, hi, within, float(np.mean(np.abs(d))), int(d.size))
