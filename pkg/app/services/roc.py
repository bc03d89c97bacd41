"""
ROC curves and AUC.

The sweep groups tied scores into one step; the area is accumulated from
integer counts so it equals the Mann-Whitney U / (n_pos * n_neg) statistic.
"""
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from ..exceptions import DegenerateDataError, ParameterError


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float


def _check_labels(labels: np.ndarray):
    labels = np.asarray(labels).astype(np.int64)
    n_pos = int(labels.sum())
    n_neg = int(labels.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DegenerateDataError("ROC needs both classes", positives=n_pos, negatives=n_neg)
    return labels, n_pos, n_neg


def roc_auc(scores, labels) -> RocCurve:
    scores = np.asarray(scores, dtype=np.float64)
    labels, n_pos, n_neg = _check_labels(labels)

    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    hits = labels[order]
    ends = np.r_[np.flatnonzero(np.diff(s)), s.size - 1]
    tps = np.r_[0, np.cumsum(hits)[ends]]
    fps = np.r_[0, ends + 1 - tps[1:]]

    twice_area = int(np.sum(np.diff(fps) * (tps[1:] + tps[:-1])))
    return RocCurve(fpr=fps / n_neg, tpr=tps / n_pos, auc=twice_area / (2.0 * n_pos * n_neg))


def auc_score(scores, labels) -> float:
    return roc_auc(scores, labels).auc


def mann_whitney_auc(scores, labels) -> float:
    """Rank-sum form with tied ranks averaged."""
    labels, n_pos, n_neg = _check_labels(labels)
    ranks = rankdata(np.asarray(scores, dtype=np.float64))
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def naive_error(labels) -> float:
    """Error of always predicting the majority class."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ParameterError("naive error of an empty example set")
    frac = float(np.mean(labels == 1))
    return min(frac, 1.0 - frac)


def write_roc(path, curve: RocCurve) -> None:
    lines = [f"# auc {curve.auc!r}", "# fpr\ttpr"]
    lines += [f"{f!r}\t{t!r}" for f, t in zip(curve.fpr.tolist(), curve.tpr.tolist())]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
