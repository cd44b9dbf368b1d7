"""Threshold-free and threshold-optimised detection metrics.

Generated is the positive class throughout.  Tie conventions matter at the
third decimal: AUROC gives tied pairs half credit (Mann-Whitney with average
ranks) and average precision treats equal scores as one threshold group.
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .embeddings import LABEL_GENERATED, LABEL_REAL


@dataclass(frozen=True)
class ScoredLabels:
    """Scores paired with boolean positives (True = generated)."""

    scores: np.ndarray
    positives: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        positives = np.asarray(self.positives, dtype=bool)
        if scores.shape != positives.shape or scores.ndim != 1:
            raise ValueError("scores and labels must be 1-D and aligned")
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores must be finite")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "positives", positives)

    @classmethod
    def from_pairs(cls, pairs):
        scores, labels = [], []
        for score, label in pairs:
            if label not in (LABEL_REAL, LABEL_GENERATED):
                raise ValueError(f"unknown label {label!r}")
            scores.append(score)
            labels.append(label == LABEL_GENERATED)
        return cls(np.array(scores, dtype=np.float64), np.array(labels, dtype=bool))

    @property
    def n_positive(self) -> int:
        return int(self.positives.sum())

    @property
    def n_negative(self) -> int:
        return int((~self.positives).sum())


def auroc(data: ScoredLabels) -> float:
    """Area under the ROC curve via average ranks; ties count half."""
    n_pos, n_neg = data.n_positive, data.n_negative
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC needs at least one sample of each class")
    ranks = rankdata(data.scores)
    rank_sum = ranks[data.positives].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def average_precision(data: ScoredLabels) -> float:
    """Step-wise area under the precision-recall curve, grouping tied scores."""
    n_pos = data.n_positive
    if n_pos == 0:
        raise ValueError("average precision needs at least one positive")
    order = np.argsort(-data.scores, kind="stable")
    sorted_scores = data.scores[order]
    sorted_pos = data.positives[order].astype(np.float64)
    # Last index of each tied group in descending order.
    boundary = np.nonzero(np.diff(sorted_scores))[0]
    ends = np.append(boundary, len(sorted_scores) - 1)
    tp = np.cumsum(sorted_pos)[ends]
    ranks = ends + 1.0
    precision = tp / ranks
    recall = tp / n_pos
    return float(np.sum(np.diff(np.concatenate(([0.0], recall))) * precision))


def best_accuracy(data: ScoredLabels) -> tuple[float, float]:
    """Best achievable accuracy over all thresholds and the achieving threshold.

    Predicts generated iff score > tau.  Candidates are midpoints between
    adjacent distinct sorted scores plus -inf/+inf sentinels; on ties the
    smallest threshold wins.
    """
    if data.scores.size == 0:
        raise ValueError("best accuracy needs at least one sample")
    n = data.scores.size
    distinct = np.unique(data.scores)
    candidates = np.concatenate(([-np.inf], (distinct[:-1] + distinct[1:]) / 2.0, [np.inf]))
    best_acc, best_tau = -1.0, -np.inf
    for tau in candidates:
        predicted = data.scores > tau
        acc = float(np.sum(predicted == data.positives)) / n
        if acc > best_acc:
            best_acc, best_tau = acc, float(tau)
    return best_acc, best_tau
