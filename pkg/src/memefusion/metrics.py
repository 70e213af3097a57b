"""Binary classification metrics: accuracy and AUROC.

AUROC is computed as the Mann-Whitney rank statistic (ties get half
credit), which equals the trapezoidal area under the ROC curve. A single
class in the labels makes AUROC undefined and raises instead of silently
returning a value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EvalResult:
    accuracy: float
    auroc: float
    n: int
    threshold: float = 0.5

    def __post_init__(self) -> None:
        if self.n <= 0:
            raise ValueError("EvalResult requires n > 0")


def _check_inputs(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 1 or labels.ndim != 1:
        raise ValueError("scores and labels must be one-dimensional")
    if scores.shape[0] != labels.shape[0]:
        raise ValueError(f"length mismatch: {scores.shape[0]} scores vs {labels.shape[0]} labels")
    if scores.shape[0] == 0:
        raise ValueError("empty input")
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("labels must be 0 or 1")
    return scores, labels.astype(np.int64)


def accuracy(scores, labels, threshold: float = 0.5) -> float:
    """Fraction of records where (score >= threshold) equals the label."""
    scores, labels = _check_inputs(scores, labels)
    predicted = (scores >= threshold).astype(np.int64)
    return float(np.mean(predicted == labels))


def auroc(scores, labels) -> float:
    """Probability a random positive outscores a random negative.

    Over all positive/negative pairs: mean of [s_pos > s_neg] with ties
    counted 0.5. Requires at least one positive and one negative label.
    """
    scores, labels = _check_inputs(scores, labels)
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError(f"AUROC undefined for single-class labels (pos={n_pos}, neg={n_neg})")

    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.shape[0], dtype=np.float64)
    ranks[order] = np.arange(1, scores.shape[0] + 1, dtype=np.float64)

    # Average ranks within tie groups so tied pairs contribute exactly 0.5.
    sorted_scores = scores[order]
    i = 0
    while i < sorted_scores.shape[0]:
        j = i
        while j + 1 < sorted_scores.shape[0] and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        if j > i:
            ranks[order[i : j + 1]] = 0.5 * (i + 1 + j + 1)
        i = j + 1

    u = float(np.sum(ranks[labels == 1])) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def evaluate(scores, labels, threshold: float = 0.5) -> EvalResult:
    """Accuracy and AUROC over one prediction set."""
    scores_arr, labels_arr = _check_inputs(scores, labels)
    return EvalResult(
        accuracy=accuracy(scores_arr, labels_arr, threshold=threshold),
        auroc=auroc(scores_arr, labels_arr),
        n=int(scores_arr.shape[0]),
        threshold=threshold,
    )
