"""ROC curves, AUC, and two-fold configuration selection.

Scores are real margins of normality (larger = more normal); the positive
class is +1.  AUC is computed two independent ways, trapezoidal over the
swept curve and via the rank statistic, and the test suite holds them equal.
"""

from dataclasses import dataclass

import numpy as np

from . import trainer
from .data import SequenceBatch
from .errors import (DataError, DegenerateLabelsError, DivergenceError,
                     InsufficientDataError, NoMarginVectorError, StepFailureError)
from .seeding import FOLD_STREAM, derive_seed


@dataclass(frozen=True)
class RocCurve:
    points: np.ndarray
    thresholds: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))
        object.__setattr__(self, "thresholds", np.asarray(self.thresholds, dtype=float))
        pts = self.points
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] != self.thresholds.shape[0]:
            raise ValueError("points must be (k, 2) with matching thresholds")
        if not (np.allclose(pts[0], [0.0, 0.0]) and np.allclose(pts[-1], [1.0, 1.0])):
            raise ValueError("curve must run from (0, 0) to (1, 1)")
        if np.any(np.diff(pts, axis=0) < 0.0):
            raise ValueError("fpr and tpr must be non-decreasing")

    @property
    def fpr(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def tpr(self) -> np.ndarray:
        return self.points[:, 1]


def _check_scores_labels(scores, labels):
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel().astype(int)
    if scores.shape != labels.shape or scores.size == 0:
        raise ValueError("scores and labels must be non-empty and aligned")
    if not np.all(np.isin(labels, (-1, 1))):
        raise DataError("labels must be -1 or +1")
    if not (np.any(labels == 1) and np.any(labels == -1)):
        raise DegenerateLabelsError("both classes are needed to sweep a curve")
    return scores, labels


def roc_curve(scores, labels) -> RocCurve:
    """Threshold sweep over distinct scores descending, ties grouped."""
    scores, labels = _check_scores_labels(scores, labels)
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.size - n_pos
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    tp = np.cumsum(sorted_labels == 1)
    fp = np.cumsum(sorted_labels == -1)
    # Last index of each tie group; every group contributes one curve point.
    group_end = np.nonzero(np.diff(sorted_scores, append=np.nan) != 0.0)[0]
    fpr = np.concatenate([[0.0], fp[group_end] / n_neg])
    tpr = np.concatenate([[0.0], tp[group_end] / n_pos])
    thresholds = np.concatenate([[np.inf], sorted_scores[group_end]])
    return RocCurve(np.column_stack([fpr, tpr]), thresholds)


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the curve."""
    return float(np.trapezoid(curve.tpr, curve.fpr))


def rank_auc(scores, labels) -> float:
    """Mann-Whitney statistic: concordant plus half-tied pair fraction."""
    scores, labels = _check_scores_labels(scores, labels)
    n = scores.size
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(n)
    sorted_scores = scores[order]
    group_end = np.nonzero(np.diff(sorted_scores, append=np.nan) != 0.0)[0]
    start = 0
    for end in group_end:
        ranks[order[start:end + 1]] = 0.5 * (start + end) + 1.0
        start = end + 1
    n_pos = int(np.sum(labels == 1))
    n_neg = n - n_pos
    rank_sum = float(ranks[labels == 1].sum())
    return (rank_sum - 0.5 * n_pos * (n_pos + 1)) / (n_pos * n_neg)


def roc_to_csv(curve: RocCurve) -> str:
    lines = ["threshold,fpr,tpr"]
    for threshold, (fpr, tpr) in zip(curve.thresholds, curve.points):
        lines.append(f"{float(threshold)!r},{float(fpr)!r},{float(tpr)!r}")
    return "\n".join(lines) + "\n"


def auc_summary(scores, labels) -> dict:
    scores, labels = _check_scores_labels(scores, labels)
    return {
        "auc": auc(roc_curve(scores, labels)),
        "n_pos": int(np.sum(labels == 1)),
        "n_neg": int(np.sum(labels == -1)),
    }


def _two_folds(batch: SequenceBatch, seed: int):
    # Stratified halves: shuffle each class, deal alternately.
    pos = [i for i, it in enumerate(batch.items) if it.label == 1]
    neg = [i for i, it in enumerate(batch.items) if it.label == -1]
    if len(pos) < 2 or len(neg) < 2:
        raise InsufficientDataError(
            "two-fold selection needs at least two items of each class")
    rng = np.random.default_rng(seed)
    folds = ([], [])
    for pool in (pos, neg):
        shuffled = [pool[j] for j in rng.permutation(len(pool))]
        for k, idx in enumerate(shuffled):
            folds[k % 2].append(idx)
    return (SequenceBatch.from_items(batch.items[i] for i in sorted(folds[0])),
            SequenceBatch.from_items(batch.items[i] for i in sorted(folds[1])))


def _fold_auc(train_batch: SequenceBatch, eval_batch: SequenceBatch, cfg) -> float:
    try:
        detector = trainer.train(train_batch, cfg)
        margins = detector.margins(eval_batch)
        return auc(roc_curve(margins, [it.label for it in eval_batch.items]))
    except (DivergenceError, StepFailureError, NoMarginVectorError, ValueError):
        # A configuration that cannot finish scores as useless, not fatal.
        return 0.0


def crossval_select(batch: SequenceBatch, cfg_grid):
    """Mean two-fold AUC over the grid; ties go to the earliest entry."""
    cfg_grid = list(cfg_grid)
    if not cfg_grid:
        raise ValueError("cfg_grid must be non-empty")
    if not batch.is_fully_labeled():
        raise DataError("cross validation requires a fully labeled batch")
    fold_a, fold_b = _two_folds(batch, derive_seed(cfg_grid[0].seed, FOLD_STREAM))
    best_cfg = None
    best_mean = -np.inf
    for cfg in cfg_grid:
        mean = 0.5 * (_fold_auc(fold_a, fold_b, cfg) + _fold_auc(fold_b, fold_a, cfg))
        if mean > best_mean:
            best_cfg, best_mean = cfg, mean
    return best_cfg
