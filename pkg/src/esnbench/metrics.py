"""Cross-validation harness and classification metrics."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dataio import Dataset, fit_standardization, standardize
from .numkit import make_rng

# A trainer takes a (standardized) training Dataset and returns a scorer that
# maps a feature matrix to scores in [0, 1].
Scorer = Callable[[np.ndarray], np.ndarray]
Trainer = Callable[[Dataset], Scorer]


@dataclass(frozen=True)
class ConfusionMatrix:
    tn: int
    fp: int
    fn: int
    tp: int

    @property
    def total(self) -> int:
        return self.tn + self.fp + self.fn + self.tp

    @property
    def accuracy(self) -> float:
        return (self.tn + self.tp) / self.total

    @property
    def sensitivity(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else math.nan

    @property
    def specificity(self) -> float:
        return self.tn / (self.tn + self.fp) if self.tn + self.fp else math.nan


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    @property
    def points(self) -> list:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


@dataclass
class FoldResult:
    fold: int
    n_train: int
    n_test: int
    train_mse: float
    mse: float
    accuracy: float
    confusion: ConfusionMatrix
    info: dict = field(default_factory=dict)


@dataclass
class CvReport:
    per_fold: list
    k: int
    test_index: np.ndarray    # pooled out-of-fold row indices
    test_scores: np.ndarray   # matching scores
    test_labels: np.ndarray

    @property
    def mses(self) -> np.ndarray:
        return np.array([f.mse for f in self.per_fold])

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([f.accuracy for f in self.per_fold])

    @property
    def avg_mse(self) -> float:
        return float(np.mean(self.mses))

    @property
    def variance(self) -> float:
        m = self.mses
        return float(np.var(m, ddof=1)) if m.size > 1 else 0.0

    @property
    def std_dev(self) -> float:
        return math.sqrt(self.variance)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def avg_train_mse(self) -> float:
        return float(np.mean([f.train_mse for f in self.per_fold]))


def kfold_split(n: int, k: int, seed: int = 0) -> list[np.ndarray]:
    """Shuffle ``0..n-1`` with the seed and cut it into ``k`` near-equal folds.

    The first ``n % k`` folds get one extra index. Each fold is returned sorted.
    """
    if k < 2 or k > n:
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={n}")
    perm = make_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, k)]


def _binary(v, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=float).ravel()
    if not np.all((v == 0) | (v == 1)):
        raise ValueError(f"{what} must be 0 or 1")
    return v


def mse(labels, scores) -> float:
    y = np.asarray(labels, dtype=float).ravel()
    s = np.asarray(scores, dtype=float).ravel()
    if y.size == 0:
        raise ValueError("mse of empty input")
    if y.shape != s.shape:
        raise ValueError("labels and scores differ in length")
    return float(np.mean((y - s) ** 2))


def classify(scores, threshold: float = 0.5) -> np.ndarray:
    """Scores at or above the threshold are class 1."""
    return (np.asarray(scores, dtype=float) >= threshold).astype(float)


def accuracy(labels, predictions) -> float:
    return confusion(labels, predictions).accuracy


def confusion(labels, predictions) -> ConfusionMatrix:
    y = _binary(labels, "labels")
    p = _binary(predictions, "predictions")
    if y.shape != p.shape:
        raise ValueError("labels and predictions differ in length")
    return ConfusionMatrix(
        tn=int(np.sum((y == 0) & (p == 0))),
        fp=int(np.sum((y == 0) & (p == 1))),
        fn=int(np.sum((y == 1) & (p == 0))),
        tp=int(np.sum((y == 1) & (p == 1))),
    )


def roc(labels, scores) -> RocCurve:
    """ROC by sweeping thresholds over the distinct scores, highest first.

    Tied scores move together, giving a diagonal segment. AUC is the
    trapezoidal area under the resulting polyline.
    """
    y = _binary(labels, "labels")
    s = np.asarray(scores, dtype=float).ravel()
    if y.shape != s.shape:
        raise ValueError("labels and scores differ in length")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both classes present")

    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    # last index of each group of equal scores
    ends = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]
    tp = np.cumsum(y)[ends]
    fp = (ends + 1) - tp
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    thresholds = np.r_[np.inf, s[ends]]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(fpr, tpr, thresholds, auc)


def cross_validate(
    trainer: Trainer,
    data: Dataset,
    k: int = 10,
    seed: int = 0,
    threshold: float = 0.5,
    standardize_folds: bool = True,
    workers: int = 1,
) -> CvReport:
    """k-fold CV: fit on k-1 folds, score the held-out fold.

    With ``standardize_folds`` each training partition is z-scored with its
    own statistics and those same parameters are applied to the held-out
    fold. Results do not depend on ``workers``.
    """
    folds = kfold_split(data.n, k, seed)
    all_idx = np.arange(data.n)

    def run(i: int):
        test = folds[i]
        train = np.setdiff1d(all_idx, test, assume_unique=True)
        dtrain, dtest = data.subset_rows(train), data.subset_rows(test)
        if standardize_folds:
            params = fit_standardization(dtrain)
            dtrain, dtest = standardize(dtrain, params), standardize(dtest, params)
        scorer = trainer(dtrain)
        train_scores = np.asarray(scorer(dtrain.features), dtype=float)
        test_scores = np.asarray(scorer(dtest.features), dtype=float)
        cm = confusion(dtest.labels, classify(test_scores, threshold))
        info = dict(getattr(scorer, "info", {}) or {})
        res = FoldResult(
            fold=i,
            n_train=train.size,
            n_test=test.size,
            train_mse=mse(dtrain.labels, train_scores),
            mse=mse(dtest.labels, test_scores),
            accuracy=cm.accuracy,
            confusion=cm,
            info=info,
        )
        return res, test_scores

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(k)))
    else:
        results = [run(i) for i in range(k)]

    per_fold = [r for r, _ in results]
    index = np.concatenate(folds)
    pooled = np.concatenate([s for _, s in results])
    return CvReport(per_fold, k, index, pooled, data.labels[index])
