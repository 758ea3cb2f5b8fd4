"""Nearest-neighbor classification of dynamical systems from distances.

Systems are compared through a precomputed distance matrix (one per candidate
hyperparameter setting), classified by majority-vote kNN, and evaluated with
Monte-Carlo cross-validation; K and the metric hyperparameter are selected by
an inner stratified k-fold grid search on each training split.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ParameterError, StratificationError
from .estimation import TrajectoryDataset, fit_rrr, windowed_pairs
from .kernels import linear_kernel

K_GRID = tuple(range(1, 11))
ETA_GRID = (0.01, 0.1, 0.5, 0.9, 0.99)

CLASSIFY_TIKHONOV = 1e-2


def classification_features(series: np.ndarray, dt_sample: float) -> TrajectoryDataset:
    """Windowed snapshot pairs with the standard classification settings.

    Windows are projected onto f_samp = min(100, 0.2 * n/2) coefficients of a
    context of w_len = min(50, n/2) samples, keeping short records usable.
    """
    series = np.asarray(series, dtype=float)
    n = series.shape[0]
    w_len = int(min(50, n // 2))
    f_samp = int(min(100, round((n / 2) * 0.2)))
    f_samp = min(f_samp, w_len)
    if w_len < 2 or f_samp < 1:
        raise DimensionError(f"series of {n} samples is too short to window")
    return windowed_pairs(series, w_len, dt_sample, feature_size=f_samp)


def fit_classification_operator(data: TrajectoryDataset, rank: int):
    """Reduced-rank estimate with the standard classification regularization."""
    return fit_rrr(data, linear_kernel(), rank, CLASSIFY_TIKHONOV)


@dataclass
class ClassificationReport:
    """Monte-Carlo cross-validated kNN accuracy and the per-split choices."""

    accuracies: np.ndarray
    chosen: list[dict] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies))

    def to_dict(self) -> dict:
        return {
            "mean_accuracy": self.mean,
            "std_accuracy": self.std,
            "accuracies": [float(a) for a in self.accuracies],
            "chosen": self.chosen,
        }


def _check_stratifiable(labels: np.ndarray) -> None:
    classes, counts = np.unique(labels, return_counts=True)
    small = classes[counts < 2]
    if len(small):
        raise StratificationError(
            f"classes {list(small)} have fewer than 2 members; cannot stratify"
        )


def stratified_split(labels: np.ndarray, test_frac: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Class-balanced train/test index split; every class keeps >= 1 in each part."""
    train, test = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(len(idx))]
        n_test = int(round(test_frac * len(idx)))
        n_test = min(max(n_test, 1), len(idx) - 1)
        test.extend(idx[:n_test])
        train.extend(idx[n_test:])
    return np.sort(np.array(train)), np.sort(np.array(test))


def knn_predict(
    D: np.ndarray, train_idx: np.ndarray, test_idx: np.ndarray, labels: np.ndarray, k: int
) -> np.ndarray:
    """Majority-vote kNN on a precomputed distance matrix.

    Ties are broken toward the class with the smaller summed distance among
    its voting neighbors, then toward the smaller class label, so predictions
    are deterministic.
    """
    k = min(k, len(train_idx))
    train_labels = labels[train_idx]
    preds = []
    for i in test_idx:
        drow = D[i, train_idx]
        near = np.argsort(drow, kind="stable")[:k]
        votes = train_labels[near]
        classes = np.unique(votes)
        counts = np.array([np.sum(votes == c) for c in classes])
        dist_sums = np.array([drow[near][votes == c].sum() for c in classes])
        order = np.lexsort((classes, dist_sums, -counts))
        preds.append(classes[order[0]])
    return np.array(preds)


def _folds(labels: np.ndarray, idx: np.ndarray, n_folds: int, rng) -> list[np.ndarray]:
    """Stratified folds over the index subset (classes dealt round-robin)."""
    folds = [[] for _ in range(n_folds)]
    for c in np.unique(labels[idx]):
        members = idx[labels[idx] == c]
        members = members[rng.permutation(len(members))]
        for pos, m in enumerate(members):
            folds[pos % n_folds].append(m)
    return [np.sort(np.array(f)) for f in folds if len(f)]


def _grid_search(
    distances: dict, labels: np.ndarray, train_idx: np.ndarray, n_folds: int, rng
) -> tuple:
    """Best (distance key, k) by inner stratified CV accuracy on the train set.

    Ties prefer smaller k, then earlier key insertion order.
    """
    folds = _folds(labels, train_idx, min(n_folds, len(train_idx)), rng)
    best, best_acc = None, -1.0
    for key, D in distances.items():
        for k in K_GRID:
            accs = []
            for f in folds:
                rest = np.setdiff1d(train_idx, f)
                if len(rest) == 0:
                    continue
                pred = knn_predict(D, rest, f, labels, k)
                accs.append(np.mean(pred == labels[f]))
            acc = float(np.mean(accs)) if accs else 0.0
            if acc > best_acc + 1e-12:
                best, best_acc = (key, k), acc
    return best


def knn_classify(
    distances,
    labels,
    n_iterations: int = 10,
    test_frac: float = 0.3,
    inner_folds: int = 5,
    seed: int = 0,
) -> ClassificationReport:
    """Monte-Carlo cross-validated kNN accuracy over precomputed distances.

    ``distances`` is either a single (n, n) matrix or a dict mapping a
    hyperparameter key (e.g. an eta value) to one; the inner grid search then
    selects the key jointly with K.
    """
    labels = np.asarray(labels)
    if isinstance(distances, np.ndarray):
        distances = {"default": distances}
    n = len(labels)
    for key, D in distances.items():
        if D.shape != (n, n):
            raise DimensionError(
                f"distance matrix for {key!r} has shape {D.shape}, expected {(n, n)}"
            )
    if not 0.0 < test_frac < 1.0:
        raise ParameterError("test_frac must lie in (0, 1)")
    _check_stratifiable(labels)
    accs, chosen = [], []
    for it in range(n_iterations):
        rng = np.random.Generator(np.random.Philox(seed + it))
        train_idx, test_idx = stratified_split(labels, test_frac, rng)
        key, k = _grid_search(distances, labels, train_idx, inner_folds, rng)
        pred = knn_predict(distances[key], train_idx, test_idx, labels, k)
        accs.append(float(np.mean(pred == labels[test_idx])))
        chosen.append({"param": key, "k": k})
    return ClassificationReport(np.array(accs), chosen)
