"""
Nearest-neighbors classifier on a=1 encodings.

Distances are squared Euclidean and computed exactly: features are small
integers, so float64 dot products are exact and can be rounded back to
int64. Neighbors are ranked by the composite key distance * rows + row,
which makes the lower row index win every distance tie without sorting.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Tuple, Union

import numpy as np

from .dataset import LabeledDataset, dataset_header, parse_header, read_dataset_rows, write_dataset_rows
from .errors import ModelError
from .storage import atomic_open

logger = logging.getLogger(__name__)

DEFAULT_K = 5
SWEEP_KS = (1, 3, 5, 7, 9)
DEFAULT_BLOCK = 64


@dataclass(frozen=True)
class KnnModel:
    """
    Stored training matrix; there is no learning phase.

    Attributes:
        train_matrix (ndarray): (m, 3n) integer matrix
        train_labels (ndarray): (m,) labels
        k (int): Odd number of neighbors that vote
        n (int): Degree
    """
    train_matrix: np.ndarray
    train_labels: np.ndarray
    k: int
    n: int
    metric: str = 'euclidean'

    @property
    def rows(self) -> int:
        return len(self.train_labels)


def _check_k(k: int, rows: int) -> None:
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ModelError(f"k must be a positive integer, got {k!r}")
    if k % 2 == 0:
        raise ModelError(f"k must be odd so that votes cannot tie, got {k}")
    if k > rows:
        raise ModelError(f"k={k} exceeds the {rows} training points")


def knn_fit(train: LabeledDataset, k: int = DEFAULT_K) -> KnnModel:
    """
    Store a v1 training set.

    Raises:
        ModelError: If the dataset is not v1-encoded or k is invalid
    """
    if train.encoding != 1:
        raise ModelError(f"Nearest neighbors needs the a=1 encoding, got a={train.encoding}")
    _check_k(k, len(train))
    return KnnModel(train_matrix=train.features.astype(np.int64), train_labels=train.labels.astype(np.int64),
                    k=int(k), n=train.n)


def _squared_distances(train: np.ndarray, train_norms: np.ndarray, queries: np.ndarray) -> np.ndarray:
    q = queries.astype(np.float64)
    cross = q @ train.T.astype(np.float64)
    d = (q * q).sum(axis=1)[:, None] - 2.0 * cross + train_norms[None, :]
    return np.rint(d).astype(np.int64)


def nearest_neighbors(model: KnnModel, queries: np.ndarray, k: int, block: int = DEFAULT_BLOCK) -> np.ndarray:
    """
    Row indices of the k nearest training points per query, nearest first.

    Args:
        model: Fitted model
        queries: (q, 3n) matrix
        k: Neighbors to return
        block: Queries per distance block

    Returns:
        (q, k) int64 matrix of training row indices
    """
    queries = np.atleast_2d(np.asarray(queries))
    if queries.shape[1] != model.train_matrix.shape[1]:
        raise ModelError(f"Queries must have length {model.train_matrix.shape[1]}, got {queries.shape[1]}")
    _check_k(k, model.rows)
    rows = model.rows
    train = model.train_matrix.astype(np.float64)
    train_norms = (train * train).sum(axis=1)
    row_ids = np.arange(rows, dtype=np.int64)
    result = np.empty((len(queries), k), dtype=np.int64)
    for start in range(0, len(queries), block):
        dist = _squared_distances(train, train_norms, queries[start:start + block])
        keys = dist * rows + row_ids[None, :]
        if k < rows:
            part = np.argpartition(keys, k - 1, axis=1)[:, :k]
        else:
            part = np.broadcast_to(row_ids, keys.shape).copy()
        ordered = np.take_along_axis(part, np.argsort(np.take_along_axis(keys, part, axis=1), axis=1), axis=1)
        result[start:start + block] = ordered
    return result


def knn_predict_proba(model: KnnModel, queries: np.ndarray, block: int = DEFAULT_BLOCK) -> np.ndarray:
    """Share of the k votes that go to class 1, per query."""
    neighbors = nearest_neighbors(model, queries, model.k, block)
    return model.train_labels[neighbors].sum(axis=1) / model.k


def knn_predict(model: KnnModel, x: np.ndarray, block: int = DEFAULT_BLOCK) -> Union[int, np.ndarray]:
    """
    Majority vote among the k nearest training points.

    Args:
        model: Fitted model
        x: One v1 vector of length 3n, or a (q, 3n) matrix

    Returns:
        0 or 1 for a single vector, otherwise a (q,) array
    """
    x = np.asarray(x)
    votes = knn_predict_proba(model, x, block) * model.k
    predictions = (2 * np.rint(votes).astype(np.int64) > model.k).astype(np.int64)
    return int(predictions[0]) if x.ndim == 1 else predictions


def knn_sweep(train: LabeledDataset, validation: LabeledDataset, ks: Iterable[int] = SWEEP_KS,
              block: int = DEFAULT_BLOCK) -> Tuple[int, Dict[int, float]]:
    """
    Validation accuracy for each k, computed from one neighbor search.

    Returns:
        (best k, {k: accuracy}); the smallest k wins equal accuracies
    """
    ks = sorted(int(k) for k in ks)
    model = knn_fit(train, ks[-1])
    neighbors = nearest_neighbors(model, validation.features, ks[-1], block)
    neighbor_labels = model.train_labels[neighbors]
    truth = validation.labels.astype(np.int64)
    scores: Dict[int, float] = {}
    for k in ks:
        _check_k(k, model.rows)
        predicted = (2 * neighbor_labels[:, :k].sum(axis=1) > k).astype(np.int64)
        scores[k] = float((predicted == truth).mean())
        logger.info("NearN k=%d validation accuracy %.4f", k, scores[k])
    best = max(ks, key=lambda k: (scores[k], -k))
    return best, scores


def save_knn(model: KnnModel, path: Union[str, Path]) -> None:
    """Dataset CSV preceded by a k=<k> line."""
    train = LabeledDataset(model.n, 1, model.train_matrix, model.train_labels)
    with atomic_open(path, 'w') as handle:
        handle.write(f"k={model.k}\n")
        handle.write(dataset_header(train) + "\n")
        write_dataset_rows(handle, train)


def load_knn(path: Union[str, Path]) -> KnnModel:
    path = Path(path)
    with open(path, 'r', encoding='utf-8') as handle:
        k = parse_header(handle.readline()).get('k')
        header = parse_header(handle.readline())
        train = read_dataset_rows(handle.readlines(), header['n'], header['a'], header['rows'])
    if k is None:
        raise ModelError(f"{path}: missing k=<k> line")
    return knn_fit(train, k)

