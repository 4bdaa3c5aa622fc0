import numpy as np
import pytest

from src.kronml.dataset import LabeledDataset
from src.kronml.errors import ModelError
from src.kronml.model_knn import (knn_fit, knn_predict, knn_predict_proba, knn_sweep, load_knn, nearest_neighbors,
                                  save_knn)


def line_dataset():
    # n=2, a=1 rows: points along the first coordinate, labels split at 1
    features = np.array([[0, 0, 0, 0, 0, 0],
                         [0, 0, 0, 0, 0, 1],
                         [1, 0, 0, 0, 0, 0],
                         [2, 0, 2, 0, 2, 0],
                         [2, 0, 2, 0, 2, 1],
                         [2, 0, 2, 0, 1, 1]])
    return LabeledDataset(2, 1, features, np.array([0, 0, 0, 1, 1, 1]))


def test_single_neighbor_reproduces_training_labels():
    data = line_dataset()
    model = knn_fit(data, 1)
    assert np.array_equal(knn_predict(model, data.features), data.labels)


def test_single_query_returns_int():
    model = knn_fit(line_dataset(), 3)
    assert knn_predict(model, np.array([2, 0, 2, 0, 2, 0])) == 1
    assert knn_predict(model, np.array([0, 0, 0, 0, 0, 0])) == 0


def test_ties_go_to_lower_row():
    features = np.array([[1, 0, 0, 0, 0, 0], [0, 0, 0, 0, 0, 1], [0, 1, 0, 0, 0, 0]])
    model = knn_fit(LabeledDataset(2, 1, features, np.array([1, 0, 0])), 1)
    neighbors = nearest_neighbors(model, np.zeros((1, 6)), 3)
    assert neighbors.tolist() == [[0, 1, 2]]
    assert knn_predict(model, np.zeros(6)) == 1


def test_probabilities_are_vote_shares():
    model = knn_fit(line_dataset(), 5)
    proba = knn_predict_proba(model, np.array([[0, 0, 0, 0, 0, 0]]))
    assert proba.tolist() == [pytest.approx(2 / 5)]


def test_blocked_search_matches_single_block(tiny_v1):
    model = knn_fit(tiny_v1, 3)
    assert np.array_equal(nearest_neighbors(model, tiny_v1.features, 3, block=5),
                          nearest_neighbors(model, tiny_v1.features, 3, block=100))


@pytest.mark.parametrize("k", [0, 2, 7, -1])
def test_invalid_k(k):
    with pytest.raises(ModelError):
        knn_fit(line_dataset(), k)


def test_rejects_other_encodings():
    data = LabeledDataset(2, 2, np.zeros((2, 6)), np.array([0, 1]))
    with pytest.raises(ModelError):
        knn_fit(data, 1)


def test_sweep_picks_smallest_best_k():
    data = line_dataset()
    best, scores = knn_sweep(data, data, ks=(1, 3, 5))
    assert scores[1] == 1.0
    assert best == 1
    assert set(scores) == {1, 3, 5}


def test_save_and_load(tmp_path):
    model = knn_fit(line_dataset(), 3)
    path = tmp_path / "nearn.model"
    save_knn(model, path)
    loaded = load_knn(path)
    assert loaded.k == 3 and loaded.n == 2
    assert np.array_equal(loaded.train_matrix, model.train_matrix)
    assert np.array_equal(loaded.train_labels, model.train_labels)


def random_v1(rows, seed, n=8, high=4):
    rng = np.random.default_rng(seed)
    return LabeledDataset(n, 1, rng.integers(0, high + 1, size=(rows, 3 * n)), rng.integers(0, 2, size=rows))


def unique_kth_distance(train, queries, k):
    d = ((queries[:, None, :].astype(np.int64) - train[None, :, :].astype(np.int64)) ** 2).sum(axis=2)
    d.sort(axis=1)
    return d[:, k - 1] < d[:, k]


def test_shuffling_training_rows_keeps_predictions():
    train, queries = random_v1(60, 1), random_v1(30, 2).features
    keep = unique_kth_distance(train.features, queries, 5)
    assert keep.any()
    shuffled = train.subset(np.random.default_rng(3).permutation(len(train)))
    before = knn_predict(knn_fit(train, 5), queries)
    after = knn_predict(knn_fit(shuffled, 5), queries)
    assert np.array_equal(before[keep], after[keep])


def test_uniform_scaling_keeps_predictions():
    train, queries = random_v1(60, 4), random_v1(30, 5)
    scaled = LabeledDataset(8, 1, train.features * 2, train.labels)
    for k in (1, 3, 5):
        expected = knn_predict(knn_fit(train, k), queries.features)
        assert np.array_equal(knn_predict(knn_fit(scaled, k), queries.features * 2), expected)
