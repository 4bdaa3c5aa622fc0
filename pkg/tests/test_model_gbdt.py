import numpy as np
import pytest

from src.kronml.dataset import LabeledDataset
from src.kronml.errors import ModelError
from src.kronml.model_gbdt import (GbdtConfig, auc, bin_features, fit_bin_edges, gbdt_fit, gbdt_predict,
                                   gbdt_predict_proba, load_gbdt, save_gbdt)

SMALL = dict(num_iterations=40, learning_rate=0.1, min_data_in_leaf=5, num_leaves=8,
             feature_fraction=1.0, bagging_fraction=1.0)


def noisy(rows=200, seed=0, n=10):
    rng = np.random.default_rng(seed)
    features = rng.integers(0, 5, size=(rows, 3 * n))
    signal = features[:, 0] + features[:, 1] + rng.integers(0, 3, size=rows)
    labels = (signal > 5).astype(np.int64)
    return LabeledDataset(n, 1, features, labels)


def separable(rows=120, seed=1):
    rng = np.random.default_rng(seed)
    features = rng.integers(0, 3, size=(rows, 6))
    return LabeledDataset(2, 1, features, (features[:, 0] == 2).astype(np.int64))


def test_separable_data_is_ranked_perfectly():
    data = separable()
    model, history = gbdt_fit(data, config=GbdtConfig(**SMALL))
    scores = gbdt_predict_proba(model, data.features)
    assert auc(scores, data.labels) == 1.0
    assert np.array_equal(gbdt_predict(model, data.features), data.labels)
    assert history.best_iteration == len(model.trees) - 1 == 39


def test_constant_labels_never_split():
    data = LabeledDataset(2, 1, separable().features, np.ones(120, dtype=np.int64))
    model, _ = gbdt_fit(data, config=GbdtConfig(**SMALL))
    assert all(tree.num_leaves == 1 for tree in model.trees)
    assert gbdt_predict(model, data.features).tolist() == [1] * 120


def test_training_loss_does_not_increase_without_sampling():
    config = GbdtConfig(**dict(SMALL, learning_rate=0.05))
    _, history = gbdt_fit(noisy(), config=config)
    losses = np.array(history.train_loss)
    assert np.all(np.diff(losses) <= 1e-12)


def test_trees_respect_leaf_limit():
    model, _ = gbdt_fit(noisy(), config=GbdtConfig(**dict(SMALL, num_leaves=4, min_data_in_leaf=2)))
    assert max(tree.num_leaves for tree in model.trees) <= 4
    assert any(tree.num_leaves == 4 for tree in model.trees)


def test_increasing_transform_leaves_predictions_unchanged():
    data = noisy(n=10)
    shifted = LabeledDataset(10, 1, 2 * data.features.astype(np.int64) + 1, data.labels)
    config = GbdtConfig(**dict(SMALL, feature_fraction=0.5, bagging_fraction=0.5, bagging_freq=5))
    a, _ = gbdt_fit(data, config=config)
    b, _ = gbdt_fit(shifted, config=config)
    assert np.array_equal(gbdt_predict_proba(a, data.features), gbdt_predict_proba(b, shifted.features))


def test_early_stopping_keeps_best_iteration():
    train, valid = noisy(seed=2), noisy(seed=3)
    config = GbdtConfig(**dict(SMALL, num_iterations=300, early_stopping_rounds=5,
                               feature_fraction=0.5, bagging_fraction=0.5, bagging_freq=1))
    model, history = gbdt_fit(train, valid, config)
    best = history.best_iteration
    assert len(model.trees) == best + 1
    assert history.valid_auc[best] == max(history.valid_auc)
    assert len(history.valid_auc) <= 300


def test_training_is_reproducible():
    config = GbdtConfig(**dict(SMALL, feature_fraction=0.5, bagging_fraction=0.5, bagging_freq=3, seed=8))
    a, _ = gbdt_fit(noisy(), config=config)
    b, _ = gbdt_fit(noisy(), config=config)
    assert np.array_equal(gbdt_predict_proba(a, noisy().features), gbdt_predict_proba(b, noisy().features))


def test_single_vector_gives_float():
    data = separable()
    model, _ = gbdt_fit(data, config=GbdtConfig(**SMALL))
    value = gbdt_predict_proba(model, data.features[0])
    assert isinstance(value, float)
    assert 0.0 < value < 1.0


def test_auc():
    assert auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.75)
    assert auc([1, 2, 3, 4], [0, 0, 1, 1]) == 1.0
    assert auc([4, 3, 2, 1], [0, 0, 1, 1]) == 0.0
    assert auc([5, 5, 5, 5], [0, 1, 0, 1]) == 0.5
    with pytest.raises(ModelError):
        auc([1, 2], [1, 1])
    with pytest.raises(ModelError):
        auc([1, 2, 3], [0, 1])


def test_binning_uses_value_ranks():
    features = np.array([[0.0, 5.0], [2.0, 5.0], [7.0, 9.0]])
    edges = fit_bin_edges(features, max_bin=255)
    assert [e.tolist() for e in edges] == [[0.0, 2.0, 7.0], [5.0, 9.0]]
    assert bin_features(np.array([[1.0, 4.0], [7.0, 10.0]]), edges).tolist() == [[0, 0], [2, 1]]
    assert len(fit_bin_edges(np.arange(1000.0)[:, None], max_bin=16)[0]) == 16


def test_config_validation():
    with pytest.raises(ModelError):
        GbdtConfig(num_leaves=1)
    with pytest.raises(ModelError):
        GbdtConfig(feature_fraction=0.0)
    with pytest.raises(ModelError):
        GbdtConfig(boosting='dart')


def test_rejects_other_encodings():
    data = LabeledDataset(2, 2, np.zeros((4, 6)), np.array([0, 1, 0, 1]))
    with pytest.raises(ModelError):
        gbdt_fit(data)


def test_save_and_load(tmp_path):
    data = noisy()
    model, _ = gbdt_fit(data, config=GbdtConfig(**SMALL))
    path = tmp_path / "lgbm.model"
    save_gbdt(model, path)
    loaded = load_gbdt(path)
    assert loaded.config == model.config
    assert len(loaded.trees) == len(model.trees)
    assert np.array_equal(gbdt_predict_proba(loaded, data.features), gbdt_predict_proba(model, data.features))


def test_load_rejects_other_files(tmp_path):
    path = tmp_path / "bogus.model"
    path.write_text("not a model\n")
    with pytest.raises(ModelError):
        load_gbdt(path)
