import json

import numpy as np
import pytest

from src.kronml.dataset import LabeledDataset, SplitSpec
from src.kronml.errors import ModelError
from src.kronml.evaluation import (EvalReport, ExperimentPlan, ExperimentResult, confusion_matrix, evaluate_scores,
                                   load_classifier, metrics_from_confusion, metrics_from_labels, run_experiment,
                                   run_once, subsample_train)
from src.kronml.model_cnn import CnnConfig
from src.kronml.model_gbdt import GbdtConfig
from src.kronml.reporting import render_report


def report_from(tn, fp, fn, tp, classifier='nearn'):
    matrix = np.array([[tn, fp], [fn, tp]])
    return EvalReport(n=3, classifier=classifier, encoding=1,
                      sizes={'train0': 1, 'train1': 1, 'valid0': tn + fp, 'valid1': fn + tp},
                      confusion=matrix.tolist(), **metrics_from_confusion(matrix))


def four_rows():
    features = np.array([[1, 1, 1, 0, 0, 0, 0, 0, 0],
                         [1, 1, 0, 0, 0, 0, 0, 0, 0],
                         [3, 0, 0, 3, 0, 0, 3, 0, 0],
                         [3, 0, 0, 2, 1, 0, 3, 0, 0]])
    return LabeledDataset(3, 1, features, np.array([0, 0, 1, 1]))


def test_confusion_matrix_orientation():
    matrix = confusion_matrix([0, 0, 1, 1], [0, 1, 1, 1])
    assert matrix.tolist() == [[1, 1], [0, 2]]
    metrics = metrics_from_confusion(matrix)
    assert metrics['accuracy'] == 0.75
    assert metrics['precision0'] == 1.0
    assert metrics['precision1'] == pytest.approx(2 / 3)
    assert metrics['recall0'] == 0.5
    assert metrics['recall1'] == 1.0


def test_confusion_matrix_errors():
    with pytest.raises(ValueError):
        confusion_matrix([0, 1], [0])
    with pytest.raises(ValueError):
        confusion_matrix([0, 2], [0, 1])


def test_empty_denominators_give_zero():
    metrics = metrics_from_confusion(np.array([[3, 0], [2, 0]]))
    assert metrics['precision1'] == 0.0
    assert metrics['recall1'] == 0.0
    assert metrics_from_confusion(np.zeros((2, 2)))['accuracy'] == 0.0


def test_single_class_labels_keep_both_rows():
    assert confusion_matrix([1, 1, 1], [1, 0, 1]).tolist() == [[0, 0], [1, 2]]
    assert confusion_matrix([], []).tolist() == [[0, 0], [0, 0]]


def test_label_and_matrix_metrics_agree():
    rng = np.random.default_rng(5)
    truth = rng.integers(0, 2, size=200)
    predicted = np.where(rng.random(200) < 0.8, truth, 1 - truth)
    assert metrics_from_labels(truth, predicted) == metrics_from_confusion(confusion_matrix(truth, predicted))


def test_report_rejects_inconsistent_metrics():
    report = report_from(4, 1, 2, 3)
    assert report.class_errors == (1, 2)
    with pytest.raises(ModelError):
        EvalReport(**{**report.to_dict(), 'accuracy': 0.99})
    with pytest.raises(ModelError):
        EvalReport(**{**report.to_dict(), 'sizes': {'train0': 1, 'train1': 1, 'valid0': 5, 'valid1': 6}})


def test_report_json_round_trip():
    report = report_from(4, 1, 2, 3)
    data = json.loads(report.to_json())
    assert data['timings_ms'] == {'generate': None, 'train': None, 'evaluate': None}
    assert EvalReport.from_json(report.to_json()) == report
    assert "Accuracy: 0.7000" in str(report)


def test_headline_is_lower_median():
    runs = [report_from(5, 0, 5, 0), report_from(5, 0, 0, 5), report_from(5, 0, 3, 2), report_from(5, 0, 4, 1)]
    result = ExperimentResult(ExperimentPlan(3, 'nearn'), runs)
    assert result.headline is runs[3]
    assert result.to_dict()['headline'] == 3
    assert result.summary()['max'] == 1.0
    odd = ExperimentResult(ExperimentPlan(3, 'nearn'), runs[:3])
    assert odd.headline is runs[2]


def test_plan_validation():
    with pytest.raises(ModelError):
        ExperimentPlan(12, 'svm')
    with pytest.raises(ModelError):
        ExperimentPlan(12, 'nearn', encoding=2)
    with pytest.raises(ModelError):
        ExperimentPlan(12, 'lgbm', repetitions=0)
    assert ExperimentPlan(12, 'cnn3').encoding == 3


def test_split_seed_changes_per_repetition():
    plan = ExperimentPlan(12, 'nearn', cap=100)
    a, b = plan.split_for(1, 0), plan.split_for(1, 1)
    assert a.seed != b.seed
    assert a.cap == 100
    assert plan.split_for(1, 0) == a


def test_four_sample_plan():
    plan = ExperimentPlan(3, 'nearn', repetitions=1)
    report, trained = run_once(plan, four_rows(), master_seed=5, repetition=0)
    assert report.sizes == {'train0': 1, 'train1': 1, 'valid0': 1, 'valid1': 1}
    assert sum(map(sum, report.confusion)) == 2
    assert trained.extras['best_k'] == 1
    assert report.timings_ms['train'] is None
    assert report.seeds['master'] == 5


def test_scores_are_thresholded_at_one_half():
    data = four_rows()
    plan = ExperimentPlan(3, 'nearn')
    report = evaluate_scores(plan, data, data, np.array([0.5, 0.2, 0.51, 0.9]))
    assert report.confusion == [[2, 0], [0, 2]]
    assert report.auc == 1.0


def test_run_experiment_writes_runs(tmp_path, tiny_v1):
    partial = tmp_path / "nearn_partial.json"
    plan = ExperimentPlan(3, 'nearn', repetitions=3, knn_ks=(1, 3))
    result = run_experiment(plan, dataset=tiny_v1, master_seed=2, record_timings=True, partial_path=partial)
    assert len(result.runs) == 3
    assert all(run.sizes == {'train0': 4, 'train1': 4, 'valid0': 2, 'valid1': 2} for run in result.runs)
    assert result.runs[0].timings_ms['train'] is not None
    saved = json.loads(partial.read_text())
    assert saved['complete'] is True
    assert len(saved['runs']) == 3


def test_run_experiment_is_reproducible(tiny_v1):
    plan = ExperimentPlan(3, 'lgbm', repetitions=2,
                          gbdt=GbdtConfig(num_iterations=5, min_data_in_leaf=1, num_leaves=4))
    a = run_experiment(plan, dataset=tiny_v1, master_seed=11)
    b = run_experiment(plan, dataset=tiny_v1, master_seed=11)
    assert [r.to_dict() for r in a.runs] == [r.to_dict() for r in b.runs]


def test_run_experiment_rejects_wrong_encoding(tiny_v1):
    with pytest.raises(ModelError):
        run_experiment(ExperimentPlan(3, 'cnn2'), dataset=tiny_v1)


def test_cnn_plan_and_saved_classifier(tmp_path):
    rng = np.random.default_rng(4)
    labels = np.array([0, 1] * 10)
    features = np.where(labels[:, None] == 1, rng.integers(4, 7, size=(20, 18)), rng.integers(0, 2, size=(20, 18)))
    data = LabeledDataset(6, 2, features, labels)
    plan = ExperimentPlan(6, 'cnn2', repetitions=1, cnn=CnnConfig(epochs=2, batch_size=4))
    report, trained = run_once(plan, data, master_seed=1, repetition=0)
    assert report.sizes['valid0'] == report.sizes['valid1'] == 3
    assert {'cnn_init', 'cnn_batches'} <= set(report.seeds)
    path = tmp_path / "cnn2_n6.npz"
    trained.save(path)
    with np.load(path) as archive:
        header = json.loads(str(archive['header']))
    assert header['config']['epochs'] == 2
    assert header['config']['seed'] == report.seeds['cnn_batches']
    assert len(trained.extras['validation_accuracy']) == 2
    assert trained.extras['validation_accuracy'][-1] is not None
    loaded = load_classifier('cnn2', path)
    assert np.array_equal(loaded.predict_proba(data), trained.predict_proba(data))
    with pytest.raises(ModelError):
        load_classifier('cnn3', path)


def test_subsample_train(tiny_v1):
    part = subsample_train(tiny_v1, 0.5, master_seed=3, repetition=0)
    assert len(part) == 6
    assert set(part.row_ids) <= set(tiny_v1.row_ids)
    assert part.provenance.part == 'train-subsample'


def test_split_spec_flows_into_runs(tiny_v1):
    plan = ExperimentPlan(3, 'nearn', repetitions=1, split=SplitSpec(train_fraction=0.5), knn_ks=(1,))
    report, _ = run_once(plan, tiny_v1, master_seed=0, repetition=0)
    assert report.sizes == {'train0': 3, 'train1': 3, 'valid0': 3, 'valid1': 3}


def test_json_reports_are_byte_identical_for_same_seed(tmp_path, tiny_v1):
    plan = ExperimentPlan(3, 'lgbm', repetitions=2,
                          gbdt=GbdtConfig(num_iterations=5, min_data_in_leaf=1, num_leaves=4))
    paths = []
    for attempt in ('first', 'second'):
        result = run_experiment(plan, dataset=tiny_v1, master_seed=23,
                                partial_path=tmp_path / attempt / "runs.json")
        paths.append(render_report(result.headline, 'json', tmp_path / attempt / "lgbm_n3.json"))
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert (tmp_path / "first" / "runs.json").read_bytes() == (tmp_path / "second" / "runs.json").read_bytes()
