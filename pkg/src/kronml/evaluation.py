"""
Experiment harness: balance and split a labeled dataset, train one of the
four classifiers, score it on the validation part and collect the results.
"""

import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.metrics import accuracy_score, precision_score, recall_score
from sklearn.metrics import confusion_matrix as sk_confusion_matrix

from .characters import CharacterTable, character_table
from .config import CLASSIFIERS, ENCODING_FOR
from .dataset import LabeledDataset, SplitManifest, SplitSpec, build_dataset, make_split_manifest
from .errors import ModelError
from .model_cnn import CnnConfig, cnn_build, cnn_predict_proba, cnn_train, load_cnn, save_cnn
from .model_gbdt import GbdtConfig, auc, gbdt_fit, gbdt_predict_proba, load_gbdt, save_gbdt
from .model_knn import SWEEP_KS, knn_fit, knn_predict_proba, knn_sweep, load_knn, save_knn
from .rng import derive_seed, generator_for
from .storage import write_text_atomic

logger = logging.getLogger(__name__)

DEFAULT_REPETITIONS = 5
LABELS = [0, 1]


@dataclass(frozen=True)
class ExperimentPlan:
    """
    One classifier on one n.

    Attributes:
        n (int): Degree
        classifier (str): 'nearn', 'cnn2', 'cnn3' or 'lgbm'
        encoding (int): Dataset encoding; derived from the classifier when omitted
        split (SplitSpec): Train fraction and balancing; its seed is replaced per repetition
        cap (int): Optional per-class ceiling on sampled rows
        repetitions (int): Independent splits to run
        train_subsample (float): Share of the training split actually used
        knn_ks (tuple): Candidate k values for the nearest-neighbors sweep
        cnn (CnnConfig): CNN optimizer settings
        gbdt (GbdtConfig): Boosting settings
    """
    n: int
    classifier: str
    encoding: Optional[int] = None
    split: SplitSpec = field(default_factory=SplitSpec)
    cap: Optional[int] = None
    repetitions: int = DEFAULT_REPETITIONS
    train_subsample: Optional[float] = None
    knn_ks: Tuple[int, ...] = SWEEP_KS
    cnn: CnnConfig = field(default_factory=CnnConfig)
    gbdt: GbdtConfig = field(default_factory=GbdtConfig)

    def __post_init__(self):
        if self.classifier not in CLASSIFIERS:
            raise ModelError(f"Unknown classifier {self.classifier!r}; expected one of {CLASSIFIERS}")
        expected = ENCODING_FOR[self.classifier]
        if self.encoding is None:
            object.__setattr__(self, 'encoding', expected)
        elif self.encoding != expected:
            raise ModelError(f"{self.classifier} uses the a={expected} encoding, not a={self.encoding}")
        if self.repetitions < 1:
            raise ModelError(f"repetitions must be positive, got {self.repetitions}")
        if self.train_subsample is not None and not 0.0 < self.train_subsample <= 1.0:
            raise ModelError(f"train_subsample must lie in (0, 1], got {self.train_subsample}")

    def split_for(self, master_seed: int, repetition: int) -> SplitSpec:
        return replace(self.split, seed=derive_seed(master_seed, 'split', repetition),
                       cap=self.cap if self.cap is not None else self.split.cap)

    def describe(self) -> dict:
        return {
            'classifier': self.classifier, 'encoding': self.encoding, 'cap': self.cap,
            'train_fraction': self.split.train_fraction, 'balanced': self.split.balanced,
            'repetitions': self.repetitions, 'train_subsample': self.train_subsample,
            'hyperparameters': self.hyperparameters(),
        }

    def hyperparameters(self) -> dict:
        if self.classifier == 'nearn':
            return {'ks': list(self.knn_ks)}
        if self.classifier == 'lgbm':
            return {k: v for k, v in asdict(self.gbdt).items() if k != 'seed'}
        return {k: v for k, v in asdict(self.cnn).items() if k != 'seed'}


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def confusion_matrix(true_labels: Sequence[int], predicted_labels: Sequence[int]) -> np.ndarray:
    """
    2 x 2 counts; entry (i, j) is the number of samples of true class i
    predicted as j.

    Raises:
        ValueError: If the sequences differ in length or hold labels other than 0 and 1
    """
    true_labels = np.asarray(true_labels, dtype=np.int64).ravel()
    predicted_labels = np.asarray(predicted_labels, dtype=np.int64).ravel()
    if len(true_labels) != len(predicted_labels):
        raise ValueError(f"Label sequences differ in length: {len(true_labels)} vs {len(predicted_labels)}")
    for labels in (true_labels, predicted_labels):
        if labels.size and (labels.min() < 0 or labels.max() > 1):
            raise ValueError("Labels must be 0 or 1")
    if not true_labels.size:
        return np.zeros((2, 2), dtype=np.int64)
    return sk_confusion_matrix(true_labels, predicted_labels, labels=LABELS).astype(np.int64)


def metrics_from_labels(true_labels: Sequence[int], predicted_labels: Sequence[int]) -> Dict[str, float]:
    """Accuracy and per-class precision and recall; empty denominators give 0."""
    true_labels = np.asarray(true_labels, dtype=np.int64).ravel()
    predicted_labels = np.asarray(predicted_labels, dtype=np.int64).ravel()
    if not true_labels.size:
        return {name: 0.0 for name in ('accuracy', 'precision0', 'precision1', 'recall0', 'recall1')}
    precision = precision_score(true_labels, predicted_labels, labels=LABELS, average=None, zero_division=0)
    recall = recall_score(true_labels, predicted_labels, labels=LABELS, average=None, zero_division=0)
    return {
        'accuracy': float(accuracy_score(true_labels, predicted_labels)),
        'precision0': float(precision[0]),
        'precision1': float(precision[1]),
        'recall0': float(recall[0]),
        'recall1': float(recall[1]),
    }


def metrics_from_confusion(matrix: np.ndarray) -> Dict[str, float]:
    """The same metrics for the label pairs a confusion matrix counts."""
    counts = np.asarray(matrix, dtype=np.int64).ravel()
    return metrics_from_labels(np.repeat([0, 0, 1, 1], counts), np.repeat([0, 1, 0, 1], counts))


@dataclass
class EvalReport:
    """
    Result of one train/evaluate run.

    Attributes:
        n: Degree
        classifier: Classifier name
        encoding: Dataset encoding
        sizes: train0, train1, valid0, valid1 row counts
        accuracy: Share of validation rows classified correctly
        precision0 / precision1 / recall0 / recall1: Per-class metrics
        auc: Area under the ROC curve of the validation scores
        confusion: [[tn, fp], [fn, tp]], rows are the true class
        config: Plan echo and classifier extras
        seeds: Master seed and the derived per-purpose seeds
        timings_ms: Wall-clock timings, or nulls when not recorded
    """
    n: int
    classifier: str
    encoding: int
    sizes: Dict[str, int]
    accuracy: float
    precision0: float
    precision1: float
    recall0: float
    recall1: float
    confusion: List[List[int]]
    auc: Optional[float] = None
    config: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    timings_ms: Dict[str, Optional[float]] = field(
        default_factory=lambda: {'generate': None, 'train': None, 'evaluate': None})

    def __post_init__(self):
        self.check()

    def check(self) -> None:
        """Recompute every metric from the confusion matrix and compare."""
        matrix = np.asarray(self.confusion, dtype=np.int64)
        if matrix.shape != (2, 2) or matrix.min() < 0:
            raise ModelError(f"Confusion matrix must be 2x2 non-negative counts, got {self.confusion}")
        valid = self.sizes.get('valid0', 0) + self.sizes.get('valid1', 0)
        if int(matrix.sum()) != valid:
            raise ModelError(f"Confusion matrix sums to {int(matrix.sum())}, validation set has {valid} rows")
        for name, value in metrics_from_confusion(matrix).items():
            if not np.isclose(getattr(self, name), value, rtol=0, atol=1e-12):
                raise ModelError(f"{name}={getattr(self, name)} disagrees with the confusion matrix ({value})")

    @property
    def class_errors(self) -> Tuple[int, int]:
        """(class-0 rows predicted 1, class-1 rows predicted 0)."""
        return int(self.confusion[0][1]), int(self.confusion[1][0])

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "EvalReport":
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls.from_dict(json.loads(text))

    def __str__(self) -> str:
        """Human-readable summary."""
        (tn, fp), (fn, tp) = self.confusion
        result = f"\n{'='*70}\n"
        result += f"Classifier: {self.classifier}  (n={self.n}, a={self.encoding})\n"
        result += (f"Train: {self.sizes['train0']:,} + {self.sizes['train1']:,}   "
                   f"Validation: {self.sizes['valid0']:,} + {self.sizes['valid1']:,}\n")
        result += f"Accuracy: {self.accuracy:.4f}\n"
        result += f"Precision: class 0 {self.precision0:.4f} | class 1 {self.precision1:.4f}\n"
        result += f"Recall:    class 0 {self.recall0:.4f} | class 1 {self.recall1:.4f}\n"
        if self.auc is not None:
            result += f"AUC: {self.auc:.4f}\n"
        result += "Confusion (rows true, columns predicted):\n"
        result += f"    {tn:>9,} {fp:>9,}\n    {fn:>9,} {tp:>9,}\n"
        result += f"{'='*70}\n"
        return result


def evaluate_scores(plan: ExperimentPlan, train: LabeledDataset, valid: LabeledDataset,
                    scores: np.ndarray) -> EvalReport:
    """Threshold class-1 scores at 0.5 and build the report."""
    scores = np.asarray(scores, dtype=np.float64)
    predicted = (scores > 0.5).astype(np.int64)
    matrix = confusion_matrix(valid.labels, predicted)
    train0, train1 = train.class_counts()
    valid0, valid1 = valid.class_counts()
    area = auc(scores, valid.labels) if valid0 and valid1 else None
    return EvalReport(
        n=plan.n, classifier=plan.classifier, encoding=plan.encoding,
        sizes={'train0': train0, 'train1': train1, 'valid0': valid0, 'valid1': valid1},
        confusion=matrix.tolist(), auc=area, config=plan.describe(),
        **metrics_from_labels(valid.labels, predicted),
    )


# ---------------------------------------------------------------------------
# Classifier registry
# ---------------------------------------------------------------------------

@dataclass
class TrainedClassifier:
    """A fitted model with its scoring function and training extras."""
    classifier: str
    model: object
    extras: dict = field(default_factory=dict)
    config: Optional[CnnConfig] = None

    def predict_proba(self, dataset: LabeledDataset) -> np.ndarray:
        if self.classifier == 'nearn':
            return knn_predict_proba(self.model, dataset.features)
        if self.classifier == 'lgbm':
            return np.atleast_1d(gbdt_predict_proba(self.model, dataset.features))
        return cnn_predict_proba(self.model, dataset.model_input())

    def save(self, path: Union[str, Path]) -> None:
        if self.config is not None:
            SAVERS[self.classifier](self.model, path, self.config)
        else:
            SAVERS[self.classifier](self.model, path)


SAVERS: Dict[str, Callable] = {'nearn': save_knn, 'cnn2': save_cnn, 'cnn3': save_cnn, 'lgbm': save_gbdt}
LOADERS: Dict[str, Callable] = {'nearn': load_knn, 'cnn2': load_cnn, 'cnn3': load_cnn, 'lgbm': load_gbdt}
MODEL_SUFFIX = {'nearn': '.knn.csv', 'cnn2': '.npz', 'cnn3': '.npz', 'lgbm': '.gbdt.txt'}


def load_classifier(classifier: str, path: Union[str, Path]) -> TrainedClassifier:
    if classifier not in LOADERS:
        raise ModelError(f"Unknown classifier {classifier!r}")
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Model not found: {path}")
    model = LOADERS[classifier](path)
    if classifier in ('cnn2', 'cnn3') and model.architecture.variant != classifier:
        raise ModelError(f"{path} holds a {model.architecture.variant} model, not {classifier}")
    return TrainedClassifier(classifier, model)


def train_classifier(plan: ExperimentPlan, train: LabeledDataset, valid: LabeledDataset,
                     master_seed: int, repetition: int = 0) -> Tuple[TrainedClassifier, dict]:
    """
    Fit the plan's classifier.

    Nearest neighbors picks the best k of the sweep on the validation part;
    the boosted trees use it for early stopping.

    Returns:
        (trained classifier, seeds used)
    """
    for part in (train, valid):
        if part.encoding != plan.encoding or part.n != plan.n:
            raise ModelError(f"{plan.classifier} for n={plan.n} needs a={plan.encoding} data, "
                             f"got n={part.n}, a={part.encoding}")
    if plan.classifier == 'nearn':
        ks = [k for k in plan.knn_ks if k <= len(train)] or [1]
        best, scores = knn_sweep(train, valid, ks) if len(valid) else (min(ks), {})
        extras = {'best_k': best, 'k_accuracy': {str(k): v for k, v in scores.items()}}
        return TrainedClassifier('nearn', knn_fit(train, best), extras), {}
    if plan.classifier == 'lgbm':
        seed = derive_seed(master_seed, 'gbdt', repetition)
        model, history = gbdt_fit(train, valid, replace(plan.gbdt, seed=seed))
        return (TrainedClassifier('lgbm', model, {'trees': len(model.trees),
                                                  'best_iteration': history.best_iteration}),
                {'gbdt': seed})
    init_seed = derive_seed(master_seed, 'cnn-init', repetition)
    batch_seed = derive_seed(master_seed, 'cnn-batches', repetition)
    config = replace(plan.cnn, seed=batch_seed)
    model = cnn_build(plan.classifier, plan.n, init_seed)
    model, history = cnn_train(model, train, config, validation=valid)
    extras = {'parameters': model.parameter_count, 'final_loss': history.loss[-1],
              'validation_accuracy': history.validation_accuracy}
    return (TrainedClassifier(plan.classifier, model, extras, config=config),
            {'cnn_init': init_seed, 'cnn_batches': batch_seed})


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

@dataclass
class ExperimentResult:
    """All runs of a plan, the median headline run and a summary."""
    plan: ExperimentPlan
    runs: List[EvalReport]

    @property
    def headline_index(self) -> int:
        """Position of the median run by accuracy; the lower median for an even count."""
        order = sorted(range(len(self.runs)), key=lambda i: (self.runs[i].accuracy, i))
        return order[(len(order) - 1) // 2]

    @property
    def headline(self) -> EvalReport:
        return self.runs[self.headline_index]

    def summary(self) -> Dict[str, float]:
        accuracies = np.array([run.accuracy for run in self.runs])
        return {'mean': float(accuracies.mean()), 'min': float(accuracies.min()),
                'max': float(accuracies.max()), 'runs': len(self.runs)}

    def to_dict(self) -> dict:
        return {'runs': [run.to_dict() for run in self.runs], 'summary': self.summary(),
                'headline': self.headline_index}


def subsample_train(train: LabeledDataset, fraction: float, master_seed: int, repetition: int) -> LabeledDataset:
    size = max(1, int(np.floor(len(train) * fraction + 0.5)))
    rng = generator_for(master_seed, 'subsample', repetition)
    rows = np.sort(rng.choice(len(train), size=size, replace=False))
    return train.subset(rows, replace(train.provenance, part='train-subsample'))


def run_once(plan: ExperimentPlan, dataset: LabeledDataset, master_seed: int, repetition: int,
             record_timings: bool = False, manifest: Optional[SplitManifest] = None
             ) -> Tuple[EvalReport, TrainedClassifier]:
    """
    Split, train and evaluate once.

    Args:
        plan: Experiment plan
        dataset: Full dataset in the plan's encoding
        master_seed: Seed every per-run stream is derived from
        repetition: Run index
        record_timings: Fill timings_ms with wall-clock values
        manifest: Reuse this split instead of drawing one

    Returns:
        (report, trained classifier)
    """
    split = plan.split_for(master_seed, repetition)
    if manifest is None:
        manifest = make_split_manifest(dataset, split)
    train, valid = manifest.apply(dataset)
    if plan.train_subsample is not None and plan.train_subsample < 1.0:
        train = subsample_train(train, plan.train_subsample, master_seed, repetition)

    started = time.perf_counter()
    trained, seeds = train_classifier(plan, train, valid, master_seed, repetition)
    trained_at = time.perf_counter()
    report = evaluate_scores(plan, train, valid, trained.predict_proba(valid))
    finished = time.perf_counter()

    report.config = {**report.config, 'extras': trained.extras}
    report.seeds = {'master': master_seed, 'repetition': repetition, 'split': manifest.seed, **seeds}
    if record_timings:
        report.timings_ms = {'generate': None, 'train': round((trained_at - started) * 1000, 3),
                             'evaluate': round((finished - trained_at) * 1000, 3)}
    logger.info("%s n=%d run %d: accuracy %.4f", plan.classifier, plan.n, repetition, report.accuracy)
    return report, trained


def _flush_partial(path: Optional[Path], plan: ExperimentPlan, runs: List[EvalReport], complete: bool) -> None:
    if path is None:
        return
    payload = {'n': plan.n, 'classifier': plan.classifier, 'complete': complete,
               'runs': [run.to_dict() for run in runs]}
    write_text_atomic(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")


def run_experiment(plan: ExperimentPlan, dataset: Optional[LabeledDataset] = None,
                   table: Optional[CharacterTable] = None, master_seed: int = 0, threads: int = 1,
                   record_timings: bool = False, partial_path: Optional[Union[str, Path]] = None
                   ) -> ExperimentResult:
    """
    Generate (if needed), then balance/split, train and evaluate once per
    repetition, each with a fresh split seed.

    Args:
        plan: Experiment plan
        dataset: Dataset in the plan's encoding; built from the table when omitted
        table: Character table used when the dataset must be built
        master_seed: Seed every random stream derives from
        threads: Parallelism for dataset generation
        record_timings: Fill timings_ms in every report
        partial_path: JSON file rewritten after every run, so an aborted
            experiment keeps its finished runs

    Returns:
        ExperimentResult with per-run reports and the median headline
    """
    partial = Path(partial_path) if partial_path is not None else None
    generate_ms = None
    if dataset is None:
        started = time.perf_counter()
        table = table or character_table(plan.n, workers=threads)
        dataset = build_dataset(plan.n, plan.encoding, table, threads)
        generate_ms = round((time.perf_counter() - started) * 1000, 3)
    elif (dataset.n, dataset.encoding) != (plan.n, plan.encoding):
        raise ModelError(f"{plan.classifier} for n={plan.n} needs a={plan.encoding} data, "
                         f"got n={dataset.n}, a={dataset.encoding}")

    runs: List[EvalReport] = []
    try:
        for repetition in range(plan.repetitions):
            report, _ = run_once(plan, dataset, master_seed, repetition, record_timings)
            if record_timings:
                report.timings_ms['generate'] = generate_ms
            runs.append(report)
            _flush_partial(partial, plan, runs, complete=False)
    except BaseException:
        logger.error("%s n=%d aborted after %d of %d runs", plan.classifier, plan.n, len(runs), plan.repetitions)
        _flush_partial(partial, plan, runs, complete=False)
        raise
    _flush_partial(partial, plan, runs, complete=True)
    result = ExperimentResult(plan, runs)
    summary = result.summary()
    logger.info("%s n=%d: median accuracy %.4f (mean %.4f, min %.4f, max %.4f)", plan.classifier, plan.n,
                result.headline.accuracy, summary['mean'], summary['min'], summary['max'])
    return result

