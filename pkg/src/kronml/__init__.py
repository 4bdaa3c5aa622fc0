"""
kronml - learning when Kronecker coefficients of the symmetric group vanish.
Exact character tables, labeled datasets, four classifiers and an experiment harness.
"""

__version__ = "1.0.0"

from .partitions import Partition, enumerate_partitions, depth, pad, conjugate
from .characters import CharacterTable, character_table, compute_character_table, mn_character, dimension
from .table_store import CharacterTableStore
from .kronecker import Triple, kron, depth_filter, label, kronecker_tensor, coefficient_histogram
from .dataset import (LabeledDataset, SplitSpec, SplitManifest, build_dataset, dataset_census,
                      balance_and_split, encode_v1, encode_v2, encode_v3, enumerate_Q, load_dataset, save_dataset)
from .model_knn import KnnModel, knn_fit, knn_predict, knn_sweep
from .model_cnn import CnnModel, CnnConfig, cnn_build, cnn_forward, cnn_train, gradient_check
from .model_gbdt import GbdtConfig, GbdtModel, gbdt_fit, gbdt_predict_proba, auc
from .evaluation import EvalReport, ExperimentPlan, confusion_matrix, run_experiment
from .reporting import render_report
from .verification import run_verification
from .errors import (KronmlError, PartitionError, CharacterTableError, KroneckerCorruptionError,
                     DatasetError, ModelError, ReportError, VerificationError)

__all__ = [
    'Partition', 'enumerate_partitions', 'depth', 'pad', 'conjugate',
    'CharacterTable', 'character_table', 'compute_character_table', 'mn_character', 'dimension',
    'CharacterTableStore',
    'Triple', 'kron', 'depth_filter', 'label', 'kronecker_tensor', 'coefficient_histogram',
    'LabeledDataset', 'SplitSpec', 'SplitManifest', 'build_dataset', 'dataset_census', 'balance_and_split',
    'encode_v1', 'encode_v2', 'encode_v3', 'enumerate_Q', 'load_dataset', 'save_dataset',
    'KnnModel', 'knn_fit', 'knn_predict', 'knn_sweep',
    'CnnModel', 'CnnConfig', 'cnn_build', 'cnn_forward', 'cnn_train', 'gradient_check',
    'GbdtConfig', 'GbdtModel', 'gbdt_fit', 'gbdt_predict_proba', 'auc',
    'EvalReport', 'ExperimentPlan', 'confusion_matrix', 'run_experiment',
    'render_report', 'run_verification',
    'KronmlError', 'PartitionError', 'CharacterTableError', 'KroneckerCorruptionError',
    'DatasetError', 'ModelError', 'ReportError', 'VerificationError',
]
