"""
Labeled datasets of partition triples.

Rows follow the order of Q(n): triples passing the depth filter, sorted
lexicographically by the positions of lam, mu and nu in
enumerate_partitions(n). Three encodings are available:

    a=1  [lam | mu | nu], length 3n
    a=2  n x 3 matrix whose columns are the padded partitions
    a=3  6 x n x 3 stack of a=2 matrices, one per permutation of the triple,
         in the order (lam mu nu), (lam nu mu), (mu lam nu), (mu nu lam),
         (nu lam mu), (nu mu lam)

Features are small non-negative integers and stay integers on disk.
"""

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, List, Optional, Tuple, Union

import numpy as np

from .characters import CharacterTable
from .errors import DatasetError, PartitionError
from .kronecker import Triple, depth_filter_mask, kronecker_tensor
from .partitions import Partition, enumerate_partitions, pad
from .rng import make_generator
from .storage import atomic_open, write_text_atomic

logger = logging.getLogger(__name__)

ENCODINGS = (1, 2, 3)
DEPTH_FILTER = 'depth-inequality'

# Slice order of the a=3 encoding, as positions into (lam, mu, nu).
PERMUTATIONS = ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0))

_WRITE_CHUNK = 100_000


def sample_shape(n: int, encoding: int) -> Tuple[int, ...]:
    """Logical tensor shape of one sample."""
    if encoding == 1:
        return (3 * n,)
    if encoding == 2:
        return (n, 3)
    if encoding == 3:
        return (6, n, 3)
    raise DatasetError(f"Unknown encoding a={encoding}; expected one of {ENCODINGS}")


def sample_length(n: int, encoding: int) -> int:
    return int(np.prod(sample_shape(n, encoding)))


# ---------------------------------------------------------------------------
# Q(n) and the encoders
# ---------------------------------------------------------------------------

def enumerate_q_indices(n: int) -> np.ndarray:
    """(m, 3) array of partition positions for every triple in Q(n), in row order."""
    return np.argwhere(depth_filter_mask(n)).astype(np.int64)


def enumerate_Q(n: int) -> List[Triple]:
    """
    Every triple of partitions of n that passes the depth filter.

    Returns:
        Triples in lexicographic order of partition positions
    """
    order = enumerate_partitions(n)
    return [Triple(order[i], order[j], order[k]) for i, j, k in enumerate_q_indices(n)]


def padded_matrix(n: int) -> np.ndarray:
    """p(n) x n matrix of padded partitions, in enumerate_partitions order."""
    return np.array([pad(p, n) for p in enumerate_partitions(n)], dtype=np.uint8)


def _common_degree(lam: Partition, mu: Partition, nu: Partition) -> int:
    if not lam.n == mu.n == nu.n:
        raise PartitionError(f"Partitions {lam}, {mu}, {nu} have different degrees")
    return lam.n


def encode_v1(lam: Partition, mu: Partition, nu: Partition) -> np.ndarray:
    """Concatenation [pad(lam), pad(mu), pad(nu)]."""
    n = _common_degree(lam, mu, nu)
    return np.array(pad(lam, n) + pad(mu, n) + pad(nu, n), dtype=np.uint8)


def encode_v2(lam: Partition, mu: Partition, nu: Partition) -> np.ndarray:
    """n x 3 matrix; row i is (lam_i, mu_i, nu_i)."""
    n = _common_degree(lam, mu, nu)
    return np.array([pad(lam, n), pad(mu, n), pad(nu, n)], dtype=np.uint8).T.copy()


def encode_v3(lam: Partition, mu: Partition, nu: Partition) -> np.ndarray:
    """6 x n x 3 stack of encode_v2 over the six permutations of the triple."""
    triple = (lam, mu, nu)
    return np.stack([encode_v2(*(triple[q] for q in perm)) for perm in PERMUTATIONS])


def encode_indices(n: int, indices: np.ndarray, encoding: int) -> np.ndarray:
    """
    Vectorized encoder over partition-position triples.

    Args:
        n: Degree
        indices: (m, 3) positions into enumerate_partitions(n)
        encoding: 1, 2 or 3

    Returns:
        (m, sample_length) uint8 matrix, each row flattened row-major
    """
    padded = padded_matrix(n)
    columns = [padded[indices[:, q]] for q in range(3)]
    if encoding == 1:
        flat = np.concatenate(columns, axis=1)
    elif encoding == 2:
        flat = np.stack(columns, axis=2).reshape(len(indices), -1)
    elif encoding == 3:
        slices = [np.stack([columns[q] for q in perm], axis=2) for perm in PERMUTATIONS]
        flat = np.stack(slices, axis=1).reshape(len(indices), -1)
    else:
        raise DatasetError(f"Unknown encoding a={encoding}; expected one of {ENCODINGS}")
    return np.ascontiguousarray(flat, dtype=np.uint8)


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EncodedSample:
    """
    One encoded triple and its label.

    Attributes:
        encoding_kind (int): 1, 2 or 3
        tensor (ndarray): Flat integer buffer
        label (int): 0 if the coefficient vanishes, else 1
        n (int): Degree
    """
    encoding_kind: int
    tensor: np.ndarray
    label: int
    n: int

    @property
    def shaped(self) -> np.ndarray:
        return self.tensor.reshape(sample_shape(self.n, self.encoding_kind))


@dataclass(frozen=True)
class Provenance:
    """Where a dataset came from."""
    filter: str = DEPTH_FILTER
    seed: Optional[int] = None
    cap: Optional[int] = None
    train_fraction: Optional[float] = None
    part: str = 'full'


@dataclass(frozen=True)
class Census:
    """Triple counts for one n."""
    total: int
    passing: int
    ones: int
    zeros: int


class LabeledDataset:
    """
    Encoded triples with binary labels, all of one n and one encoding.

    Attributes:
        n (int): Degree
        encoding (int): 1, 2 or 3
        features (ndarray): (m, sample_length) uint8 matrix
        labels (ndarray): (m,) uint8 vector of 0/1
        row_ids (ndarray): Row positions in the dataset this one was taken from
        provenance (Provenance): Seed and filter bookkeeping
    """

    def __init__(self, n: int, encoding: int, features: np.ndarray, labels: np.ndarray,
                 row_ids: Optional[np.ndarray] = None, provenance: Optional[Provenance] = None):
        self.n = n
        self.encoding = encoding
        self.features = np.asarray(features, dtype=np.uint8)
        self.labels = np.asarray(labels, dtype=np.uint8)
        self.row_ids = (np.arange(len(self.labels), dtype=np.int64)
                        if row_ids is None else np.asarray(row_ids, dtype=np.int64))
        self.provenance = provenance or Provenance()
        self._validate()

    def _validate(self) -> None:
        width = sample_length(self.n, self.encoding)
        if self.features.ndim != 2 or self.features.shape[1] != width:
            raise DatasetError(
                f"Expected rows of length {width} for n={self.n}, a={self.encoding}; got shape {self.features.shape}")
        if len(self.labels) != len(self.features) or len(self.row_ids) != len(self.features):
            raise DatasetError("Features, labels and row ids differ in length")
        if self.features.size and int(self.features.max()) > self.n:
            raise DatasetError(f"Feature values must lie in [0, {self.n}]")
        if self.labels.size and int(self.labels.max()) > 1:
            raise DatasetError("Labels must be 0 or 1")

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, index: int) -> EncodedSample:
        return EncodedSample(self.encoding, self.features[index], int(self.labels[index]), self.n)

    def __iter__(self) -> Iterator[EncodedSample]:
        return (self[i] for i in range(len(self)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (self.n == other.n and self.encoding == other.encoding
                and np.array_equal(self.features, other.features)
                and np.array_equal(self.labels, other.labels))

    def __repr__(self) -> str:
        zeros, ones = self.class_counts()
        return f"LabeledDataset(n={self.n}, a={self.encoding}, rows={len(self)}, zeros={zeros}, ones={ones})"

    @property
    def sample_shape(self) -> Tuple[int, ...]:
        return sample_shape(self.n, self.encoding)

    def class_counts(self) -> Tuple[int, int]:
        ones = int(self.labels.sum())
        return len(self) - ones, ones

    def subset(self, rows: np.ndarray, provenance: Optional[Provenance] = None) -> "LabeledDataset":
        """Rows selected by position, keeping their original row ids."""
        rows = np.asarray(rows, dtype=np.int64)
        return LabeledDataset(self.n, self.encoding, self.features[rows], self.labels[rows],
                              self.row_ids[rows], provenance or self.provenance)

    def model_input(self) -> np.ndarray:
        """Features as float64, shaped (m, *sample_shape), without normalization."""
        return self.features.astype(np.float64).reshape((len(self),) + self.sample_shape)


def build_dataset(n: int, encoding: int, table: CharacterTable, threads: int = 1) -> LabeledDataset:
    """
    Encode and label every triple of Q(n).

    Args:
        n: Degree
        encoding: 1, 2 or 3
        table: Character table of S_n
        threads: Worker threads for coefficient evaluation

    Returns:
        LabeledDataset in Q(n) row order
    """
    if table.n != n:
        raise DatasetError(f"Character table is for n={table.n}, dataset requested for n={n}")
    sample_shape(n, encoding)
    mask = depth_filter_mask(n)
    coefficients = kronecker_tensor(table, threads=threads)
    labels = (coefficients[mask] != 0).astype(np.uint8)
    features = encode_indices(n, np.argwhere(mask), encoding)
    dataset = LabeledDataset(n, encoding, features, labels)
    logger.info("Built %r", dataset)
    return dataset


def dataset_census(n: int, table: CharacterTable, threads: int = 1) -> Census:
    """Total triples, triples passing the depth filter, and their label counts."""
    mask = depth_filter_mask(n)
    nonzero = kronecker_tensor(table, threads=threads)[mask] != 0
    ones = int(np.count_nonzero(nonzero))
    passing = int(mask.sum())
    return Census(total=int(mask.size), passing=passing, ones=ones, zeros=passing - ones)


# ---------------------------------------------------------------------------
# Balancing and splitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    """
    How to balance and split a dataset.

    Attributes:
        train_fraction (float): Share of each class that goes to training (default 0.7)
        seed (int): Seed of the PCG64 stream used for sampling
        balanced (bool): Sample the same number of rows from each class
        cap (int): Optional per-class ceiling on sampled rows
    """
    train_fraction: float = 0.7
    seed: int = 0
    balanced: bool = True
    cap: Optional[int] = None

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise DatasetError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if self.cap is not None and self.cap < 1:
            raise DatasetError(f"cap must be positive, got {self.cap}")


@dataclass
class SplitManifest:
    """Sidecar record of a split: enough to rebuild it from the source dataset."""
    n: int
    encoding: int
    seed: int
    cap: Optional[int]
    train_fraction: float
    balanced: bool
    train_rows: List[int] = field(default_factory=list)
    validation_rows: List[int] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({
            'n': self.n, 'encoding': self.encoding, 'seed': self.seed, 'cap': self.cap,
            'train_fraction': self.train_fraction, 'balanced': self.balanced,
            'train_rows': self.train_rows, 'validation_rows': self.validation_rows,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SplitManifest":
        try:
            data = json.loads(text)
            return cls(**data)
        except (json.JSONDecodeError, TypeError) as e:
            raise DatasetError(f"Malformed split manifest: {e}") from e

    def save(self, path: Union[str, Path]) -> None:
        write_text_atomic(path, self.to_json() + "\n")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "SplitManifest":
        return cls.from_json(Path(path).read_text(encoding='utf-8'))

    def apply(self, dataset: LabeledDataset) -> Tuple[LabeledDataset, LabeledDataset]:
        """Rebuild (train, validation) from the dataset the manifest was made from."""
        if (dataset.n, dataset.encoding) != (self.n, self.encoding):
            raise DatasetError(
                f"Manifest is for n={self.n}, a={self.encoding}; dataset is n={dataset.n}, a={dataset.encoding}")
        base = Provenance(seed=self.seed, cap=self.cap, train_fraction=self.train_fraction)
        return (dataset.subset(np.array(self.train_rows, dtype=np.int64), replace(base, part='train')),
                dataset.subset(np.array(self.validation_rows, dtype=np.int64), replace(base, part='validation')))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def balance_and_split(dataset: LabeledDataset, spec: SplitSpec) -> Tuple[LabeledDataset, LabeledDataset]:
    """
    Sample a balanced subset and split it into training and validation parts.

    Each class contributes min(#class0, #class1, cap) rows drawn without
    replacement. The split is stratified: the same train_fraction of each
    class goes to training, so both parts stay balanced.

    Args:
        dataset: Full labeled dataset
        spec: Split parameters

    Returns:
        (train, validation), rows in ascending source order

    Raises:
        DatasetError: If a class is empty
    """
    manifest = make_split_manifest(dataset, spec)
    return manifest.apply(dataset)


def make_split_manifest(dataset: LabeledDataset, spec: SplitSpec) -> SplitManifest:
    """Draw the rows of a split without materializing it."""
    zeros, ones = dataset.class_counts()
    if zeros == 0 or ones == 0:
        raise DatasetError(f"Cannot balance a dataset with class counts zeros={zeros}, ones={ones}")
    cap = spec.cap if spec.cap is not None else max(zeros, ones)
    per_class = {0: min(zeros, ones, cap), 1: min(zeros, ones, cap)} if spec.balanced \
        else {0: min(zeros, cap), 1: min(ones, cap)}
    rng = make_generator(spec.seed)
    train_parts, validation_parts = [], []
    for cls in (0, 1):
        rows = np.flatnonzero(dataset.labels == cls)
        chosen = rng.choice(rows, size=per_class[cls], replace=False)
        k = _round_half_up(per_class[cls] * spec.train_fraction)
        train_parts.append(chosen[:k])
        validation_parts.append(chosen[k:])
    train_rows = np.sort(np.concatenate(train_parts))
    validation_rows = np.sort(np.concatenate(validation_parts))
    logger.info("Split n=%d a=%d: %d per class, %d train, %d validation (seed %d)",
                dataset.n, dataset.encoding, per_class[0], len(train_rows), len(validation_rows), spec.seed)
    return SplitManifest(
        n=dataset.n, encoding=dataset.encoding, seed=spec.seed, cap=spec.cap,
        train_fraction=spec.train_fraction, balanced=spec.balanced,
        train_rows=[int(r) for r in train_rows], validation_rows=[int(r) for r in validation_rows],
    )


# ---------------------------------------------------------------------------
# CSV files
# ---------------------------------------------------------------------------

def dataset_header(dataset: LabeledDataset) -> str:
    return f"n={dataset.n},a={dataset.encoding},rows={len(dataset)}"


def write_dataset_rows(handle, dataset: LabeledDataset) -> None:
    for start in range(0, len(dataset), _WRITE_CHUNK):
        stop = start + _WRITE_CHUNK
        block = np.column_stack([dataset.features[start:stop], dataset.labels[start:stop]])
        np.savetxt(handle, block, fmt='%d', delimiter=',')


def save_dataset(dataset: LabeledDataset, path: Union[str, Path]) -> Path:
    """
    Write the dataset CSV: a header line, then one row per sample with the label last.
    """
    path = Path(path)
    with atomic_open(path, 'w') as handle:
        handle.write(dataset_header(dataset) + "\n")
        write_dataset_rows(handle, dataset)
    logger.info("Wrote %d rows to %s", len(dataset), path)
    return path


def parse_header(line: str) -> dict:
    try:
        fields = dict(item.split('=', 1) for item in line.strip().split(','))
        return {key: int(value) for key, value in fields.items()}
    except ValueError as e:
        raise DatasetError(f"Malformed header {line.strip()!r}") from e


def read_dataset_rows(lines: List[str], n: int, encoding: int, rows: int) -> LabeledDataset:
    width = sample_length(n, encoding) + 1
    if rows == 0:
        return LabeledDataset(n, encoding, np.zeros((0, width - 1), dtype=np.uint8), np.zeros(0, dtype=np.uint8))
    data = np.loadtxt(lines, delimiter=',', dtype=np.int64, ndmin=2)
    if data.shape != (rows, width):
        raise DatasetError(f"Expected {rows} rows of {width} columns, found shape {data.shape}")
    if data.min() < 0 or data.max() > max(n, 1):
        raise DatasetError(f"Dataset entries must lie in [0, {n}]")
    return LabeledDataset(n, encoding, data[:, :-1], data[:, -1])


def load_dataset(path: Union[str, Path]) -> LabeledDataset:
    """
    Read a dataset CSV written by save_dataset.

    Raises:
        FileNotFoundError: If the file does not exist
        DatasetError: If the header or any row is malformed
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Dataset not found: {path}")
    with open(path, 'r', encoding='utf-8') as handle:
        header = parse_header(handle.readline())
        if not {'n', 'a', 'rows'} <= header.keys():
            raise DatasetError(f"{path}: header must carry n, a and rows")
        return read_dataset_rows(handle.readlines(), header['n'], header['a'], header['rows'])
