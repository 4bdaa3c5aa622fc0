"""
Gradient-boosted decision trees on binned integer features.

Trees are grown leaf-wise: the splittable leaf with the largest gain is
split next until num_leaves is reached. Split candidates come from
per-node gradient/hessian histograms; the larger child of every split gets
its histogram by subtraction from the parent.

Features are binned by their distinct training values (at most max_bin
edges), so a split only depends on the rank of a value and any strictly
increasing transform of a feature leaves routing unchanged.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from heapq import heappop, heappush
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from sklearn.metrics import roc_auc_score

from .dataset import LabeledDataset
from .errors import ModelError
from .rng import generator_for
from .storage import atomic_open

logger = logging.getLogger(__name__)

FORMAT_TAG = 'kronml-gbdt 1'
PRIOR_CLIP = 1e-6


@dataclass(frozen=True)
class GbdtConfig:
    """
    Boosting settings. The first five values are the reference ones; the
    rest are documented defaults.
    """
    num_leaves: int = 63
    feature_fraction: float = 0.5
    bagging_fraction: float = 0.5
    bagging_freq: int = 20
    learning_rate: float = 0.01
    boosting: str = 'gbdt'
    eval_metric: str = 'auc'
    num_iterations: int = 1000
    early_stopping_rounds: Optional[int] = 50
    max_bin: int = 255
    min_data_in_leaf: int = 20
    lambda_l2: float = 1.0
    min_gain_to_split: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.num_leaves < 2:
            raise ModelError(f"num_leaves must be at least 2, got {self.num_leaves}")
        for name in ('feature_fraction', 'bagging_fraction'):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ModelError(f"{name} must lie in (0, 1], got {value}")
        if self.boosting != 'gbdt':
            raise ModelError(f"Only gbdt boosting is supported, got {self.boosting!r}")
        if self.eval_metric != 'auc':
            raise ModelError(f"Only the auc metric is supported, got {self.eval_metric!r}")
        if self.num_iterations < 1:
            raise ModelError(f"num_iterations must be positive, got {self.num_iterations}")
        if self.learning_rate <= 0:
            raise ModelError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.max_bin < 2 or self.min_data_in_leaf < 1 or self.bagging_freq < 0 or self.lambda_l2 < 0:
            raise ModelError(f"Invalid GBDT config: {self}")


@dataclass(frozen=True)
class Tree:
    """
    One regression tree as parallel node arrays; leaves have feature -1.

    Internal node i sends a row left when its bin for feature[i] is at most
    threshold[i].
    """
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def num_leaves(self) -> int:
        return int((self.feature < 0).sum())

    def apply(self, binned: np.ndarray) -> np.ndarray:
        """Leaf node index reached by every row of a binned matrix."""
        node = np.zeros(len(binned), dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while len(active):
            current = node[active]
            go_left = binned[active, self.feature[current]] <= self.threshold[current]
            node[active] = np.where(go_left, self.left[current], self.right[current])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict(self, binned: np.ndarray) -> np.ndarray:
        return self.value[self.apply(binned)]


@dataclass(frozen=True)
class GbdtModel:
    """
    Fitted ensemble.

    Attributes:
        n (int): Degree of the training data
        trees (tuple): Regression trees in boosting order
        base_score (float): Initial log-odds
        learning_rate (float): Shrinkage applied to every leaf value
        bin_edges (tuple): Sorted distinct training values per feature
        config (GbdtConfig): Settings used for training
    """
    n: int
    trees: Tuple[Tree, ...]
    base_score: float
    learning_rate: float
    bin_edges: Tuple[np.ndarray, ...]
    config: GbdtConfig = field(default_factory=GbdtConfig)

    def __post_init__(self):
        for i, tree in enumerate(self.trees):
            if tree.num_leaves > self.config.num_leaves:
                raise ModelError(f"Tree {i} has {tree.num_leaves} leaves, limit is {self.config.num_leaves}")
            if not np.all(np.isfinite(tree.value)):
                raise ModelError(f"Tree {i} has non-finite leaf values")

    @property
    def num_features(self) -> int:
        return len(self.bin_edges)


@dataclass
class BoostingHistory:
    """Per-iteration training loss and validation AUC."""
    train_loss: List[float] = field(default_factory=list)
    valid_auc: List[Optional[float]] = field(default_factory=list)
    best_iteration: Optional[int] = None

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    return np.exp(-np.logaddexp(0.0, -z))


def log_loss(raw: np.ndarray, labels: np.ndarray) -> float:
    """Mean logistic loss computed from raw scores."""
    return float(np.mean(np.logaddexp(0.0, raw) - labels * raw))


def auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """
    Area under the ROC curve; tied scores count one half.

    Raises:
        ModelError: If the inputs differ in length or only one class is present
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if len(scores) != len(labels):
        raise ModelError(f"auc got {len(scores)} scores for {len(labels)} labels")
    positives = int((labels == 1).sum())
    negatives = len(labels) - positives
    if positives == 0 or negatives == 0:
        raise ModelError("auc needs both classes to be present")
    return float(roc_auc_score(labels == 1, scores))


# ---------------------------------------------------------------------------
# Binning and histograms
# ---------------------------------------------------------------------------

def fit_bin_edges(features: np.ndarray, max_bin: int) -> Tuple[np.ndarray, ...]:
    """Distinct values per column, thinned to max_bin evenly spaced ranks if needed."""
    edges = []
    for column in np.asarray(features).T:
        distinct = np.unique(column)
        if len(distinct) > max_bin:
            distinct = np.unique(distinct[np.linspace(0, len(distinct) - 1, max_bin).round().astype(np.int64)])
        edges.append(distinct.astype(np.float64))
    return tuple(edges)


def bin_features(features: np.ndarray, edges: Tuple[np.ndarray, ...]) -> np.ndarray:
    """
    Bin index of every value: the position of the largest edge not above it,
    with values below the first edge sharing bin 0.
    """
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if features.shape[1] != len(edges):
        raise ModelError(f"Expected {len(edges)} features, got {features.shape[1]}")
    binned = np.empty(features.shape, dtype=np.int32)
    for j, column_edges in enumerate(edges):
        binned[:, j] = np.clip(np.searchsorted(column_edges, features[:, j], side='right') - 1, 0, None)
    return binned


class HistogramBuilder:
    """
    Gradient, hessian and count histograms over a fixed feature subset.

    All three are (len(features), bins) arrays built with one bincount each.
    """

    def __init__(self, binned: np.ndarray, features: np.ndarray, bins: int):
        self.features = features
        self.bins = bins
        self.codes = binned[:, features] + (np.arange(len(features)) * bins)[None, :]

    def build(self, rows: np.ndarray, gradients: np.ndarray, hessians: np.ndarray) -> np.ndarray:
        codes = self.codes[rows].ravel()
        width = len(self.features)
        size = width * self.bins
        shape = (width, self.bins)
        g = np.bincount(codes, weights=np.repeat(gradients[rows], width), minlength=size).reshape(shape)
        h = np.bincount(codes, weights=np.repeat(hessians[rows], width), minlength=size).reshape(shape)
        c = np.bincount(codes, minlength=size).reshape(shape).astype(np.float64)
        return np.stack([g, h, c])


@dataclass
class SplitInfo:
    gain: float
    feature: int
    threshold: int


@dataclass
class TreeNode:
    """A node during growth; not used for prediction."""
    node_id: int
    rows: np.ndarray
    histogram: np.ndarray
    sum_gradients: float
    sum_hessians: float
    split: Optional[SplitInfo] = None
    feature: int = -1
    threshold: int = 0
    left: int = -1
    right: int = -1
    value: float = 0.0

    def __lt__(self, other: "TreeNode") -> bool:
        # heap pops the highest gain first, then the oldest node
        return (-self.split.gain, self.node_id) < (-other.split.gain, other.node_id)


class TreeGrower:
    """
    Builds one regression tree fitting a Newton step on the given rows.

    Args:
        binned: Binned training matrix
        gradients: First derivatives of the loss, per row
        hessians: Second derivatives, per row
        rows: Rows used for this tree (the current bag)
        features: Sorted feature indices allowed for this tree
        config: Boosting settings
    """

    def __init__(self, binned: np.ndarray, gradients: np.ndarray, hessians: np.ndarray,
                 rows: np.ndarray, features: np.ndarray, config: GbdtConfig):
        self.binned = binned
        self.gradients = gradients
        self.hessians = hessians
        self.config = config
        bins = int(binned.max()) + 1 if binned.size else 1
        self.histograms = HistogramBuilder(binned, features, bins)
        self.nodes: List[TreeNode] = []
        self.splittable: List[TreeNode] = []
        root = self._make_node(rows, self.histograms.build(rows, gradients, hessians))
        self._find_split_and_push(root)

    def _make_node(self, rows: np.ndarray, histogram: np.ndarray) -> TreeNode:
        node = TreeNode(len(self.nodes), rows, histogram,
                        float(self.gradients[rows].sum()), float(self.hessians[rows].sum()))
        self.nodes.append(node)
        return node

    def _leaf_value(self, g: float, h: float) -> float:
        return -g / (h + self.config.lambda_l2)

    def _find_split_and_push(self, node: TreeNode) -> None:
        """
        Best (feature, threshold) by gain; the first maximum wins, which is the
        lowest feature and then the lowest threshold.
        """
        lam = self.config.lambda_l2
        g, h, c = node.histogram
        g_left = np.cumsum(g, axis=1)[:, :-1]
        h_left = np.cumsum(h, axis=1)[:, :-1]
        c_left = np.cumsum(c, axis=1)[:, :-1]
        g_total, h_total, c_total = node.sum_gradients, node.sum_hessians, float(len(node.rows))
        g_right, h_right, c_right = g_total - g_left, h_total - h_left, c_total - c_left
        gain = 0.5 * (g_left ** 2 / (h_left + lam) + g_right ** 2 / (h_right + lam)
                      - g_total ** 2 / (h_total + lam))
        allowed = (c_left >= self.config.min_data_in_leaf) & (c_right >= self.config.min_data_in_leaf)
        gain = np.where(allowed, gain, -np.inf)
        if gain.size == 0:
            return
        best = int(np.argmax(gain))
        slot, threshold = divmod(best, gain.shape[1])
        best_gain = float(gain[slot, threshold])
        if not np.isfinite(best_gain) or best_gain <= self.config.min_gain_to_split:
            return
        node.split = SplitInfo(best_gain, int(self.histograms.features[slot]), threshold)
        heappush(self.splittable, node)

    def split_next(self) -> None:
        node = heappop(self.splittable)
        split = node.split
        goes_left = self.binned[node.rows, split.feature] <= split.threshold
        left_rows, right_rows = node.rows[goes_left], node.rows[~goes_left]
        small_rows = left_rows if len(left_rows) <= len(right_rows) else right_rows
        small_hist = self.histograms.build(small_rows, self.gradients, self.hessians)
        large_hist = node.histogram - small_hist
        if small_rows is left_rows:
            left_hist, right_hist = small_hist, large_hist
        else:
            left_hist, right_hist = large_hist, small_hist
        left = self._make_node(left_rows, left_hist)
        right = self._make_node(right_rows, right_hist)
        node.feature, node.threshold = split.feature, split.threshold
        node.left, node.right = left.node_id, right.node_id
        node.histogram = None
        self._find_split_and_push(left)
        self._find_split_and_push(right)

    def grow(self) -> Tree:
        leaves = 1
        while self.splittable and leaves < self.config.num_leaves:
            self.split_next()
            leaves += 1
        return self._to_tree()

    def _to_tree(self) -> Tree:
        size = len(self.nodes)
        feature = np.full(size, -1, dtype=np.int64)
        threshold = np.zeros(size, dtype=np.int64)
        left = np.full(size, -1, dtype=np.int64)
        right = np.full(size, -1, dtype=np.int64)
        value = np.zeros(size, dtype=np.float64)
        for node in self.nodes:
            if node.left >= 0:
                feature[node.node_id] = node.feature
                threshold[node.node_id] = node.threshold
                left[node.node_id] = node.left
                right[node.node_id] = node.right
            else:
                value[node.node_id] = self._leaf_value(node.sum_gradients, node.sum_hessians)
        return Tree(feature, threshold, left, right, value)


# ---------------------------------------------------------------------------
# Training and prediction
# ---------------------------------------------------------------------------

def _check_v1(dataset: LabeledDataset, role: str) -> None:
    if dataset.encoding != 1:
        raise ModelError(f"GBDT needs the a=1 encoding, {role} set has a={dataset.encoding}")


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def gbdt_fit(train: LabeledDataset, valid: Optional[LabeledDataset] = None,
             config: GbdtConfig = GbdtConfig()) -> Tuple[GbdtModel, BoostingHistory]:
    """
    Boost trees on the logistic loss.

    Each iteration computes g = p - y and h = p(1 - p) from the current
    scores and grows one tree. Features are drawn per tree at
    feature_fraction; the bag of rows is redrawn at bagging_fraction every
    bagging_freq iterations. With a validation set and early_stopping_rounds
    set, boosting stops once validation AUC has not improved for that many
    rounds and the ensemble is cut back to its best iteration.

    Args:
        train: v1 training set
        valid: Optional v1 validation set
        config: Boosting settings

    Returns:
        (model, per-iteration history)

    Raises:
        ModelError: On an empty training set, encoding or degree mismatch,
            a single-class validation set when early stopping is requested,
            or non-finite gradients
    """
    _check_v1(train, 'training')
    if len(train) == 0:
        raise ModelError("Cannot boost on an empty training set")
    early_stopping = valid is not None and bool(config.early_stopping_rounds)
    if valid is not None:
        _check_v1(valid, 'validation')
        if valid.n != train.n:
            raise ModelError(f"Training set is for n={train.n}, validation set for n={valid.n}")
        if early_stopping and len(np.unique(valid.labels)) < 2:
            raise ModelError("Early stopping on AUC needs both classes in the validation set")

    labels = train.labels.astype(np.float64)
    edges = fit_bin_edges(train.features, config.max_bin)
    binned = bin_features(train.features, edges)
    valid_binned = bin_features(valid.features, edges) if valid is not None else None
    rows, num_features = binned.shape

    prior = float(np.clip(labels.mean(), PRIOR_CLIP, 1.0 - PRIOR_CLIP))
    base_score = float(np.log(prior / (1.0 - prior)))
    raw = np.full(rows, base_score)
    valid_raw = np.full(len(valid), base_score) if valid is not None else None

    feature_rng = generator_for(config.seed, 'gbdt-features')
    bagging_rng = generator_for(config.seed, 'gbdt-bagging')
    per_tree = max(1, _round_half_up(num_features * config.feature_fraction))
    bag_size = max(1, _round_half_up(rows * config.bagging_fraction))
    use_bagging = config.bagging_fraction < 1.0 and config.bagging_freq > 0
    bag = np.arange(rows)

    trees: List[Tree] = []
    history = BoostingHistory()
    best_auc, best_iteration = -np.inf, -1
    for iteration in range(config.num_iterations):
        p = sigmoid(raw)
        gradients = p - labels
        hessians = p * (1.0 - p)
        if not (np.all(np.isfinite(gradients)) and np.all(np.isfinite(hessians))):
            raise ModelError(f"Non-finite gradients at iteration {iteration}")
        if use_bagging and iteration % config.bagging_freq == 0:
            bag = np.sort(bagging_rng.choice(rows, size=bag_size, replace=False))
        features = np.sort(feature_rng.choice(num_features, size=per_tree, replace=False))

        tree = TreeGrower(binned, gradients, hessians, bag, features, config).grow()
        trees.append(tree)
        raw = raw + config.learning_rate * tree.predict(binned)
        history.train_loss.append(log_loss(raw, labels))

        score = None
        if valid is not None:
            valid_raw = valid_raw + config.learning_rate * tree.predict(valid_binned)
            if len(np.unique(valid.labels)) == 2:
                score = auc(valid_raw, valid.labels)
        history.valid_auc.append(score)
        logger.debug("GBDT iteration %d: %d leaves, train loss %.6f, valid auc %s",
                     iteration, tree.num_leaves, history.train_loss[-1], score)

        if early_stopping:
            if score > best_auc:
                best_auc, best_iteration = score, iteration
            elif iteration - best_iteration >= config.early_stopping_rounds:
                logger.info("GBDT early stop at iteration %d; best iteration %d with auc %.6f",
                            iteration, best_iteration, best_auc)
                break

    if early_stopping:
        trees = trees[:best_iteration + 1]
        history.best_iteration = best_iteration
    else:
        history.best_iteration = len(trees) - 1
    logger.info("GBDT trained %d trees on %d rows", len(trees), rows)
    model = GbdtModel(n=train.n, trees=tuple(trees), base_score=base_score,
                      learning_rate=config.learning_rate, bin_edges=edges, config=config)
    return model, history


def gbdt_raw_score(model: GbdtModel, x: np.ndarray) -> np.ndarray:
    binned = bin_features(x, model.bin_edges)
    raw = np.full(len(binned), model.base_score)
    for tree in model.trees:
        raw += model.learning_rate * tree.predict(binned)
    return raw


def gbdt_predict_proba(model: GbdtModel, x: np.ndarray) -> Union[float, np.ndarray]:
    """
    sigmoid(base_score + learning_rate * sum of leaf values).

    Args:
        model: Fitted ensemble
        x: One v1 vector of length 3n or a matrix of them

    Returns:
        Probability of class 1; a float for a single vector
    """
    x = np.asarray(x)
    probs = sigmoid(gbdt_raw_score(model, x))
    return float(probs[0]) if x.ndim == 1 else probs


def gbdt_predict(model: GbdtModel, x: np.ndarray) -> np.ndarray:
    return (np.atleast_1d(gbdt_predict_proba(model, x)) > 0.5).astype(np.int64)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def save_gbdt(model: GbdtModel, path: Union[str, Path]) -> None:
    """
    Text format: a tag line, a JSON header (n, base_score, learning_rate,
    config), one edges line per feature, then one block per tree whose
    node lines read "feature threshold left right value".
    """
    header = {'n': model.n, 'base_score': model.base_score, 'learning_rate': model.learning_rate,
              'num_features': model.num_features, 'num_trees': len(model.trees),
              'config': asdict(model.config)}
    with atomic_open(path, 'w') as handle:
        handle.write(FORMAT_TAG + "\n")
        handle.write(json.dumps(header, sort_keys=True) + "\n")
        for edges in model.bin_edges:
            handle.write("edges " + " ".join(repr(float(v)) for v in edges) + "\n")
        for i, tree in enumerate(model.trees):
            handle.write(f"tree {i} nodes={len(tree.value)}\n")
            for node in range(len(tree.value)):
                handle.write(f"{tree.feature[node]} {tree.threshold[node]} {tree.left[node]} "
                             f"{tree.right[node]} {float(tree.value[node])!r}\n")


def load_gbdt(path: Union[str, Path]) -> GbdtModel:
    path = Path(path)
    with open(path, 'r', encoding='utf-8') as handle:
        lines = handle.read().splitlines()
    if not lines or lines[0] != FORMAT_TAG:
        raise ModelError(f"{path}: not a GBDT model file")
    try:
        header = json.loads(lines[1])
        cursor = 2
        edges = []
        for _ in range(header['num_features']):
            fields = lines[cursor].split()
            if fields[0] != 'edges':
                raise ValueError(f"expected an edges line, got {lines[cursor]!r}")
            edges.append(np.array([float(v) for v in fields[1:]]))
            cursor += 1
        trees = []
        for _ in range(header['num_trees']):
            size = int(lines[cursor].split('nodes=')[1])
            block = [line.split() for line in lines[cursor + 1:cursor + 1 + size]]
            cursor += 1 + size
            trees.append(Tree(feature=np.array([int(b[0]) for b in block], dtype=np.int64),
                              threshold=np.array([int(b[1]) for b in block], dtype=np.int64),
                              left=np.array([int(b[2]) for b in block], dtype=np.int64),
                              right=np.array([int(b[3]) for b in block], dtype=np.int64),
                              value=np.array([float(b[4]) for b in block])))
    except (IndexError, KeyError, ValueError) as exc:
        raise ModelError(f"{path}: corrupt GBDT model file ({exc})") from exc
    return GbdtModel(n=header['n'], trees=tuple(trees), base_score=float(header['base_score']),
                     learning_rate=float(header['learning_rate']), bin_edges=tuple(edges),
                     config=GbdtConfig(**header['config']))
