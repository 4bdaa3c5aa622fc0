"""
Small convolutional classifiers with hand-written backpropagation.

Two variants, one valid convolution with 32 filters followed by a dense
layer with two softmax outputs:

    cnn2  input n x 3, one channel     kernel (n-4) x 3  -> 5 x 1 x 32 = 160 features
    cnn3  input 6 x n, three channels  kernel 2 x (n-4)  -> 5 x 5 x 32 = 800 features

The two-unit output head is forced by the reference parameter counts:
conv 96n-352 plus dense 322 gives 96n-30, conv 192n-736 plus dense 1602
gives 192n+866. For cnn3 the a=3 tensor is read as height 6 (permutation
slices), width n (rows of the padded partitions) and 3 channels (its columns).
"""

import io
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .dataset import LabeledDataset
from .errors import ModelError
from .rng import make_generator
from .storage import atomic_open

logger = logging.getLogger(__name__)

VARIANTS = ('cnn2', 'cnn3')
ENCODING_FOR_VARIANT = {'cnn2': 2, 'cnn3': 3}
FILTERS = 32
DENSE_UNITS = 2
MIN_DEGREE = 6


@dataclass(frozen=True)
class CnnArchitecture:
    """
    Shapes of one CNN variant for a given n.

    Attributes:
        variant (str): 'cnn2' or 'cnn3'
        n (int): Degree
        filters (int): Convolution filters
        dense_units (int): Output units
    """
    variant: str
    n: int
    filters: int = FILTERS
    dense_units: int = DENSE_UNITS

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ModelError(f"Unknown CNN variant {self.variant!r}; expected one of {VARIANTS}")
        if self.n < MIN_DEGREE:
            raise ModelError(f"The kernel does not fit for n={self.n}; need n >= {MIN_DEGREE}")

    @property
    def input_shape(self) -> Tuple[int, int, int]:
        """(height, width, channels)."""
        return (self.n, 3, 1) if self.variant == 'cnn2' else (6, self.n, 3)

    @property
    def kernel(self) -> Tuple[int, int]:
        return (self.n - 4, 3) if self.variant == 'cnn2' else (2, self.n - 4)

    @property
    def conv_output(self) -> Tuple[int, int]:
        h, w, _ = self.input_shape
        kh, kw = self.kernel
        return h - kh + 1, w - kw + 1

    @property
    def flatten_size(self) -> int:
        oh, ow = self.conv_output
        return oh * ow * self.filters

    @property
    def parameter_count(self) -> int:
        kh, kw = self.kernel
        channels = self.input_shape[2]
        conv = kh * kw * channels * self.filters + self.filters
        dense = self.flatten_size * self.dense_units + self.dense_units
        return conv + dense

    @property
    def expected_parameter_count(self) -> int:
        return 96 * self.n - 30 if self.variant == 'cnn2' else 192 * self.n + 866

    @property
    def encoding(self) -> int:
        return ENCODING_FOR_VARIANT[self.variant]


@dataclass(frozen=True)
class CnnConfig:
    """
    Training settings. None of these are fixed by the reference runs;
    they are conventional defaults.
    """
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 128
    epochs: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise ModelError(f"Invalid CNN training config: {self}")


@dataclass(frozen=True)
class CnnModel:
    """
    Weights of one trained or freshly initialized CNN.

    Attributes:
        architecture (CnnArchitecture): Shapes
        conv_w (ndarray): (kh, kw, channels, filters)
        conv_b (ndarray): (filters,)
        dense_w (ndarray): (flatten, 2)
        dense_b (ndarray): (2,)
        seed (int): Initialization seed
    """
    architecture: CnnArchitecture
    conv_w: np.ndarray
    conv_b: np.ndarray
    dense_w: np.ndarray
    dense_b: np.ndarray
    seed: int = 0

    def __post_init__(self):
        arch = self.architecture
        kh, kw = arch.kernel
        expected = {
            'conv_w': (kh, kw, arch.input_shape[2], arch.filters),
            'conv_b': (arch.filters,),
            'dense_w': (arch.flatten_size, arch.dense_units),
            'dense_b': (arch.dense_units,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ModelError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        if self.parameter_count != arch.expected_parameter_count:
            raise ModelError(
                f"{arch.variant} for n={arch.n} has {self.parameter_count} parameters, "
                f"expected {arch.expected_parameter_count}")

    @property
    def parameter_count(self) -> int:
        return sum(w.size for w in self.weights())

    def weights(self) -> List[np.ndarray]:
        """Weight tensors in declaration order."""
        return [self.conv_w, self.conv_b, self.dense_w, self.dense_b]


WEIGHT_NAMES = ('conv_w', 'conv_b', 'dense_w', 'dense_b')


def _glorot(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def cnn_build(variant: str, n: int, seed: int = 0) -> CnnModel:
    """
    Initialize a CNN with Glorot-uniform weights and zero biases.

    Args:
        variant: 'cnn2' or 'cnn3'
        n: Degree, at least 6
        seed: Seed of the PCG64 stream used for the weights

    Returns:
        CnnModel whose parameter count has been checked against 96n-30 / 192n+866
    """
    arch = CnnArchitecture(variant, n)
    kh, kw = arch.kernel
    channels = arch.input_shape[2]
    rng = make_generator(seed)
    conv_w = _glorot(rng, (kh, kw, channels, arch.filters), kh * kw * channels, kh * kw * arch.filters)
    dense_w = _glorot(rng, (arch.flatten_size, arch.dense_units), arch.flatten_size, arch.dense_units)
    return CnnModel(arch, conv_w, np.zeros(arch.filters), dense_w, np.zeros(arch.dense_units), seed)


# ---------------------------------------------------------------------------
# Forward and backward passes
# ---------------------------------------------------------------------------

def as_images(model: CnnModel, x: np.ndarray) -> np.ndarray:
    """Reshape a batch (or one sample) of flat or shaped encodings to (B, H, W, C)."""
    arch = model.architecture
    x = np.asarray(x, dtype=np.float64)
    size = int(np.prod(arch.input_shape))
    if x.size == 0 or x.size % size != 0:
        raise ModelError(f"{arch.variant} for n={arch.n} expects samples of {size} values, got shape {x.shape}")
    return x.reshape((-1,) + arch.input_shape)


def _is_single(model: CnnModel, x: np.ndarray) -> bool:
    shape = model.architecture.input_shape
    return x.ndim == 1 or tuple(x.shape) in (shape, shape[:2])


def _patches(model: CnnModel, images: np.ndarray) -> np.ndarray:
    kh, kw = model.architecture.kernel
    windows = sliding_window_view(images, (kh, kw), axis=(1, 2))  # (B, oh, ow, C, kh, kw)
    windows = windows.transpose(0, 1, 2, 4, 5, 3)
    batch, oh, ow = windows.shape[:3]
    return windows.reshape(batch, oh, ow, -1)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def _forward(model: CnnModel, images: np.ndarray) -> Dict[str, np.ndarray]:
    patches = _patches(model, images)
    kernel = model.conv_w.reshape(-1, model.architecture.filters)
    pre = patches @ kernel + model.conv_b
    hidden = np.maximum(pre, 0.0)
    flat = hidden.reshape(len(images), -1)
    logits = flat @ model.dense_w + model.dense_b
    return {'patches': patches, 'pre': pre, 'flat': flat, 'probs': softmax(logits)}


def cnn_forward(model: CnnModel, x: np.ndarray) -> np.ndarray:
    """
    Class probabilities.

    Valid convolution (stride 1) -> ReLU -> flatten -> dense(2) -> softmax.

    Args:
        model: CNN
        x: One sample or a batch, flat or shaped per the variant

    Returns:
        (2,) for a single sample, otherwise (B, 2); rows sum to 1
    """
    x = np.asarray(x)
    probs = _forward(model, as_images(model, x))['probs']
    return probs[0] if _is_single(model, x) else probs


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    picked = probs[np.arange(len(labels)), labels]
    return float(-np.mean(np.log(np.clip(picked, 1e-300, None))))


def loss_and_gradients(model: CnnModel, x: np.ndarray, labels: np.ndarray) -> Tuple[float, List[np.ndarray]]:
    """
    Mean cross-entropy on a batch and its gradient for every weight tensor.

    Returns:
        (loss, [d conv_w, d conv_b, d dense_w, d dense_b])
    """
    images = as_images(model, x)
    labels = np.asarray(labels, dtype=np.int64)
    cache = _forward(model, images)
    batch = len(images)
    probs = cache['probs']
    loss = cross_entropy(probs, labels)

    d_logits = probs.copy()
    d_logits[np.arange(batch), labels] -= 1.0
    d_logits /= batch
    d_dense_w = cache['flat'].T @ d_logits
    d_dense_b = d_logits.sum(axis=0)

    d_hidden = (d_logits @ model.dense_w.T).reshape(cache['pre'].shape)
    d_pre = d_hidden * (cache['pre'] > 0)
    filters = model.architecture.filters
    patches = cache['patches'].reshape(-1, cache['patches'].shape[-1])
    d_conv_w = (patches.T @ d_pre.reshape(-1, filters)).reshape(model.conv_w.shape)
    d_conv_b = d_pre.reshape(-1, filters).sum(axis=0)
    return loss, [d_conv_w, d_conv_b, d_dense_w, d_dense_b]


def with_weights(model: CnnModel, weights: List[np.ndarray]) -> CnnModel:
    return replace(model, **dict(zip(WEIGHT_NAMES, weights)))


def numerical_gradients(model: CnnModel, x: np.ndarray, labels: np.ndarray, step: float = 1e-5) -> List[np.ndarray]:
    """Central finite differences of the batch loss, for every weight."""
    base = [w.copy() for w in model.weights()]
    grads = []
    for t, tensor in enumerate(base):
        grad = np.zeros_like(tensor)
        for index in np.ndindex(tensor.shape):
            original = tensor[index]
            tensor[index] = original + step
            plus, _ = loss_and_gradients(with_weights(model, base), x, labels)
            tensor[index] = original - step
            minus, _ = loss_and_gradients(with_weights(model, base), x, labels)
            tensor[index] = original
            grad[index] = (plus - minus) / (2 * step)
        grads.append(grad)
    return grads


def gradient_check(model: CnnModel, x: np.ndarray, labels: np.ndarray, step: float = 1e-5) -> float:
    """
    Largest relative error |a - f| / max(|a| + |f|, 1e-5) between analytic
    and finite-difference gradients over all weights.
    """
    _, analytic = loss_and_gradients(model, x, labels)
    numeric = numerical_gradients(model, x, labels, step)
    worst = 0.0
    for a, f in zip(analytic, numeric):
        rel = np.abs(a - f) / np.maximum(np.abs(a) + np.abs(f), 1e-5)
        worst = max(worst, float(rel.max()))
    return worst


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass
class TrainingHistory:
    """Per-epoch training loss and, when a validation set is given, its accuracy."""
    loss: List[float] = field(default_factory=list)
    validation_accuracy: List[Optional[float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


class AdamState:
    """First and second moment estimates for each weight tensor."""

    def __init__(self, weights: List[np.ndarray], config: CnnConfig):
        self.config = config
        self.m = [np.zeros_like(w) for w in weights]
        self.v = [np.zeros_like(w) for w in weights]
        self.t = 0

    def step(self, weights: List[np.ndarray], grads: List[np.ndarray]) -> List[np.ndarray]:
        c = self.config
        self.t += 1
        updated = []
        for i, (w, g) in enumerate(zip(weights, grads)):
            self.m[i] = c.beta1 * self.m[i] + (1 - c.beta1) * g
            self.v[i] = c.beta2 * self.v[i] + (1 - c.beta2) * g * g
            m_hat = self.m[i] / (1 - c.beta1 ** self.t)
            v_hat = self.v[i] / (1 - c.beta2 ** self.t)
            updated.append(w - c.learning_rate * m_hat / (np.sqrt(v_hat) + c.epsilon))
        return updated


def cnn_predict_proba(model: CnnModel, x: np.ndarray, batch_size: int = 4096) -> np.ndarray:
    """Probability of class 1 for each sample of a batch."""
    images = as_images(model, x)
    out = np.empty(len(images))
    for start in range(0, len(images), batch_size):
        out[start:start + batch_size] = _forward(model, images[start:start + batch_size])['probs'][:, 1]
    return out


def cnn_predict(model: CnnModel, x: np.ndarray) -> np.ndarray:
    return (cnn_predict_proba(model, x) > 0.5).astype(np.int64)


def _check_encoding(model: CnnModel, dataset: LabeledDataset) -> None:
    arch = model.architecture
    if dataset.encoding != arch.encoding:
        raise ModelError(f"{arch.variant} needs the a={arch.encoding} encoding, got a={dataset.encoding}")
    if dataset.n != arch.n:
        raise ModelError(f"Model is for n={arch.n}, dataset is for n={dataset.n}")


def cnn_train(model: CnnModel, train: LabeledDataset, config: CnnConfig = CnnConfig(),
              validation: Optional[LabeledDataset] = None) -> Tuple[CnnModel, TrainingHistory]:
    """
    Minimize mean cross-entropy with mini-batch Adam.

    Runs in the calling thread; the batch order comes from a PCG64 stream
    seeded by config.seed, so identical inputs give identical weights.

    Args:
        model: Initial weights
        train: Training set in the variant's encoding
        config: Optimizer settings
        validation: Optional set scored after every epoch

    Returns:
        (trained model, per-epoch history)

    Raises:
        ModelError: On encoding mismatch or a non-finite loss
    """
    _check_encoding(model, train)
    if validation is not None:
        _check_encoding(model, validation)
    images = as_images(model, train.model_input())
    labels = train.labels.astype(np.int64)
    rng = make_generator(config.seed)
    weights = [w.copy() for w in model.weights()]
    adam = AdamState(weights, config)
    history = TrainingHistory()
    current = model
    for epoch in range(config.epochs):
        order = rng.permutation(len(images))
        total, seen = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            loss, grads = loss_and_gradients(current, images[batch], labels[batch])
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                raise ModelError(
                    f"Non-finite loss {loss} at epoch {epoch + 1}, step {start // config.batch_size}; "
                    f"max |weight| {max(float(np.abs(w).max()) for w in weights):.3g}")
            weights = adam.step(weights, grads)
            current = with_weights(current, weights)
            total += loss * len(batch)
            seen += len(batch)
        history.loss.append(total / max(seen, 1))
        accuracy = None
        if validation is not None and len(validation):
            predicted = cnn_predict(current, validation.model_input())
            accuracy = float((predicted == validation.labels).mean())
        history.validation_accuracy.append(accuracy)
        logger.info("%s epoch %d/%d loss %.5f validation accuracy %s", model.architecture.variant,
                    epoch + 1, config.epochs, history.loss[-1],
                    'n/a' if accuracy is None else f"{accuracy:.4f}")
    return current, history


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def save_cnn(model: CnnModel, path: Union[str, Path], config: Optional[CnnConfig] = None) -> None:
    """npz archive: a JSON header followed by the weights in declaration order."""
    header = {'variant': model.architecture.variant, 'n': model.architecture.n, 'seed': model.seed,
              'config': asdict(config) if config else None, 'weights': list(WEIGHT_NAMES)}
    buffer = io.BytesIO()
    np.savez(buffer, header=np.array(json.dumps(header, sort_keys=True)),
             **{name: w for name, w in zip(WEIGHT_NAMES, model.weights())})
    with atomic_open(path, 'wb') as handle:
        handle.write(buffer.getvalue())


def load_cnn(path: Union[str, Path]) -> CnnModel:
    """Load an archive written by save_cnn; the parameter count is re-checked."""
    with np.load(Path(path), allow_pickle=False) as archive:
        header = json.loads(str(archive['header']))
        arch = CnnArchitecture(header['variant'], int(header['n']))
        return CnnModel(arch, *(archive[name].astype(np.float64) for name in WEIGHT_NAMES),
                        seed=int(header['seed']))
