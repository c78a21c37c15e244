"""
Classifier: tanh MLP feature extractor followed by a linear classification head.

Forward and backward passes are written out by hand for softmax
cross-entropy. Gradients are averaged over the batch. Three gradient modes
are supported:

- Standard: plain cross-entropy gradients
- BiasReversal: the head-bias entries of the forgotten classes change sign
- HingeBound: adds lam * sum(max(0, b_min - b_c)^2) over forgotten classes c

Array layout: a layer weight is (out x in), so a layer computes
tanh(W @ a + b). The head weight is (C x d).
"""
import copy
from dataclasses import dataclass, field
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np
from scipy import special

from models.data import Batch, ClassSplit
from utils.errors import InvalidInputError, NumericError, ShapeError
from utils.numerics import SeededRng, as_vector, log_softmax

# Tolerance on sum(probs) accepted by bias_gradient
PROBS_SUM_TOLERANCE = 1e-9


# ============================================
# TYPES
# ============================================

@dataclass(frozen=True)
class Architecture:
    """
    Layer widths of a classifier.

    layer_dims lists the output width of each extractor layer; an empty tuple
    makes the extractor an identity passthrough (a plain linear classifier).
    """
    input_dim: int
    class_count: int
    layer_dims: Tuple[int, ...] = (32, 16)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        if self.input_dim < 1 or self.class_count < 2:
            raise InvalidInputError("architecture needs input_dim >= 1 and class_count >= 2")
        if any(d < 1 for d in dims):
            raise InvalidInputError(f"layer widths must be positive, got {dims}")
        object.__setattr__(self, "layer_dims", dims)

    @classmethod
    def from_widths(cls, input_dim: int, class_count: int, hidden_dim: int, feature_dim: int) -> "Architecture":
        """hidden_dim 0 drops the hidden layer; feature_dim 0 (with hidden_dim 0) means identity."""
        if feature_dim == 0:
            if hidden_dim:
                raise InvalidInputError("feature_dim 0 (identity extractor) requires hidden_dim 0")
            return cls(input_dim, class_count, ())
        dims = (hidden_dim, feature_dim) if hidden_dim else (feature_dim,)
        return cls(input_dim, class_count, dims)

    @property
    def feature_dim(self) -> int:
        return self.layer_dims[-1] if self.layer_dims else self.input_dim


@dataclass
class Layer:
    weight: np.ndarray
    bias: np.ndarray

    @property
    def in_dim(self) -> int:
        return int(self.weight.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.weight.shape[0])


@dataclass
class FeatureExtractor:
    """Stack of tanh layers; frozen parameters are never updated by sgd_step."""
    input_dim: int
    layers: List[Layer] = field(default_factory=list)
    frozen: bool = False

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim if self.layers else self.input_dim

    def activations(self, features: np.ndarray) -> List[np.ndarray]:
        """Input followed by the output of every layer, batched (N x width)."""
        outputs = [features]
        for layer in self.layers:
            outputs.append(np.tanh(outputs[-1] @ layer.weight.T + layer.bias))
        return outputs


@dataclass
class ClassificationHead:
    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(
                f"head weight {self.weight.shape} does not match bias {self.bias.shape}"
            )


@dataclass
class Classifier:
    extractor: FeatureExtractor
    head: ClassificationHead

    def __post_init__(self):
        if self.head.weight.shape[1] != self.extractor.output_dim:
            raise ShapeError(
                f"head expects {self.head.weight.shape[1]} features, "
                f"extractor produces {self.extractor.output_dim}"
            )

    @property
    def class_count(self) -> int:
        return int(self.head.bias.shape[0])

    @property
    def input_dim(self) -> int:
        return self.extractor.input_dim

    @property
    def architecture(self) -> Architecture:
        return Architecture(
            self.input_dim,
            self.class_count,
            tuple(layer.out_dim for layer in self.extractor.layers),
        )

    def clone(self) -> "Classifier":
        return copy.deepcopy(self)

    def frozen_copy(self) -> "Classifier":
        """Clone with the extractor frozen."""
        model = self.clone()
        model.extractor.frozen = True
        return model


@dataclass(frozen=True)
class Standard:
    pass


@dataclass(frozen=True)
class BiasReversal:
    split: ClassSplit


@dataclass(frozen=True)
class HingeBound:
    b_min: float
    lam: float
    split: ClassSplit

    def __post_init__(self):
        if not np.isfinite(self.b_min):
            raise InvalidInputError(f"b_min must be finite, got {self.b_min}")
        if not np.isfinite(self.lam) or self.lam < 0:
            raise InvalidInputError(f"lambda must be >= 0, got {self.lam}")


GradientMode = Union[Standard, BiasReversal, HingeBound]
STANDARD = Standard()


@dataclass
class Gradients:
    """
    Per-parameter gradients mirroring a Classifier.

    loss is the objective the gradients belong to (mean cross-entropy, plus
    the hinge penalty under HingeBound).
    """
    layer_weights: List[np.ndarray]
    layer_biases: List[np.ndarray]
    head_weight: np.ndarray
    head_bias: np.ndarray
    loss: float

    def arrays(self) -> List[np.ndarray]:
        return [*self.layer_weights, *self.layer_biases, self.head_weight, self.head_bias]

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.loss)) and all(np.all(np.isfinite(a)) for a in self.arrays())

    def combine(self, weight: float, other: "Gradients", other_weight: float) -> "Gradients":
        """weight * self + other_weight * other, losses included."""
        return Gradients(
            [weight * a + other_weight * b for a, b in zip(self.layer_weights, other.layer_weights)],
            [weight * a + other_weight * b for a, b in zip(self.layer_biases, other.layer_biases)],
            weight * self.head_weight + other_weight * other.head_weight,
            weight * self.head_bias + other_weight * other.head_bias,
            weight * self.loss + other_weight * other.loss,
        )

    def negated(self) -> "Gradients":
        """-g for every parameter and the loss; an SGD step on it ascends."""
        return self.combine(-1.0, self, 0.0)


# ============================================
# CONSTRUCTION
# ============================================

def _uniform_layer(rng: SeededRng, fan_in: int, fan_out: int) -> Tuple[np.ndarray, np.ndarray]:
    limit = 1.0 / np.sqrt(fan_in)
    weight = rng.uniform(-limit, limit, size=(fan_out, fan_in))
    return weight, np.zeros(fan_out)


def init_classifier(arch: Architecture, rng: SeededRng) -> Classifier:
    """
    Fresh classifier: weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)],
    biases zero. Layers are drawn in order, the head last.
    """
    layers = []
    fan_in = arch.input_dim
    for width in arch.layer_dims:
        weight, bias = _uniform_layer(rng, fan_in, width)
        layers.append(Layer(weight, bias))
        fan_in = width
    head_weight, head_bias = _uniform_layer(rng, fan_in, arch.class_count)
    return Classifier(
        FeatureExtractor(arch.input_dim, layers),
        ClassificationHead(head_weight, head_bias),
    )


# ============================================
# FORWARD
# ============================================

def _check_features(model: Classifier, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.input_dim:
        raise ShapeError(
            f"model expects inputs of length {model.input_dim}, got shape {features.shape}"
        )
    return features


def forward_batch(model: Classifier, features: np.ndarray) -> np.ndarray:
    """Logits for a batch of inputs (N x D) -> (N x C)."""
    features = _check_features(model, features)
    phi = model.extractor.activations(features)[-1]
    return phi @ model.head.weight.T + model.head.bias


def forward(model: Classifier, x) -> np.ndarray:
    """Logits z_k = w_k . phi(x) + b_k for one input vector."""
    x = as_vector(x, "x")
    return forward_batch(model, x[np.newaxis, :])[0]


def predict(logits) -> int:
    """Index of the largest logit, lowest index on ties."""
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 1 or z.size == 0:
        raise InvalidInputError("logits must be a non-empty vector")
    return int(np.argmax(z))


def predict_batch(model: Classifier, features: np.ndarray) -> np.ndarray:
    """Predicted labels for a batch, same tie-break as predict."""
    return np.argmax(forward_batch(model, features), axis=1)


# ============================================
# LOSS AND GRADIENTS
# ============================================

def ce_loss(logits, y: int) -> float:
    """-log p_y through log-sum-exp."""
    log_probs = log_softmax(logits)
    if not 0 <= int(y) < log_probs.shape[0]:
        raise InvalidInputError(f"label {y} outside 0..{log_probs.shape[0] - 1}")
    return float(-log_probs[int(y)])


def bias_gradient(probs, y: int) -> np.ndarray:
    """
    dL/db_k = p_k - [k == y].

    Negative exactly at y and positive elsewhere whenever every p_k > 0.
    """
    p = as_vector(probs, "probs")
    if abs(p.sum() - 1.0) > PROBS_SUM_TOLERANCE:
        raise InvalidInputError(f"probabilities sum to {p.sum():.12g}, not 1")
    if not 0 <= int(y) < p.shape[0]:
        raise InvalidInputError(f"label {y} outside 0..{p.shape[0] - 1}")
    grad = p.copy()
    grad[int(y)] -= 1.0
    return grad


def hinge_penalty(bias: np.ndarray, b_min: float, lam: float, index: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Lower-bound hinge on the selected bias entries.

    Returns:
        (lam * sum(max(0, b_min - b_c)^2), gradient w.r.t. the full bias vector)
    """
    gap = np.maximum(0.0, b_min - bias[index])
    grad = np.zeros_like(bias)
    grad[index] = -2.0 * lam * gap
    return float(lam * np.sum(gap ** 2)), grad


def _as_batch(batch: Union[Batch, Iterable[Tuple[np.ndarray, int]]]) -> Batch:
    if isinstance(batch, Batch):
        return Batch(np.asarray(batch.features, dtype=np.float64), np.asarray(batch.labels, dtype=np.int64))
    return Batch.from_pairs(batch)


def _check_split(model: Classifier, split: ClassSplit):
    if split.class_count != model.class_count:
        raise ShapeError(
            f"split covers {split.class_count} classes, model has {model.class_count}"
        )


def backward(model: Classifier, batch, mode: GradientMode = STANDARD) -> Gradients:
    """
    Mean-over-batch gradients of the cross-entropy objective.

    Args:
        model: classifier (read only)
        batch: Batch or list of (x, y) pairs
        mode: Standard, BiasReversal or HingeBound

    Returns:
        Gradients with the loss of the same objective
    """
    batch = _as_batch(batch)
    if len(batch) == 0:
        raise InvalidInputError("batch is empty")
    features = _check_features(model, batch.features)
    labels = batch.labels
    if labels.min() < 0 or labels.max() >= model.class_count:
        raise InvalidInputError(f"labels must lie in 0..{model.class_count - 1}")

    n = labels.shape[0]
    activations = model.extractor.activations(features)
    phi = activations[-1]
    logits = phi @ model.head.weight.T + model.head.bias
    log_probs = special.log_softmax(logits, axis=1)
    probs = np.exp(log_probs)
    loss = float(-np.mean(log_probs[np.arange(n), labels]))

    delta = probs
    delta[np.arange(n), labels] -= 1.0
    delta /= n
    head_weight = delta.T @ phi
    head_bias = delta.sum(axis=0)

    layers = model.extractor.layers
    layer_weights = [np.zeros_like(layer.weight) for layer in layers]
    layer_biases = [np.zeros_like(layer.bias) for layer in layers]
    if layers and not model.extractor.frozen:
        upstream = delta @ model.head.weight
        for i in reversed(range(len(layers))):
            dz = upstream * (1.0 - activations[i + 1] ** 2)
            layer_weights[i] = dz.T @ activations[i]
            layer_biases[i] = dz.sum(axis=0)
            upstream = dz @ layers[i].weight

    if isinstance(mode, BiasReversal):
        _check_split(model, mode.split)
        index = mode.split.forgotten_index
        head_bias[index] = -head_bias[index]
    elif isinstance(mode, HingeBound):
        _check_split(model, mode.split)
        penalty, penalty_grad = hinge_penalty(
            model.head.bias, mode.b_min, mode.lam, mode.split.forgotten_index
        )
        loss += penalty
        head_bias = head_bias + penalty_grad

    return Gradients(layer_weights, layer_biases, head_weight, head_bias, loss)


def batch_loss(model: Classifier, batch, mode: GradientMode = STANDARD) -> float:
    """Objective value matching backward: mean cross-entropy (+ hinge penalty)."""
    batch = _as_batch(batch)
    logits = forward_batch(model, batch.features)
    log_probs = special.log_softmax(logits, axis=1)
    loss = float(-np.mean(log_probs[np.arange(len(batch)), batch.labels]))
    if isinstance(mode, HingeBound):
        loss += hinge_penalty(model.head.bias, mode.b_min, mode.lam, mode.split.forgotten_index)[0]
    return loss


# ============================================
# UPDATE
# ============================================

def _check_shapes(model: Classifier, grads: Gradients):
    pairs: Sequence[Tuple[np.ndarray, np.ndarray]] = [
        (model.head.weight, grads.head_weight),
        (model.head.bias, grads.head_bias),
    ]
    if len(grads.layer_weights) != len(model.extractor.layers):
        raise ShapeError("gradient layer count does not match the extractor")
    for layer, gw, gb in zip(model.extractor.layers, grads.layer_weights, grads.layer_biases):
        pairs = [*pairs, (layer.weight, gw), (layer.bias, gb)]
    for param, grad in pairs:
        if param.shape != grad.shape:
            raise ShapeError(f"gradient shape {grad.shape} does not match parameter {param.shape}")


def sgd_step(model: Classifier, grads: Gradients, eta: float) -> Classifier:
    """
    Vanilla SGD, in place: theta <- theta - eta * g for every unfrozen parameter.

    Returns the same (mutated) model.
    """
    if not eta > 0:
        raise InvalidInputError(f"learning rate must be > 0, got {eta}")
    _check_shapes(model, grads)
    if not grads.is_finite():
        raise NumericError("non-finite gradient, step aborted")

    model.head.weight -= eta * grads.head_weight
    model.head.bias -= eta * grads.head_bias
    if not model.extractor.frozen:
        for layer, gw, gb in zip(model.extractor.layers, grads.layer_weights, grads.layer_biases):
            layer.weight -= eta * gw
            layer.bias -= eta * gb
    return model
