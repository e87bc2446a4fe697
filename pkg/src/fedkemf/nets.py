"""Minimal dense feed-forward network engine with hand-derived gradients.

Parameters live in one flat float64 vector per network, in canonical order:
layer 0 weights (fan_in x fan_out, row-major), layer 0 biases, layer 1
weights, ...  Hidden layers use ReLU; the output layer is affine.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError

LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class ArchSpec:
    """Shape of a dense classifier: input width, hidden widths, class count."""

    input_dim: int
    hidden_dims: tuple
    num_classes: int
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1:
            raise ValueError("input_dim must be positive")
        if any(h < 1 for h in self.hidden_dims):
            raise ValueError("hidden dims must be positive")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.activation != "relu":
            raise ValueError("only relu activation is supported")

    @property
    def layer_dims(self):
        return (self.input_dim,) + self.hidden_dims + (self.num_classes,)

    @property
    def num_layers(self):
        return len(self.hidden_dims) + 1

    def parameter_count(self):
        dims = self.layer_dims
        return sum((dims[i] + 1) * dims[i + 1] for i in range(len(dims) - 1))


@dataclass
class Network:
    arch: ArchSpec
    params: np.ndarray

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=np.float64)
        if self.params.shape != (self.arch.parameter_count(),):
            raise ValueError(
                f"params length {self.params.size} != {self.arch.parameter_count()}"
            )

    def copy(self):
        return Network(self.arch, self.params.copy())

    def layers(self):
        """Yield (W, b) views into the flat parameter vector, layer by layer."""
        dims = self.arch.layer_dims
        off = 0
        for i in range(len(dims) - 1):
            fi, fo = dims[i], dims[i + 1]
            w = self.params[off:off + fi * fo].reshape(fi, fo)
            off += fi * fo
            b = self.params[off:off + fo]
            off += fo
            yield w, b


def init_network(arch: ArchSpec, seed: int) -> Network:
    """Seeded init: weights uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), biases zero."""
    rng = np.random.default_rng(seed)
    dims = arch.layer_dims
    chunks = []
    for i in range(len(dims) - 1):
        fi, fo = dims[i], dims[i + 1]
        bound = 1.0 / np.sqrt(fi)
        chunks.append(rng.uniform(-bound, bound, size=fi * fo))
        chunks.append(np.zeros(fo))
    return Network(arch, np.concatenate(chunks))


def _forward_cached(net: Network, features: np.ndarray):
    """Forward pass keeping per-layer inputs and pre-activations for backprop."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.arch.input_dim:
        raise ValueError(
            f"features must be N x {net.arch.input_dim}, got {x.shape}"
        )
    layer_inputs = []
    pre_acts = []
    a = x
    layer_list = list(net.layers())
    for i, (w, b) in enumerate(layer_list):
        layer_inputs.append(a)
        z = a @ w + b
        pre_acts.append(z)
        a = np.maximum(z, 0.0) if i < len(layer_list) - 1 else z
    return a, layer_inputs, pre_acts


def forward(net: Network, features: np.ndarray) -> np.ndarray:
    """Logits for a batch of feature rows."""
    logits, _, _ = _forward_cached(net, features)
    return logits


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction; accepts a vector or a matrix."""
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("softmax input must be finite")
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _onehot(labels, num_classes):
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError("labels must be a 1-d integer array")
    if np.any(labels < 0) or np.any(labels >= num_classes):
        raise ValueError("label out of range")
    y = np.zeros((labels.size, num_classes))
    y[np.arange(labels.size), labels] = 1.0
    return y


def cross_entropy(logits: np.ndarray, labels) -> float:
    """Mean over the batch of -log softmax probability of the true class."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    if logits.shape[0] != labels.shape[0]:
        raise ValueError("logits and labels disagree on batch size")
    if np.any(labels < 0) or np.any(labels >= logits.shape[1]):
        raise ValueError("label out of range")
    q = softmax(logits)
    picked = q[np.arange(labels.size), labels]
    return float(-np.mean(np.log(np.maximum(picked, LOG_FLOOR))))


def kl_divergence(teacher_logits: np.ndarray, student_logits: np.ndarray) -> float:
    """Mean row-wise KL(softmax(teacher) || softmax(student)); teacher is constant."""
    t = np.asarray(teacher_logits, dtype=np.float64)
    s = np.asarray(student_logits, dtype=np.float64)
    if t.shape != s.shape:
        raise ValueError("teacher and student logits must have identical shapes")
    return kl_from_probs(softmax(t), softmax(s))


def kl_from_probs(teacher_probs: np.ndarray, student_probs: np.ndarray) -> float:
    """Mean row-wise KL between probability rows; zero teacher entries contribute 0."""
    p = np.asarray(teacher_probs, dtype=np.float64)
    q = np.asarray(student_probs, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("probability arrays must have identical shapes")
    ratio = np.log(np.maximum(p, LOG_FLOOR)) - np.log(np.maximum(q, LOG_FLOOR))
    per_row = np.sum(np.where(p > 0.0, p * ratio, 0.0), axis=-1)
    return float(np.mean(per_row))


def loss_value(net: Network, features, labels=None, teacher_probs=None) -> float:
    """Scalar training loss: CE (if labels given) + KL from teacher (if given)."""
    logits = forward(net, features)
    total = 0.0
    if labels is not None:
        total += cross_entropy(logits, labels)
    if teacher_probs is not None:
        total += kl_from_probs(teacher_probs, softmax(logits))
    return total


def loss_gradient(net: Network, features, labels=None, teacher_probs=None) -> np.ndarray:
    """Flat gradient of loss_value w.r.t. net.params.

    At the logits layer the per-row gradient is (q - onehot) + (q - teacher),
    averaged over the batch, then backpropagated through the ReLU stack.
    """
    if labels is None and teacher_probs is None:
        raise ValueError("need labels, teacher_probs, or both")
    logits, layer_inputs, pre_acts = _forward_cached(net, features)
    n, c = logits.shape
    q = softmax(logits)
    delta = np.zeros_like(q)
    if labels is not None:
        delta += q - _onehot(labels, c)
    if teacher_probs is not None:
        p = np.asarray(teacher_probs, dtype=np.float64)
        if p.shape != q.shape:
            raise ValueError("teacher_probs shape mismatch")
        delta += q - p
    delta /= n

    layer_list = list(net.layers())
    grads = [None] * len(layer_list)
    for i in range(len(layer_list) - 1, -1, -1):
        w, _ = layer_list[i]
        gw = layer_inputs[i].T @ delta
        gb = delta.sum(axis=0)
        grads[i] = (gw, gb)
        if i > 0:
            delta = (delta @ w.T) * (pre_acts[i - 1] > 0.0)
    return np.concatenate([np.concatenate([gw.ravel(), gb]) for gw, gb in grads])


def sgd_step(net: Network, grad: np.ndarray, lr: float) -> Network:
    """One vanilla gradient step; rejects non-finite gradients."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != net.params.shape:
        raise ValueError("gradient length mismatch")
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    if not np.all(np.isfinite(grad)):
        raise DivergenceError("non-finite gradient")
    return Network(net.arch, net.params - lr * grad)


def evaluate(net: Network, features, labels):
    """Top-1 accuracy (argmax ties to the lowest class index) and mean CE loss."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if features.shape[0] == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    logits = forward(net, features)
    pred = np.argmax(logits, axis=1)
    accuracy = float(np.mean(pred == labels))
    return accuracy, cross_entropy(logits, labels)
