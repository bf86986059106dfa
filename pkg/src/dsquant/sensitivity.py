"""Per-sample quantization sensitivity from gradient deviation.

The score of a sample is the cosine distance between the model-parameter
gradients computed on the original values and on the values after a
quantize/dequantize round trip at a probe bit-width:

    S = 1 - <g_orig, g_quant> / (||g_orig|| * ||g_quant||)

so S lies in [0, 2], is invariant to positive rescaling of either
gradient, and is 0 when quantization leaves the gradient unchanged. If
either gradient norm falls below 1e-12 the sample is treated as
insensitive (S = 0).

Any object with gradient(values, label), features(values),
parameter_count and feature_dim works as the gradient oracle;
LogisticModel is the built-in closed-form reference.
"""

from __future__ import annotations

import numpy as np

from .quantizer import dequantize_sample, quantize_sample

NORM_FLOOR = 1e-12

DEFAULT_PROBE_BIT_WIDTH = 4


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


class LogisticModel:
    """Multinomial logistic regression with exact analytic gradients.

    For logits u = W d + beta and p = softmax(u), the cross-entropy
    gradient is dL/dW = (p - onehot(y)) d^T and dL/dbeta = p - onehot(y).
    The feature map is the pre-softmax logits vector.
    """

    def __init__(self, weights, bias):
        weights = np.ascontiguousarray(weights, dtype=np.float64)
        bias = np.ascontiguousarray(bias, dtype=np.float64)
        if weights.ndim != 2 or bias.shape != (weights.shape[0],):
            raise ValueError("weights must be (C, D) with bias (C,)")
        self.weights = weights
        self.bias = bias

    @classmethod
    def zeros(cls, num_classes: int, input_dim: int) -> "LogisticModel":
        return cls(np.zeros((num_classes, input_dim)), np.zeros(num_classes))

    @classmethod
    def seeded(cls, num_classes: int, input_dim: int, seed: int,
               init_scale: float = 0.01) -> "LogisticModel":
        rng = np.random.default_rng(seed)
        weights = init_scale * rng.standard_normal((num_classes, input_dim))
        return cls(weights, np.zeros(num_classes))

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def input_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def parameter_count(self) -> int:
        return self.weights.size + self.bias.size

    @property
    def feature_dim(self) -> int:
        return self.num_classes

    def logits(self, values) -> np.ndarray:
        return np.asarray(values, dtype=np.float64) @ self.weights.T + self.bias

    def features(self, values) -> np.ndarray:
        return self.logits(values)

    def probabilities(self, values) -> np.ndarray:
        return _softmax(self.logits(values))

    def loss(self, values, label: int) -> float:
        p = self.probabilities(values)
        return float(-np.log(max(p[label], 1e-300)))

    def gradient(self, values, label: int) -> np.ndarray:
        """Flat gradient [dW.ravel(), dbias] of the cross-entropy loss."""
        values = np.asarray(values, dtype=np.float64)
        residual = self.probabilities(values)
        residual[label] -= 1.0
        return np.concatenate([np.outer(residual, values).ravel(), residual])

    def copy(self) -> "LogisticModel":
        return LogisticModel(self.weights.copy(), self.bias.copy())


def sensitivity_score(g_orig, g_quant) -> float:
    """Cosine distance between two gradients, 0 if either is near zero."""
    g_orig = np.asarray(g_orig, dtype=np.float64)
    g_quant = np.asarray(g_quant, dtype=np.float64)
    if g_orig.shape != g_quant.shape:
        raise ValueError("gradient length mismatch")
    if np.array_equal(g_orig, g_quant):
        return 0.0  # exact fidelity must score exactly zero
    n1 = np.linalg.norm(g_orig)
    n2 = np.linalg.norm(g_quant)
    if n1 < NORM_FLOOR or n2 < NORM_FLOOR:
        return 0.0
    cosine = np.clip(np.dot(g_orig, g_quant) / (n1 * n2), -1.0, 1.0)
    return float(1.0 - cosine)


def feature_degradation(oracle, values, values_tilde) -> float:
    """Euclidean distance between feature maps of a sample and its proxy."""
    a = np.asarray(values)
    b = np.asarray(values_tilde)
    if a.shape != b.shape:
        raise ValueError("shape mismatch")
    return float(np.linalg.norm(oracle.features(a) - oracle.features(b)))


def score_dataset(dataset, oracle, probe_bit_width: int = DEFAULT_PROBE_BIT_WIDTH) -> np.ndarray:
    """Score every sample; output index i corresponds to sample i."""
    scores = np.zeros(len(dataset), dtype=np.float64)
    for i in range(len(dataset)):
        values, label = dataset.sample(i)
        probed = dequantize_sample(quantize_sample(values, probe_bit_width, label))
        scores[i] = sensitivity_score(
            oracle.gradient(values, label), oracle.gradient(probed, label)
        )
    return scores


def gradient_check(model: LogisticModel, values, label: int, step: float) -> float:
    """Max deviation of the analytic gradient from central differences.

    Returns the largest elementwise difference normalized by the
    gradient's own max magnitude (the loss is smooth, so tiny entries
    would otherwise dominate through finite-difference noise).
    """
    if step <= 0:
        raise ValueError("step must be positive")
    analytic = model.gradient(values, label)
    numeric = np.zeros_like(analytic)
    n_w = model.weights.size
    for k in range(analytic.size):
        probe = model.copy()
        flat = probe.weights.ravel() if k < n_w else probe.bias
        idx = k if k < n_w else k - n_w
        orig = flat[idx]
        flat[idx] = orig + step
        up = probe.loss(values, label)
        flat[idx] = orig - step
        down = probe.loss(values, label)
        numeric[k] = (up - down) / (2.0 * step)
    denom = max(float(np.abs(analytic).max()), NORM_FLOOR)
    return float(np.abs(numeric - analytic).max() / denom)


def write_scores(scores, path) -> None:
    """One `index<TAB>score` line per sample, 9 significant digits."""
    with open(path, "w") as fh:
        for i, s in enumerate(scores):
            fh.write(f"{i}\t{s:.9g}\n")


def read_scores(path) -> np.ndarray:
    """Read a score file back into an index-ordered array."""
    indices, values = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            idx, val = line.split("\t")
            indices.append(int(idx))
            values.append(float(val))
    if indices != list(range(len(indices))):
        raise ValueError(f"{path}: score indices must be 0..N-1 in order")
    return np.asarray(values, dtype=np.float64)
