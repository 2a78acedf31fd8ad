"""From-scratch feedforward network: affine layers, ReLU, softmax cross-entropy.

The one unusual requirement is exact per-example gradients, needed upstream
for norm clipping. Weight gradients are outer products of backpropagated
deltas and cached activations, so `per_example_backprop_terms` returns those
two factors per layer (cheap, vectorised over the batch) and
`per_example_gradients` materialises the full (batch, num_params) matrix in
the documented flat layout: layer-major, row-major weights, then bias.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import NoiseSource
from .errors import EmptyDataset, ShapeMismatch

__all__ = [
    "LabeledExample",
    "MlpParams",
    "ForwardTrace",
    "forward",
    "loss",
    "per_example_gradients",
    "per_example_backprop_terms",
    "evaluate",
]


@dataclass(frozen=True)
class LabeledExample:
    """One feature vector with its class index."""

    features: np.ndarray
    label: int


@dataclass(frozen=True)
class ForwardTrace:
    """Backpropagation cache for one example: inputs and pre-activations per layer."""

    pre_activations: tuple[np.ndarray, ...]
    activations: tuple[np.ndarray, ...]  # activations[0] is the input


class MlpParams:
    """Weights and biases of a dense ReLU network, treated as immutable.

    layers[i] is (weight matrix of shape (out, in), bias of shape (out,)).
    Hidden layers use ReLU; the final layer is linear (logits).
    """

    def __init__(self, layers):
        layers = tuple((np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64))
                       for w, b in layers)
        if not layers:
            raise ShapeMismatch("at least one layer is required")
        for i, (w, b) in enumerate(layers):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ShapeMismatch(f"layer {i}: weight {w.shape} and bias {b.shape} disagree")
            if i and layers[i - 1][0].shape[0] != w.shape[1]:
                raise ShapeMismatch(
                    f"layer {i} expects {w.shape[1]} inputs but layer {i - 1} "
                    f"produces {layers[i - 1][0].shape[0]}"
                )
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ShapeMismatch(f"layer {i} contains non-finite entries")
        self.layers = layers

    @classmethod
    def init_glorot(cls, dims, rng: NoiseSource) -> "MlpParams":
        """Seeded uniform init in +-sqrt(6/(in+out)) per layer; zero biases."""
        layers = []
        for fan_in, fan_out in zip(dims, dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            w = (rng.uniforms(fan_out * fan_in) * 2.0 - 1.0) * limit
            layers.append((w.reshape(fan_out, fan_in), np.zeros(fan_out)))
        return cls(layers)

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.layers[0][0].shape[1],) + tuple(w.shape[0] for w, _ in self.layers)

    @property
    def num_params(self) -> int:
        return sum(w.size + b.size for w, b in self.layers)

    def layer_sizes(self) -> tuple[int, ...]:
        """Flat parameter count of each layer block (weights then bias)."""
        return tuple(w.size + b.size for w, b in self.layers)

    def flatten(self) -> np.ndarray:
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in self.layers])

    def add_scaled_blocks(self, blocks, scale: float) -> "MlpParams":
        """New params with each layer block (flat weights then bias) added at `scale`."""
        new_layers = []
        for (w, b), block in zip(self.layers, blocks):
            dw = block[: w.size].reshape(w.shape)
            db = block[w.size:]
            new_layers.append((w + scale * dw, b + scale * db))
        return MlpParams(new_layers)


def forward(params: MlpParams, x: np.ndarray) -> tuple[np.ndarray, ForwardTrace]:
    """Logits and full trace for a single example."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.layers[0][0].shape[1],):
        raise ShapeMismatch(
            f"input shape {x.shape} does not match first layer ({params.layers[0][0].shape[1]},)"
        )
    activations = [x]
    pre = []
    a = x
    last = len(params.layers) - 1
    for i, (w, b) in enumerate(params.layers):
        z = w @ a + b
        pre.append(z)
        a = z if i == last else np.maximum(z, 0.0)
        activations.append(a)
    return a, ForwardTrace(tuple(pre), tuple(activations))


def loss(logits: np.ndarray, label: int) -> float:
    """Softmax cross-entropy -log softmax(logits)[label], max-stabilised."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max()
    return float(np.log(np.exp(shifted).sum()) - shifted[label])


def _as_arrays(batch) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(batch, tuple) and len(batch) == 2:
        x, y = batch
        return np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.int64)
    x = np.stack([ex.features for ex in batch])
    y = np.array([ex.label for ex in batch], dtype=np.int64)
    return x, y


def _forward_batch(params: MlpParams, x: np.ndarray):
    pre = []
    acts = [x]
    a = x
    last = len(params.layers) - 1
    for i, (w, b) in enumerate(params.layers):
        z = a @ w.T + b
        pre.append(z)
        a = z if i == last else np.maximum(z, 0.0)
        acts.append(a)
    return a, pre, acts


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def per_example_backprop_terms(params: MlpParams, batch):
    """Per-layer (delta, input activation) pairs, vectorised over the batch.

    Example i's gradient for layer l is outer(delta[l][i], act[l][i]) for the
    weights and delta[l][i] for the bias. Returned in layer order; both
    arrays have the batch as the leading axis.
    """
    x, y = _as_arrays(batch)
    if x.ndim != 2 or x.shape[1] != params.layers[0][0].shape[1]:
        raise ShapeMismatch(
            f"batch features {x.shape} do not match first layer "
            f"({params.layers[0][0].shape[1]} inputs)"
        )
    logits, pre, acts = _forward_batch(params, x)
    delta = _softmax_rows(logits)
    delta[np.arange(len(y)), y] -= 1.0
    terms = [None] * len(params.layers)
    for i in range(len(params.layers) - 1, -1, -1):
        terms[i] = (delta, acts[i])
        if i:
            delta = (delta @ params.layers[i][0]) * (pre[i - 1] > 0.0)
    return terms


def per_example_gradients(params: MlpParams, batch) -> np.ndarray:
    """Exact loss gradient of every example, one flat row per example.

    Row layout: layer-major, each layer as row-major weights then bias.
    """
    terms = per_example_backprop_terms(params, batch)
    n = terms[0][0].shape[0]
    out = np.empty((n, params.num_params))
    offset = 0
    for (w, _), (delta, act) in zip(params.layers, terms):
        k = w.size
        np.einsum("bo,bi->boi", delta, act, out=out[:, offset : offset + k].reshape(
            n, w.shape[0], w.shape[1]
        ))
        out[:, offset + k : offset + k + w.shape[0]] = delta
        offset += k + w.shape[0]
    return out


def evaluate(params: MlpParams, dataset) -> float:
    """Classification accuracy by argmax logits; ties go to the lowest class."""
    x, y = _dataset_arrays(dataset)
    if len(y) == 0:
        raise EmptyDataset("cannot evaluate on an empty dataset")
    logits, _, _ = _forward_batch(params, x)
    return float(np.mean(np.argmax(logits, axis=1) == y))


def _dataset_arrays(dataset) -> tuple[np.ndarray, np.ndarray]:
    if hasattr(dataset, "features") and hasattr(dataset, "labels"):
        return np.asarray(dataset.features, dtype=np.float64), np.asarray(dataset.labels)
    return _as_arrays(dataset)
