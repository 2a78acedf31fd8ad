"""Differentially private SGD: lot sampling, clipped noisy updates, accounting.

Each optimizer step samples a lot by independent inclusion with probability
q = L/N, computes per-example gradients, clips them per layer, adds one
Gaussian draw calibrated to sigma * C, divides by the nominal lot size L and
descends. The accountant records one sampled Gaussian step per optimizer
step (the per-layer blocks form one joint release), and recording happens
before the gradient is used, so no unaccounted release can occur. Training
stops before any step whose cost would push the ledger past the target
budget.

Two equivalent gradient paths exist. The default "fused" path never
materialises per-example gradients: per-layer norms come from the factored
identity ||outer(d, a)||_F = ||d|| * ||a|| and the clipped sum collapses to
one matrix product per layer. The "composed" path materialises the
(lot, params) matrix and feeds it through mechanisms.sanitize; it is the
literal reference semantics. Both consume the noise stream identically and
agree to floating-point accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import nn
from ._rng import NoiseSource
from .accountant import (
    DEFAULT_INTEGRATION,
    IntegrationConfig,
    LogMomentLedger,
    SampledGaussianStep,
    accumulate,
    get_epsilon,
)
from .errors import ConfigError, DomainError, EmptySample
from .mechanisms import sanitize
from .nn import MlpParams

__all__ = [
    "TrainingConfig",
    "EpochRecord",
    "TrainingReport",
    "sample_lot",
    "dp_sgd_step",
    "train",
    "clip_norm_diagnostic",
]

REPORT_COLUMNS = ("epoch", "step", "train_acc", "test_acc", "epsilon", "delta")


@dataclass(frozen=True)
class TrainingConfig:
    """Hyperparameters of one DP-SGD run.

    clip_c is either one bound applied to every layer or a per-layer tuple;
    set whole_vector_clip to bound the full concatenated gradient instead
    (scalar clip_c only). noise_sigma = 0 with clip_c = inf is the
    non-private baseline; nothing is accounted and epsilon is reported as
    infinity.
    """

    lot_size: int
    dataset_size: int
    noise_sigma: float
    clip_c: float | tuple[float, ...]
    lr_initial: float = 0.1
    lr_final: float = 0.052
    lr_decay_epochs: float = 10.0
    max_epochs: float = 10.0
    hidden_dims: tuple[int, ...] = (1000,)
    whole_vector_clip: bool = False
    target_epsilon: float | None = None
    target_delta: float | None = None
    report_delta: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.lot_size <= self.dataset_size:
            raise ConfigError(
                f"need 1 <= lot size <= dataset size, got {self.lot_size} of {self.dataset_size}"
            )
        if self.noise_sigma < 0.0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        clip = self.clip_c
        thresholds = (clip,) if isinstance(clip, (int, float)) else tuple(clip)
        if any(not c > 0.0 or math.isnan(c) for c in thresholds):
            raise ConfigError(f"clipping thresholds must be positive, got {clip}")
        if self.whole_vector_clip and len(thresholds) != 1:
            raise ConfigError("whole-vector clipping takes a single threshold")
        if self.noise_sigma > 0.0 and any(math.isinf(c) for c in thresholds):
            raise ConfigError("noise_sigma > 0 requires finite clipping thresholds")
        if not self.lr_initial >= self.lr_final > 0.0:
            raise ConfigError(
                f"need lr_initial >= lr_final > 0, got {self.lr_initial}, {self.lr_final}"
            )
        if self.lr_decay_epochs < 0.0 or self.max_epochs < 0.0:
            raise ConfigError("lr_decay_epochs and max_epochs must be >= 0")
        if self.target_epsilon is not None:
            if self.target_epsilon <= 0.0:
                raise ConfigError("target_epsilon must be positive")
            if self.target_delta is None or not 0.0 < self.target_delta < 1.0:
                raise ConfigError("a target budget needs target_delta in (0, 1)")
            if self.noise_sigma == 0.0:
                raise ConfigError("a finite privacy target requires noise_sigma > 0")

    @property
    def q(self) -> float:
        return self.lot_size / self.dataset_size

    @property
    def lots_per_epoch(self) -> int:
        return max(1, round(self.dataset_size / self.lot_size))

    def layer_thresholds(self, num_layers: int) -> tuple[float, ...]:
        clip = self.clip_c
        if isinstance(clip, (int, float)):
            return (float(clip),) * num_layers
        if len(clip) != num_layers:
            raise ConfigError(
                f"{len(clip)} clipping thresholds for {num_layers} layers"
            )
        return tuple(float(c) for c in clip)

    def learning_rate(self, step_index: int) -> float:
        if self.lr_decay_epochs == 0.0:
            return self.lr_final
        epoch = step_index / self.lots_per_epoch
        frac = min(1.0, epoch / self.lr_decay_epochs)
        return self.lr_initial + (self.lr_final - self.lr_initial) * frac


@dataclass(frozen=True)
class EpochRecord:
    epoch: float
    step: int
    train_acc: float
    test_acc: float
    epsilon: float
    delta: float


@dataclass
class TrainingReport:
    """Per-epoch metrics plus why training stopped ('budget' or 'epochs')."""

    records: list[EpochRecord] = field(default_factory=list)
    stop_reason: str = "epochs"

    def validate(self) -> None:
        eps = [r.epsilon for r in self.records]
        if any(b < a for a, b in zip(eps, eps[1:])):
            raise DomainError("epsilon must be non-decreasing across records")

    def csv_rows(self) -> list[tuple]:
        return [
            (r.epoch, r.step, r.train_acc, r.test_acc, r.epsilon, r.delta)
            for r in self.records
        ]


def sample_lot(n: int, q: float, rng: NoiseSource) -> np.ndarray:
    """Indices of a lot drawn by independent inclusion with probability q."""
    if not 0.0 <= q <= 1.0:
        raise DomainError(f"sampling probability must be in [0, 1], got {q}")
    if q == 0.0:
        return np.empty(0, dtype=np.int64)
    return np.nonzero(rng.uniforms(n) < q)[0].astype(np.int64)


def _layer_noise(params, config, noise):
    """Per-layer Gaussian vectors, consuming the stream exactly like the
    composed path: one draw over the full flat vector under whole-vector
    clipping, one draw per layer block otherwise."""
    sizes = params.layer_sizes()
    sigma = config.noise_sigma
    if sigma == 0.0:
        return [np.zeros(size) for size in sizes]
    thresholds = config.layer_thresholds(len(sizes))
    if config.whole_vector_clip:
        flat = noise.normals(sum(sizes), sigma * thresholds[0])
        offsets = np.cumsum((0,) + sizes)
        return [flat[offsets[i] : offsets[i + 1]] for i in range(len(sizes))]
    return [noise.normals(size, sigma * c) for size, c in zip(sizes, thresholds)]


def _noisy_layer_blocks(params, batch, config, noise):
    """Sanitised per-layer update blocks (flat weights then bias, already / L)."""
    thresholds = config.layer_thresholds(len(params.layers))
    lot = config.lot_size
    x, y = batch
    if len(y) == 0:
        sums = [np.zeros(size) for size in params.layer_sizes()]
    else:
        terms = nn.per_example_backprop_terms(params, batch)
        delta_sq = [(d * d).sum(axis=1) for d, _ in terms]
        act_sq = [(a * a).sum(axis=1) for _, a in terms]
        layer_sq_norms = [ds * (asq + 1.0) for ds, asq in zip(delta_sq, act_sq)]

        if config.whole_vector_clip:
            total = np.sqrt(np.sum(layer_sq_norms, axis=0))
            scales = [
                np.minimum(1.0, thresholds[0] / np.maximum(total, 1e-300))
            ] * len(terms)
        else:
            scales = [
                np.minimum(1.0, c / np.maximum(np.sqrt(sq), 1e-300))
                for c, sq in zip(thresholds, layer_sq_norms)
            ]

        sums = []
        for (delta, act), s in zip(terms, scales):
            scaled = delta * s[:, None]
            sums.append(np.concatenate([(scaled.T @ act).ravel(), scaled.sum(axis=0)]))

    return [(g + z) / lot for g, z in zip(sums, _layer_noise(params, config, noise))]


def _composed_layer_blocks(params, batch, config, noise):
    """Reference path: materialised per-example gradients through sanitize."""
    thresholds = config.layer_thresholds(len(params.layers))
    x, y = batch
    num_examples = len(y)
    if num_examples:
        grads = nn.per_example_gradients(params, batch)
    else:
        grads = np.zeros((0, params.num_params))
    if config.whole_vector_clip:
        flat = sanitize(grads, thresholds[0], config.noise_sigma, config.lot_size, noise)
        sizes = params.layer_sizes()
        offsets = np.cumsum((0,) + sizes)
        return [flat[offsets[i] : offsets[i + 1]] for i in range(len(sizes))]
    blocks = []
    offset = 0
    for (w, b), c in zip(params.layers, thresholds):
        size = w.size + b.size
        blocks.append(
            sanitize(grads[:, offset : offset + size], c, config.noise_sigma,
                     config.lot_size, noise)
        )
        offset += size
    return blocks


def dp_sgd_step(
    params: MlpParams,
    lot_batch,
    config: TrainingConfig,
    noise: NoiseSource,
    ledger: LogMomentLedger,
    step_index: int = 0,
    integration: IntegrationConfig = DEFAULT_INTEGRATION,
    fused: bool = True,
) -> tuple[MlpParams, LogMomentLedger]:
    """One descent step on a sampled lot, with its privacy cost recorded first.

    With noise_sigma = 0 the run is non-private and the ledger passes through
    unchanged. Returns the updated parameters and ledger; inputs are not
    mutated.
    """
    if config.noise_sigma > 0.0:
        ledger = accumulate(
            ledger, SampledGaussianStep(config.q, config.noise_sigma), integration
        )
    batch = nn._as_arrays(lot_batch)
    builder = _noisy_layer_blocks if fused else _composed_layer_blocks
    blocks = builder(params, batch, config, noise)
    lr = config.learning_rate(step_index)
    return params.add_scaled_blocks(blocks, -lr), ledger


def train(
    train_dataset,
    test_dataset,
    config: TrainingConfig,
    initial_ledger: LogMomentLedger | None = None,
    integration: IntegrationConfig = DEFAULT_INTEGRATION,
    fused: bool = True,
    initial_params: MlpParams | None = None,
) -> tuple[MlpParams, TrainingReport]:
    """Run DP-SGD until the epoch limit or until the budget would be exceeded.

    The ledger is extended before each step is taken; a step whose cost would
    push epsilon past the target is never applied. Pass `initial_ledger` to
    account for earlier releases (for example a private PCA of the inputs).
    """
    features = train_dataset.features
    labels = train_dataset.labels
    n = len(train_dataset)
    if config.dataset_size != n:
        raise ConfigError(
            f"config.dataset_size {config.dataset_size} != dataset length {n}"
        )

    root = NoiseSource(config.seed)
    init_rng, lot_rng, noise_rng = root.child(1), root.child(2), root.child(3)
    if initial_params is None:
        dims = (train_dataset.feature_dim, *config.hidden_dims, train_dataset.num_classes)
        params = MlpParams.init_glorot(dims, init_rng)
    else:
        params = initial_params

    ledger = initial_ledger if initial_ledger is not None else LogMomentLedger()
    private = config.noise_sigma > 0.0
    report_delta = (
        config.target_delta if config.target_delta is not None else config.report_delta
    )
    step_template = (
        SampledGaussianStep(config.q, config.noise_sigma) if private else None
    )

    max_steps = round(config.max_epochs * config.lots_per_epoch)
    report = TrainingReport()
    stop_reason = "epochs"

    def current_epsilon() -> float:
        if not private:
            return math.inf
        return get_epsilon(ledger, report_delta).epsilon

    def record(steps_done: int) -> None:
        report.records.append(
            EpochRecord(
                epoch=steps_done / config.lots_per_epoch,
                step=steps_done,
                train_acc=nn.evaluate(params, train_dataset),
                test_acc=nn.evaluate(params, test_dataset),
                epsilon=current_epsilon(),
                delta=report_delta if private else 0.0,
            )
        )

    steps_done = 0
    for t in range(max_steps):
        if private:
            tentative = accumulate(ledger, step_template, integration)
            if (
                config.target_epsilon is not None
                and get_epsilon(tentative, config.target_delta).epsilon
                > config.target_epsilon
            ):
                stop_reason = "budget"
                break
            ledger = tentative
        idx = sample_lot(n, config.q, lot_rng)
        batch = (features[idx], labels[idx])
        builder = _noisy_layer_blocks if fused else _composed_layer_blocks
        blocks = builder(params, batch, config, noise_rng)
        params = params.add_scaled_blocks(blocks, -config.learning_rate(t))
        steps_done = t + 1
        if steps_done % config.lots_per_epoch == 0:
            record(steps_done)

    if steps_done % config.lots_per_epoch != 0:
        record(steps_done)
    report.stop_reason = stop_reason
    report.validate()
    return params, report


def clip_norm_diagnostic(
    params: MlpParams, dataset, sample_size: int, rng: NoiseSource
) -> float:
    """Median unclipped per-example gradient norm over a seeded sample.

    Offline advisory for choosing the clipping threshold; the sample is drawn
    without replacement.
    """
    n = len(dataset)
    if sample_size < 1 or n == 0:
        raise EmptySample("sample_size must be >= 1 on a non-empty dataset")
    if sample_size > n:
        raise EmptySample(f"sample_size {sample_size} exceeds dataset size {n}")
    order = np.argsort(rng.uniforms(n), kind="stable")
    idx = order[:sample_size]
    grads = nn.per_example_gradients(params, (dataset.features[idx], dataset.labels[idx]))
    norms = np.sqrt((grads * grads).sum(axis=1))
    return float(np.median(norms))
