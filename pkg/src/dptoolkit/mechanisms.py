"""Sensitivity control and noise injection for summed per-example vectors.

`clip_l2` bounds each example's contribution; `sanitize` releases the noisy
scaled sum (sum of clipped vectors + N(0, sigma^2 C^2 I)) / L. The division
uses the nominal lot size L, not the realised sample size, which is what
keeps the sensitivity argument valid under probability-q sampling.

All reductions run through the fixed pairwise tree in dptoolkit._core, so
results are bit-reproducible regardless of backend or parallel scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _core
from ._rng import NoiseSource
from .errors import DomainError, NonFiniteInput

__all__ = ["ClipConfig", "NoiseSource", "clip_l2", "sanitize"]


@dataclass(frozen=True)
class ClipConfig:
    """Per-layer l2 norm bounds. A length-1 tuple applies one bound globally.

    +inf is the accepted "no clipping" sentinel for non-private baselines.
    """

    thresholds: tuple[float, ...]

    def __post_init__(self):
        if not self.thresholds:
            raise DomainError("at least one clipping threshold is required")
        if any(not c > 0.0 or math.isnan(c) for c in self.thresholds):
            raise DomainError(f"thresholds must be positive, got {self.thresholds}")

    @classmethod
    def uniform(cls, c: float, num_layers: int = 1) -> "ClipConfig":
        return cls((float(c),) * num_layers)


def clip_l2(g: np.ndarray, c: float) -> np.ndarray:
    """Scale g to l2 norm at most c: g / max(1, ||g||_2 / c).

    Direction is preserved; vectors already within the bound pass through
    unchanged. c = +inf disables clipping.
    """
    g = np.asarray(g, dtype=np.float64)
    if not np.isfinite(g).all():
        raise NonFiniteInput("gradient contains NaN or infinity")
    if not c > 0.0 or math.isnan(c):
        raise DomainError(f"clipping threshold must be positive, got {c}")
    if math.isinf(c):
        return g.copy()
    norm = math.sqrt(float(_core.row_sq_norms(g.reshape(1, -1))[0]))
    if norm <= c:
        return g.copy()
    return g * (c / norm)


def sanitize(
    per_example_grads: np.ndarray,
    c: float,
    sigma: float,
    lot_size: int,
    noise: NoiseSource,
) -> np.ndarray:
    """Noisy scaled sum of clipped per-example vectors.

    per_example_grads is a (num_examples, dim) array; an empty lot must be
    passed as shape (0, dim) so the output dimension is known. One Gaussian
    draw of `dim` values is consumed from `noise` per call whenever
    sigma > 0; with sigma = 0 the stream is left untouched.
    """
    g = np.asarray(per_example_grads, dtype=np.float64)
    if g.ndim != 2:
        raise DomainError(
            f"expected a (num_examples, dim) array, got shape {g.shape}"
        )
    if g.size and not np.isfinite(g).all():
        raise NonFiniteInput("per-example gradients contain NaN or infinity")
    if not c > 0.0 or math.isnan(c):
        raise DomainError(f"clipping threshold must be positive, got {c}")
    if sigma < 0.0 or math.isnan(sigma):
        raise DomainError(f"noise multiplier must be >= 0, got {sigma}")
    if math.isinf(c) and sigma > 0.0:
        raise DomainError("an infinite clipping threshold admits no finite noise scale")
    if lot_size < 1:
        raise DomainError(f"nominal lot size must be >= 1, got {lot_size}")

    total, _ = _core.clipped_fold(g, c)
    if sigma > 0.0:
        total = total + noise.normals(g.shape[1], sigma * c)
    return total / lot_size
