"""Differentially private PCA of unit-normalised sample rows.

A probability-`sample_fraction` subset of the examples is drawn, each row
normalised to unit l2 norm (zero rows skipped) to form A, and symmetric
Gaussian noise N(0, sigma_p^2) is added to the upper triangle of A^T A and
mirrored. The top-k eigenvectors of the noisy covariance give the
projection. One changed example moves A^T A by at most 1 in Frobenius norm,
which is the sensitivity the noise is calibrated against.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _core
from ._rng import NoiseSource
from .errors import ConvergenceWarning, DomainError, RankDeficiencyWarning, ShapeMismatch

JACOBI_TOL = 1e-10
JACOBI_MAX_SWEEPS = 100


@dataclass(frozen=True)
class ProjectionMatrix:
    """k orthonormal direction columns of input dimension d; shape (d, k)."""

    columns: np.ndarray

    def __post_init__(self):
        gram = self.columns.T @ self.columns
        if not np.allclose(gram, np.eye(self.columns.shape[1]), atol=1e-8):
            raise DomainError("projection columns are not orthonormal within 1e-8")

    @property
    def input_dim(self) -> int:
        return self.columns.shape[0]

    @property
    def k(self) -> int:
        return self.columns.shape[1]


def symmetric_eigh(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and eigenvector columns by cyclic Jacobi."""
    a = np.array(matrix, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    off, sweeps = _core.jacobi_sweeps(a, v, JACOBI_TOL, JACOBI_MAX_SWEEPS)
    if off > JACOBI_TOL:
        warnings.warn(
            f"Jacobi stopped after {sweeps} sweeps with off-diagonal norm {off:.2e}",
            ConvergenceWarning,
            stacklevel=2,
        )
    values = np.diag(a).copy()
    order = np.argsort(-values, kind="stable")
    return values[order], v[:, order]


def dp_pca(
    examples,
    k: int,
    sigma_p: float,
    sample_fraction: float,
    rng: NoiseSource,
) -> ProjectionMatrix:
    """Top-k principal directions of the noisy covariance of sampled rows.

    `examples` is a (n, d) array or anything with a `.features` attribute.
    Deterministic under the rng state; the sign of each direction is fixed by
    making its largest-magnitude entry positive.
    """
    x = np.asarray(getattr(examples, "features", examples), dtype=np.float64)
    if x.ndim != 2:
        raise ShapeMismatch(f"expected (n, d) examples, got shape {x.shape}")
    n, d = x.shape
    if not 1 <= k <= d:
        raise DomainError(f"target dimension {k} must lie in [1, {d}]")
    if sigma_p < 0.0:
        raise DomainError(f"sigma_p must be >= 0, got {sigma_p}")
    if not 0.0 < sample_fraction <= 1.0:
        raise DomainError(f"sample_fraction must be in (0, 1], got {sample_fraction}")

    mask = rng.uniforms(n) < sample_fraction
    rows = x[mask]
    norms = np.sqrt((rows**2).sum(axis=1))
    rows = rows[norms > 0.0]
    rows = rows / norms[norms > 0.0][:, None]
    cov = rows.T @ rows

    if sigma_p > 0.0:
        iu = np.triu_indices(d)
        noise = rng.normals(len(iu[0]), sigma_p)
        cov[iu] += noise
        cov.T[iu] = cov[iu]  # mirror: exact symmetry by construction

    values, vectors = symmetric_eigh(cov)
    if k < d and values[k - 1] - values[k] < 1e-12:
        warnings.warn(
            f"eigengap at dimension {k} is below 1e-12; the retained subspace is ambiguous",
            RankDeficiencyWarning,
            stacklevel=2,
        )
    cols = vectors[:, :k].copy()
    for j in range(k):
        lead = np.argmax(np.abs(cols[:, j]))
        if cols[lead, j] < 0.0:
            cols[:, j] = -cols[:, j]
    return ProjectionMatrix(cols)


def project(p: ProjectionMatrix, x: np.ndarray) -> np.ndarray:
    """Coordinates of x in the retained directions: P^T x."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (p.input_dim,):
        raise ShapeMismatch(f"expected shape ({p.input_dim},), got {x.shape}")
    return p.columns.T @ x


def project_batch(p: ProjectionMatrix, x: np.ndarray) -> np.ndarray:
    """Row-wise projection of a (n, d) array to (n, k)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != p.input_dim:
        raise ShapeMismatch(f"expected (n, {p.input_dim}) rows, got {x.shape}")
    return x @ p.columns
