"""Differentially private training toolkit.

Moments-based privacy accounting for the sampled Gaussian mechanism, DP-SGD
over a from-scratch MLP, differentially private PCA preprocessing, and a CLI
that emits privacy curves and training reports as CSV.
"""

import os as _os

# Worker-thread cap must land in the environment before the BLAS runtime
# loads, i.e. before numpy is imported anywhere in this process.
_threads = _os.environ.get("DP_TOOLKIT_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from . import accountant, data, dppca, dpsgd, mechanisms, nn  # noqa: E402
from ._core import BACKEND  # noqa: E402
from ._rng import NoiseSource  # noqa: E402
from .accountant import (  # noqa: E402
    IntegrationConfig,
    LogMomentLedger,
    PrivacySpend,
    SampledGaussianStep,
    accumulate,
    compute_log_moment,
    get_delta,
    get_epsilon,
    hyperparam_search_budget,
    noise_for_target,
    strong_composition_epsilon,
)
from .data import Dataset, load_idx, synthetic_blobs  # noqa: E402
from .dppca import ProjectionMatrix, dp_pca, project  # noqa: E402
from .dpsgd import TrainingConfig, TrainingReport, dp_sgd_step, train  # noqa: E402
from .mechanisms import ClipConfig, clip_l2, sanitize  # noqa: E402
from .nn import MlpParams, evaluate, forward, loss, per_example_gradients  # noqa: E402

__version__ = "0.1.0"
