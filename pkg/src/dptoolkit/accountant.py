"""Log-moment privacy accountant for the sampled Gaussian mechanism.

One mechanism invocation releases a sum of norm-bounded vectors over a
probability-q sample plus Gaussian noise with multiplier sigma. Its privacy
loss random variable has log-moments

    alpha(lam) = log max(E1, E2),
    E1 = E_{z~mu0}[(mu0(z)/mu(z))^lam],
    E2 = E_{z~mu }[(mu(z)/mu0(z))^lam],

where mu0 is the density of N(0, sigma^2), mu1 of N(1, sigma^2) and
mu = (1-q) mu0 + q mu1. Log-moments add over adaptively composed steps, and
a Markov tail bound converts an accumulated ledger into an (epsilon, delta)
guarantee:

    delta = min_lam exp(alpha(lam) - lam * epsilon).

Everything here is a pure value transformation; ledgers are immutable.
The two expectations are evaluated by composite Simpson quadrature in
log-space (log-sum-exp over the nodes), which is deterministic and avoids
overflow for any usable noise scale.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .errors import (
    DomainError,
    EmptyLedger,
    InvalidOrder,
    MonotonicityViolation,
    NonFiniteIntegrand,
    PreconditionWarning,
    Unachievable,
)

#: Moment orders tracked by default. Orders above 32 add nothing in the
#: operating regime of interest (small q, sigma of a few units).
DEFAULT_ORDERS: tuple[int, ...] = tuple(range(1, 33))

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class SampledGaussianStep:
    """Privacy parameters of one sampled Gaussian invocation.

    q is the per-example sampling probability, sigma the noise standard
    deviation divided by the sensitivity bound. q = 0 is the degenerate
    step that releases nothing.
    """

    q: float
    sigma: float

    def __post_init__(self):
        if not (0.0 <= self.q <= 1.0):
            raise DomainError(f"sampling probability must be in [0, 1], got {self.q}")
        if not self.sigma > 0.0:
            raise DomainError(f"noise multiplier must be positive, got {self.sigma}")


@dataclass(frozen=True)
class IntegrationConfig:
    """Fixed quadrature grid for the log-moment integrals.

    Composite Simpson rule over z in [-half_width_sigmas * sigma,
    1 + half_width_sigmas * sigma] with grid_points nodes (odd count).
    The default 40-sigma half-width leaves truncated tail mass far below
    double-precision resolution.
    """

    half_width_sigmas: float = 40.0
    grid_points: int = 200_001

    method = "composite-simpson-logsumexp"

    def __post_init__(self):
        if self.grid_points < 3 or self.grid_points % 2 == 0:
            raise DomainError(f"grid_points must be odd and >= 3, got {self.grid_points}")
        if self.half_width_sigmas < 10.0:
            raise DomainError(
                f"half_width_sigmas must be >= 10, got {self.half_width_sigmas}"
            )


DEFAULT_INTEGRATION = IntegrationConfig()


@dataclass(frozen=True)
class PrivacySpend:
    """An (epsilon, delta) differential privacy guarantee.

    best_order records which moment order attained the minimum in the tail
    bound; it is diagnostic only and ignored in comparisons.
    """

    epsilon: float
    delta: float
    best_order: int | None = None

    def __post_init__(self):
        if self.epsilon < 0.0 or math.isnan(self.epsilon):
            raise DomainError(f"epsilon must be >= 0, got {self.epsilon}")
        if not (0.0 <= self.delta <= 1.0):
            raise DomainError(f"delta must be in [0, 1], got {self.delta}")

    def __eq__(self, other):
        if not isinstance(other, PrivacySpend):
            return NotImplemented
        return self.epsilon == other.epsilon and self.delta == other.delta

    def __hash__(self):
        return hash((self.epsilon, self.delta))


@dataclass(frozen=True)
class LogMomentLedger:
    """Accumulated log-moments over a fixed grid of integer orders.

    The ledger is the accountant's entire state: `log_moments[i]` bounds the
    orders[i]-th log-moment of the privacy loss of everything recorded so
    far. A fresh ledger is all zeros.
    """

    orders: tuple[int, ...] = DEFAULT_ORDERS
    log_moments: tuple[float, ...] | None = None
    steps_recorded: int = 0

    def __post_init__(self):
        if self.log_moments is None:
            object.__setattr__(self, "log_moments", (0.0,) * len(self.orders))
        orders = self.orders
        if any(int(o) != o or o < 1 for o in orders):
            raise InvalidOrder(f"orders must be positive integers, got {orders}")
        if any(b <= a for a, b in zip(orders, orders[1:])):
            raise DomainError("orders must be strictly increasing")
        if len(self.log_moments) != len(orders):
            raise DomainError("log_moments and orders must have equal length")
        if any(m < 0.0 or math.isnan(m) for m in self.log_moments):
            raise DomainError("log moments must be non-negative")
        if self.steps_recorded < 0:
            raise DomainError("steps_recorded must be non-negative")


def _log_gauss(z: np.ndarray, mean: float, sigma: float) -> np.ndarray:
    return -0.5 * ((z - mean) / sigma) ** 2 - math.log(sigma) - _LOG_SQRT_2PI


@lru_cache(maxsize=128)
def _log_moment_table(
    q: float, sigma: float, orders: tuple[int, ...], cfg: IntegrationConfig
) -> tuple[float, ...]:
    """alpha(lam) for every requested order of one step, by quadrature."""
    if q == 0.0:
        return (0.0,) * len(orders)
    lo = -cfg.half_width_sigmas * sigma
    hi = 1.0 + cfg.half_width_sigmas * sigma
    z = np.linspace(lo, hi, cfg.grid_points)
    h = (hi - lo) / (cfg.grid_points - 1)
    w = np.full(cfg.grid_points, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    log_w = np.log(w * (h / 3.0))

    log_mu0 = _log_gauss(z, 0.0, sigma)
    if q == 1.0:
        log_mu = _log_gauss(z, 1.0, sigma)
    else:
        log_mu = np.logaddexp(
            math.log1p(-q) + log_mu0, math.log(q) + _log_gauss(z, 1.0, sigma)
        )
    ratio = log_mu0 - log_mu
    if not (np.isfinite(log_mu0).all() and np.isfinite(log_mu).all()):
        raise NonFiniteIntegrand(
            f"non-finite density at q={q}, sigma={sigma}; grid cannot resolve this scale"
        )

    out = []
    for lam in orders:
        log_e1 = float(logsumexp(log_w + log_mu0 + lam * ratio))
        log_e2 = float(logsumexp(log_w + log_mu - lam * ratio))
        alpha = max(log_e1, log_e2)
        if math.isnan(alpha) or math.isinf(alpha):
            raise NonFiniteIntegrand(
                f"log-moment diverged at q={q}, sigma={sigma}, order={lam}"
            )
        if -1e-12 <= alpha < 0.0:  # quadrature noise around the exact zero
            alpha = 0.0
        out.append(alpha)
    return tuple(out)


def compute_log_moment(
    step: SampledGaussianStep,
    lam: int,
    cfg: IntegrationConfig = DEFAULT_INTEGRATION,
) -> float:
    """The lam-th log-moment of the privacy loss of a single step, in nats."""
    if int(lam) != lam or lam < 1:
        raise InvalidOrder(f"order must be a positive integer, got {lam}")
    return _log_moment_table(step.q, step.sigma, (int(lam),), cfg)[0]


def unsampled_gaussian_log_moment(sigma: float, lam: int) -> float:
    """Closed form lam(lam+1)/(2 sigma^2) for the q = 1 Gaussian pair.

    Test oracle for the quadrature; exact for N(0, sigma^2) vs N(1, sigma^2).
    """
    if not sigma > 0.0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    if int(lam) != lam or lam < 1:
        raise InvalidOrder(f"order must be a positive integer, got {lam}")
    return lam * (lam + 1) / (2.0 * sigma * sigma)


def asymptotic_log_moment_bound(q: float, sigma: float, lam: int) -> float:
    """Quadratic upper-bound term q^2 lam(lam+1) / ((1-q) sigma^2).

    Valid as an upper bound for sigma >= 1, q < 1/(16 sigma) and
    lam <= sigma^2 ln(1/(q sigma)); a PreconditionWarning is emitted outside
    that range. Note the constant is conservative: the true small-q leading
    behaviour is q^2 lam(lam+1) (e^(1/sigma^2) - 1) / 2, roughly half this
    value for sigma of a few units.
    """
    if int(lam) != lam or lam < 1:
        raise InvalidOrder(f"order must be a positive integer, got {lam}")
    if not (0.0 <= q < 1.0):
        raise DomainError(f"q must be in [0, 1), got {q}")
    if not sigma > 0.0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    if q == 0.0:
        return 0.0
    if sigma < 1.0 or q >= 1.0 / (16.0 * sigma) or lam > sigma * sigma * math.log(
        1.0 / (q * sigma)
    ):
        warnings.warn(
            f"outside the hypotheses of the asymptotic bound "
            f"(q={q}, sigma={sigma}, order={lam})",
            PreconditionWarning,
            stacklevel=2,
        )
    return q * q * lam * (lam + 1) / ((1.0 - q) * sigma * sigma)


def pure_dp_log_moment(epsilon: float, lam: int) -> float:
    """Log-moment bound implied by a plain epsilon-DP guarantee.

    lam * eps * (e^eps - 1) + lam^2 eps^2 e^(2 eps) / 2; lets pure-DP steps
    compose alongside sampled Gaussian ones.
    """
    if int(lam) != lam or lam < 1:
        raise InvalidOrder(f"order must be a positive integer, got {lam}")
    if epsilon < 0.0:
        raise DomainError(f"epsilon must be >= 0, got {epsilon}")
    return lam * epsilon * math.expm1(epsilon) + (
        lam * lam * epsilon * epsilon * math.exp(2.0 * epsilon) / 2.0
    )


def accumulate(
    ledger: LogMomentLedger,
    step: SampledGaussianStep,
    cfg: IntegrationConfig = DEFAULT_INTEGRATION,
) -> LogMomentLedger:
    """Record one step: add its log-moments entrywise (adaptive composition)."""
    alphas = _log_moment_table(step.q, step.sigma, ledger.orders, cfg)
    return LogMomentLedger(
        orders=ledger.orders,
        log_moments=tuple(m + a for m, a in zip(ledger.log_moments, alphas)),
        steps_recorded=ledger.steps_recorded + 1,
    )


def get_epsilon(ledger: LogMomentLedger, delta: float) -> PrivacySpend:
    """Tightest epsilon at the given delta: min over orders of
    (alpha(lam) + ln(1/delta)) / lam."""
    if not ledger.orders:
        raise EmptyLedger("ledger tracks no orders")
    if not (0.0 < delta < 1.0):
        raise DomainError(f"delta must be in (0, 1), got {delta}")
    log_inv = math.log(1.0 / delta)
    candidates = [
        (m + log_inv) / o for o, m in zip(ledger.orders, ledger.log_moments)
    ]
    idx = int(np.argmin(candidates))
    return PrivacySpend(candidates[idx], delta, best_order=ledger.orders[idx])


def get_delta(ledger: LogMomentLedger, epsilon: float) -> PrivacySpend:
    """Tightest delta at the given epsilon: min over orders of
    exp(alpha(lam) - lam * epsilon), clamped to 1."""
    if not ledger.orders:
        raise EmptyLedger("ledger tracks no orders")
    if epsilon < 0.0 or math.isnan(epsilon):
        raise DomainError(f"epsilon must be >= 0, got {epsilon}")
    exponents = [
        m - o * epsilon for o, m in zip(ledger.orders, ledger.log_moments)
    ]
    idx = int(np.argmin(exponents))
    delta = min(1.0, math.exp(exponents[idx]))
    return PrivacySpend(epsilon, delta, best_order=ledger.orders[idx])


def strong_composition_epsilon(q: float, sigma: float, delta: float, steps: int) -> float:
    """Baseline: amplified per-step Gaussian guarantee under advanced composition.

    Construction (the delta budget is split evenly between the per-step
    guarantees and the composition slack):

    * delta0 = delta / (2 * steps * q), per-step Gaussian analysis
      eps0 = sqrt(2 ln(1.25/delta0)) / sigma,
    * amplification by probability-q sampling: (q * eps0, q * delta0),
    * advanced composition over `steps` invocations with slack
      delta' = delta / 2:
      eps = eps1 sqrt(2 T ln(1/delta')) + T eps1 (e^eps1 - 1).

    A single step returns the amplified per-step epsilon directly.
    """
    if not (0.0 < q <= 1.0):
        raise DomainError(f"q must be in (0, 1], got {q}")
    if not sigma > 0.0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    if not (0.0 < delta < 1.0):
        raise DomainError(f"delta must be in (0, 1), got {delta}")
    if steps < 1:
        raise DomainError(f"steps must be >= 1, got {steps}")
    delta0 = delta / (2.0 * steps * q)
    eps0 = math.sqrt(2.0 * math.log(1.25 / delta0)) / sigma
    if eps0 >= 1.0:
        warnings.warn(
            f"per-step epsilon {eps0:.3f} >= 1; the sampling amplification "
            "constant is heuristic in this range",
            PreconditionWarning,
            stacklevel=2,
        )
    eps1 = q * eps0
    if steps == 1:
        return eps1
    delta_prime = delta / 2.0
    return eps1 * math.sqrt(2.0 * steps * math.log(1.0 / delta_prime)) + (
        steps * eps1 * math.expm1(eps1)
    )


def epsilon_after_steps(
    q: float,
    sigma: float,
    steps: int,
    delta: float,
    cfg: IntegrationConfig = DEFAULT_INTEGRATION,
    orders: tuple[int, ...] = DEFAULT_ORDERS,
) -> float:
    """Epsilon after composing `steps` identical sampled Gaussian steps."""
    alphas = np.asarray(_log_moment_table(q, sigma, orders, cfg))
    log_inv = math.log(1.0 / delta)
    return float(np.min((steps * alphas + log_inv) / np.asarray(orders)))


def noise_for_target(
    q: float,
    steps: int,
    epsilon: float,
    delta: float,
    cfg: IntegrationConfig = DEFAULT_INTEGRATION,
    sigma_range: tuple[float, float] = (0.5, 64.0),
    tol: float = 1e-3,
) -> float:
    """Smallest noise multiplier meeting an (epsilon, delta) target.

    Bisects sigma over `sigma_range` using the accountant itself, relying on
    epsilon being non-increasing in sigma (asserted on the evaluated points).
    """
    if not (0.0 < q <= 1.0):
        raise DomainError(f"q must be in (0, 1], got {q}")
    if steps < 1:
        raise DomainError(f"steps must be >= 1, got {steps}")
    if epsilon <= 0.0:
        raise DomainError(f"target epsilon must be positive, got {epsilon}")
    if not (0.0 < delta < 1.0):
        raise DomainError(f"delta must be in (0, 1), got {delta}")

    evaluated: list[tuple[float, float]] = []

    def eps_at(sigma: float) -> float:
        value = epsilon_after_steps(q, sigma, steps, delta, cfg)
        evaluated.append((sigma, value))
        return value

    lo, hi = sigma_range
    eps_hi = eps_at(hi)
    if eps_hi > epsilon:
        raise Unachievable(
            f"even sigma={hi} gives epsilon={eps_hi:.4f} > target {epsilon}"
        )
    eps_lo = eps_at(lo)
    if eps_lo < eps_hi:
        raise MonotonicityViolation(
            f"epsilon increased with sigma over [{lo}, {hi}]; cannot bracket"
        )
    if eps_lo <= epsilon:
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if eps_at(mid) <= epsilon:
            hi = mid
        else:
            lo = mid
    evaluated.sort()
    values = [e for _, e in evaluated]
    if any(b > a + 1e-9 for a, b in zip(values, values[1:])):
        raise MonotonicityViolation("epsilon was not non-increasing in sigma")
    return hi


@dataclass(frozen=True)
class HyperparamBudget:
    """Cost of picking the best of many private training runs.

    Randomly re-running a candidate selection mechanism until the winner is
    good enough costs epsilon + 8 epsilon_prime in the worst case
    (total_epsilon), refined to max(epsilon, 8 epsilon_prime) for this
    regime (total_epsilon_refined), with max_calls runs and an accuracy
    shortfall of at most accuracy_slack correctly labelled validation
    examples.
    """

    total_epsilon: float
    max_calls: int
    accuracy_slack: float
    total_epsilon_refined: float


def hyperparam_search_budget(
    epsilon: float, epsilon_prime: float, delta: float, p: float
) -> HyperparamBudget:
    """Privacy and accuracy cost of hyperparameter selection.

    epsilon is the cost of one training run, epsilon_prime the selection
    overhead parameter, delta the failure probability, p the probability a
    random candidate achieves the target score (1/#candidates when exactly
    one setting works).
    """
    if not (0.0 < epsilon_prime < 0.5):
        raise DomainError(f"epsilon_prime must be in (0, 1/2), got {epsilon_prime}")
    if not (0.0 < delta < 1.0):
        raise DomainError(f"delta must be in (0, 1), got {delta}")
    if not (0.0 < p < 1.0):
        raise DomainError(f"p must be in (0, 1), got {p}")
    if epsilon < 0.0:
        raise DomainError(f"epsilon must be >= 0, got {epsilon}")
    inv = 1.0 / (epsilon_prime * delta * p)
    log_inv = math.log(inv)
    return HyperparamBudget(
        total_epsilon=epsilon + 8.0 * epsilon_prime,
        max_calls=math.ceil(inv * inv * log_inv),
        accuracy_slack=4.0 / epsilon_prime * log_inv,
        total_epsilon_refined=max(epsilon, 8.0 * epsilon_prime),
    )
