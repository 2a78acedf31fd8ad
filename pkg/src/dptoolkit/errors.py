"""Exception and warning types shared across the toolkit."""


class DomainError(ValueError):
    """A numeric argument is outside its admissible range."""


class InvalidOrder(DomainError):
    """Moment order must be a positive integer."""


class NonFiniteIntegrand(ArithmeticError):
    """Quadrature produced NaN nodes; the noise scale is too small for the grid."""


class EmptyLedger(ValueError):
    """The ledger tracks no moment orders."""


class Unachievable(RuntimeError):
    """No noise scale in the search range meets the privacy target."""


class MonotonicityViolation(RuntimeError):
    """Bisection observed epsilon increasing with sigma; bracketing is invalid."""


class NonFiniteInput(ValueError):
    """An input vector contains NaN or infinity."""


class ShapeMismatch(ValueError):
    """Array dimensions do not chain."""


class EmptyDataset(ValueError):
    """Operation requires at least one example."""


class EmptySample(ValueError):
    """Diagnostic requires a non-empty sample."""


class BadMagic(ValueError):
    """IDX file starts with the wrong magic number."""


class CountMismatch(ValueError):
    """Image and label files disagree on the example count."""


class TruncatedFile(ValueError):
    """IDX file ended before the declared payload."""


class ConfigError(ValueError):
    """Training configuration violates its invariants."""


class PreconditionWarning(UserWarning):
    """A formula was evaluated outside the hypotheses that justify it."""


class RankDeficiencyWarning(UserWarning):
    """Eigengap at the requested dimension is numerically zero; the subspace is ambiguous."""


class ConvergenceWarning(UserWarning):
    """An iterative routine hit its sweep limit before reaching tolerance."""
