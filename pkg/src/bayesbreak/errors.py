"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: input/config problems exit 2,
numerical failures exit 3, verification mismatches exit 4.
"""


class BayesBreakError(Exception):
    """Base class for all package-specific errors."""


class InputError(BayesBreakError):
    """Malformed or invariant-violating user data."""


class ConfigError(BayesBreakError):
    """Invalid configuration (bad hyperparameters, unknown keys, infeasible priors)."""


class NumericalError(BayesBreakError):
    """A numerical routine failed to converge or produced an invalid state."""


class VerificationError(BayesBreakError):
    """Brute-force cross-check disagreed with the DP engine."""
