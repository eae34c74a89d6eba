"""Error taxonomy shared by all modules.

The split mirrors the CLI exit codes: validation failures (bad inputs,
schema violations, infeasible specs) exit with 3, numeric failures
(degenerate statistics, singular matrices, diverging simulations) with 2.
"""


class ValidationError(ValueError):
    """Input violates a documented precondition or schema."""


class InsufficientDataError(ValidationError):
    """Too few qualifying samples to produce a meaningful estimate."""


class NumericError(ArithmeticError):
    """Computation is degenerate or diverged (singular matrix, zero
    variance, non-finite simulation state)."""
