"""Exception types shared across the package.

The CLI maps them to exit codes: validation 2, non-convergence 3, resource cap 4.
"""


class ValidationError(ValueError):
    """Malformed or inconsistent input."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap before meeting its tolerance."""

    def __init__(self, message: str, best_value: float, gap: float):
        super().__init__(f"{message} (best value {best_value:.9f}, gap {gap:.3e})")
        self.best_value = best_value
        self.gap = gap


class ResourceCapError(RuntimeError):
    """A computation would exceed a configured memory/size cap."""
