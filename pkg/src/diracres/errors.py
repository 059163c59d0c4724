"""Exception hierarchy shared by all modules.

The CLI maps ConfigurationError to exit code 2 and NumericalFailure to 3.
"""


class ConfigurationError(ValueError):
    """Bad or inconsistent input (schema, grids, missing files)."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class SingularityError(DomainError):
    """Evaluation at a singular point."""


class MalformedPotentialError(ValueError):
    """A potential produced a non-finite value."""


class NumericalFailure(RuntimeError):
    """A numerical procedure failed; ``diagnostics`` carries the details."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class RefinementRequired(NumericalFailure):
    """The discretisation is too coarse for the requested accuracy."""
