class ConfigError(ValueError):
    """Invalid scenario, solver or experiment configuration."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class NumericalError(ArithmeticError):
    """A solver produced non-finite values or failed to converge internally."""

    def __init__(self, message, iteration=None, diagnostics=None):
        super().__init__(message)
        self.iteration = iteration
        self.diagnostics = diagnostics or {}
