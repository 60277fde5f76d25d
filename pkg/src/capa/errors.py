"""Exception types raised by the library."""


class DomainError(ValueError):
    """Input outside the domain of an operation (bad shapes, sizes, geometry)."""


class IllConditionedError(DomainError):
    """Matrix too close to singular for an explicit inverse."""

    def __init__(self, message: str, condition_number: float):
        super().__init__(message)
        self.condition_number = condition_number


class ConvergenceError(RuntimeError):
    """Iterative solver stopped at its iteration cap without converging."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
