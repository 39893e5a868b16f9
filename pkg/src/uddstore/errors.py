"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class DegenerateStateError(ValueError):
    """The state has no traceless part, so a correlation is undefined."""


class OverlapError(ValueError):
    """Finite-width pulses collide or spill over the block edges."""


class SequenceSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class QuadratureError(RuntimeError):
    """Adaptive integration failed to reach the requested tolerance."""


class IntegratorError(RuntimeError):
    """Propagation drifted outside the trace/positivity tolerances."""


class SingularFitError(RuntimeError):
    """Least-squares problem has no unique solution."""
