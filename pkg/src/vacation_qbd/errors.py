"""Exception types raised by the solver and the analyses built on it."""


class ModelError(ValueError):
    """Invalid model parameters (phase count, decay ordering, rates)."""


class Unstable(ArithmeticError):
    """A stable model was required but the drift condition fails."""


class NonConvergence(ArithmeticError):
    def __init__(self, iterations, last_residual):
        self.iterations = iterations
        self.last_residual = last_residual
        super().__init__(
            f"rate-matrix iteration did not converge after {iterations} steps "
            f"(last difference {last_residual:.3e})"
        )


class SingularA1(ArithmeticError):
    """The repeating diagonal block is not invertible; indicates a malformed model."""


class RankDeficiency(ArithmeticError):
    """Boundary balance equations do not have a one-dimensional null space."""


class NegativeMass(ArithmeticError):
    """Normalized stationary vector has a materially negative component."""


class IllConditioned(ArithmeticError):
    """The truncated linear solve failed or returned a non-finite answer."""


class NoCrossover(LookupError):
    """The E(L) difference keeps one sign over the scanned stable range."""
