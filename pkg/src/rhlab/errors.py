"""Exception hierarchy; each class carries the CLI exit code it maps to."""


class RHLabError(Exception):
    exit_code = 1
    stage = "internal"


class ConfigurationError(RHLabError, ValueError):
    exit_code = 2
    stage = "config"


class DegenerateDomainError(ConfigurationError):
    pass


class DegenerateInputError(RHLabError, ValueError):
    exit_code = 2
    stage = "input"


class AssemblyError(RHLabError):
    exit_code = 3
    stage = "assembly"


class SolverError(RHLabError):
    """Linear or eigen solver failed to converge.

    ``residual`` holds the last residual norm seen, ``partial`` any eigenpairs
    that did converge before the failure.
    """

    exit_code = 3
    stage = "solver"

    def __init__(self, message, residual=None, partial=None):
        super().__init__(message)
        self.residual = residual
        self.partial = partial or []


class UnsupportedSpectrumError(SolverError):
    pass


class HypothesisError(RHLabError, ValueError):
    """An input violates a hypothesis of the inequality being checked."""

    exit_code = 4
    stage = "hypothesis"


class EllipticityError(HypothesisError):
    pass


class DivergentIntegralError(HypothesisError):
    pass


class DomainError(DegenerateInputError):
    """Argument outside the domain of a function (e.g. a non-positive exponent)."""
