"""Exception hierarchy shared by the numerical modules and the CLI."""


class NumericalError(RuntimeError):
    """A numerical routine failed to produce a trustworthy result (CLI exit 3)."""


class QuadratureError(NumericalError):
    """Adaptive quadrature exhausted its node budget."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (estimated residual {residual:.3e})")
        self.residual = residual


class IntegrabilityUndetermined(NumericalError):
    pass


class AliasingError(NumericalError):
    pass


class RingingError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration (CLI exit 2)."""
