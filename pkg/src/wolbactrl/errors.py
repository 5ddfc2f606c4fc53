"""Exception types shared across the package."""


class WolbactrlError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(WolbactrlError):
    """Invalid run configuration; message lists every violated condition."""


class NewtonDivergence(WolbactrlError):
    """Newton iteration on the implicit stage equations failed to converge."""

    def __init__(self, step_index, residual, message=None):
        self.step_index = step_index
        self.residual = residual
        super().__init__(
            message
            or f"Newton divergence at step {step_index} (residual {residual:.3e})"
        )


class PopulationCollapse(WolbactrlError):
    """Scaled total population 1 - eps*n dropped to (or below) zero."""

    def __init__(self, step_index, message=None):
        self.step_index = step_index
        super().__init__(
            message or f"population collapse at step {step_index}: 1 - eps*n <= 1e-12"
        )


class NoCoexistence(WolbactrlError):
    """The coexistence condition on the parameters does not hold."""


class InsufficientFlux(WolbactrlError):
    """Release flux cap too small for a single saturated release to cross the
    frequency threshold; the budget threshold is undefined."""


class HorizonTooShort(WolbactrlError):
    """Horizon T does not satisfy T > C/M."""


class MaxIterReached(WolbactrlError):
    """Optimizer hit the iteration cap before meeting the stationarity tolerance."""
