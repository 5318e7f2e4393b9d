"""Exception hierarchy for the gain-analysis package."""

from typing import List, Optional


class LtvGainError(Exception):
    """Base class for every error raised by this package"""


class InvalidSystemError(LtvGainError):
    """An LTV system failed validation"""

    def __init__(self, violations: List[str]):
        self.violations = list(violations)
        super().__init__("invalid system: " + "; ".join(self.violations))


class OutOfDomainError(LtvGainError):
    """A time-varying source was evaluated outside its horizon"""


class GridMismatchError(LtvGainError):
    """Two signals (or a signal and a target grid) are incompatible"""


class DegenerateSignalError(LtvGainError):
    """A zero signal was used where a direction is required"""


class SingularMatrixError(LtvGainError):
    pass


class AsymmetricMatrixError(LtvGainError):
    pass


class ConvergenceError(LtvGainError):
    """An inner numerical iteration hit its sweep cap"""


class IntegrationError(LtvGainError):
    """The ODE engine could not integrate the requested problem"""


class DegenerateDirectionError(LtvGainError):
    """The adjoint output vanished; the power iteration must be re-seeded"""


class InfeasibleGammaError(LtvGainError):
    """R(t) = D_I'D_I - gamma^2 I is not negative definite somewhere on the grid"""

    def __init__(self, gamma: float, time: float, max_eigenvalue: float):
        self.gamma = gamma
        self.time = time
        self.max_eigenvalue = max_eigenvalue
        super().__init__(
            f"gamma={gamma:.6g} is infeasible: lambda_max(R)={max_eigenvalue:.6g} >= 0 at t={time:.6g}"
        )


class UnboundedGainError(LtvGainError):
    """No upper bound was found before the doubling cap"""


class ConstructionFailedError(LtvGainError):
    """A lower-bound disturbance failed its a-posteriori gain check"""

    def __init__(self, gamma: float, achieved: Optional[float]):
        self.gamma = gamma
        self.achieved = achieved
        shown = "n/a" if achieved is None else f"{achieved:.6g}"
        super().__init__(
            f"disturbance construction for gamma={gamma:.6g} achieved gain {shown}"
        )


class UnreachableOutputError(LtvGainError):
    """The output Gramian has no positive eigenvalue at the requested horizon"""


class UnsupportedOutputError(LtvGainError):
    """The Gramian characterisation only covers systems with n_I = 0"""


class SpecError(LtvGainError):
    """A system specification file could not be turned into a valid system"""

    def __init__(self, messages: List[str]):
        self.messages = list(messages)
        super().__init__("\n".join(self.messages))


class ConfigurationError(LtvGainError):
    pass
