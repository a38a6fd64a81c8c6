"""Exception hierarchy shared by all sdrk modules."""


class SDRKError(Exception):
    """Base class for every error raised by the package."""


class UnsupportedOrderError(SDRKError, ValueError):
    pass


class NotOrderError(SDRKError, ValueError):
    """A tableau fails the order conditions it claims to satisfy."""


class InconsistentSchemeError(SDRKError, ValueError):
    """Low-storage coefficients do not reproduce u^n with unit weight."""


class NonFiniteStateError(SDRKError, FloatingPointError):
    pass


class UnknownMethodError(SDRKError, KeyError):
    pass


class DomainError(SDRKError, ValueError):
    pass


class SolverFailureError(SDRKError, RuntimeError):
    def __init__(self, message, nu=None):
        super().__init__(message)
        self.nu = nu


class InvalidArgumentsError(SDRKError, ValueError):
    pass


class InfeasibleSearchError(SDRKError, RuntimeError):
    def __init__(self, message, best_violation=float("inf")):
        super().__init__(message)
        self.best_violation = best_violation


class UnsupportedDegreeError(SDRKError, ValueError):
    pass


class UnphysicalStateError(SDRKError, ValueError):
    pass


class ConnectivityError(SDRKError, ValueError):
    pass


class MissingDataError(SDRKError, ValueError):
    pass


class ContractViolationError(SDRKError, ValueError):
    pass


class UnsupportedPatternError(SDRKError, ValueError):
    pass


class NumericalFailureError(SDRKError, RuntimeError):
    pass


class QuadratureError(SDRKError, RuntimeError):
    pass


class UndefinedTimestepError(SDRKError, ValueError):
    pass


class InstabilityError(SDRKError, FloatingPointError):
    def __init__(self, message, dt=None):
        super().__init__(message)
        self.dt = dt
