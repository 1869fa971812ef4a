"""Exception hierarchy shared by all modules."""


class TransmissionError(Exception):
    """Base class for every error raised by the package."""


class OutOfDomain(TransmissionError, ValueError):
    pass


class InterfaceAmbiguity(TransmissionError, ValueError):
    """A point on the interface was evaluated without choosing a side."""


class NonInvertible(TransmissionError, ArithmeticError):
    pass


class QuadratureOrderOverflow(TransmissionError):
    pass


class SingularSystem(TransmissionError, ArithmeticError):
    """Raised when a linear system is (numerically) singular.

    ``rcond`` carries the reciprocal condition estimate when available.
    """

    def __init__(self, message, rcond=None):
        super().__init__(message)
        self.rcond = rcond


class SingularGram(SingularSystem):
    pass


class InsufficientRegularity(TransmissionError, ValueError):
    pass


class NoDirichletBoundary(TransmissionError, ValueError):
    pass


class RequiresP2(TransmissionError, ValueError):
    pass


class NotSymmetric(TransmissionError, ValueError):
    pass


class NotCoercive(TransmissionError, ValueError):
    pass


class NotInVk(TransmissionError, ValueError):
    pass


class DegenerateFit(TransmissionError, ArithmeticError):
    pass


class ConfigError(TransmissionError, ValueError):
    pass
