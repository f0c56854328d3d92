"""Exception types raised across the package."""


class CoevoError(Exception):
    """Base class for all package errors."""


# linear algebra / LMI kernel
class NonSymmetric(CoevoError, ValueError):
    pass


class DimensionMismatch(CoevoError, ValueError):
    pass


class OutOfBounds(CoevoError, ValueError):
    pass


class NumericalBreakdown(CoevoError, ArithmeticError):
    pass


class NoFeasiblePoint(CoevoError, ValueError):
    pass


# game / GNE
class NotStronglyMonotone(CoevoError, ValueError):
    pass


class EmptySet(CoevoError, ValueError):
    pass


class MaxIterExceeded(CoevoError, RuntimeError):
    pass


class SetLikelyEmpty(CoevoError, RuntimeError):
    pass


class BoundViolated(CoevoError, AssertionError):
    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


# network
class Disconnected(CoevoError, ValueError):
    pass


class BadAlpha(CoevoError, ValueError):
    pass


class InfeasibleTopology(CoevoError, ValueError):
    pass


# certificates
class UnstableA(CoevoError, ValueError):
    pass


class SynthesisFailed(CoevoError, RuntimeError):
    pass


class TooLarge(CoevoError, ValueError):
    pass


# co-evolution
class GneFailure(CoevoError, RuntimeError):
    def __init__(self, message, step=None, trace=None):
        super().__init__(message)
        self.step = step
        self.trace = trace


class NoConvergence(CoevoError, RuntimeError):
    pass


class InsufficientData(CoevoError, ValueError):
    pass


# scenario files
class ParseError(CoevoError, ValueError):
    pass


class ValidationError(CoevoError, ValueError):
    pass


class DimensionGuard(CoevoError, ValueError):
    pass
