"""Exception hierarchy shared by all modules."""


class L1LinfError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(L1LinfError, ValueError):
    pass


class SingularJacobian(L1LinfError, ValueError):
    pass


class WrongBundleKind(L1LinfError, ValueError):
    pass


class BasePointMismatch(L1LinfError, ValueError):
    pass


class BundlePairMismatch(L1LinfError, ValueError):
    pass


class FiberPointMismatch(L1LinfError, ValueError):
    pass


class GradientUnavailable(L1LinfError):
    pass


class DerivativeUnavailable(L1LinfError):
    pass


class WhitneyConstraintViolated(L1LinfError, ValueError):
    pass


class ZeroVector(L1LinfError, ValueError):
    pass


class OptimizerNoConvergence(L1LinfError):
    """The multistart optimizer did not settle; ``best_lower_bound`` holds the best value seen."""

    def __init__(self, message, best_lower_bound=None):
        super().__init__(message)
        self.best_lower_bound = best_lower_bound


class NonUniqueSupport(L1LinfError):
    """Two distinct unit-sphere maximizers attain the same dual value."""

    def __init__(self, message, witnesses=()):
        super().__init__(message)
        self.witnesses = tuple(witnesses)


class XDerivativeUnavailable(L1LinfError):
    pass


class WrongFiberRole(L1LinfError, ValueError):
    pass


class ZeroDifferential(L1LinfError, ValueError):
    pass


class NotOnSphere(L1LinfError, ValueError):
    pass


class GridTouchesBoundary(L1LinfError, ValueError):
    pass


class EmptyMask(L1LinfError, ValueError):
    pass


class IdenticallyZero(L1LinfError, ValueError):
    pass


class GridMismatch(L1LinfError, ValueError):
    pass


class NotNormalized(L1LinfError, ValueError):
    pass


class ProbeTooCloseToBoundary(L1LinfError, ValueError):
    pass


class OriginSingular(L1LinfError, ValueError):
    pass


class InvalidConfig(L1LinfError, ValueError):
    pass


class InvalidParams(L1LinfError, ValueError):
    pass


class NotInUpperHalfPlane(L1LinfError, ValueError):
    pass
