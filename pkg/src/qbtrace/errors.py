"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`QBTError`;
the CLI maps these to exit code 2 (usage/config) or 1 (verification).
"""


class QBTError(Exception):
    """Base class for all package errors."""


class ConfigError(QBTError, ValueError):
    pass


class DimensionMismatch(QBTError, ValueError):
    pass


class NotSquare(DimensionMismatch):
    pass


class NotHermitian(QBTError, ValueError):
    pass


class NotSelfAdjoint(NotHermitian):
    pass


class EmptySequence(QBTError, ValueError):
    pass


class TooFewValues(QBTError, ValueError):
    pass


class NoConvergence(QBTError, ArithmeticError):
    pass


class Singular(QBTError, ArithmeticError):
    pass


class SingularInverse(Singular):
    pass


class SingularWeyl(Singular):
    pass


class SingularRobinToNeumann(Singular):
    pass


class DegenerateKernel(Singular):
    pass


class LambdaInSpectrum(QBTError, ArithmeticError):
    pass


class StencilHitsSpectrum(LambdaInSpectrum):
    pass


class DepthExceeded(QBTError, RecursionError):
    pass


class EllipticityViolated(QBTError, ValueError):
    pass


class DegenerateGrid(QBTError, ValueError):
    pass
