"""Exception hierarchy.

Input problems derive from ``InputError`` and numerical failures from
``NumericalError``; the command line maps these to different exit codes.
"""


class SfwmError(Exception):
    """Base class for all package errors."""


class InputError(SfwmError, ValueError):
    pass


class NumericalError(SfwmError, ArithmeticError):
    pass


class OutOfRange(InputError):
    pass


class ModeCutoff(InputError):
    pass


class TableGap(InputError):
    pass


class UnsupportedForTabulated(InputError):
    pass


class ParseError(InputError):
    pass


class NonMonotonic(ParseError):
    pass


class NonPhysical(InputError):
    pass


class MissingGamma(InputError):
    pass


class NotPhasematched(InputError):
    pass


class DegenerateTerms(InputError):
    pass


class NotAntisymmetric(InputError):
    pass


class NonNegativeProduct(InputError):
    pass


class SinglePolarization(InputError):
    pass


class AxisMismatch(InputError):
    pass


class ZeroGrid(InputError):
    pass


class NoLoop(InputError):
    pass


class EmptyContour(InputError):
    pass


class NyquistViolation(InputError):
    pass


class ConfigError(InputError):
    pass


class QuadratureNonConvergence(NumericalError):
    pass


class FaddeevaOverflow(NumericalError):
    pass


class NoRoot(NumericalError):
    pass


class NotConverged(NumericalError):
    pass
