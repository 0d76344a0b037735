"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command line:
2 for malformed input, 3 for numeric guards, 4 for failed checks.
"""


class TQError(Exception):
    exit_code = 1


class InputError(TQError, ValueError):
    exit_code = 2


class NumericGuard(TQError, ArithmeticError):
    exit_code = 3


class CheckFailure(TQError):
    exit_code = 4


class ParseError(InputError):
    pass


class ValidationError(InputError):
    def __init__(self, diagnostics):
        if isinstance(diagnostics, str):
            diagnostics = [diagnostics]
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


class DimensionMismatch(InputError):
    pass


class RepresentationMismatch(InputError):
    pass


class AxisOutOfRange(InputError, IndexError):
    pass


class WindowMismatch(InputError):
    pass


class NotAffine(InputError):
    pass


class AxisConsistencyError(InputError):
    pass


class UnsupportedExpression(InputError):
    pass


class AnalyticDomainViolation(NumericGuard):
    pass


class NonFiniteDerivative(NumericGuard):
    pass


class OpenOrbit(NumericGuard):
    pass


class QuadratureFailure(NumericGuard):
    pass


class FitFailure(NumericGuard):
    pass


class PathDomainError(NumericGuard):
    pass


class NonCommutingPerturbation(CheckFailure):
    pass
