# -*- coding: utf-8 -*-
""" Exception hierarchy shared by all bandlab modules.

Every error carries a stable ``code`` string which is what the experiment manifests and the CLI report. Errors that
describe bad arguments also derive from ValueError.
"""


class BandLabError(Exception):
    """ Base class of all bandlab errors. """

    code = "BANDLAB_ERROR"

    def __init__(self, message="", **context):
        super().__init__(message)
        self.context = context

    def to_dict(self):
        return {"code": self.code, "message": str(self), "context": {k: repr(v) for k, v in self.context.items()}}


class NonPositiveCovarianceError(BandLabError, ValueError):
    code = "NON_POSITIVE_COVARIANCE"


class InvalidSampleCountError(BandLabError, ValueError):
    code = "INVALID_SAMPLE_COUNT"


class NoConvergenceError(BandLabError):
    code = "NO_CONVERGENCE"


class EmptyEnsembleError(BandLabError, ValueError):
    code = "EMPTY_ENSEMBLE"


class WindowOutsideBulkError(BandLabError, ValueError):
    code = "WINDOW_OUTSIDE_BULK"


class InsufficientDataError(BandLabError, ValueError):
    code = "INSUFFICIENT_DATA"


class SingularShiftError(BandLabError):
    code = "SINGULAR_SHIFT"


class UniverseMismatchError(BandLabError, ValueError):
    code = "UNIVERSE_MISMATCH"


class UnknownGeneratorError(BandLabError, ValueError):
    code = "UNKNOWN_GENERATOR"


class QuadratureNotConvergedError(BandLabError):
    code = "QUADRATURE_NOT_CONVERGED"


class OutOfBulkError(BandLabError, ValueError):
    code = "OUT_OF_BULK"


class DivisionByZeroError(BandLabError, ZeroDivisionError):
    code = "DIVISION_BY_ZERO"


class NotConvergedError(BandLabError):
    code = "NOT_CONVERGED"


class TruncationTooSmallError(BandLabError):
    code = "TRUNCATION_TOO_SMALL"


class NonFiniteError(BandLabError):
    code = "NON_FINITE"


class ConfigInvalidError(BandLabError, ValueError):
    code = "CONFIG_INVALID"


class ModuleError(BandLabError):
    """ Wraps an error raised inside a check with the provenance of the failing call. """

    code = "MODULE_ERROR"

    def __init__(self, cause: BandLabError, experiment="", check="", arguments=None):
        super().__init__("{} failed in {}/{}: {}".format(cause.code, experiment, check, cause),
                         experiment=experiment, check=check, arguments=arguments)
        self.cause = cause

    def to_dict(self):
        result = super().to_dict()
        result["cause"] = self.cause.to_dict()
        return result
