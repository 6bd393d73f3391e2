# -*- coding: utf-8 -*-
""" This module contains the predefined algebra checks: identities of the Grassmann layer, the bosonization
identity and the generating function of the transfer kernel.

Predefined algebra checks are enumerated in AlgebraCheck enum with each enum value containing the name of the class
that implements the check by extending AbstractAlgebraCheck class.

Typical usage example:

    passed, measured = check_algebra(AlgebraCheck.GRASSMANN_DETERMINANT, seed=3, count=10, max_size=5)

"""

import abc
import logging
from enum import Enum

import numpy as np

from bandlab.analyzer.berezin import BosonizationFunction, ScalarPoly, bosonization_check, complex_gaussian_check, \
    gaussian_grassmann, generating_function
from bandlab.analyzer.ensemble import rng_for

logger = logging.getLogger(__name__)

PRINTED_COEFFICIENTS = {
    "n1*n2*n1p*n2p": "d^4 - 2*d^3 + d^2 + 4*d^2*us - 4*d^2*w*ib - 2*d^2*ib^2 + 2*d*w*ib + 2*w^2*ib^2"
                     " - 4*w*us*ib + ib^4",
    "n1*n1p*n2p": "d^3 - d^2 - 2*d*w*ib - d*ib^2 + 2*d*us",
}


class AbstractAlgebraCheck(metaclass=abc.ABCMeta):
    """ Abstract class that serves as a blueprint for algebra check classes. """

    defaults = {}

    def options(self, kwargs):
        unknown = set(kwargs) - set(self.defaults)
        if unknown:
            raise ValueError("Unknown arguments for {}: {}".format(type(self).__name__, sorted(unknown)))
        return dict(self.defaults, **kwargs)

    @abc.abstractmethod
    def check_algebra(self, seed: int, **kwargs):
        """ Returns check validity of an algebraic identity.

        Args:
            seed: root seed for random test matrices and Monte Carlo sides
            **kwargs: keyword check arguments, see ``defaults`` of each check

        Returns:
            a boolean verdict followed by a dict of measured values
        """


class GrassmannDeterminantCheck(AbstractAlgebraCheck):
    """ The Grassmann Gaussian integral of random complex matrices equals their determinant. """

    defaults = {"count": 100, "max_size": 8, "tolerance": 1e-12}

    def check_algebra(self, seed: int, **kwargs):
        options = self.options(kwargs)
        worst = 0.0
        for index in range(options["count"]):
            rng = rng_for(seed, "grassmann-determinant", index)
            size = int(rng.integers(1, options["max_size"] + 1))
            A = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
            exact = np.linalg.det(A)
            worst = max(worst, abs(gaussian_grassmann(A) - exact) / abs(exact))
        return worst < options["tolerance"], {"max_relative_error": worst, "matrices": options["count"]}


class BosonizationCheck(AbstractAlgebraCheck):
    """ Quadrature side within ``rhs_tolerance`` of the exact value (when known) and Monte Carlo side within
    ``sigmas`` standard errors of the quadrature side. """

    defaults = {"W": 2, "function": "exp_trace", "samples": 10 ** 6, "rhs_tolerance": 1e-6, "sigmas": 3.0}

    def check_algebra(self, seed: int, **kwargs):
        options = self.options(kwargs)
        result = bosonization_check(options["W"], BosonizationFunction(options["function"]), options["samples"], seed)
        passed = result.lhs_sigma < options["sigmas"]
        measured = {"lhs": result.lhs, "lhs_stderr": result.lhs_stderr, "rhs": result.rhs, "sigma": result.lhs_sigma}
        if result.exact is not None:
            measured["exact"] = result.exact
            measured["rhs_relative_error"] = abs(result.rhs - result.exact) / result.exact
            passed = passed and measured["rhs_relative_error"] < options["rhs_tolerance"]
        return passed, measured


class GeneratingFunctionCheck(AbstractAlgebraCheck):
    """ Coefficients of the zonal generating function equal their printed closed forms. """

    def check_algebra(self, seed: int, **kwargs):
        self.options(kwargs)
        expr = generating_function()
        measured = {}
        for name, printed in sorted(PRINTED_COEFFICIENTS.items()):
            derived = expr.coefficient(name.split("*"))
            measured[name] = str(derived)
            if derived != ScalarPoly.parse(printed):
                logger.warning("Coefficient of %s differs: %s", name, derived)
                return False, measured
        return True, measured


class ComplexGaussianCheck(AbstractAlgebraCheck):
    """ Monte Carlo value of the complex Gaussian integral against 1/det A for a random Hermitian A > 1/2. """

    defaults = {"size": 3, "samples": 200000, "sigmas": 4.0}

    def check_algebra(self, seed: int, **kwargs):
        options = self.options(kwargs)
        rng = rng_for(seed, "complex-gaussian-matrix")
        size = options["size"]
        X = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
        A = np.eye(size) + 0.1 * (X @ X.conj().T) / size
        estimate, stderr, exact = complex_gaussian_check(A, options["samples"], seed)
        distance = abs(estimate - exact)
        return distance < options["sigmas"] * stderr, {"estimate": estimate, "exact": exact, "stderr": stderr}


class AlgebraCheck(Enum):
    GRASSMANN_DETERMINANT = GrassmannDeterminantCheck
    BOSONIZATION = BosonizationCheck
    GENERATING_FUNCTION = GeneratingFunctionCheck
    COMPLEX_GAUSSIAN = ComplexGaussianCheck


def check_algebra(check: AlgebraCheck, seed: int, **kwargs):
    return check.value().check_algebra(seed, **kwargs)
