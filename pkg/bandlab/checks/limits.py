# -*- coding: utf-8 -*-
""" This module contains the predefined limit checks. They are deterministic: each compares quadrature, closed forms
and the transfer-operator evaluation with one another, so no seed enters.

Predefined limit checks are enumerated in LimitCheck enum with each enum value containing the name of the class that
implements the check by extending AbstractLimitCheck class.

Typical usage example:

    passed, measured = check_limit(LimitCheck.SINE_KERNEL, energies=[0.0], points=[0.5])

"""

import abc
import logging
import math
from enum import Enum

import numpy as np

from bandlab.analyzer.scalars import bulk_constants, leading_order_integral, r_plus_minus_limit, sine_kernel_limit, \
    sine_kernel_reference
from bandlab.analyzer.transfer import CompactKernel, HyperbolicKernel, ZonalGrid, evaluate_sigma_model, \
    hyperbolic_truncation, ku_eigenvalue, laplacian_eigen_residuals, moment_identities_check, offdiag_eigenvalues, \
    offdiag_identity, recursion_residual, zonal_kernel_matrix

logger = logging.getLogger(__name__)


class AbstractLimitCheck(metaclass=abc.ABCMeta):
    """ Abstract class that serves as a blueprint for limit check classes. """

    defaults = {}

    def options(self, kwargs):
        unknown = set(kwargs) - set(self.defaults)
        if unknown:
            raise ValueError("Unknown arguments for {}: {}".format(type(self).__name__, sorted(unknown)))
        return dict(self.defaults, **kwargs)

    @abc.abstractmethod
    def check_limit(self, **kwargs):
        """ Returns check validity of a deterministic limit statement.

        Args:
            **kwargs: keyword check arguments, see ``defaults`` of each check

        Returns:
            a boolean verdict followed by a dict of measured values
        """


class SineKernelCheck(AbstractLimitCheck):
    """ The eps-extrapolated assembly of the closed forms equals 1 - sin^2(pi x)/(pi x)^2. """

    defaults = {"energies": [0.0, 1.0], "points": [0.25, 0.5, 1.5], "tolerance": 1e-8}

    def check_limit(self, **kwargs):
        options = self.options(kwargs)
        rows = []
        for E in options["energies"]:
            for x in options["points"]:
                value = sine_kernel_limit(E, x)
                rows.append([E, x, value, abs(value - sine_kernel_reference(x))])
        worst = max(row[3] for row in rows)
        return worst < options["tolerance"], {"max_abs_error": worst,
                                              "table": {"columns": ["E", "x", "value", "error"], "rows": rows}}


class LeadingOrderCheck(AbstractLimitCheck):
    """ The transfer pairing with K_0 replaced by the identity reproduces the closed form of R+-. """

    defaults = {"E": 0.0, "eps": 0.5, "xi_points": [[0.5, -0.5, 0.25, -0.25], [0.3, 0.1, 0.3, 0.1]],
                "tolerance": 1e-10}

    def check_limit(self, **kwargs):
        options = self.options(kwargs)
        worst = 0.0
        for xi in options["xi_points"]:
            closed = r_plus_minus_limit(options["E"], options["eps"], xi)
            integral = leading_order_integral(options["E"], options["eps"], xi)
            worst = max(worst, abs(integral - closed) / abs(closed))
        return worst < options["tolerance"], {"max_relative_error": worst}


class TransferClosedFormCheck(AbstractLimitCheck):
    """ evaluate_sigma_model against the closed form within ``factor`` * n log^2 n / beta_tilde, plus grid doubling.

    ``beta`` is the bare coupling; beta_tilde = c0^2 beta, so beta = 2500 gives beta_tilde = 10^4 at E = 0.
    """

    defaults = {"E": 0.0, "eps": 0.5, "beta": 2500.0, "n": 8,
                "xi_points": [[0.5, -0.5, 0.25, -0.25], [0.5, -0.5, 0.5, -0.5], [0.2, 0.1, -0.1, 0.3]],
                "factor": 5.0, "N_u": 24, "N_s": 64, "refine": True, "refine_tolerance": 1e-4}

    def check_limit(self, **kwargs):
        options = self.options(kwargs)
        E, eps, beta, n = options["E"], options["eps"], options["beta"], options["n"]
        beta_tilde = bulk_constants(E, beta).beta_tilde
        bound = options["factor"] * n * math.log(n) ** 2 / beta_tilde

        rows = []
        grids = []
        for xi in options["xi_points"]:
            grid = ZonalGrid.build(options["N_u"], options["N_s"], hyperbolic_truncation(E, eps, xi))
            grids.append(grid)
            value = evaluate_sigma_model(E, eps, xi, beta, n, grid=grid)
            closed = r_plus_minus_limit(E, eps, xi)
            rows.append([value.real, value.imag, closed.real, closed.imag, abs(value - closed) / abs(closed)])
            logger.info("Transfer at xi=%s: %s vs closed form %s", xi, value, closed)

        passed = all(row[4] <= bound for row in rows)
        measured = {"bound": bound, "rel_dev": [row[4] for row in rows],
                    "table": {"columns": ["value_re", "value_im", "closed_re", "closed_im", "rel_dev"], "rows": rows}}

        if options["refine"]:
            xi = options["xi_points"][0]
            coarse = complex(rows[0][0], rows[0][1])
            fine = evaluate_sigma_model(E, eps, xi, beta, n, grid=grids[0].refined())
            change = abs(fine - coarse) / abs(fine)
            measured["grid_change"] = change
            passed = passed and change < options["refine_tolerance"]
        return passed, measured


class SpectralIdentitiesCheck(AbstractLimitCheck):
    """ Sector eigenvalue identities of the zonal kernels.

    Covers the asymptotic |lambda^(l) - (1 - l(l+1)/bt)| <= 5 l^4/bt^2, the off-diagonal recursion and its exact form,
    lambda_{-1,-1} - lambda^(l) = O(1/bt), the moment relations and the Nystrom spectrum of K_U and K_S.
    """

    defaults = {"beta_tildes": [100.0, 1000.0, 10000.0], "max_l": 5, "recursion_beta_tilde": 1000.0,
                "recursion_max_l": 4, "moment_beta_tildes": [100.0, 1000.0], "nystrom_beta_tilde": 200.0,
                "nystrom_levels": 5, "nystrom_tolerance": 1e-6, "identity_tolerance": 1e-8}

    def check_limit(self, **kwargs):
        options = self.options(kwargs)
        measured = {}

        asymptotic = 0.0
        for bt in options["beta_tildes"]:
            for l in range(1, options["max_l"] + 1):
                residual = abs(ku_eigenvalue(l, bt) - (1.0 - l * (l + 1) / bt))
                asymptotic = max(asymptotic, residual / (5.0 * l ** 4 / bt ** 2))
        measured["asymptotic_ratio"] = asymptotic

        bt = options["recursion_beta_tilde"]
        recursion, diagonal, identity = 0.0, 0.0, 0.0
        for l in range(1, options["recursion_max_l"] + 1):
            m10, m1m1 = offdiag_eigenvalues(l, bt)
            recursion = max(recursion, recursion_residual(l, bt) * bt)
            diagonal = max(diagonal, abs(m1m1 - ku_eigenvalue(l, bt)) * bt)
            identity = max(identity, abs(m10 - offdiag_identity(l, bt)))
        measured.update({"recursion_scaled": recursion, "offdiag_diagonal_scaled": diagonal,
                         "offdiag_identity": identity})

        moments = {str(bt): moment_identities_check(bt) for bt in options["moment_beta_tildes"]}
        measured["moments"] = {key: report.residuals for key, report in moments.items()}

        bt = options["nystrom_beta_tilde"]
        levels = options["nystrom_levels"]
        grid = ZonalGrid.build()
        discrete = np.sort(np.linalg.eigvals(CompactKernel(bt).matrix(grid)).real)[::-1][:levels]
        exact = np.array([ku_eigenvalue(l, bt) for l in range(levels)])
        measured["nystrom_deviation"] = float(np.max(np.abs(discrete - exact)))
        measured["k_s_max_eigenvalue"] = float(HyperbolicKernel(bt).symmetric_spectrum(grid)[0])

        passed = (asymptotic <= 1.0 and recursion <= 10.0 and diagonal <= 10.0
                  and identity < options["identity_tolerance"]
                  and all(report.passed for report in moments.values())
                  and measured["nystrom_deviation"] < options["nystrom_tolerance"]
                  and measured["k_s_max_eigenvalue"] <= 1.0 + 1e-9)
        return passed, measured


class LaplacianCheck(AbstractLimitCheck):
    """ Finite-difference eigen-relations of the compact and hyperbolic zonal Laplacians. """

    defaults = {"max_l": 4, "rhos": [0.0, 0.5, 2.0], "tolerance": 1e-4}

    def check_limit(self, **kwargs):
        options = self.options(kwargs)
        residuals = laplacian_eigen_residuals(options["max_l"], options["rhos"])
        return max(residuals.values()) < options["tolerance"], residuals


class TruncationCheck(AbstractLimitCheck):
    """ The hyperbolic truncation chosen for an observation point keeps the lost K_S mass below ``tolerance``. """

    defaults = {"E": 0.0, "eps": 0.5, "xi": [0.5, -0.5, 0.25, -0.25], "beta": 2500.0, "tolerance": 1e-8}

    def check_limit(self, **kwargs):
        options = self.options(kwargs)
        s_max = hyperbolic_truncation(options["E"], options["eps"], options["xi"])
        beta_tilde = bulk_constants(options["E"], options["beta"]).beta_tilde
        matrices = zonal_kernel_matrix(beta_tilde, ZonalGrid.build(s_max=s_max), max_power=0,
                                       tolerance=math.inf)
        return matrices.truncation_defect < options["tolerance"], {"S_max": s_max,
                                                                   "defect": matrices.truncation_defect}


class LimitCheck(Enum):
    SINE_KERNEL = SineKernelCheck
    LEADING_ORDER = LeadingOrderCheck
    TRANSFER_CLOSED_FORM = TransferClosedFormCheck
    SPECTRAL_IDENTITIES = SpectralIdentitiesCheck
    LAPLACIAN = LaplacianCheck
    TRUNCATION = TruncationCheck


def check_limit(check: LimitCheck, **kwargs):
    return check.value().check_limit(**kwargs)
