# -*- coding: utf-8 -*-
"""
This module holds the closed-form layer: the bulk constants at an energy E, the shift variables built from
(eps, xi), the large-(beta, n) limits of the correlators R+- and R++, and the assembly of their second derivatives
into the sine kernel 1 - sin^2(pi x)/(pi x)^2.

Typical usage example:

    constants = bulk_constants(E=0.0, beta=1.0)
    value = r_plus_minus_limit(0.0, 0.1, (0.5, -0.5, 0.25, -0.25))
    kernel = sine_kernel_limit(0.0, 0.5)

"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from bandlab.errors import DivisionByZeroError, NotConvergedError, OutOfBulkError

logger = logging.getLogger(__name__)

SINE_KERNEL_EDGE = math.sqrt(2.0)
TAYLOR_RADIUS = 1e-3
TAYLOR_TERMS = 5


@dataclass(frozen=True)
class BulkConstants:
    """ Constants attached to a bulk energy E.

    a_plus and a_minus are the saddle points (iE +- sqrt(4 - E^2))/2, c_pm = 1 + a_pm^-2, c0 = a_plus - a_minus and
    beta_tilde = c0^2 * beta.
    """
    E: float
    rho: float
    a_plus: complex
    a_minus: complex
    c_plus: complex
    c_minus: complex
    c0: float
    beta: float
    beta_tilde: float

    @property
    def L(self) -> np.ndarray:
        return np.diag([1.0, -1.0])

    @property
    def L_pm(self) -> np.ndarray:
        return np.diag([self.a_plus, self.a_minus])


def bulk_constants(E: float, beta: float = 0.0) -> BulkConstants:
    """
    Raises:
        OutOfBulkError: if |E| >= 2
    """
    if not -2.0 < E < 2.0:
        raise OutOfBulkError("E={} is outside the bulk (-2, 2).".format(E), E=E)
    root = math.sqrt(4.0 - E * E)
    a_plus = (1j * E + root) / 2.0
    a_minus = (1j * E - root) / 2.0
    return BulkConstants(E=float(E), rho=root / (2.0 * math.pi), a_plus=a_plus, a_minus=a_minus,
                         c_plus=1.0 + a_plus ** -2, c_minus=1.0 + a_minus ** -2, c0=root, beta=float(beta),
                         beta_tilde=root * root * beta)


@dataclass(frozen=True)
class LimitShifts:
    alpha1: complex
    alpha2: complex
    delta1: complex
    delta2: complex
    theta_eps: complex
    C_E_xi: complex
    Lambda_xi_eps: Tuple[complex, complex, complex, complex]


def limit_shifts(E: float, eps: float, xi: Sequence[complex]) -> LimitShifts:
    xi1, xi2, xi1p, xi2p = (complex(x) for x in xi)
    rho = bulk_constants(E).rho
    alpha1 = eps - 1j * (xi1 - xi2) / (2.0 * rho)
    alpha2 = eps - 1j * (xi1p - xi2p) / (2.0 * rho)
    return LimitShifts(
        alpha1=alpha1,
        alpha2=alpha2,
        delta1=1j * (xi1p - xi1) / (2.0 * rho),
        delta2=1j * (xi2 - xi2p) / (2.0 * rho),
        theta_eps=2j * alpha1 * rho,
        C_E_xi=complex(np.exp(E * (xi1 + xi2 - xi1p - xi2p) / (2.0 * rho))),
        Lambda_xi_eps=(eps - 1j * xi1 / rho, -eps - 1j * xi2 / rho, eps - 1j * xi1p / rho, -eps - 1j * xi2p / rho))


def r_plus_minus_limit(E: float, eps: float, xi: Sequence[complex]) -> complex:
    """ Limit of R+- when n, beta -> infinity with beta >> n log^2 n.

    Raises:
        DivisionByZeroError: if alpha1 or alpha2 vanishes
    """
    c0 = bulk_constants(E).c0
    s = limit_shifts(E, eps, xi)
    if s.alpha1 == 0 or s.alpha2 == 0:
        raise DivisionByZeroError("alpha1 and alpha2 must not vanish (eps > 0 excludes this).")

    grow = np.exp(2.0 * c0 * s.alpha1)
    bracket = (s.delta1 * s.delta2 * (grow - 1.0) / (s.alpha1 * s.alpha2)
               - (s.delta1 + s.delta2) * grow / s.alpha2
               + grow * s.alpha1 / s.alpha2)
    return complex(s.C_E_xi * np.exp(-c0 * (s.alpha1 + s.alpha2)) * bracket)


def r_plus_plus_limit(E: float, eps: float, xi: Sequence[complex]) -> complex:
    """ exp(i a_plus (xi1' + xi2' - xi1 - xi2) / rho); independent of eps in the limit. """
    xi1, xi2, xi1p, xi2p = (complex(x) for x in xi)
    constants = bulk_constants(E)
    return complex(np.exp(1j * constants.a_plus * (xi1p + xi2p - xi1 - xi2) / constants.rho))


def d2_r_plus_plus(E: float, eps: float, xi: Sequence[complex]) -> complex:
    """ Mixed second derivative of the R++ limit in (xi1', xi2'). """
    constants = bulk_constants(E)
    return -constants.a_plus ** 2 / constants.rho ** 2 * r_plus_plus_limit(E, eps, xi)


def _one_minus_exp_over_square(theta: complex) -> complex:
    """ (1 - exp(2 pi i theta)) / theta^2, summed as a series for |theta| < TAYLOR_RADIUS.

    The series is -2 pi i / theta - sum_{k >= 2} (2 pi i)^k theta^(k-2) / k!. At theta = 0 the pole term is dropped
    and only the finite part 2 pi^2 is returned. For real theta the pole is purely imaginary, so it cancels in the
    real combination d2 + conj(d2) that callers such as sine_kernel_assembly form.
    """
    if abs(theta) >= TAYLOR_RADIUS:
        return (1.0 - np.exp(2j * np.pi * theta)) / theta ** 2

    w = 2j * np.pi
    total = 0j if theta == 0 else -w / theta
    for k in range(2, TAYLOR_TERMS + 3):
        total -= w ** k * theta ** (k - 2) / math.factorial(k)
    return complex(total)


def d2_r_plus_minus_coincident(E: float, eps: float, xi1: complex, xi2: complex) -> complex:
    """ Second derivative of the R+- limit at xi' = xi: 1/rho^2 - (1 - exp(2 pi i theta))/theta^2.

    Here theta = 2 i eps rho + xi1 - xi2. For |theta| below TAYLOR_RADIUS the quotient is summed as a series; its
    1/theta pole cancels in R+- + conj(R+-) for real theta.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative.")
    rho = bulk_constants(E).rho
    theta = 2j * eps * rho + complex(xi1) - complex(xi2)
    return complex(1.0 / rho ** 2 - _one_minus_exp_over_square(theta))


def sine_kernel_reference(x: float) -> float:
    return float(1.0 - np.sinc(x) ** 2)


def sine_kernel_assembly(E: float, x: float, eps: float) -> complex:
    """ (2 pi)^-2 [d2 R+- + conj(d2 R+-) - d2 R++ - conj(d2 R++)] at xi' = xi, xi1 - xi2 = x. """
    d2_pm = d2_r_plus_minus_coincident(E, eps, x, 0.0)
    d2_pp = d2_r_plus_plus(E, eps, (x, 0.0, x, 0.0))
    return complex((d2_pm + np.conj(d2_pm) - d2_pp - np.conj(d2_pp)) / (2.0 * np.pi) ** 2)


def _neville_at_zero(nodes: Sequence[float], values: Sequence[complex]) -> Tuple[complex, float]:
    """ Polynomial extrapolation to 0; returns the estimate and the change from the previous order. """
    table = [complex(v) for v in values]
    previous = table[-1]
    estimate = table[0]
    count = len(nodes)
    for order in range(1, count):
        for i in range(count - order):
            table[i] = (nodes[i + order] * table[i] - nodes[i] * table[i + 1]) / (nodes[i + order] - nodes[i])
        previous, estimate = estimate, table[0]
    return estimate, abs(estimate - previous)


def sine_kernel_limit(E: float, x: float, eps_sequence: Optional[Sequence[float]] = None,
                      tolerance: float = 1e-9) -> float:
    """ Assembles the sine kernel from the closed forms and extrapolates eps -> 0.

    Args:
        E: energy with |E| < sqrt(2)
        x: unfolded separation xi1 - xi2, non-zero
        eps_sequence: decreasing eps values; defaults to 10^-2 ... 10^-6 scaled by min(1, |x|)
        tolerance: bound on the Richardson residual and on the imaginary residue

    Raises:
        OutOfBulkError: if |E| >= sqrt(2)
        NotConvergedError: if the extrapolation residual exceeds ``tolerance``
    """
    if abs(E) >= SINE_KERNEL_EDGE:
        raise OutOfBulkError("The sine-kernel limit is stated for |E| < sqrt(2), got E={}.".format(E), E=E)
    if x == 0:
        raise NotConvergedError("The eps -> 0 limit diverges at x = 0; the kernel vanishes there by continuity.")
    if eps_sequence is None:
        eps_sequence = [10.0 ** -k * min(1.0, abs(x)) for k in range(2, 7)]

    values = [sine_kernel_assembly(E, x, eps) for eps in eps_sequence]
    imaginary = max(abs(v.imag) for v in values)
    estimate, residual = _neville_at_zero(eps_sequence, values)
    logger.debug("Sine kernel at E=%s, x=%s: %.12f (residual %.2e, imaginary %.2e)", E, x, estimate.real, residual,
                 imaginary)

    if residual > tolerance or imaginary > tolerance:
        raise NotConvergedError("eps extrapolation residual {:.2e}, imaginary residue {:.2e}".format(
            residual, imaginary), E=E, x=x)
    return float(estimate.real)


def domain_report(E: float) -> dict:
    """ Which limit statements cover E: generic bulk (|E| < 2) and the sine-kernel domain (|E| < sqrt(2)). """
    return {"E": E, "bulk": abs(E) < 2.0, "sine_kernel_domain": abs(E) < SINE_KERNEL_EDGE}


def leading_order_integral(E: float, eps: float, xi: Sequence[complex], nodes: int = 32) -> complex:
    """ The transfer pairing with K_0 replaced by the identity; it equals r_plus_minus_limit.

    Computes C exp(c0 (alpha1 - alpha2)) int_0^1 du int_0^inf ds g(u, s) exp(-2 c0 (alpha1 (1 - u) + alpha2 s)) with
    g = 4 c0^2 (delta1 - X)(delta2 - X) - 2 and X = alpha1 u + alpha2 s. The s ray is rotated onto t = 2 c0 alpha2 s,
    where g is a quadratic against exp(-t) and Gauss-Laguerre is exact.

    Raises:
        DivisionByZeroError: if Re(alpha2) <= 0, where the s integral diverges
    """
    c0 = bulk_constants(E).c0
    s = limit_shifts(E, eps, xi)
    rate = 2.0 * c0 * s.alpha2
    if rate.real <= 0:
        raise DivisionByZeroError("The s integral needs Re(alpha2) > 0.")

    x, wx = np.polynomial.legendre.leggauss(nodes)
    u, wu = (x + 1.0) / 2.0, wx / 2.0
    t, wt = np.polynomial.laguerre.laggauss(nodes)
    sv = t / rate
    u, sv = u[:, None], sv[None, :]
    X = s.alpha1 * u + s.alpha2 * sv
    integrand = (4.0 * c0 ** 2 * (s.delta1 - X) * (s.delta2 - X) - 2.0) * np.exp(-2.0 * c0 * s.alpha1 * (1.0 - u))
    value = np.sum(wu[:, None] * (wt / rate)[None, :] * integrand)
    return complex(s.C_E_xi * np.exp(c0 * (s.alpha1 - s.alpha2)) * value)
