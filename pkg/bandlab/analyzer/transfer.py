# -*- coding: utf-8 -*-
"""
This module contains the transfer-operator layer of the sigma model: zonal kernels on the sphere (compact sector,
coordinate u) and on the hyperboloid (hyperbolic sector, coordinate s), their sector eigenvalues, the 4 x 4 operator
assembled from the nilpotent generating function, and the evaluation of the correlator by direct operator powers.

Zonal functions are stored by their values on Gauss-Legendre nodes of a ZonalGrid. Kernels are discretized with an
interpolatory Nystrom rule: the kernel row of a coarse node is integrated on a fine composite rule in the geodesic
angle, against the Legendre interpolant of the coarse values. Polynomials in u of degree below the node count are
therefore mapped exactly, and the discrete K_U has the eigenvalues lambda^(l) of the continuous one.

Typical usage example:

    grid = ZonalGrid.build(N_u=24, N_s=64, s_max=hyperbolic_truncation(0.0, 0.5, xi))
    value = evaluate_sigma_model(0.0, 0.5, xi, beta=2500.0, n=8, grid=grid)
    lam = ku_eigenvalue(2, beta_tilde=1000.0)

"""
from __future__ import annotations

import abc
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import legendre
from scipy import integrate, special

from bandlab.analyzer.berezin import ScalarPoly, k_matrix
from bandlab.analyzer.scalars import bulk_constants, limit_shifts, r_plus_minus_limit
from bandlab.errors import NonFiniteError, QuadratureNotConvergedError, TruncationTooSmallError

logger = logging.getLogger(__name__)

ENVELOPE_EXPONENT = 36.0
DEFAULT_S_MAX = 12.0
SYMBOL_DEGREE = 4
PANEL_NODES = 12
LARGE_KAPPA = 50.0
TRAPEZOID_NODES = 128
HALF_LINE_NODES = 48
TAIL_EXPONENT = 60.0


def rep_function(l: int, m: int, k: int, theta):
    """ Matrix element P^(l)_{mk}(cos theta) of the unitary spin-l representation.

    Uses the integral over phi of (cos(theta/2) + i sin(theta/2) e^{-i phi})^(l-k) (cos(theta/2) + i sin(theta/2)
    e^{i phi})^(l+k) e^{i(m-k) phi}. The integrand is a trigonometric polynomial, so the trapezoid rule with more nodes
    than its top frequency is exact.
    """
    if abs(m) > l or abs(k) > l:
        raise ValueError("Need |m|, |k| <= l, got l={}, m={}, k={}.".format(l, m, k))
    norm = math.sqrt(math.factorial(l - m) * math.factorial(l + m)
                     / (math.factorial(l - k) * math.factorial(l + k)))
    count = 2 * (2 * l + abs(m - k)) + 2
    phi = 2.0 * np.pi * np.arange(count) / count

    theta = np.asarray(theta, dtype=float)[..., None]
    half_cos, half_sin = np.cos(theta / 2.0), np.sin(theta / 2.0)
    first = (half_cos + 1j * half_sin * np.exp(-1j * phi)) ** (l - k)
    second = (half_cos + 1j * half_sin * np.exp(1j * phi)) ** (l + k)
    value = norm * np.mean(first * second * np.exp(1j * (m - k) * phi), axis=-1)
    return complex(value) if value.ndim == 0 else value


def hyperbolic_rep_function(rho: float, m: int, k: int, tau, nodes: int = 64):
    """ Principal-series analogue of rep_function with l' = -1/2 + i rho: cos -> cosh and i sin -> sinh. """
    degree = -0.5 + 1j * rho
    phi = 2.0 * np.pi * np.arange(nodes) / nodes
    tau = np.asarray(tau, dtype=float)[..., None]
    half_cosh, half_sinh = np.cosh(tau / 2.0), np.sinh(tau / 2.0)
    first = (half_cosh + half_sinh * np.exp(-1j * phi)) ** (degree - k)
    second = (half_cosh + half_sinh * np.exp(1j * phi)) ** (degree + k)
    value = np.mean(first * second * np.exp(1j * (m - k) * phi), axis=-1)
    return complex(value) if value.ndim == 0 else value


def cone_function(rho: float, z, nodes: int = 128):
    """ P_{-1/2 + i rho}(z) for z >= 1 from the Laplace integral over phi in [0, pi]. """
    phi, weights = special.roots_legendre(nodes)
    phi, weights = (phi + 1.0) * np.pi / 2.0, weights * np.pi / 2.0
    z = np.asarray(z, dtype=float)[..., None]
    base = z + np.sqrt(np.maximum(z * z - 1.0, 0.0)) * np.cos(phi)
    value = np.sum(weights * base ** (-0.5 + 1j * rho), axis=-1).real / np.pi
    return float(value) if value.ndim == 0 else value


def _quad(function: Callable[[float], float], lower: float, upper: float, what: str, **context) -> float:
    value, error = integrate.quad(function, lower, upper, epsabs=1e-15, epsrel=1e-12, limit=400)
    if error > max(1e-9 * abs(value), 1e-14):
        raise QuadratureNotConvergedError("{}: quadrature error {:.2e} on value {:.3e}".format(what, error, value),
                                          **context)
    return value


def _complex_quad(function, lower, upper, what, **context) -> complex:
    real = _quad(lambda x: function(x).real, lower, upper, what, **context)
    imag = _quad(lambda x: function(x).imag, lower, upper, what, **context)
    return complex(real, imag)


def compact_moment(l: int, beta_tilde: float, power: int = 0) -> float:
    """ beta_tilde * int_0^1 exp(-beta_tilde x) x^power P_l(1 - 2x) dx.

    The shifted Legendre expansion gives a finite series in regularized incomplete gamma functions; past
    l(l+1) > 2 beta_tilde its alternating terms cancel badly and adaptive quadrature is used instead.
    """
    if beta_tilde <= 0:
        raise ValueError("beta_tilde must be positive.")
    if l * (l + 1) <= 2.0 * beta_tilde:
        total = 0.0
        for k in range(l + 1):
            coefficient = (-1) ** k * math.comb(l, k) * math.comb(l + k, k)
            order = k + power
            total += coefficient * math.exp(special.gammaln(order + 1) - order * math.log(beta_tilde)) \
                * special.gammainc(order + 1, beta_tilde)
        return float(total)

    upper = min(1.0, TAIL_EXPONENT / beta_tilde)
    return _quad(lambda x: beta_tilde * math.exp(-beta_tilde * x) * x ** power * special.eval_legendre(l, 1 - 2 * x),
                 0.0, upper, "compact moment", l=l, beta_tilde=beta_tilde)


def ku_eigenvalue(l: int, beta_tilde: float) -> float:
    """ lambda^(l)U, the eigenvalue of K_U on the spin-l sector (Haar measure normalized to 1). """
    return compact_moment(l, beta_tilde, 0)


def mu_moment(l: int, beta_tilde: float, power: int = 1) -> float:
    """ Eigenvalue of K_U u^power on the spin-l sector; power=1 is mu^(l). """
    return compact_moment(l, beta_tilde, power)


def ks_eigenvalue(rho_prime: float, beta_tilde: float, power: int = 0, nodes: int = 64) -> float:
    """ beta_tilde * int_0^inf exp(-beta_tilde s) s^power P_{-1/2 + i rho'}(1 + 2s) ds.

    Gauss-Laguerre in t = beta_tilde s.

    Raises:
        QuadratureNotConvergedError: if doubling the node count changes the value
    """
    if beta_tilde <= 0:
        raise ValueError("beta_tilde must be positive.")

    def laguerre(count):
        t, weights = special.roots_laguerre(count)
        s = t / beta_tilde
        return float(np.sum(weights * s ** power * cone_function(rho_prime, 1.0 + 2.0 * s)))

    coarse, fine = laguerre(nodes), laguerre(2 * nodes)
    if abs(fine - coarse) > 1e-9 * abs(fine) + 1e-300:
        raise QuadratureNotConvergedError("K_S eigenvalue changed by {:.2e} on refinement".format(fine - coarse),
                                          rho_prime=rho_prime, beta_tilde=beta_tilde)
    return fine


def _theta_limit(beta_tilde: float) -> float:
    return 2.0 * math.asin(min(1.0, math.sqrt(TAIL_EXPONENT / beta_tilde)))


def _tau_limit(beta_tilde: float) -> float:
    return 2.0 * math.asinh(math.sqrt(TAIL_EXPONENT / beta_tilde))


_COMPACT_WEIGHTS = {
    (-1, 0): lambda t: np.sin(t) ** 2,
    (-1, -1): lambda t: np.cos(t / 2.0) ** 2 * np.sin(t),
    (-1, 1): lambda t: np.sin(t / 2.0) ** 2 * np.sin(t),
}
_HYPERBOLIC_WEIGHTS = {
    (-1, 0): lambda t: np.sinh(t) ** 2,
    (-1, -1): lambda t: np.cosh(t / 2.0) ** 2 * np.sinh(t),
    (-1, 1): lambda t: np.sinh(t / 2.0) ** 2 * np.sinh(t),
}


def compact_offdiag(l: int, m: int, k: int, beta_tilde: float) -> complex:
    """ (beta_tilde/2) int_0^pi exp(-beta_tilde sin^2(theta/2)) P^(l)_{mk}(cos theta) w_{mk}(theta) dtheta. """
    weight = _COMPACT_WEIGHTS[(m, k)]
    return _complex_quad(
        lambda t: beta_tilde / 2.0 * math.exp(-beta_tilde * math.sin(t / 2.0) ** 2) * weight(t)
        * rep_function(l, m, k, t), 0.0, _theta_limit(beta_tilde), "compact off-diagonal eigenvalue",
        l=l, m=m, k=k, beta_tilde=beta_tilde)


def hyperbolic_offdiag(rho_prime: float, m: int, k: int, beta_tilde: float) -> complex:
    weight = _HYPERBOLIC_WEIGHTS[(m, k)]
    return _complex_quad(
        lambda t: beta_tilde / 2.0 * math.exp(-beta_tilde * math.sinh(t / 2.0) ** 2) * weight(t)
        * hyperbolic_rep_function(rho_prime, m, k, t), 0.0, _tau_limit(beta_tilde),
        "hyperbolic off-diagonal eigenvalue", rho_prime=rho_prime, m=m, k=k, beta_tilde=beta_tilde)


def offdiag_eigenvalues(l: int, beta_tilde: float) -> Tuple[complex, complex]:
    """ (lambda^(l)_{-1,0}, lambda^(l)_{-1,-1}); the first is purely imaginary. """
    if l < 1:
        raise ValueError("Off-diagonal sectors need l >= 1.")
    return compact_offdiag(l, -1, 0, beta_tilde), compact_offdiag(l, -1, -1, beta_tilde)


def lambda_m11(l: int, beta_tilde: float) -> complex:
    return compact_offdiag(l, -1, 1, beta_tilde)


def offdiag_identity(l: int, beta_tilde: float) -> complex:
    """ Closed value of lambda^(l)_{-1,0}: -i (1 + 1/l)^(1/2) (lambda^(l+1) - lambda^(l) + 2 mu^(l)). """
    return -1j * math.sqrt(1.0 + 1.0 / l) * (ku_eigenvalue(l + 1, beta_tilde) - ku_eigenvalue(l, beta_tilde)
                                             + 2.0 * mu_moment(l, beta_tilde))


def recursion_residual(l: int, beta_tilde: float) -> float:
    """ | |(1+1/l)^(1/2) lambda_{-1,0}| - |lambda^(l+1) - lambda^(l)| / 2 |.

    Only a sanity bound: both sides are O(1/beta_tilde) and the leading-order recursion drops the mu^(l) term, so the
    residual is of the same order as the terms it compares. offdiag_identity carries the exact relation.
    """
    m10, _ = offdiag_eigenvalues(l, beta_tilde)
    step = ku_eigenvalue(l + 1, beta_tilde) - ku_eigenvalue(l, beta_tilde)
    return abs(math.sqrt(1.0 + 1.0 / l) * abs(m10) - abs(step) / 2.0)


@dataclass(frozen=True)
class SectorSpectrum:
    """ Eigenvalues of one sector: l for the compact sphere, rho_prime for the hyperboloid. """
    lam: float
    mu: float
    l: Optional[int] = None
    rho_prime: Optional[float] = None
    lambda_m10: complex = 0j
    lambda_m1m1: complex = 0j
    lambda_m11: complex = 0j


def compact_sector(l: int, beta_tilde: float) -> SectorSpectrum:
    if l < 1:
        return SectorSpectrum(lam=ku_eigenvalue(l, beta_tilde), mu=mu_moment(l, beta_tilde), l=l)
    m10, m1m1 = offdiag_eigenvalues(l, beta_tilde)
    return SectorSpectrum(lam=ku_eigenvalue(l, beta_tilde), mu=mu_moment(l, beta_tilde), l=l, lambda_m10=m10,
                          lambda_m1m1=m1m1, lambda_m11=lambda_m11(l, beta_tilde))


def hyperbolic_sector(rho_prime: float, beta_tilde: float) -> SectorSpectrum:
    return SectorSpectrum(lam=ks_eigenvalue(rho_prime, beta_tilde), mu=ks_eigenvalue(rho_prime, beta_tilde, power=1),
                          rho_prime=rho_prime,
                          lambda_m10=hyperbolic_offdiag(rho_prime, -1, 0, beta_tilde),
                          lambda_m1m1=hyperbolic_offdiag(rho_prime, -1, -1, beta_tilde),
                          lambda_m11=hyperbolic_offdiag(rho_prime, -1, 1, beta_tilde))


def correction_eigenvalue(l: int, rho_prime: float, beta_tilde: float, z: complex) -> complex:
    """ |lU_{-1,0}|^2 |lS_{-1,0}|^2 lU_{-1,1} lS_{-1,1} / (z - lU_{-1,-1} lS_{-1,-1})^2 for |z| > 1. """
    if abs(z) <= 1:
        raise ValueError("The correction eigenvalue is taken at |z| > 1.")
    compact, hyperbolic = compact_sector(l, beta_tilde), hyperbolic_sector(rho_prime, beta_tilde)
    numerator = (abs(compact.lambda_m10) ** 2 * abs(hyperbolic.lambda_m10) ** 2
                 * compact.lambda_m11 * hyperbolic.lambda_m11)
    return complex(numerator / (z - compact.lambda_m1m1 * hyperbolic.lambda_m1m1) ** 2)


@dataclass
class MomentReport:
    beta_tilde: float
    residuals: Dict[str, float]
    sectors: int
    bound: float = 10.0

    @property
    def passed(self) -> bool:
        return all(value <= self.bound for value in self.residuals.values())


def moment_identities_check(beta_tilde: float, bound: float = 10.0, rho_count: int = 5) -> MomentReport:
    """ Sector eigenvalues of K_US u, K_US s, K_US u^2, K_US s^2 and K_US us against 1/bt, 1/bt, 2/bt^2, 2/bt^2 and
    1/bt^2, each residual divided by (1 - lambda^(l) lambda^(rho')) times the leading term.

    Sectors: l(l+1) <= beta_tilde/10 and rho'^2 <= beta_tilde/10.
    """
    if beta_tilde < 10:
        raise ValueError("The moment identities are checked for beta_tilde >= 10.")
    limit = beta_tilde / 10.0
    ls = [l for l in range(int(math.sqrt(limit)) + 2) if l * (l + 1) <= limit]
    rhos = np.linspace(0.0, math.sqrt(limit), rho_count)

    compact = [(ku_eigenvalue(l, beta_tilde), mu_moment(l, beta_tilde, 1), mu_moment(l, beta_tilde, 2)) for l in ls]
    hyperbolic = [(ks_eigenvalue(r, beta_tilde), ks_eigenvalue(r, beta_tilde, 1), ks_eigenvalue(r, beta_tilde, 2))
                  for r in rhos]

    inv = 1.0 / beta_tilde
    residuals = {"u": 0.0, "s": 0.0, "u2": 0.0, "s2": 0.0, "us": 0.0}
    for lam_u, mu1, mu2 in compact:
        for lam_s, nu1, nu2 in hyperbolic:
            gap = 1.0 - lam_u * lam_s
            relations = {"u": (mu1 * lam_s, inv), "s": (lam_u * nu1, inv), "u2": (mu2 * lam_s, 2 * inv ** 2),
                         "s2": (lam_u * nu2, 2 * inv ** 2), "us": (mu1 * nu1, inv ** 2)}
            for name, (value, lead) in relations.items():
                residuals[name] = max(residuals[name], abs(value - lead) / (gap * lead))

    logger.info("Moment identities at beta_tilde=%s over %d sectors: %s", beta_tilde, len(ls) * len(rhos), residuals)
    return MomentReport(beta_tilde=beta_tilde, residuals=residuals, sectors=len(ls) * len(rhos), bound=bound)


def compact_laplacian(function: Callable, u, step: float = 1e-3):
    """ d/du [u (1 - u) f'(u)] by central differences; P_l(1 - 2u) has eigenvalue -l(l+1). """
    u = np.asarray(u, dtype=float)
    h = step
    upper = (u + h / 2) * (1 - u - h / 2) * (function(u + h) - function(u))
    lower = (u - h / 2) * (1 - u + h / 2) * (function(u) - function(u - h))
    return (upper - lower) / h ** 2


def hyperbolic_laplacian(function: Callable, s, step: float = 1e-3):
    """ d/ds [s (1 + s) f'(s)]; the cone function P_{-1/2+i rho}(1 + 2s) has eigenvalue -(rho^2 + 1/4). """
    s = np.asarray(s, dtype=float)
    h = step
    upper = (s + h / 2) * (1 + s + h / 2) * (function(s + h) - function(s))
    lower = (s - h / 2) * (1 + s - h / 2) * (function(s) - function(s - h))
    return (upper - lower) / h ** 2


def laplacian_eigen_residuals(max_l: int = 4, rhos: Sequence[float] = (0.0, 0.5, 2.0)) -> Dict[str, float]:
    """ Largest relative residual of the compact and hyperbolic eigen-relations on interior sample points. """
    u = np.linspace(0.1, 0.9, 9)
    s = np.linspace(0.1, 3.0, 9)
    compact = 0.0
    for l in range(max_l + 1):
        f = lambda x, l=l: special.eval_legendre(l, 1.0 - 2.0 * x)
        compact = max(compact, float(np.max(np.abs(compact_laplacian(f, u) + l * (l + 1) * f(u)))) / (1 + l * (l + 1)))
    hyperbolic = 0.0
    for rho in rhos:
        f = lambda x, rho=rho: cone_function(rho, 1.0 + 2.0 * x)
        scale = rho ** 2 + 0.25
        hyperbolic = max(hyperbolic, float(np.max(np.abs(hyperbolic_laplacian(f, s) + scale * f(s))
                                                  / (scale * np.abs(f(s)) + 1e-3))))
    return {"compact": compact, "hyperbolic": hyperbolic}


@dataclass(frozen=True, eq=False)
class ZonalGrid:
    """ Gauss-Legendre nodes in u on [0, 1] and in s on [0, s_max].

    ``decay`` is the rate of the exponential envelope the evaluated functions are assumed to have in s; the truncation
    check weighs the lost kernel mass with it.
    """
    u_nodes: np.ndarray = field(repr=False)
    u_weights: np.ndarray = field(repr=False)
    s_nodes: np.ndarray = field(repr=False)
    s_weights: np.ndarray = field(repr=False)
    s_max: float
    decay: float

    @property
    def counts(self) -> Tuple[int, int]:
        return len(self.u_nodes), len(self.s_nodes)

    @classmethod
    def build(cls, N_u: int = 24, N_s: int = 64, s_max: float = DEFAULT_S_MAX,
              decay: Optional[float] = None) -> "ZonalGrid":
        if N_u < 2 or N_s < 2:
            raise ValueError("A zonal grid needs at least two nodes per axis.")
        if s_max <= 0:
            raise ValueError("s_max must be positive.")
        x, w = special.roots_legendre(N_u)
        y, v = special.roots_legendre(N_s)
        return cls(u_nodes=(x + 1.0) / 2.0, u_weights=w / 2.0, s_nodes=(y + 1.0) * s_max / 2.0,
                   s_weights=v * s_max / 2.0, s_max=float(s_max),
                   decay=ENVELOPE_EXPONENT / s_max if decay is None else float(decay))

    def refined(self) -> "ZonalGrid":
        """ Both node counts and the truncation doubled, envelope kept. """
        N_u, N_s = self.counts
        return ZonalGrid.build(2 * N_u, 2 * N_s, 2 * self.s_max, self.decay)

    def report(self) -> dict:
        N_u, N_s = self.counts
        return {"N_u": N_u, "N_s": N_s, "S_max": self.s_max, "decay": self.decay}


def hyperbolic_truncation(E: float, eps: float, xi: Sequence[complex]) -> float:
    """ S_max where the boundary factor |F|^(2n) = exp(-2 c0 Re(alpha2) s) reaches exp(-36).

    Falls back to 12 if the factor does not decay.
    """
    rate = 2.0 * bulk_constants(E).c0 * limit_shifts(E, eps, xi).alpha2.real
    return ENVELOPE_EXPONENT / rate if rate > 0 else DEFAULT_S_MAX


class ZonalKernel(metaclass=abc.ABCMeta):
    """ Phase-averaged difference kernel beta_tilde exp(-beta_tilde x) x^a on a rank-one symmetric space.

    The relative coordinate x between points at geodesic angles t and t' with phase difference phi splits as
    x = D + B (1 - cos phi) with D, B >= 0, which keeps the phase average free of cancellation.
    """

    def __init__(self, beta_tilde: float):
        if beta_tilde <= 0:
            raise ValueError("beta_tilde must be positive.")
        self.beta_tilde = float(beta_tilde)
        self.step = min(0.1, 0.7 * math.sqrt(2.0 / beta_tilde))

    @abc.abstractmethod
    def coarse(self, grid: ZonalGrid) -> Tuple[np.ndarray, np.ndarray, float]:
        """ Coarse nodes, their weights and the length of the zonal interval. """
        pass

    @abc.abstractmethod
    def geodesic(self, x: np.ndarray) -> np.ndarray:
        pass

    @abc.abstractmethod
    def zonal(self, t: np.ndarray) -> np.ndarray:
        pass

    @abc.abstractmethod
    def measure(self, t: np.ndarray) -> np.ndarray:
        """ dx/dt, the normalized invariant measure in the geodesic angle. """
        pass

    @abc.abstractmethod
    def split(self, t: float, t_fine: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        pass

    def fine_rule(self, length: float) -> Tuple[np.ndarray, np.ndarray]:
        """ Composite Gauss-Legendre nodes in t over the zonal interval [0, length] and the weights of dx. """
        top = float(self.geodesic(np.array(length)))
        panels = max(1, int(math.ceil(top / self.step)))
        x, w = special.roots_legendre(PANEL_NODES)
        edges = np.linspace(0.0, top, panels + 1)
        half = np.diff(edges)[:, None] / 2.0
        t = (edges[:-1, None] + half * (x + 1.0)).ravel()
        weights = (half * w).ravel()
        return t, weights * self.measure(t)

    def interpolation(self, grid: ZonalGrid, x_fine: np.ndarray) -> np.ndarray:
        """ Matrix taking coarse values to the values of their Legendre interpolant at ``x_fine``. """
        nodes, weights, length = self.coarse(grid)
        count = len(nodes)
        coarse_vander = legendre.legvander(2.0 * nodes / length - 1.0, count - 1)
        projection = ((2.0 * np.arange(count) + 1.0) / 2.0)[:, None] * coarse_vander.T * (2.0 * weights / length)
        return legendre.legvander(2.0 * x_fine / length - 1.0, count - 1) @ projection

    def angular_averages(self, D: np.ndarray, B: np.ndarray, max_power: int) -> np.ndarray:
        """ (1/2pi) int exp(-bt x) x^a dphi for a = 0..max_power, x = D + B (1 - cos phi). """
        bt = self.beta_tilde
        kappa = bt * B
        out = np.zeros((max_power + 1,) + D.shape)
        base = np.exp(-bt * D)
        out[0] = base * special.ive(0, kappa)
        if max_power == 0:
            return out

        small = kappa < LARGE_KAPPA
        phi = 2.0 * np.pi * np.arange(TRAPEZOID_NODES) / TRAPEZOID_NODES
        x = D[small, None] + B[small, None] * (1.0 - np.cos(phi))
        weight = np.exp(-bt * x)
        for a in range(1, max_power + 1):
            out[a, small] = np.mean(weight * x ** a, axis=-1)

        # phase substitution v^2 = kappa (1 - cos phi) for sharply peaked kernels
        v, w = special.roots_legendre(HALF_LINE_NODES)
        v, w = (v + 1.0) * 4.0, w * 4.0
        large = ~small
        x = D[large, None] + v ** 2 / bt
        weight = (base[large, None] * np.exp(-v ** 2) * 2.0 * w
                  / (np.pi * np.sqrt(2.0 * kappa[large, None] - v ** 2)))
        for a in range(1, max_power + 1):
            out[a, large] = np.sum(weight * x ** a, axis=-1)
        return out

    def discretize(self, grid: ZonalGrid, max_power: int = 0) -> Tuple[List[np.ndarray], np.ndarray]:
        """ Nystrom matrices of the kernels x^a, a = 0..max_power, and the fine-rule row mass of the bare kernel. """
        nodes, _, length = self.coarse(grid)
        t_fine, w_fine = self.fine_rule(length)
        interp = self.interpolation(grid, self.zonal(t_fine))
        rows = np.zeros((max_power + 1, len(nodes), len(t_fine)))
        for i, t in enumerate(self.geodesic(nodes)):
            D, B = self.split(t, t_fine)
            rows[:, i, :] = self.beta_tilde * self.angular_averages(D, B, max_power)
        weighted = rows * w_fine
        logger.debug("%s: %d coarse x %d fine nodes at beta_tilde=%s", type(self).__name__, len(nodes), len(t_fine),
                     self.beta_tilde)
        return [block @ interp for block in weighted], weighted[0].sum(axis=1)

    def matrix(self, grid: ZonalGrid, power: int = 0) -> np.ndarray:
        return self.discretize(grid, power)[0][power]

    def symmetric_spectrum(self, grid: ZonalGrid) -> np.ndarray:
        """ Eigenvalues of W^(1/2) K W^(1/2) on the fine rule, in decreasing order. """
        t_fine, w_fine = self.fine_rule(self.coarse(grid)[2])
        rows = np.zeros((len(t_fine), len(t_fine)))
        for i, t in enumerate(t_fine):
            D, B = self.split(t, t_fine)
            rows[i] = self.beta_tilde * self.angular_averages(D, B, 0)[0]
        root = np.sqrt(w_fine)
        symmetric = root[:, None] * rows * root[None, :]
        return np.sort(np.linalg.eigvalsh((symmetric + symmetric.T) / 2.0))[::-1]


class CompactKernel(ZonalKernel):
    """ K_U on the sphere: u = sin^2(theta/2), du = sin(theta)/2 dtheta. """

    def coarse(self, grid):
        return grid.u_nodes, grid.u_weights, 1.0

    def geodesic(self, x):
        return 2.0 * np.arcsin(np.sqrt(x))

    def zonal(self, t):
        return np.sin(t / 2.0) ** 2

    def measure(self, t):
        return np.sin(t) / 2.0

    def split(self, t, t_fine):
        return np.sin((t - t_fine) / 2.0) ** 2, np.sin(t) * np.sin(t_fine) / 2.0


class HyperbolicKernel(ZonalKernel):
    """ K_S on the hyperboloid: s = sinh^2(tau/2), ds = sinh(tau)/2 dtau, truncated at s_max. """

    def coarse(self, grid):
        return grid.s_nodes, grid.s_weights, grid.s_max

    def geodesic(self, x):
        return 2.0 * np.arcsinh(np.sqrt(x))

    def zonal(self, t):
        return np.sinh(t / 2.0) ** 2

    def measure(self, t):
        return np.sinh(t) / 2.0

    def split(self, t, t_fine):
        return np.sinh((t - t_fine) / 2.0) ** 2, np.sinh(t) * np.sinh(t_fine) / 2.0


@dataclass(eq=False)
class ZonalMatrices:
    """ Nystrom matrices of K_U u^a and K_S s^b for a, b = 0..SYMBOL_DEGREE. """
    beta_tilde: float
    grid: ZonalGrid
    U: List[np.ndarray] = field(repr=False)
    S: List[np.ndarray] = field(repr=False)
    s_mass: np.ndarray = field(repr=False)

    @property
    def K_U(self) -> np.ndarray:
        return self.U[0]

    @property
    def K_S(self) -> np.ndarray:
        return self.S[0]

    @property
    def truncation_defect(self) -> float:
        return float(np.max((1.0 - self.s_mass) * np.exp(-self.grid.decay * self.grid.s_nodes)))


def zonal_kernel_matrix(beta_tilde: float, grid: ZonalGrid, max_power: int = SYMBOL_DEGREE,
                        tolerance: float = 1e-8) -> ZonalMatrices:
    """ Discretized K_U and K_S (and their moment kernels) on ``grid``.

    Raises:
        TruncationTooSmallError: if the K_S mass lost beyond s_max, weighed by the grid envelope, exceeds ``tolerance``
    """
    U, _ = CompactKernel(beta_tilde).discretize(grid, max_power)
    S, mass = HyperbolicKernel(beta_tilde).discretize(grid, max_power)
    matrices = ZonalMatrices(beta_tilde=float(beta_tilde), grid=grid, U=U, S=S, s_mass=mass)
    defect = matrices.truncation_defect
    if defect > tolerance:
        raise TruncationTooSmallError("K_S row-mass defect {:.2e} at S_max={}".format(defect, grid.s_max),
                                      s_max=grid.s_max, defect=defect)
    return matrices


def brute_force_compact_apply(beta_tilde: float, function: Callable, u_points: np.ndarray,
                              phi_nodes: int = 256) -> np.ndarray:
    """ K_U applied to a zonal function by a full two-angle quadrature on the sphere. """
    kernel = CompactKernel(beta_tilde)
    t_fine, w_fine = kernel.fine_rule(1.0)
    values = function(kernel.zonal(t_fine))
    phi = 2.0 * np.pi * np.arange(phi_nodes) / phi_nodes
    out = np.zeros(len(u_points))
    for i, theta in enumerate(kernel.geodesic(np.asarray(u_points, dtype=float))):
        relative = (1.0 - np.cos(theta) * np.cos(t_fine)[:, None]
                    - np.sin(theta) * np.sin(t_fine)[:, None] * np.cos(phi)) / 2.0
        averaged = np.mean(beta_tilde * np.exp(-beta_tilde * relative), axis=1)
        out[i] = np.sum(averaged * w_fine * values)
    return out


def t_conjugate(K) -> List[List[ScalarPoly]]:
    """ K_T = T K T with T = [[0, 0, 0, bt], [0, 0, 1, 0], [0, 1, 0, 0], [1/bt, 0, 0, 0]]. """
    zero, one = ScalarPoly(), ScalarPoly.constant(1)
    T = [[zero, zero, zero, ScalarPoly.variable("ib", -1)],
         [zero, zero, one, zero],
         [zero, one, zero, zero],
         [ScalarPoly.variable("ib"), zero, zero, zero]]

    def product(A, B):
        return [[sum((A[i][k] * B[k][j] for k in range(4)), ScalarPoly()) for j in range(4)] for i in range(4)]

    return product(product(T, K), T)


SYMBOL_POSITIONS = {"K1": (0, 1), "K2": (0, 2), "K3": (0, 3)}
K0_PATTERN = ((0, 0, "US"), (0, 1, "K1"), (0, 2, "K2"), (0, 3, "K3"), (1, 1, "US"), (1, 3, "K2"),
              (2, 2, "US"), (2, 3, "K1"), (3, 3, "US"))


def transfer_polynomials() -> Dict[str, ScalarPoly]:
    """ Symbols of the off-diagonal blocks: K1 = bt K21, K2 = bt K42, K3 = bt^2 K41, read off K_T. """
    K_T = t_conjugate(k_matrix())
    return {name: K_T[i][j] for name, (i, j) in SYMBOL_POSITIONS.items()}


def transfer_symbols(beta_tilde: float) -> Dict[str, np.ndarray]:
    """ Coefficient arrays c[a, b] of u^a s^b for every block of the K_0 pattern; K_US is the constant 1. """
    symbols = {name: poly.zonal_coefficients(beta_tilde) for name, poly in transfer_polynomials().items()}
    symbols["US"] = np.ones((1, 1))
    return symbols


@dataclass(eq=False)
class TransferOperator:
    """ M = F K_0 F on four zonal components, with the boundary vectors f = F(e4 - e1) and g = F^t(e1 - e4).

    Attributes:
        F_hat: 4 x 4 upper-triangular multiplication operator, shape (4, 4, N_u, N_s)
        fvec, gvec: boundary vectors, shape (4, N_u, N_s)
        symbols: coefficient arrays of the convolution blocks
        matrices: zonal Nystrom matrices
        params: E, eps, xi, beta, beta_tilde, n
        prefactor: C_{E,xi} exp(c0 (alpha1 - alpha2))
    """
    F_hat: np.ndarray = field(repr=False)
    fvec: np.ndarray = field(repr=False)
    gvec: np.ndarray = field(repr=False)
    symbols: Dict[str, np.ndarray] = field(repr=False)
    matrices: ZonalMatrices = field(repr=False)
    params: dict
    prefactor: complex

    def __post_init__(self):
        self._factors = {}
        for name, coefficients in self.symbols.items():
            pairs = []
            for a in range(coefficients.shape[0]):
                row = coefficients[a]
                if not np.any(row):
                    continue
                combined = sum(row[b] * self.matrices.S[b] for b in range(len(row)) if row[b] != 0)
                pairs.append((self.matrices.U[a], combined))
            self._factors[name] = pairs

    def apply_block(self, name: str, G: np.ndarray) -> np.ndarray:
        return sum(left @ G @ right.T for left, right in self._factors[name])

    def apply_k0(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros_like(v, dtype=complex)
        for row, column, name in K0_PATTERN:
            out[row] += self.apply_block(name, v[column])
        return out

    def apply_f(self, v: np.ndarray) -> np.ndarray:
        return np.einsum("abij,bij->aij", self.F_hat, v)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.apply_f(self.apply_k0(self.apply_f(v)))

    def pairing(self, v: np.ndarray) -> complex:
        """ Bilinear pairing sum_a int v_a g_a du ds (no conjugation). """
        weights = np.outer(self.matrices.grid.u_weights, self.matrices.grid.s_weights)
        return complex(np.sum(v * self.gvec * weights))


def boundary_factors(E: float, eps: float, xi: Sequence[complex], n: int, u, s):
    """ F, F1 and F2 on the (u, s) points. """
    c0 = bulk_constants(E).c0
    shifts = limit_shifts(E, eps, xi)
    X = shifts.alpha1 * u + shifts.alpha2 * s
    F = np.exp(-(c0 / n) * (shifts.alpha1 * (1.0 - u) + shifts.alpha2 * s))
    F1 = -c0 * (shifts.delta1 - X) / n
    F2 = -c0 * (shifts.delta2 - X) / n
    return F, F1, F2


def assemble_transfer(E: float, eps: float, xi: Sequence[complex], beta: float, n: int,
                      grid: Optional[ZonalGrid] = None, matrices: Optional[ZonalMatrices] = None) -> TransferOperator:
    if n < 2:
        raise ValueError("Transfer evaluation needs n >= 2; single sites are covered by the closed forms.")
    constants = bulk_constants(E, beta)
    shifts = limit_shifts(E, eps, xi)
    if matrices is None:
        grid = ZonalGrid.build(s_max=hyperbolic_truncation(E, eps, xi)) if grid is None else grid
        matrices = zonal_kernel_matrix(constants.beta_tilde, grid)
    grid = matrices.grid

    F, F1, F2 = boundary_factors(E, eps, xi, n, grid.u_nodes[:, None], grid.s_nodes[None, :])
    shape = F.shape
    F_hat = np.zeros((4, 4) + shape, dtype=complex)
    for a in range(4):
        F_hat[a, a] = F
    F_hat[0, 1] = F * F1
    F_hat[0, 2] = F * F2
    F_hat[0, 3] = F * F1 * F2
    F_hat[1, 3] = F * F2
    F_hat[2, 3] = F * F1

    logger.debug("Assembled transfer operator at E=%s eps=%s beta_tilde=%.4g n=%d on %s", E, eps,
                 constants.beta_tilde, n, grid.report())
    return TransferOperator(
        F_hat=F_hat, fvec=F_hat[:, 3] - F_hat[:, 0], gvec=F_hat[0, :] - F_hat[3, :],
        symbols=transfer_symbols(constants.beta_tilde), matrices=matrices,
        params={"E": E, "eps": eps, "xi": [complex(x) for x in xi], "beta": beta,
                "beta_tilde": constants.beta_tilde, "n": n},
        prefactor=complex(shifts.C_E_xi * np.exp(constants.c0 * (shifts.alpha1 - shifts.alpha2))))


def evaluate_sigma_model(E: float, eps: float, xi: Sequence[complex], beta: float, n: int,
                         grid: Optional[ZonalGrid] = None, matrices: Optional[ZonalMatrices] = None) -> complex:
    """ R+- of the sigma model: prefactor * (M^(n-1) f, g).

    Raises:
        NonFiniteError: if an iterate overflows
    """
    operator = assemble_transfer(E, eps, xi, beta, n, grid, matrices)
    v = operator.fvec
    for step in range(n - 1):
        v = operator.apply(v)
        if not np.all(np.isfinite(v)):
            raise NonFiniteError("Iterate {} of the transfer operator is not finite.".format(step + 1), n=n)
    value = operator.prefactor * operator.pairing(v)
    if not np.isfinite(value):
        raise NonFiniteError("Transfer-operator pairing is not finite.", n=n)
    return complex(value)


def diagonal_defects(matrices: ZonalMatrices) -> List[float]:
    """ sup over the grid of |K_US (K_ii - 1) 1| for the four diagonal entries of K_T. """
    K_T = t_conjugate(k_matrix())
    ones = np.ones(matrices.grid.counts)
    defects = []
    for i in range(4):
        coefficients = (K_T[i][i] - 1).zonal_coefficients(matrices.beta_tilde)
        image = sum(coefficients[a, b] * (matrices.U[a] @ ones @ matrices.S[b].T)
                    for a, b in zip(*np.nonzero(coefficients)))
        defects.append(float(np.max(np.abs(image))))
    return defects


def symbol_norms(matrices: ZonalMatrices) -> Dict[str, float]:
    """ sup over the grid of |K_p 1| for the off-diagonal symbols, weighed by the grid envelope in s.

    The symbols cancel on constants at leading order, so each norm is O(1/beta_tilde); the envelope discounts the
    rows near s_max where the truncated K_S has lost mass.
    """
    ones = np.ones(matrices.grid.counts)
    envelope = np.exp(-matrices.grid.decay * matrices.grid.s_nodes)
    norms = {}
    for name, coefficients in transfer_symbols(matrices.beta_tilde).items():
        if name == "US":
            continue
        image = sum(coefficients[a, b] * (matrices.U[a] @ ones @ matrices.S[b].T)
                    for a, b in zip(*np.nonzero(coefficients)))
        norms[name] = float(np.max(np.abs(image) * envelope[None, :]))
    return norms


def transfer_report(E: float, eps: float, xi: Sequence[complex], beta: float, n: int,
                    grid: Optional[ZonalGrid] = None) -> dict:
    """ Transfer value next to the closed-form limit, with the grid diagnostics. """
    constants = bulk_constants(E, beta)
    grid = ZonalGrid.build(s_max=hyperbolic_truncation(E, eps, xi)) if grid is None else grid
    matrices = zonal_kernel_matrix(constants.beta_tilde, grid)
    value = evaluate_sigma_model(E, eps, xi, beta, n, matrices=matrices)
    closed = r_plus_minus_limit(E, eps, xi)
    report = dict(grid.report())
    report.update({"beta_tilde": constants.beta_tilde, "truncation_defect": matrices.truncation_defect,
                   "diagonal_defects": diagonal_defects(matrices), "symbol_norms": symbol_norms(matrices)})
    return {"value_re": value.real, "value_im": value.imag, "closed_form_re": closed.real,
            "closed_form_im": closed.imag, "rel_dev": abs(value - closed) / abs(closed), "grid_report": report}
