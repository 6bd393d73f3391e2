# -*- coding: utf-8 -*-
"""
This module contains an exact finite Grassmann algebra with Berezin integration, a small symbolic layer for
polynomials in commuting nilpotents (the n1, n2, n1', n2' of the transfer-operator generating function) and the
superbosonization cross-check.

Generators are indexed 0 .. 2m-1 and paired as (psibar_j, psi_j) = (2j, 2j+1). A monomial is a bitmask with its
generators in ascending order; signs are tracked whenever a product or an integration reorders generators.

Typical usage example:

    A = np.array([[2.0, 1.0], [0.5, 3.0]])
    value = gaussian_grassmann(A)          # equals det(A)
    K = generating_function()
    k41 = nilpotent_expand(K)["n1*n2*n1p*n2p"]

"""
from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from bandlab.analyzer.ensemble import rng_for
from bandlab.errors import QuadratureNotConvergedError, UniverseMismatchError, UnknownGeneratorError

logger = logging.getLogger(__name__)


def psibar(j: int) -> int:
    return 2 * j


def psi(j: int) -> int:
    return 2 * j + 1


def _popcount(mask: int) -> int:
    return bin(mask).count("1")


def _reorder_sign(left: int, right: int) -> int:
    """ Sign of sorting the concatenation left*right into ascending order. """
    swaps = 0
    while right:
        lowest = right & -right
        swaps += _popcount(left >> lowest.bit_length())
        right ^= lowest
    return -1 if swaps & 1 else 1


class GrassmannElement(object):
    """ Element of the Grassmann algebra on ``num_generators`` generators as a map bitmask -> coefficient. """

    __slots__ = ("num_generators", "coeffs")

    def __init__(self, num_generators: int, coeffs: Optional[Dict[int, complex]] = None):
        self.num_generators = int(num_generators)
        self.coeffs = {}
        for mask, value in (coeffs or {}).items():
            if mask >> self.num_generators:
                raise UnknownGeneratorError("Monomial {:b} uses a generator outside the universe.".format(mask))
            if value != 0:
                self.coeffs[int(mask)] = complex(value)

    @classmethod
    def scalar(cls, num_generators: int, value: complex = 1.0) -> "GrassmannElement":
        return cls(num_generators, {0: value})

    @classmethod
    def generator(cls, num_generators: int, index: int) -> "GrassmannElement":
        if not 0 <= index < num_generators:
            raise UnknownGeneratorError("Generator {} is not in 0..{}.".format(index, num_generators - 1))
        return cls(num_generators, {1 << index: 1.0})

    @property
    def body(self) -> complex:
        return self.coeffs.get(0, 0j)

    def is_even(self) -> bool:
        return all(_popcount(mask) % 2 == 0 for mask in self.coeffs)

    def is_odd(self) -> bool:
        return all(_popcount(mask) % 2 == 1 for mask in self.coeffs)

    def degree(self) -> Optional[int]:
        """ Common degree of all monomials, or None for inhomogeneous elements. """
        degrees = {_popcount(mask) for mask in self.coeffs}
        return degrees.pop() if len(degrees) == 1 else None

    def _check(self, other: "GrassmannElement"):
        if other.num_generators != self.num_generators:
            raise UniverseMismatchError("Universes of {} and {} generators differ.".format(
                self.num_generators, other.num_generators))

    def _coerce(self, other) -> "GrassmannElement":
        if isinstance(other, GrassmannElement):
            self._check(other)
            return other
        return GrassmannElement.scalar(self.num_generators, other)

    def __add__(self, other):
        other = self._coerce(other)
        coeffs = dict(self.coeffs)
        for mask, value in other.coeffs.items():
            coeffs[mask] = coeffs.get(mask, 0j) + value
        return GrassmannElement(self.num_generators, coeffs)

    __radd__ = __add__

    def __neg__(self):
        return GrassmannElement(self.num_generators, {mask: -value for mask, value in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, GrassmannElement):
            return gmul(self, other)
        return GrassmannElement(self.num_generators, {mask: value * other for mask, value in self.coeffs.items()})

    def __rmul__(self, other):
        return GrassmannElement(self.num_generators, {mask: other * value for mask, value in self.coeffs.items()})

    def __truediv__(self, other):
        return self * (1.0 / other)

    def isclose(self, other, tol: float = 1e-12) -> bool:
        difference = self - other
        return all(abs(value) <= tol for value in difference.coeffs.values())

    def __eq__(self, other):
        if not isinstance(other, GrassmannElement):
            other = GrassmannElement.scalar(self.num_generators, other)
        return self.num_generators == other.num_generators and self.isclose(other, 0.0)

    def __repr__(self):
        terms = ["{}*{}".format(value, "".join("g{}".format(i) for i in range(self.num_generators) if mask >> i & 1)
                                or "1") for mask, value in sorted(self.coeffs.items())]
        return "GrassmannElement({}, {})".format(self.num_generators, " + ".join(terms) or "0")


def gmul(a: GrassmannElement, b: GrassmannElement) -> GrassmannElement:
    """ Product in canonical order; monomials sharing a generator vanish.

    Raises:
        UniverseMismatchError: if the elements live on different generator sets
    """
    a._check(b)
    coeffs = {}
    for left, x in a.coeffs.items():
        for right, y in b.coeffs.items():
            if left & right:
                continue
            mask = left | right
            coeffs[mask] = coeffs.get(mask, 0j) + _reorder_sign(left, right) * x * y
    return GrassmannElement(a.num_generators, coeffs)


def gexp(x: GrassmannElement) -> GrassmannElement:
    """ exp(a) * sum_k (x - a)^k / k! with a the body of x; the series stops by nilpotency. """
    body = x.body
    nilpotent = x - body
    total = GrassmannElement.scalar(x.num_generators, 1.0)
    term = total
    for k in range(1, x.num_generators + 2):
        term = gmul(term, nilpotent) / k
        if not term.coeffs:
            break
        total = total + term
    return total * complex(np.exp(body)) if body != 0 else total


def berezin_integrate(x: GrassmannElement, order: Sequence[int]):
    """ Repeated Berezin integral  int x d(order[0]) d(order[1]) ... ; the rightmost differential acts first.

    A single integration moves its generator to the front and drops it, so int g dg = 1 and int 1 dg = 0.

    Returns:
        a GrassmannElement, or a complex scalar when every generator of the universe is integrated out

    Raises:
        UnknownGeneratorError: for a generator outside the universe or a repeated one
    """
    order = list(order)
    if len(set(order)) != len(order):
        raise UnknownGeneratorError("Integration order repeats a generator: {}".format(order))
    for g in order:
        if not 0 <= g < x.num_generators:
            raise UnknownGeneratorError("Generator {} is not in 0..{}.".format(g, x.num_generators - 1))

    coeffs = x.coeffs
    for g in reversed(order):
        bit = 1 << g
        coeffs = {mask ^ bit: (-value if _popcount(mask & (bit - 1)) & 1 else value)
                  for mask, value in coeffs.items() if mask & bit}

    result = GrassmannElement(x.num_generators, coeffs)
    if len(order) == x.num_generators:
        return result.body
    return result


def gaussian_form(A: np.ndarray) -> GrassmannElement:
    """ -sum_jk A_jk psibar_j psi_k on 2m generators. """
    A = np.asarray(A)
    m = A.shape[0]
    total = GrassmannElement(2 * m)
    for j in range(m):
        for k in range(m):
            if A[j, k] != 0:
                pair = gmul(GrassmannElement.generator(2 * m, psibar(j)), GrassmannElement.generator(2 * m, psi(k)))
                total = total - A[j, k] * pair
    return total


def gaussian_grassmann(A: np.ndarray) -> complex:
    """ int exp(-sum A_jk psibar_j psi_k) prod_j dpsibar_j dpsi_j, equal to det A.

    The rows of the exponent are even and commute, so the exponential is taken row by row.
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be a square matrix.")
    m = A.shape[0]
    result = GrassmannElement.scalar(2 * m, 1.0)
    for j in range(m):
        row = np.zeros_like(A)
        row[j] = A[j]
        result = gmul(result, gexp(gaussian_form(row)))
    order = [g for j in range(m) for g in (psibar(j), psi(j))]
    return complex(berezin_integrate(result, order))


def complex_gaussian_check(A: np.ndarray, samples: int, seed: int) -> Tuple[complex, float, complex]:
    """ Monte Carlo value of int exp(-z* A z) prod d^2 z / pi against 1/det A for Hermitian A > 1/2.

    Returns:
        (estimate, standard error, 1/det A)
    """
    A = np.asarray(A, dtype=complex)
    m = A.shape[0]
    rng = rng_for(seed, "complex-gaussian")
    z = (rng.standard_normal((samples, m)) + 1j * rng.standard_normal((samples, m))) / np.sqrt(2.0)
    quadratic = np.einsum("si,ij,sj->s", z.conj(), A, z).real
    weights = np.exp(-quadratic + np.sum(np.abs(z) ** 2, axis=1))
    return (complex(weights.mean()), float(weights.std(ddof=1) / np.sqrt(samples)),
            complex(1.0 / np.linalg.det(A)))


# Symbolic coefficients: Laurent polynomials in (d, w, us, ib) with ib = 1/beta_tilde.

VARIABLES = ("d", "w", "us", "ib")
_TERM = re.compile(r"\s*([+-])?\s*([^+-]+)")


class ScalarPoly(object):
    """ Polynomial in d, w, us and (possibly negative) powers of ib, with rational coefficients. """

    __slots__ = ("terms",)

    def __init__(self, terms: Optional[Dict[Tuple[int, int, int, int], Fraction]] = None):
        self.terms = {tuple(exponents): Fraction(value) for exponents, value in (terms or {}).items() if value != 0}

    @classmethod
    def constant(cls, value) -> "ScalarPoly":
        return cls({(0, 0, 0, 0): Fraction(value)})

    @classmethod
    def variable(cls, name: str, power: int = 1) -> "ScalarPoly":
        exponents = [0, 0, 0, 0]
        exponents[VARIABLES.index(name)] = power
        return cls({tuple(exponents): Fraction(1)})

    @classmethod
    def parse(cls, text: str) -> "ScalarPoly":
        """ Reads sums of products such as ``d^4 - 2*d^3 + 4*d^2*us - 4*w*us*ib + ib^4``. """
        total = cls()
        for sign, body in _TERM.findall(text.replace(" ", "")):
            term = cls.constant(-1 if sign == "-" else 1)
            for factor in body.split("*"):
                name, _, power = factor.partition("^")
                if name in VARIABLES:
                    term = term * cls.variable(name, int(power or 1))
                else:
                    term = term * cls.constant(Fraction(name))
            total = total + term
        return total

    def _coerce(self, other) -> "ScalarPoly":
        return other if isinstance(other, ScalarPoly) else ScalarPoly.constant(other)

    def __add__(self, other):
        other = self._coerce(other)
        terms = dict(self.terms)
        for exponents, value in other.terms.items():
            terms[exponents] = terms.get(exponents, Fraction(0)) + value
        return ScalarPoly(terms)

    __radd__ = __add__

    def __neg__(self):
        return ScalarPoly({e: -v for e, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        terms = {}
        for e1, v1 in self.terms.items():
            for e2, v2 in other.terms.items():
                exponents = tuple(a + b for a, b in zip(e1, e2))
                terms[exponents] = terms.get(exponents, Fraction(0)) + v1 * v2
        return ScalarPoly(terms)

    __rmul__ = __mul__

    def __pow__(self, power: int):
        result = ScalarPoly.constant(1)
        for _ in range(power):
            result = result * self
        return result

    def __eq__(self, other):
        return isinstance(other, (ScalarPoly, int, Fraction)) and self.terms == self._coerce(other).terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def is_zero(self) -> bool:
        return not self.terms

    def evaluate(self, d=0.0, w=0.0, us=0.0, ib=0.0):
        values = (d, w, us, ib)
        return sum(float(v) * np.prod([values[i] ** e for i, e in enumerate(exponents)])
                   for exponents, v in self.terms.items())

    def zonal_coefficients(self, beta_tilde: float) -> np.ndarray:
        """ Coefficient array c[a, b] of u^a s^b after d = 1 - u + s, w = u + s, us = u s, ib = 1/beta_tilde. """
        degree = max((e[0] + e[1] + 2 * e[2] for e in self.terms), default=0)
        result = np.zeros((degree + 1, degree + 1))
        d_poly = np.array([[1.0, 1.0], [-1.0, 0.0]])
        w_poly = np.array([[0.0, 1.0], [1.0, 0.0]])
        us_poly = np.array([[0.0, 0.0], [0.0, 1.0]])
        for (ed, ew, eus, eib), value in self.terms.items():
            term = np.array([[float(value) * beta_tilde ** (-eib)]])
            for base, power in ((d_poly, ed), (w_poly, ew), (us_poly, eus)):
                for _ in range(power):
                    term = _polymul2d(term, base)
            result[:term.shape[0], :term.shape[1]] += term
        return result

    def __str__(self):
        if not self.terms:
            return "0"
        pieces = []
        for exponents, value in sorted(self.terms.items(), key=lambda item: (-sum(item[0][:3]), item[0])):
            factors = ["{}^{}".format(n, e) if e != 1 else n for n, e in zip(VARIABLES, exponents) if e != 0]
            magnitude = abs(value)
            if magnitude != 1 or not factors:
                factors.insert(0, str(magnitude))
            pieces.append(("- " if value < 0 else "+ ") + "*".join(factors))
        text = " ".join(pieces)
        return text[2:] if text.startswith("+ ") else "-" + text[2:]

    __repr__ = __str__


def _polymul2d(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1))
    for i, j in zip(*np.nonzero(b)):
        out[i:i + a.shape[0], j:j + a.shape[1]] += b[i, j] * a
    return out


NILPOTENTS = ("n1", "n2", "n1p", "n2p")


class NilpotentPolynomial(object):
    """ Polynomial in commuting nilpotents n1, n2, n1', n2' (each squares to zero) with ScalarPoly coefficients. """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Optional[Dict[int, ScalarPoly]] = None):
        self.coeffs = {mask: poly for mask, poly in (coeffs or {}).items() if not poly.is_zero()}

    @classmethod
    def constant(cls, value) -> "NilpotentPolynomial":
        return cls({0: value if isinstance(value, ScalarPoly) else ScalarPoly.constant(value)})

    @classmethod
    def nilpotent(cls, name: str) -> "NilpotentPolynomial":
        return cls({1 << NILPOTENTS.index(name): ScalarPoly.constant(1)})

    def _coerce(self, other) -> "NilpotentPolynomial":
        return other if isinstance(other, NilpotentPolynomial) else NilpotentPolynomial.constant(other)

    def __add__(self, other):
        other = self._coerce(other)
        coeffs = dict(self.coeffs)
        for mask, poly in other.coeffs.items():
            coeffs[mask] = coeffs[mask] + poly if mask in coeffs else poly
        return NilpotentPolynomial(coeffs)

    __radd__ = __add__

    def __neg__(self):
        return NilpotentPolynomial({mask: -poly for mask, poly in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        coeffs = {}
        for m1, p1 in self.coeffs.items():
            for m2, p2 in other.coeffs.items():
                if m1 & m2:
                    continue
                product = p1 * p2
                coeffs[m1 | m2] = coeffs[m1 | m2] + product if (m1 | m2) in coeffs else product
        return NilpotentPolynomial(coeffs)

    __rmul__ = __mul__

    def coefficient(self, names: Iterable[str]) -> ScalarPoly:
        mask = 0
        for name in names:
            mask |= 1 << NILPOTENTS.index(name)
        return self.coeffs.get(mask, ScalarPoly())

    def to_grassmann(self, d=0.0, w=0.0, us=0.0, ib=0.0) -> GrassmannElement:
        """ Numeric image in the Grassmann algebra on 8 generators with n_j -> psibar_j psi_j. """
        pairs = [gmul(GrassmannElement.generator(8, psibar(j)), GrassmannElement.generator(8, psi(j)))
                 for j in range(4)]
        total = GrassmannElement(8)
        for mask, poly in self.coeffs.items():
            term = GrassmannElement.scalar(8, poly.evaluate(d, w, us, ib))
            for j in range(4):
                if mask >> j & 1:
                    term = gmul(term, pairs[j])
            total = total + term
        return total


def nexp(x: NilpotentPolynomial) -> NilpotentPolynomial:
    """ Exponential of a nilpotent polynomial without constant term; the series ends after four steps. """
    if 0 in x.coeffs:
        raise ValueError("nexp expects a polynomial without constant term.")
    total = NilpotentPolynomial.constant(1)
    term = total
    for k in range(1, len(NILPOTENTS) + 1):
        term = term * x * ScalarPoly.constant(Fraction(1, k))
        total = total + term
    return total


def nilpotent_expand(expr: NilpotentPolynomial) -> Dict[str, ScalarPoly]:
    """ All coefficients of ``expr`` keyed by monomial name (``"1"``, ``"n1"``, ``"n1*n2p"``, ...). """
    expanded = {}
    for mask in range(1 << len(NILPOTENTS)):
        name = "*".join(n for i, n in enumerate(NILPOTENTS) if mask >> i & 1) or "1"
        expanded[name] = expr.coeffs.get(mask, ScalarPoly())
    return expanded


def generating_function() -> NilpotentPolynomial:
    """ The polynomial K with H = K_US * K for the zonal transfer kernel.

    K = exp(d(n1 + n2 + n1' + n2')) (1 - w ib (n1 + n2)(n1' + n2') + 2 w^2 ib^2 n1 n2 n1' n2')
        (1 - ib^2 (n1 n2 + n1' n2') + ib^4 n1 n2 n1' n2')
        (1 - d(n1 n1' + n2 n2') + us (n1 + n2)(n1' + n2') + d^2 n1 n2 n1' n2')
    """
    d, w, us, ib = (NilpotentPolynomial.constant(ScalarPoly.variable(v)) for v in VARIABLES)
    n1, n2, n1p, n2p = (NilpotentPolynomial.nilpotent(n) for n in NILPOTENTS)
    top = n1 * n2 * n1p * n2p
    unprimed, primed = n1 + n2, n1p + n2p

    hopping = 1 - w * ib * unprimed * primed + 2 * w * w * ib * ib * top
    pairing = 1 - ib * ib * (n1 * n2 + n1p * n2p) + ib * ib * ib * ib * top
    mixing = 1 - d * (n1 * n1p + n2 * n2p) + us * unprimed * primed + d * d * top
    return nexp(d * (unprimed + primed)) * hopping * pairing * mixing


ROW_MONOMIALS = ((), ("n1",), ("n2",), ("n1", "n2"))
COLUMN_MONOMIALS = (("n1p", "n2p"), ("n2p",), ("n1p",), ())


def k_matrix(expr: Optional[NilpotentPolynomial] = None):
    """ 4 x 4 matrix of coefficients: K[a][b] is the coefficient of ROW_MONOMIALS[a] * COLUMN_MONOMIALS[b]. """
    expr = generating_function() if expr is None else expr
    return [[expr.coefficient(row + column) for column in COLUMN_MONOMIALS] for row in ROW_MONOMIALS]


class BosonizationFunction(Enum):
    """ Registered test functions F(B) of the 2 x 2 Gram matrix B. """
    EXP_TRACE = "exp_trace"
    EXP_TRACE_QUADRATIC = "exp_trace_quadratic"

    def __call__(self, b11, b22, r2):
        trace = b11 + b22
        if self is BosonizationFunction.EXP_TRACE:
            return np.exp(-trace)
        return np.exp(-trace - (b11 ** 2 + b22 ** 2 + 2.0 * r2) / 4.0)

    def exact(self, W: int) -> Optional[float]:
        return math.pi ** (2 * W) if self is BosonizationFunction.EXP_TRACE else None


@dataclass
class BosonizationResult:
    W: int
    function: str
    lhs: float
    lhs_stderr: float
    rhs: float
    exact: Optional[float]

    @property
    def lhs_sigma(self) -> float:
        """ Distance of the Monte Carlo side from the quadrature side in standard errors. """
        return abs(self.lhs - self.rhs) / self.lhs_stderr if self.lhs_stderr > 0 else math.inf


def bosonization_rhs(W: int, function: BosonizationFunction, nodes: int = 40) -> float:
    """ pi^(2W-1) / ((W-1)! (W-2)!) int_{B > 0} F(B) det^(W-2) B dB by quadrature.

    With |B12| = t sqrt(B11 B22) the positivity constraint becomes t in [0, 1] and d^2 B12 = 2 pi B11 B22 t dt;
    B11 and B22 are integrated with Gauss-Laguerre rules, t with Gauss-Legendre.
    """
    def integrate(count):
        b, wb = special.roots_laguerre(count)
        t, wt = special.roots_legendre(count)
        t, wt = (t + 1.0) / 2.0, wt / 2.0
        b11, b22, tt = np.meshgrid(b, b, t, indexing="ij")
        weight = wb[:, None, None] * wb[None, :, None] * wt[None, None, :]
        r2 = tt ** 2 * b11 * b22
        det = b11 * b22 * (1.0 - tt ** 2)
        integrand = function(b11, b22, r2) * np.exp(b11 + b22) * det ** (W - 2) * 2.0 * np.pi * b11 * b22 * tt
        return float(np.sum(weight * integrand))

    coarse, fine = integrate(nodes), integrate(2 * nodes)
    if abs(fine - coarse) > 1e-9 * abs(fine):
        raise QuadratureNotConvergedError("Bosonization quadrature changed by {:.2e} on refinement.".format(
            abs(fine - coarse)), W=W, function=function.value)
    return math.pi ** (2 * W - 1) / (math.factorial(W - 1) * math.factorial(W - 2)) * fine


def bosonization_lhs(W: int, function: BosonizationFunction, samples: int, seed: int,
                     batch: int = 100000) -> Tuple[float, float]:
    """ Monte Carlo value of int F(B) dPhi over Phi in C^(2 x W), with B = Phi Phi*.

    Phi is drawn with E|phi|^2 = 2, so each draw contributes (2 pi)^(2W) F(B) exp(Tr B / 2).
    """
    total, total_sq, done, index = 0.0, 0.0, 0, 0
    while done < samples:
        count = min(batch, samples - done)
        rng = rng_for(seed, "bosonization", W, index)
        phi = rng.standard_normal((count, 2, W)) + 1j * rng.standard_normal((count, 2, W))
        b11 = np.sum(np.abs(phi[:, 0]) ** 2, axis=1)
        b22 = np.sum(np.abs(phi[:, 1]) ** 2, axis=1)
        r2 = np.abs(np.sum(phi[:, 0].conj() * phi[:, 1], axis=1)) ** 2
        values = (2.0 * np.pi) ** (2 * W) * function(b11, b22, r2) * np.exp((b11 + b22) / 2.0)
        total += values.sum()
        total_sq += (values ** 2).sum()
        done += count
        index += 1
    mean = total / samples
    variance = max(total_sq / samples - mean ** 2, 0.0) * samples / (samples - 1)
    return mean, math.sqrt(variance / samples)


def bosonization_check(W: int, function: BosonizationFunction = BosonizationFunction.EXP_TRACE,
                       samples: int = 10 ** 6, seed: int = 0) -> BosonizationResult:
    if W < 2:
        raise ValueError("Bosonization needs W >= 2.")
    lhs, stderr = bosonization_lhs(W, function, samples, seed)
    rhs = bosonization_rhs(W, function)
    logger.info("Bosonization W=%d %s: lhs %.6g +- %.2g, rhs %.10g", W, function.value, lhs, stderr, rhs)
    return BosonizationResult(W=W, function=function.value, lhs=lhs, lhs_stderr=stderr, rhs=rhs,
                              exact=function.exact(W))
