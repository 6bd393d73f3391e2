# -*- coding: utf-8 -*-
"""
This module turns samples into spectra and spectra into statistics: the semicircle distance, unfolding, gap ratios,
the unfolded two-level correlation, inverse participation ratios and Monte Carlo estimates of the determinant-ratio
correlators R+- and R++.

Typical usage example:

    ens = collect_spectra(profile, samples=200, seed=7)
    distance = semicircle_distance(ens)
    stats = gap_ratio_stats(ens, window=(-0.5, 0.5))

"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg, optimize, special, stats

from bandlab.analyzer.ensemble import BlockBandSample, CovarianceProfile, rng_for, sample_block_band, sample_gue
from bandlab.errors import (EmptyEnsembleError, InsufficientDataError, InvalidSampleCountError, NoConvergenceError,
                            OutOfBulkError, SingularShiftError, WindowOutsideBulkError)

logger = logging.getLogger(__name__)

POISSON_GAP_RATIO = 2.0 * np.log(2.0) - 1.0


def semicircle_density(E):
    E = np.asarray(E, dtype=float)
    return np.sqrt(np.clip(4.0 - E ** 2, 0.0, None)) / (2.0 * np.pi)


def semicircle_cdf(x):
    """ Closed antiderivative of the semicircle density, clipped to [0, 1] outside [-2, 2]. """
    x = np.clip(np.asarray(x, dtype=float), -2.0, 2.0)
    return 0.5 + x * np.sqrt(4.0 - x ** 2) / (4.0 * np.pi) + np.arcsin(x / 2.0) / np.pi


def semicircle_quantile(p):
    """ Inverse of semicircle_cdf for p in [0, 1]. """
    p = np.atleast_1d(np.asarray(p, dtype=float))
    out = np.array([optimize.brentq(lambda x, q=q: semicircle_cdf(x) - q, -2.0, 2.0, xtol=1e-15)
                    if 0.0 < q < 1.0 else 4.0 * q - 2.0 for q in p])
    return out


def sine_kernel_r2(x):
    """ Unfolded two-level correlation of the GUE: 1 - sin^2(pi x)/(pi x)^2. """
    x = np.asarray(x, dtype=float)
    return 1.0 - np.sinc(x) ** 2


@dataclass
class SpectralEnsemble:
    """ Sorted eigenvalue vectors of sampled matrices with their seeds and (optionally) eigenvectors. """
    samples: list
    seeds: list
    profile: Optional[CovarianceProfile] = None
    vectors: Optional[list] = field(default=None, repr=False)

    def pooled(self) -> np.ndarray:
        if not self.samples:
            return np.empty(0)
        return np.concatenate(self.samples)


Spectra = Union[SpectralEnsemble, Sequence[np.ndarray]]


def _spectra_of(ens: Spectra):
    return ens.samples if isinstance(ens, SpectralEnsemble) else list(ens)


def _matrix_of(H) -> np.ndarray:
    return H.H if isinstance(H, BlockBandSample) else np.asarray(H)


def eigenvalues(H) -> np.ndarray:
    """ Full ascending spectrum of a Hermitian matrix or sample.

    Raises:
        NoConvergenceError: if the eigensolver does not converge
    """
    try:
        return linalg.eigvalsh(_matrix_of(H))
    except linalg.LinAlgError as err:
        raise NoConvergenceError(str(err)) from err


def eigensystem(H) -> Tuple[np.ndarray, np.ndarray]:
    try:
        return linalg.eigh(_matrix_of(H))
    except linalg.LinAlgError as err:
        raise NoConvergenceError(str(err)) from err


def collect_spectra(profile: CovarianceProfile, samples: int, seed: int, with_vectors: bool = False,
                    first_index: int = 0) -> SpectralEnsemble:
    """ Samples the profile and diagonalizes each draw; eigenvectors only when ``with_vectors`` is set. """
    values, vectors = [], [] if with_vectors else None
    for index in range(first_index, first_index + samples):
        sample = sample_block_band(profile, seed, index)
        if with_vectors:
            vals, vecs = eigensystem(sample)
            vectors.append(vecs)
        else:
            vals = eigenvalues(sample)
        values.append(vals)
    logger.debug("Collected %d spectra of size %d", samples, profile.lattice.N)
    return SpectralEnsemble(samples=values, seeds=[seed] * samples, profile=profile, vectors=vectors)


def semicircle_distance(ens: Spectra) -> float:
    """ Kolmogorov-Smirnov distance between the pooled spectrum and the semicircle law.

    Raises:
        EmptyEnsembleError: if the ensemble holds no eigenvalues
    """
    pooled = np.concatenate(_spectra_of(ens)) if _spectra_of(ens) else np.empty(0)
    if pooled.size == 0:
        raise EmptyEnsembleError("Cannot compare an empty ensemble with the semicircle.")
    if pooled.size < 1000:
        logger.warning("Semicircle distance from only %d eigenvalues", pooled.size)
    return float(stats.kstest(pooled, semicircle_cdf).statistic)


def _check_window(window):
    low, high = window
    if not -2.0 < low < high < 2.0:
        raise WindowOutsideBulkError("Window [{}, {}] is not inside the bulk (-2, 2).".format(low, high))


def unfold(eigs: np.ndarray, window, N: Optional[int] = None) -> np.ndarray:
    """ Maps the eigenvalues inside ``window`` through x -> N * F(x) with F the semicircle CDF.

    Args:
        eigs: sorted spectrum of one matrix
        window: (low, high) with -2 < low < high < 2
        N: matrix size; defaults to len(eigs)

    Returns:
        the unfolded points inside the window, with unit mean spacing
    """
    _check_window(window)
    eigs = np.asarray(eigs, dtype=float)
    N = eigs.size if N is None else N
    inside = eigs[(eigs >= window[0]) & (eigs <= window[1])]
    return N * semicircle_cdf(inside)


@dataclass
class GapRatioStats:
    mean: float
    stderr: float
    count: int


def gap_ratios(eigs: np.ndarray) -> np.ndarray:
    spacings = np.diff(np.sort(eigs))
    low = np.minimum(spacings[:-1], spacings[1:])
    high = np.maximum(spacings[:-1], spacings[1:])
    keep = high > 0
    return low[keep] / high[keep]


def gap_ratio_stats(ens: Spectra, window=None, min_count: int = 1000) -> GapRatioStats:
    """ Mean of r = min(s_j, s_{j+1}) / max(s_j, s_{j+1}) over consecutive spacings inside the window.

    Raises:
        InsufficientDataError: if fewer than ``min_count`` ratios are pooled
    """
    ratios = []
    for eigs in _spectra_of(ens):
        eigs = np.asarray(eigs)
        if window is not None:
            eigs = eigs[(eigs >= window[0]) & (eigs <= window[1])]
        if eigs.size >= 3:
            ratios.append(gap_ratios(eigs))
    pooled = np.concatenate(ratios) if ratios else np.empty(0)

    if pooled.size < min_count:
        raise InsufficientDataError("Only {} gap ratios pooled, need {}.".format(pooled.size, min_count))

    return GapRatioStats(mean=float(pooled.mean()), stderr=float(pooled.std(ddof=1) / np.sqrt(pooled.size)),
                         count=int(pooled.size))


def spectrum_table(ens: Spectra) -> np.ndarray:
    """ Rows (sample_id, index, eigenvalue) with the eigenvalues of each sample in ascending order. """
    rows = [np.empty((0, 3))]
    for sample_id, eigs in enumerate(_spectra_of(ens)):
        eigs = np.sort(np.asarray(eigs, dtype=float))
        rows.append(np.column_stack([np.full(eigs.size, sample_id), np.arange(eigs.size), eigs]))
    return np.concatenate(rows)


def gap_ratio_table(ens: Spectra, window=None) -> np.ndarray:
    """ Rows (sample_id, index, ratio): the gap ratios of each sample, restricted to the window when one is given. """
    rows = [np.empty((0, 3))]
    for sample_id, eigs in enumerate(_spectra_of(ens)):
        eigs = np.asarray(eigs, dtype=float)
        if window is not None:
            eigs = eigs[(eigs >= window[0]) & (eigs <= window[1])]
        if eigs.size < 3:
            continue
        ratios = gap_ratios(eigs)
        rows.append(np.column_stack([np.full(ratios.size, sample_id), np.arange(ratios.size), ratios]))
    return np.concatenate(rows)


@dataclass
class TwoPointHistogram:
    bin_centers: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    pairs: int

    def reference(self) -> np.ndarray:
        return sine_kernel_r2(self.bin_centers)

    def table(self) -> np.ndarray:
        """ Rows (bin_center, value, stderr). """
        return np.column_stack([self.bin_centers, self.values, self.stderr])


def two_point_estimator(ens: Spectra, E: float, bin_width: float, half_width: float = 0.5, max_separation: float = 3.0,
                        min_pairs: int = 10 ** 5) -> TwoPointHistogram:
    """ Histogram of unfolded pair separations around E, normalized by the Poisson pair density.

    For a window of unfolded length L holding m points the expected number of unordered pairs at separation in
    [x, x + dx] is (m/L)^2 (L - x) dx for independent points, so a flat histogram equal to 1 means no correlation.

    Raises:
        InsufficientDataError: if fewer than ``min_pairs`` pairs fall below ``max_separation``
    """
    window = (E - half_width, E + half_width)
    _check_window(window)
    edges = np.arange(0.0, max_separation + bin_width / 2.0, bin_width)
    counts = np.zeros(edges.size - 1)
    expected = np.zeros(edges.size - 1)
    centers = (edges[:-1] + edges[1:]) / 2.0

    for eigs in _spectra_of(ens):
        N = len(eigs)
        points = unfold(eigs, window, N)
        length = N * (semicircle_cdf(window[1]) - semicircle_cdf(window[0]))
        if points.size < 2:
            continue
        separations = np.abs(points[:, None] - points[None, :])[np.triu_indices(points.size, 1)]
        counts += np.histogram(separations, bins=edges)[0]
        density = points.size / length
        expected += density ** 2 * np.clip(length - centers, 0.0, None) * bin_width

    pairs = int(counts.sum())
    if pairs < min_pairs:
        raise InsufficientDataError("Only {} pairs pooled, need {}.".format(pairs, min_pairs))

    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.where(expected > 0, counts / expected, np.nan)
        stderr = np.where(expected > 0, np.sqrt(counts) / expected, np.nan)
    return TwoPointHistogram(bin_centers=centers, values=values, stderr=stderr, pairs=pairs)


@dataclass
class ParticipationReport:
    energies: np.ndarray
    ipr: np.ndarray

    @property
    def localization(self) -> np.ndarray:
        """ Localization proxy 1/IPR (number of sites carrying the state). """
        return 1.0 / self.ipr


def inverse_participation(vectors: np.ndarray) -> np.ndarray:
    """ IPR of every column of ``vectors``: sum_i |psi_i|^4 for normalized psi. """
    vectors = np.asarray(vectors)
    if vectors.ndim == 1:
        vectors = vectors[:, None]
    weights = np.abs(vectors) ** 2
    weights = weights / weights.sum(axis=0)
    return (weights ** 2).sum(axis=0)


def participation_ratios(H, window=(-0.5, 0.5)) -> ParticipationReport:
    """ IPR of each eigenvector whose eigenvalue lies in the window. """
    vals, vecs = eigensystem(H)
    inside = (vals >= window[0]) & (vals <= window[1])
    return ParticipationReport(energies=vals[inside], ipr=inverse_participation(vecs[:, inside]))


class Variant(Enum):
    """ Determinant-ratio correlators: R+- conjugates the second pair of shifts, R++ does not. """
    PLUS_MINUS = "+-"
    PLUS_PLUS = "++"


@dataclass(frozen=True)
class ObservationPoint:
    E: float
    eps: float
    xi: Tuple[complex, complex, complex, complex]

    def __post_init__(self):
        if not -2.0 < self.E < 2.0:
            raise OutOfBulkError("E={} is outside the bulk (-2, 2).".format(self.E))
        if self.eps <= 0:
            raise ValueError("eps must be positive.")
        if len(self.xi) != 4:
            raise ValueError("xi must hold four values (xi1, xi2, xi1', xi2').")
        object.__setattr__(self, "xi", tuple(complex(x) for x in self.xi))

    @property
    def rho(self) -> float:
        return float(semicircle_density(self.E))

    def admissible(self) -> bool:
        return all(abs(x.imag) < self.eps * self.rho / 2.0 for x in self.xi)

    def shifted_energies(self, N: int, variant: Variant = Variant.PLUS_MINUS):
        """ (z1, z2, z1', z2') with z = E + i eps/N + xi/(N rho); the second pair is conjugated for R+-. """
        z = [self.E + 1j * self.eps / N + x / (N * self.rho) for x in self.xi]
        if variant is Variant.PLUS_MINUS:
            z[1], z[3] = np.conj(z[1]), np.conj(z[3])
        return tuple(complex(v) for v in z)


def log_det(A: np.ndarray) -> complex:
    """ Complex log-determinant from a pivoted LU factorization.

    Raises:
        SingularShiftError: if a pivot vanishes
    """
    lu, piv = linalg.lu_factor(A, check_finite=False)
    diagonal = np.diag(lu).astype(complex)
    if np.any(diagonal == 0):
        raise SingularShiftError("Shifted matrix is singular to working precision.")
    swaps = int(np.count_nonzero(piv != np.arange(piv.size)))
    return complex(np.sum(np.log(diagonal)) + 1j * np.pi * (swaps % 2))


def det_ratio(H: np.ndarray, z) -> complex:
    """ det(H - z1) det(H - z2) / (det(H - z1') det(H - z2')) via summed log-determinants. """
    eye = np.eye(H.shape[0])
    logs = {}
    for value in z:
        if value not in logs:
            logs[value] = log_det(H - value * eye)
    return complex(np.exp((logs[z[0]] + logs[z[1]]) - (logs[z[2]] + logs[z[3]])))


@dataclass
class DetRatioEstimate:
    value: complex
    stderr_re: float
    stderr_im: float
    samples: int

    def distance_to(self, target: complex) -> float:
        return abs(self.value - target)


def det_ratio_mc(profile: CovarianceProfile, obs: ObservationPoint, variant: Variant, M: int,
                 seed: int) -> DetRatioEstimate:
    """ Monte Carlo estimate of R+- or R++ at the observation point.

    Raises:
        InvalidSampleCountError: if M < 1
        SingularShiftError: if a shifted matrix is numerically singular
    """
    if M < 1:
        raise InvalidSampleCountError("M must be positive.", M=M)
    z = obs.shifted_energies(profile.lattice.N, variant)
    ratios = np.array([det_ratio(sample_block_band(profile, seed, index).H, z) for index in range(M)])
    return _estimate(ratios)


def _estimate(ratios: np.ndarray) -> DetRatioEstimate:
    M = ratios.size
    if M > 1:
        stderr_re = float(ratios.real.std(ddof=1) / np.sqrt(M))
        stderr_im = float(ratios.imag.std(ddof=1) / np.sqrt(M))
    else:
        stderr_re = stderr_im = 0.0
    return DetRatioEstimate(value=complex(ratios.mean()), stderr_re=stderr_re, stderr_im=stderr_im, samples=M)


def gue2_det_ratio_quadrature(obs: ObservationPoint, variant: Variant, nodes: int = 48) -> complex:
    """ Exact expectation of the determinant ratio for the 2 x 2 GUE (n=1, W=2, beta=0) by quadrature.

    H = [[a, b + ic], [b - ic, d]] with a, d ~ N(0, 1/2) and b, c ~ N(0, 1/4); det(H - z) only sees t = b^2 + c^2,
    which is exponential with mean 1/2. The four Gaussian dimensions reduce to Gauss-Hermite rules in a, d and a
    Gauss-Laguerre rule in t.
    """
    x, wx = special.roots_hermite(nodes)
    t, wt = special.roots_laguerre(nodes)
    a = x[:, None, None]
    d = x[None, :, None]
    tt = t[None, None, :] / 2.0
    weights = (wx[:, None, None] * wx[None, :, None] * wt[None, None, :]) / np.pi

    def det(z):
        return (a - z) * (d - z) - tt

    z1, z2, z1p, z2p = obs.shifted_energies(2, variant)
    return complex(np.sum(weights * det(z1) * det(z2) / (det(z1p) * det(z2p))))


def gue_spectra(N: int, samples: int, seed: int) -> list:
    """ Spectra of directly sampled GUE matrices, the oracle for band-matrix statistics. """
    return [linalg.eigvalsh(sample_gue(N, rng_for(seed, "gue", index))) for index in range(samples)]


def poisson_spectra(size: int, samples: int, seed: int) -> list:
    """ Spectra with i.i.d. exponential spacings, the Poisson oracle. """
    spectra = []
    for index in range(samples):
        rng = rng_for(seed, "poisson", index)
        spectra.append(np.cumsum(rng.exponential(1.0, size)))
    return spectra


def semicircle_poisson_spectra(N: int, samples: int, seed: int) -> list:
    """ Spectra of N i.i.d. semicircle-distributed points: semicircle density without level correlations. """
    spectra = []
    for index in range(samples):
        rng = rng_for(seed, "semicircle-poisson", index)
        spectra.append(np.sort(4.0 * rng.beta(1.5, 1.5, N) - 2.0))
    return spectra
