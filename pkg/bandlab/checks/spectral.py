# -*- coding: utf-8 -*-
""" This module contains the predefined spectral checks. A spectral check samples block-band matrices (or an oracle
ensemble) from a root seed and compares a measured statistic with its reference.

Predefined spectral checks are enumerated in SpectralCheck enum with each enum value containing the name of the class
that implements the check by extending AbstractSpectralCheck class.

Typical usage example:

    passed, measured = check_spectra(SpectralCheck.SEMICIRCLE, seed=7, n=4, W=16, samples=20)

"""

import abc
import logging
from enum import Enum

import numpy as np

from bandlab.analyzer.ensemble import Boundary, LatticeSpec, Scaling, build_covariance, empirical_covariance_check, \
    sample_block_band
from bandlab.analyzer.spectra import ObservationPoint, Variant, collect_spectra, det_ratio_mc, gap_ratio_stats, \
    gue2_det_ratio_quadrature, gue_spectra, participation_ratios, poisson_spectra, semicircle_distance

logger = logging.getLogger(__name__)


def _profile(options):
    lattice = LatticeSpec(d=options.get("d", 1), n=options["n"], W=options["W"])
    return build_covariance(lattice, options["beta"], Scaling(options.get("scaling", "sigma")),
                            Boundary(options.get("boundary", "neumann")))


class AbstractSpectralCheck(metaclass=abc.ABCMeta):
    """ Abstract class that serves as a blueprint for spectral check classes. """

    defaults = {}

    def options(self, kwargs):
        unknown = set(kwargs) - set(self.defaults)
        if unknown:
            raise ValueError("Unknown arguments for {}: {}".format(type(self).__name__, sorted(unknown)))
        return dict(self.defaults, **kwargs)

    @abc.abstractmethod
    def check_spectra(self, seed: int, **kwargs):
        """ Returns check validity for the sampled ensemble.

        Args:
            seed: root seed of every random stream the check draws
            **kwargs: keyword check arguments, see ``defaults`` of each check

        Returns:
            a boolean verdict followed by a dict of measured values
        """


class SemicircleCheck(AbstractSpectralCheck):
    """ Kolmogorov-Smirnov distance of the pooled spectrum to the semicircle law is below ``max_distance``. """

    defaults = {"d": 1, "n": 10, "W": 30, "beta": 1.0, "scaling": "sigma", "boundary": "neumann", "samples": 200,
                "max_distance": 0.02}

    def check_spectra(self, seed: int, **kwargs):
        options = self.options(kwargs)
        ens = collect_spectra(_profile(options), options["samples"], seed)
        distance = semicircle_distance(ens)
        return distance < options["max_distance"], {"ks_distance": distance, "eigenvalues": int(ens.pooled().size)}


class CrossoverCheck(AbstractSpectralCheck):
    """ Mean gap ratio of the band ensemble in a bulk window matches a directly computed oracle.

    The GUE oracle samples ``oracle_N`` x ``oracle_N`` GUE matrices in the same window; the Poisson oracle uses i.i.d.
    exponential spacings.
    """

    defaults = {"d": 1, "n": 2, "W": 128, "beta": 0.25, "scaling": "band", "boundary": "neumann", "samples": 200,
                "window": [-1.0, 1.0], "oracle": "gue", "oracle_N": 256, "oracle_samples": 200, "tolerance": 0.01,
                "min_count": 1000}

    def check_spectra(self, seed: int, **kwargs):
        options = self.options(kwargs)
        window = tuple(options["window"])
        band = gap_ratio_stats(collect_spectra(_profile(options), options["samples"], seed), window,
                               options["min_count"])

        if options["oracle"] == "gue":
            oracle = gap_ratio_stats(gue_spectra(options["oracle_N"], options["oracle_samples"], seed), window,
                                     options["min_count"])
        elif options["oracle"] == "poisson":
            oracle = gap_ratio_stats(poisson_spectra(options["oracle_N"], options["oracle_samples"], seed), None,
                                     options["min_count"])
        else:
            raise ValueError("oracle must be 'gue' or 'poisson'.")

        difference = abs(band.mean - oracle.mean)
        logger.info("Gap ratio %.4f vs %s oracle %.4f", band.mean, options["oracle"], oracle.mean)
        return difference < options["tolerance"], {"band_mean": band.mean, "band_stderr": band.stderr,
                                                   "oracle_mean": oracle.mean, "oracle_stderr": oracle.stderr,
                                                   "difference": difference}


class CovarianceCheck(AbstractSpectralCheck):
    """ Empirical block variances agree with J within ``z_threshold`` standard errors. """

    defaults = {"d": 1, "n": 4, "W": 6, "beta": 1.0, "scaling": "sigma", "boundary": "neumann", "samples": 200,
                "z_threshold": 5.0}

    def check_spectra(self, seed: int, **kwargs):
        options = self.options(kwargs)
        report = empirical_covariance_check(_profile(options), options["samples"], seed, options["z_threshold"])
        return report.passed, {"max_abs_z": report.max_abs_z, "samples": report.samples}


class DetRatioOracleCheck(AbstractSpectralCheck):
    """ Monte Carlo determinant ratio of the 2 x 2 GUE (n=1, W=2, beta=0) against its quadrature value. """

    defaults = {"E": 0.0, "eps": 0.5, "xi": [0.3, -0.2, 0.1, 0.4], "variant": "+-", "samples": 20000,
                "sigmas": 4.0}

    def check_spectra(self, seed: int, **kwargs):
        options = self.options(kwargs)
        obs = ObservationPoint(options["E"], options["eps"], tuple(options["xi"]))
        variant = Variant(options["variant"])
        profile = build_covariance(LatticeSpec(d=1, n=1, W=2), 0.0)
        estimate = det_ratio_mc(profile, obs, variant, options["samples"], seed)
        exact = gue2_det_ratio_quadrature(obs, variant)
        sigma = np.hypot(estimate.stderr_re, estimate.stderr_im)
        return estimate.distance_to(exact) < options["sigmas"] * sigma, {
            "estimate": estimate.value, "quadrature": exact, "stderr": sigma}


class DetRatioTrendCheck(AbstractSpectralCheck):
    """ |R - target| over increasing W decreases, each step allowing ``sigmas`` standard errors of noise. """

    defaults = {"n": 2, "W_values": [8, 16, 32], "beta": 0.5, "scaling": "sigma", "E": 0.0, "eps": 0.5,
                "xi": [0.0, 0.0, 0.5, 0.5], "variant": "++", "samples": 10000, "target": complex(-1.0, 0.0),
                "sigmas": 3.0}

    def check_spectra(self, seed: int, **kwargs):
        options = self.options(kwargs)
        obs = ObservationPoint(options["E"], options["eps"], tuple(options["xi"]))
        target = complex(options["target"])
        variant = Variant(options["variant"])
        rows, distances, sigmas = [], [], []
        for W in options["W_values"]:
            profile = build_covariance(LatticeSpec(d=1, n=options["n"], W=W), options["beta"],
                                       Scaling(options["scaling"]))
            estimate = det_ratio_mc(profile, obs, variant, options["samples"], seed)
            rows.append([W, estimate.value.real, estimate.value.imag, estimate.stderr_re, estimate.stderr_im])
            distances.append(estimate.distance_to(target))
            sigmas.append(float(np.hypot(estimate.stderr_re, estimate.stderr_im)))
            logger.info("W=%d: R=%s, distance %.4f +- %.4f", W, estimate.value, distances[-1], sigmas[-1])

        passed = all(later <= earlier + options["sigmas"] * sigma
                     for earlier, later, sigma in zip(distances, distances[1:], sigmas[1:]))
        return passed, {"distances": distances,
                        "table": {"name": "detratio", "columns": ["W", "Re", "Im", "stderr_Re", "stderr_Im"],
                                  "rows": rows}}


class ParticipationCheck(AbstractSpectralCheck):
    """ Growth of the median bulk localization length 1/IPR from the first to the last W lies in a loose range. """

    defaults = {"n": 128, "W_values": [4, 8], "beta": 0.2, "scaling": "band", "samples": 4, "window": [-0.5, 0.5],
                "factor_range": [2.5, 6.0]}

    def check_spectra(self, seed: int, **kwargs):
        options = self.options(kwargs)
        rows = []
        for W in options["W_values"]:
            profile = build_covariance(LatticeSpec(d=1, n=options["n"], W=W), options["beta"],
                                       Scaling(options["scaling"]))
            lengths = np.concatenate([participation_ratios(sample_block_band(profile, seed, index),
                                                           tuple(options["window"])).localization
                                      for index in range(options["samples"])])
            rows.append([W, float(np.median(lengths)), float(lengths.mean()),
                         float(lengths.std(ddof=1) / np.sqrt(lengths.size))])

        growth = rows[-1][1] / rows[0][1]
        low, high = options["factor_range"]
        return low <= growth <= high, {
            "growth": growth,
            "table": {"columns": ["W", "median_localization", "mean_localization", "stderr"], "rows": rows}}


class SpectralCheck(Enum):
    SEMICIRCLE = SemicircleCheck
    CROSSOVER = CrossoverCheck
    COVARIANCE = CovarianceCheck
    DET_RATIO_ORACLE = DetRatioOracleCheck
    DET_RATIO_TREND = DetRatioTrendCheck
    PARTICIPATION = ParticipationCheck


def check_spectra(check: SpectralCheck, seed: int, **kwargs):
    return check.value().check_spectra(seed, **kwargs)
