#!/usr/bin/env python
from bandlab.checks.algebra import AlgebraCheck
from bandlab.checks.limits import LimitCheck
from bandlab.checks.spectral import SpectralCheck

seed = 20240229

experiments = {
    "A1": [(SpectralCheck.SEMICIRCLE, {"d": 1, "n": 10, "W": 30, "beta": 1.0, "scaling": "sigma", "samples": 200,
                                       "max_distance": 0.02}),
           (SpectralCheck.COVARIANCE, {"n": 4, "W": 6, "beta": 1.0, "samples": 200})],
    "A2": [(SpectralCheck.CROSSOVER, {"n": 2, "W": 128, "beta": 0.25, "scaling": "band", "samples": 100,
                                      "window": [-1.0, 1.0], "oracle": "gue", "oracle_N": 256, "oracle_samples": 100,
                                      "tolerance": 0.01}),
           (SpectralCheck.CROSSOVER, {"n": 256, "W": 4, "beta": 0.2, "scaling": "band", "samples": 10,
                                      "window": [-1.0, 1.0], "oracle": "poisson", "oracle_N": 1024,
                                      "oracle_samples": 10, "tolerance": 0.02})],
    "A3": [(AlgebraCheck.GRASSMANN_DETERMINANT, {"count": 100, "max_size": 8, "tolerance": 1e-12}),
           (AlgebraCheck.GENERATING_FUNCTION, {})],
    "A4": [(AlgebraCheck.BOSONIZATION, {"W": 2, "function": "exp_trace", "samples": 10 ** 6}),
           (AlgebraCheck.BOSONIZATION, {"W": 3, "function": "exp_trace", "samples": 10 ** 6}),
           (AlgebraCheck.BOSONIZATION, {"W": 2, "function": "exp_trace_quadratic", "samples": 10 ** 6}),
           (AlgebraCheck.COMPLEX_GAUSSIAN, {"size": 3, "samples": 200000})],
    "A5": [(LimitCheck.LEADING_ORDER, {"E": 0.0, "eps": 0.5}),
           (LimitCheck.TRUNCATION, {"E": 0.0, "eps": 0.5, "beta": 2500.0}),
           (LimitCheck.TRANSFER_CLOSED_FORM, {"E": 0.0, "eps": 0.5, "beta": 2500.0, "n": 8, "factor": 5.0})],
    "A6": [(LimitCheck.SINE_KERNEL, {"energies": [0.0, 1.0], "points": [0.25, 0.5, 1.5], "tolerance": 1e-8})],
    "A7": [(SpectralCheck.DET_RATIO_ORACLE, {"samples": 20000}),
           (SpectralCheck.DET_RATIO_TREND, {"n": 2, "W_values": [8, 16, 32], "beta": 0.5, "E": 0.0, "eps": 0.5,
                                            "xi": [0.0, 0.0, 0.5, 0.5], "variant": "++", "samples": 10000})],
    "A8": [(LimitCheck.SPECTRAL_IDENTITIES, {"beta_tildes": [100.0, 1000.0, 10000.0], "max_l": 5}),
           (LimitCheck.LAPLACIAN, {"max_l": 4})],
    "A9": [(SpectralCheck.PARTICIPATION, {"n": 128, "W_values": [4, 8], "beta": 0.2, "scaling": "band",
                                          "samples": 4})],
}

non_gating = {"A9"}
