# -*- coding: utf-8 -*-
"""
This module builds the block-band covariance profile J over a lattice of sites and samples Hermitian Gaussian
block-band matrices from it. Each site carries W orbitals, so a sample is an N x N matrix with N = W * n^d whose
(j, k) block has entries of variance J[j, k].

Sampling is unit noise times sqrt(J), expanded blockwise. The same seed therefore produces samples for two profiles
on the same lattice that differ only by the entrywise factor sqrt(J_1 / J_2).

Typical usage example:

    lattice = LatticeSpec(d=1, n=10, W=30)
    profile = build_covariance(lattice, beta=1.0, scaling=Scaling.SIGMA)
    sample = sample_block_band(profile, seed=2024, index=0)

"""
from __future__ import annotations

import json
import logging
import zlib
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import linalg

from bandlab.errors import ConfigInvalidError, InvalidSampleCountError, NonPositiveCovarianceError

logger = logging.getLogger(__name__)


class Scaling(Enum):
    """ Variance profile scalings: J = 1/W + beta*Delta/W^2 (SIGMA) or J = 1/W + beta*Delta/W (BAND). """
    SIGMA = "sigma"
    BAND = "band"


class Boundary(Enum):
    NEUMANN = "neumann"
    PERIODIC = "periodic"


def rng_for(seed: int, *keys) -> np.random.Generator:
    """ Returns an independent generator for the stream (seed, *keys).

    String keys are hashed with crc32 so module tags can be used next to integer sample indices.
    """
    spawn_key = tuple(zlib.crc32(k.encode("utf-8")) if isinstance(k, str) else int(k) for k in keys)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=spawn_key))


@dataclass(frozen=True)
class LatticeSpec:
    """ Lattice [1, n]^d with W orbitals per site. """
    d: int
    n: int
    W: int

    def __post_init__(self):
        if self.d < 1 or self.n < 1 or self.W < 1:
            raise ValueError("d, n and W must be positive, got d={}, n={}, W={}.".format(self.d, self.n, self.W))

    @property
    def sites(self) -> int:
        return self.n ** self.d

    @property
    def N(self) -> int:
        return self.W * self.sites

    def site_indices(self):
        """ Lattice points in lexicographic order. """
        return list(np.ndindex(*((self.n,) * self.d)))


def laplacian(lattice: LatticeSpec, boundary: Boundary = Boundary.NEUMANN) -> np.ndarray:
    """ Graph Laplacian of the lattice with zero row sums: Delta[j, j] = -deg(j), Delta[j, k] = 1 for neighbours.

    With PERIODIC boundary a site reached twice (n = 2) counts as a double edge; self loops (n = 1) are dropped.
    """
    shape = (lattice.n,) * lattice.d
    delta = np.zeros((lattice.sites, lattice.sites))

    for j, point in enumerate(lattice.site_indices()):
        for axis in range(lattice.d):
            for step in (-1, 1):
                neighbour = list(point)
                neighbour[axis] += step
                if boundary is Boundary.PERIODIC:
                    neighbour[axis] %= lattice.n
                elif not 0 <= neighbour[axis] < lattice.n:
                    continue
                k = int(np.ravel_multi_index(tuple(neighbour), shape))
                if k == j:
                    continue
                delta[j, k] += 1.0
                delta[j, j] -= 1.0

    return delta


@dataclass(frozen=True, eq=False)
class CovarianceProfile:
    """ Variance matrix J over lattice sites.

    Attributes:
        lattice: lattice and block size
        beta: coupling in front of the Laplacian
        scaling: SIGMA or BAND scaling of the Laplacian term
        boundary: boundary convention of the Laplacian
        J: |sites| x |sites| symmetric positive definite matrix
    """
    lattice: LatticeSpec
    beta: float
    scaling: Scaling
    boundary: Boundary
    J: np.ndarray = field(repr=False)

    @cached_property
    def block_std(self) -> np.ndarray:
        """ N x N matrix of entry standard deviations sqrt(J[j, k]) expanded over the W x W blocks. """
        return np.kron(np.sqrt(self.J), np.ones((self.lattice.W, self.lattice.W)))

    def to_dict(self) -> dict:
        return {"d": self.lattice.d, "n": self.lattice.n, "W": self.lattice.W, "beta": self.beta,
                "scaling": self.scaling.value, "boundary": self.boundary.value}

    @classmethod
    def from_dict(cls, data: dict) -> "CovarianceProfile":
        unknown = set(data) - {"d", "n", "W", "beta", "scaling", "boundary"}
        if unknown:
            raise ConfigInvalidError("Unknown profile keys: {}".format(sorted(unknown)))
        try:
            lattice = LatticeSpec(d=int(data.get("d", 1)), n=int(data["n"]), W=int(data["W"]))
            return build_covariance(lattice, float(data.get("beta", 0.0)),
                                    Scaling(data.get("scaling", Scaling.SIGMA.value)),
                                    Boundary(data.get("boundary", Boundary.NEUMANN.value)))
        except KeyError as err:
            raise ConfigInvalidError("Missing profile key {}".format(err)) from err


def build_covariance(lattice: LatticeSpec, beta: float, scaling: Scaling = Scaling.SIGMA,
                     boundary: Boundary = Boundary.NEUMANN) -> CovarianceProfile:
    """ Assembles J = I/W + beta*Delta/W^s with s = 2 (SIGMA) or s = 1 (BAND).

    Raises:
        ValueError: if W < 2 or beta < 0
        NonPositiveCovarianceError: if J has an eigenvalue <= 0 (beta too large for W)
    """
    if lattice.W < 2:
        raise ValueError("Block size W must be at least 2.")
    if beta < 0:
        raise ValueError("Coupling beta must be non-negative.")

    W = lattice.W
    power = 2 if scaling is Scaling.SIGMA else 1
    J = np.eye(lattice.sites) / W + beta * laplacian(lattice, boundary) / W ** power

    smallest = float(linalg.eigvalsh(J)[0])
    if smallest <= 0:
        raise NonPositiveCovarianceError(
            "J is not positive definite (smallest eigenvalue {:.3e}); beta={} is too large for W={}".format(
                smallest, beta, W), beta=beta, W=W, scaling=scaling.value)

    logger.debug("Built covariance for %s, beta=%s, %s/%s, min eigenvalue %.3e",
                 lattice, beta, scaling.value, boundary.value, smallest)
    return CovarianceProfile(lattice=lattice, beta=float(beta), scaling=scaling, boundary=boundary, J=J)


@dataclass(frozen=True, eq=False)
class BlockBandSample:
    H: np.ndarray = field(repr=False)
    seed: int
    index: int = 0


def unit_hermitian_noise(N: int, rng: np.random.Generator) -> np.ndarray:
    """ Hermitian matrix with real N(0, 1) diagonal and complex off-diagonal entries with E|h|^2 = 1. """
    noise = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / np.sqrt(2.0)
    upper = np.triu(noise, 1)
    return upper + upper.conj().T + np.diag(rng.standard_normal(N))


def sample_block_band(profile: CovarianceProfile, seed: int, index: int = 0) -> BlockBandSample:
    """ Draws one block-band matrix; the stream is fixed by (seed, index). """
    rng = rng_for(seed, "ensemble", index)
    H = unit_hermitian_noise(profile.lattice.N, rng) * profile.block_std
    return BlockBandSample(H=H, seed=int(seed), index=int(index))


def sample_gue(N: int, rng: np.random.Generator) -> np.ndarray:
    """ GUE matrix normalized to the semicircle on [-2, 2], sampled independently of the block-band path. """
    A = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / np.sqrt(2.0)
    return (A + A.conj().T) / np.sqrt(2.0 * N)


@dataclass
class CovarianceReport:
    z_scores: np.ndarray
    max_abs_z: float
    samples: int
    passed: bool


def empirical_covariance_check(profile: CovarianceProfile, M: int, seed: int,
                               z_threshold: float = 5.0) -> CovarianceReport:
    """ Compares the pooled block means of |H_{jk,ag}|^2 over M samples with J[j, k].

    Only the independent entries (upper triangle including the diagonal) enter the pooled means.

    Raises:
        InvalidSampleCountError: if M < 100
    """
    if M < 100:
        raise InvalidSampleCountError("At least 100 samples are required, got {}.".format(M), M=M)

    sites, W, N = profile.lattice.sites, profile.lattice.W, profile.lattice.N
    mask = np.triu(np.ones((N, N)))
    counts = mask.reshape(sites, W, sites, W).sum(axis=(1, 3)) * M
    first = np.zeros((sites, sites))
    second = np.zeros((sites, sites))

    for index in range(M):
        squared = np.abs(sample_block_band(profile, seed, index).H) ** 2 * mask
        blocks = squared.reshape(sites, W, sites, W)
        first += blocks.sum(axis=(1, 3))
        second += (blocks ** 2).sum(axis=(1, 3))

    upper = np.triu(np.ones((sites, sites), dtype=bool))
    mean = np.where(upper, first / np.maximum(counts, 1), 0.0)
    variance = np.where(upper, second / np.maximum(counts, 1) - mean ** 2, 0.0)
    stderr = np.sqrt(np.maximum(variance, 0.0) / np.maximum(counts, 1))

    deviation = mean - profile.J
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(stderr > 0, deviation / stderr, np.where(np.isclose(deviation, 0.0), 0.0, np.inf))
    z = np.where(upper, z, 0.0)
    z = z + np.triu(z, 1).T

    max_abs_z = float(np.max(np.abs(z)))
    logger.info("Covariance check over %d samples: max |z| = %.2f", M, max_abs_z)
    return CovarianceReport(z_scores=z, max_abs_z=max_abs_z, samples=M, passed=max_abs_z < z_threshold)


def dump_sample(sample: BlockBandSample, path, profile: CovarianceProfile = None) -> Path:
    """ Writes H row-major as little-endian complex128 and a JSON sidecar ``<path>.json`` with shape and seed. """
    path = Path(path)
    np.ascontiguousarray(sample.H, dtype="<c16").tofile(path)
    sidecar = {"shape": list(sample.H.shape), "dtype": "<c16", "seed": sample.seed, "index": sample.index}
    if profile is not None:
        sidecar["profile"] = profile.to_dict()
    sidecar_path = path.with_name(path.name + ".json")
    with open(sidecar_path, "w") as fp:
        json.dump(sidecar, fp, indent=4)
    return sidecar_path


def load_sample(path) -> BlockBandSample:
    path = Path(path)
    with open(path.with_name(path.name + ".json")) as fp:
        sidecar = json.load(fp)
    H = np.fromfile(path, dtype=sidecar["dtype"]).reshape(sidecar["shape"])
    return BlockBandSample(H=H, seed=sidecar["seed"], index=sidecar.get("index", 0))
