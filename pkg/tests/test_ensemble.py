import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandlab.analyzer.ensemble import Boundary, CovarianceProfile, LatticeSpec, Scaling, build_covariance, \
    dump_sample, empirical_covariance_check, laplacian, load_sample, rng_for, sample_block_band
from bandlab.errors import ConfigInvalidError, InvalidSampleCountError, NonPositiveCovarianceError

SEED = 1234


def test_laplacian_neumann_chain():
    delta = laplacian(LatticeSpec(d=1, n=3, W=2))
    expected = np.array([[-1.0, 1.0, 0.0], [1.0, -2.0, 1.0], [0.0, 1.0, -1.0]])
    assert np.array_equal(delta, expected)


def test_laplacian_periodic_two_sites_counts_double_edge():
    delta = laplacian(LatticeSpec(d=1, n=2, W=2), Boundary.PERIODIC)
    assert np.array_equal(delta, np.array([[-2.0, 2.0], [2.0, -2.0]]))


def test_laplacian_periodic_single_site_drops_self_loop():
    assert np.array_equal(laplacian(LatticeSpec(d=2, n=1, W=2), Boundary.PERIODIC), np.zeros((1, 1)))


@pytest.mark.parametrize("boundary", list(Boundary))
def test_laplacian_square_lattice_rows_sum_to_zero(boundary):
    delta = laplacian(LatticeSpec(d=2, n=4, W=2), boundary)
    assert np.allclose(delta.sum(axis=1), 0.0)
    assert np.allclose(delta, delta.T)


def test_covariance_values_sigma_and_band():
    lattice = LatticeSpec(d=1, n=3, W=4)
    sigma = build_covariance(lattice, 1.0, Scaling.SIGMA)
    band = build_covariance(lattice, 0.2, Scaling.BAND)
    assert sigma.J[0, 0] == pytest.approx(1 / 4 - 1 / 16)
    assert sigma.J[0, 1] == pytest.approx(1 / 16)
    assert sigma.J[0, 2] == 0.0
    assert band.J[1, 1] == pytest.approx(1 / 4 - 0.4 / 4)
    assert band.J[1, 2] == pytest.approx(0.2 / 4)


@given(n=st.integers(1, 6), W=st.integers(2, 8), beta=st.floats(0.0, 0.2),
       boundary=st.sampled_from(list(Boundary)))
@settings(max_examples=30, deadline=None)
def test_covariance_rows_sum_to_inverse_block_size(n, W, beta, boundary):
    profile = build_covariance(LatticeSpec(d=1, n=n, W=W), beta, Scaling.SIGMA, boundary)
    assert np.allclose(profile.J.sum(axis=1), 1.0 / W)
    assert np.all(np.linalg.eigvalsh(profile.J) > 0)


def test_covariance_rejects_strong_coupling():
    with pytest.raises(NonPositiveCovarianceError) as info:
        build_covariance(LatticeSpec(d=1, n=3, W=2), 1.0)
    assert info.value.code == "NON_POSITIVE_COVARIANCE"


@pytest.mark.parametrize("W, beta", [(1, 0.0), (4, -0.1)])
def test_covariance_rejects_bad_arguments(W, beta):
    with pytest.raises(ValueError):
        build_covariance(LatticeSpec(d=1, n=2, W=W), beta)


def test_profile_dict_round_trip():
    profile = build_covariance(LatticeSpec(d=2, n=3, W=4), 0.5, Scaling.BAND, Boundary.PERIODIC)
    again = CovarianceProfile.from_dict(profile.to_dict())
    assert np.array_equal(again.J, profile.J)
    with pytest.raises(ConfigInvalidError):
        CovarianceProfile.from_dict({"n": 3, "W": 4, "colour": "red"})


def test_sampling_is_deterministic_and_hermitian():
    profile = build_covariance(LatticeSpec(d=1, n=3, W=4), 1.0)
    first = sample_block_band(profile, SEED, 5)
    again = sample_block_band(profile, SEED, 5)
    other = sample_block_band(profile, SEED, 6)
    assert np.array_equal(first.H, again.H)
    assert not np.allclose(first.H, other.H)
    assert np.allclose(first.H, first.H.conj().T)
    assert first.H.shape == (12, 12)


def test_same_seed_couples_profiles_entrywise():
    lattice = LatticeSpec(d=1, n=3, W=4)
    free = build_covariance(lattice, 0.0)
    coupled = build_covariance(lattice, 2.0)
    a = sample_block_band(free, SEED, 0).H
    b = sample_block_band(coupled, SEED, 0).H
    assert np.allclose(a * coupled.block_std, b * free.block_std)


def test_rng_streams_are_independent_per_key():
    a = rng_for(SEED, "ensemble", 0).standard_normal(4)
    b = rng_for(SEED, "gue", 0).standard_normal(4)
    c = rng_for(SEED, "ensemble", 0).standard_normal(4)
    assert not np.allclose(a, b)
    assert np.array_equal(a, c)


def test_empirical_covariance_matches_profile():
    profile = build_covariance(LatticeSpec(d=1, n=2, W=3), 1.0)
    report = empirical_covariance_check(profile, 200, SEED)
    assert report.passed
    assert report.z_scores.shape == (2, 2)
    assert np.allclose(report.z_scores, report.z_scores.T)


def test_empirical_covariance_needs_enough_samples():
    profile = build_covariance(LatticeSpec(d=1, n=2, W=3), 1.0)
    with pytest.raises(InvalidSampleCountError):
        empirical_covariance_check(profile, 99, SEED)


def test_dump_and_load_sample(tmp_path):
    profile = build_covariance(LatticeSpec(d=1, n=2, W=3), 0.5)
    sample = sample_block_band(profile, SEED, 3)
    sidecar = dump_sample(sample, tmp_path / "H.bin", profile)
    assert sidecar.name == "H.bin.json"
    loaded = load_sample(tmp_path / "H.bin")
    assert np.array_equal(loaded.H, sample.H)
    assert (loaded.seed, loaded.index) == (SEED, 3)
