import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandlab.analyzer.ensemble import LatticeSpec, build_covariance, sample_block_band
from bandlab.analyzer.spectra import POISSON_GAP_RATIO, ObservationPoint, Variant, collect_spectra, det_ratio, \
    det_ratio_mc, eigenvalues, gap_ratio_stats, gap_ratios, gue2_det_ratio_quadrature, gue_spectra, \
    gap_ratio_table, inverse_participation, log_det, participation_ratios, poisson_spectra, semicircle_cdf, \
    semicircle_distance, semicircle_poisson_spectra, semicircle_quantile, sine_kernel_r2, spectrum_table, \
    two_point_estimator, unfold
from bandlab.errors import EmptyEnsembleError, InsufficientDataError, OutOfBulkError, WindowOutsideBulkError

SEED = 99


def test_semicircle_cdf_endpoints():
    assert semicircle_cdf(-2.0) == pytest.approx(0.0, abs=1e-15)
    assert semicircle_cdf(0.0) == pytest.approx(0.5)
    assert semicircle_cdf(2.0) == pytest.approx(1.0)
    assert semicircle_cdf(5.0) == pytest.approx(1.0)


def test_eigenvalues_are_ascending():
    assert np.allclose(eigenvalues(np.zeros((4, 4))), 0.0)
    assert np.allclose(eigenvalues(np.diag([1.0, -1.0])), [-1.0, 1.0])


def test_single_site_spectrum_stays_near_the_semicircle_edge():
    profile = build_covariance(LatticeSpec(d=1, n=1, W=64), 0.0)
    for index in range(20):
        spectrum = eigenvalues(sample_block_band(profile, SEED, index))
        assert np.all(np.diff(spectrum) >= 0.0)
        assert -2.3 <= spectrum[0] and spectrum[-1] <= 2.3


@given(p=st.floats(0.001, 0.999))
@settings(max_examples=50)
def test_semicircle_quantile_inverts_cdf(p):
    assert semicircle_cdf(semicircle_quantile(p)[0]) == pytest.approx(p, abs=1e-10)


def test_semicircle_distance_of_gue_is_small():
    assert semicircle_distance(gue_spectra(200, 10, SEED)) < 0.03


def test_semicircle_distance_of_band_ensemble_is_small():
    profile = build_covariance(LatticeSpec(d=1, n=4, W=16), 1.0)
    assert semicircle_distance(collect_spectra(profile, 20, SEED)) < 0.05


def test_semicircle_distance_rejects_empty_ensemble():
    with pytest.raises(EmptyEnsembleError):
        semicircle_distance([])


def test_collect_spectra_keeps_vectors_on_request():
    profile = build_covariance(LatticeSpec(d=1, n=2, W=3), 0.5)
    ens = collect_spectra(profile, 3, SEED, with_vectors=True)
    assert len(ens.samples) == len(ens.vectors) == 3
    assert ens.pooled().size == 18
    assert all(np.all(np.diff(eigs) >= 0) for eigs in ens.samples)


def test_gap_ratios_of_a_picket_fence():
    assert np.allclose(gap_ratios(np.arange(10.0)), 1.0)


def test_gap_ratio_of_poisson_oracle():
    stats = gap_ratio_stats(poisson_spectra(1000, 20, SEED))
    assert stats.mean == pytest.approx(POISSON_GAP_RATIO, abs=0.01)


def test_gap_ratio_of_gue_oracle():
    gue = gap_ratio_stats(gue_spectra(200, 40, SEED), window=(-1.0, 1.0))
    assert gue.mean > POISSON_GAP_RATIO + 0.15
    # a single block is a GUE matrix sampled through the block-band path
    profile = build_covariance(LatticeSpec(d=1, n=1, W=200), 0.0)
    band = gap_ratio_stats(collect_spectra(profile, 40, SEED + 1), window=(-1.0, 1.0))
    assert abs(band.mean - gue.mean) < 4.0 * np.hypot(band.stderr, gue.stderr)


def test_gap_ratio_requires_enough_ratios():
    with pytest.raises(InsufficientDataError):
        gap_ratio_stats(gue_spectra(20, 2, SEED), min_count=1000)


def test_unfold_gives_unit_mean_spacing():
    eigs = gue_spectra(400, 1, SEED)[0]
    points = unfold(eigs, (-1.0, 1.0))
    assert np.mean(np.diff(points)) == pytest.approx(1.0, abs=0.1)


def test_unfolding_is_idempotent_through_the_quantile():
    eigs = gue_spectra(100, 1, SEED)[0]
    window = (-1.0, 1.0)
    points = unfold(eigs, window)
    recovered = semicircle_quantile(points / eigs.size)
    assert np.allclose(recovered, eigs[(eigs >= window[0]) & (eigs <= window[1])], atol=1e-10)
    assert np.allclose(unfold(recovered, window, eigs.size), points, atol=1e-9)


@pytest.mark.parametrize("window", [(-2.5, 0.0), (0.5, 0.5), (1.0, 2.0)])
def test_unfold_rejects_windows_outside_the_bulk(window):
    with pytest.raises(WindowOutsideBulkError):
        unfold(np.linspace(-1.0, 1.0, 5), window)


def test_two_point_histogram_shows_level_repulsion():
    histogram = two_point_estimator(gue_spectra(400, 20, SEED), 0.0, 0.25, min_pairs=1000)
    assert histogram.values[0] < 0.3
    far = histogram.bin_centers > 1.5
    assert np.mean(histogram.values[far]) == pytest.approx(1.0, abs=0.15)
    assert np.allclose(histogram.reference()[far], 1.0, atol=0.05)


def test_two_point_histogram_of_gue_follows_the_sine_kernel():
    histogram = two_point_estimator(gue_spectra(400, 200, SEED), 0.0, 0.25, min_pairs=1000)
    assert np.all(np.abs(histogram.values - sine_kernel_r2(histogram.bin_centers)) < 0.05)


def test_two_point_histogram_of_independent_points_is_flat():
    histogram = two_point_estimator(semicircle_poisson_spectra(400, 200, SEED), 0.0, 0.25,
                                    min_pairs=1000)
    assert np.all(np.abs(histogram.values - 1.0) < 0.05)
    assert histogram.values[0] > 0.9


def test_spectrum_and_gap_ratio_tables():
    spectra = [np.array([0.3, -0.2, 0.1]), np.array([-1.0, 0.0, 0.5, 2.0])]
    table = spectrum_table(spectra)
    assert table.shape == (7, 3)
    assert np.array_equal(table[:3], [[0, 0, -0.2], [0, 1, 0.1], [0, 2, 0.3]])
    ratios = gap_ratio_table(spectra, window=(-1.5, 1.5))
    assert np.allclose(ratios, [[0, 0, 2.0 / 3.0], [1, 0, 0.5]])
    assert gap_ratio_table([np.array([0.0, 1.0])]).shape == (0, 3)


def test_inverse_participation_extremes():
    N = 16
    spread = np.ones(N) / np.sqrt(N)
    localized = np.zeros(N)
    localized[3] = 1.0
    assert inverse_participation(spread)[0] == pytest.approx(1.0 / N)
    assert inverse_participation(localized)[0] == pytest.approx(1.0)


def test_participation_ratios_restrict_to_window():
    profile = build_covariance(LatticeSpec(d=1, n=8, W=4), 0.2)
    report = participation_ratios(sample_block_band(profile, SEED, 0), (-0.5, 0.5))
    assert np.all(np.abs(report.energies) <= 0.5)
    assert np.all((report.localization >= 1.0) & (report.localization <= 32.0 + 1e-9))


def test_observation_point_validation():
    with pytest.raises(OutOfBulkError):
        ObservationPoint(2.0, 0.5, (0, 0, 0, 0))
    with pytest.raises(ValueError):
        ObservationPoint(0.0, 0.0, (0, 0, 0, 0))
    with pytest.raises(ValueError):
        ObservationPoint(0.0, 0.5, (0, 0, 0))


def test_plus_minus_conjugates_second_pair():
    obs = ObservationPoint(0.0, 0.5, (0.1, 0.2, 0.3, 0.4))
    pm = obs.shifted_energies(10, Variant.PLUS_MINUS)
    pp = obs.shifted_energies(10, Variant.PLUS_PLUS)
    assert pm[0] == pp[0] and pm[2] == pp[2]
    assert pm[1] == np.conj(pp[1]) and pm[3] == np.conj(pp[3])
    assert pp[0].imag == pytest.approx(0.05)


def test_log_det_matches_numpy():
    rng = np.random.default_rng(SEED)
    A = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    assert np.exp(log_det(A)) == pytest.approx(np.linalg.det(A), rel=1e-10)


def test_det_ratio_is_one_for_equal_shifts():
    rng = np.random.default_rng(SEED)
    A = rng.standard_normal((5, 5))
    H = (A + A.T) / 2
    z = (0.1 + 0.2j, -0.3 + 0.1j)
    assert det_ratio(H, (z[0], z[1], z[0], z[1])) == pytest.approx(1.0)


def test_quadrature_normalization():
    obs = ObservationPoint(0.0, 0.5, (0.3, -0.2, 0.3, -0.2))
    assert gue2_det_ratio_quadrature(obs, Variant.PLUS_PLUS) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("variant", list(Variant))
def test_det_ratio_monte_carlo_matches_gue2_quadrature(variant):
    obs = ObservationPoint(0.0, 0.5, (0.3, -0.2, 0.1, 0.4))
    profile = build_covariance(LatticeSpec(d=1, n=1, W=2), 0.0)
    estimate = det_ratio_mc(profile, obs, variant, 4000, SEED)
    sigma = np.hypot(estimate.stderr_re, estimate.stderr_im)
    assert estimate.distance_to(gue2_det_ratio_quadrature(obs, variant)) < 4.0 * sigma


def test_det_ratio_monte_carlo_is_exactly_one_for_equal_shifts():
    obs = ObservationPoint(0.0, 0.5, (0.3, -0.2, 0.3, -0.2))
    profile = build_covariance(LatticeSpec(d=1, n=2, W=3), 0.5)
    for variant in Variant:
        estimate = det_ratio_mc(profile, obs, variant, 50, SEED)
        assert estimate.value == 1.0
        assert estimate.stderr_re == 0.0 and estimate.stderr_im == 0.0
        assert estimate.samples == 50


def test_det_ratio_stderr_shrinks_as_inverse_square_root():
    obs = ObservationPoint(0.0, 0.5, (0.3, -0.2, 0.1, 0.4))
    profile = build_covariance(LatticeSpec(d=1, n=1, W=2), 0.0)
    small = det_ratio_mc(profile, obs, Variant.PLUS_MINUS, 500, SEED)
    large = det_ratio_mc(profile, obs, Variant.PLUS_MINUS, 2000, SEED)
    ratio = np.hypot(small.stderr_re, small.stderr_im) / np.hypot(large.stderr_re, large.stderr_im)
    assert 1.4 <= ratio <= 2.8
    assert det_ratio_mc(profile, obs, Variant.PLUS_MINUS, 1, SEED).stderr_re == 0.0
