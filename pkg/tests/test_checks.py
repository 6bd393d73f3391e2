import pytest

from bandlab.checks import AbstractAlgebraCheck, AbstractLimitCheck, AbstractSpectralCheck, AlgebraCheck, \
    LimitCheck, SpectralCheck, check_algebra, check_limit, check_spectra
from bandlab.errors import OutOfBulkError

SEED = 42


@pytest.mark.parametrize("family, base", [(SpectralCheck, AbstractSpectralCheck), (AlgebraCheck, AbstractAlgebraCheck),
                                          (LimitCheck, AbstractLimitCheck)])
def test_every_registered_check_implements_its_family(family, base):
    for check in family:
        assert issubclass(check.value, base)
        assert isinstance(check.value.defaults, dict)


def test_unknown_arguments_are_rejected():
    with pytest.raises(ValueError):
        check_limit(LimitCheck.LAPLACIAN, max_level=4)
    with pytest.raises(ValueError):
        check_algebra(AlgebraCheck.GENERATING_FUNCTION, SEED, coefficients=["n1"])


def test_grassmann_determinant_check():
    passed, measured = check_algebra(AlgebraCheck.GRASSMANN_DETERMINANT, SEED, count=10, max_size=4)
    assert passed
    assert measured["matrices"] == 10


def test_generating_function_check():
    passed, measured = check_algebra(AlgebraCheck.GENERATING_FUNCTION, SEED)
    assert passed
    assert set(measured) == {"n1*n2*n1p*n2p", "n1*n1p*n2p"}


def test_complex_gaussian_check():
    passed, _ = check_algebra(AlgebraCheck.COMPLEX_GAUSSIAN, SEED, samples=50000)
    assert passed


def test_sine_kernel_check_returns_table():
    passed, measured = check_limit(LimitCheck.SINE_KERNEL, energies=[0.0], points=[0.5, 1.5])
    assert passed
    assert measured["table"]["columns"] == ["E", "x", "value", "error"]
    assert len(measured["table"]["rows"]) == 2


def test_sine_kernel_check_outside_domain_raises():
    with pytest.raises(OutOfBulkError):
        check_limit(LimitCheck.SINE_KERNEL, energies=[1.9], points=[0.5])


def test_failing_tolerance_gives_negative_verdict():
    passed, measured = check_limit(LimitCheck.SINE_KERNEL, energies=[0.0], points=[0.5], tolerance=0.0)
    assert not passed
    assert measured["max_abs_error"] >= 0.0


def test_leading_order_and_laplacian_checks():
    assert check_limit(LimitCheck.LEADING_ORDER)[0]
    assert check_limit(LimitCheck.LAPLACIAN)[0]


def test_truncation_check():
    passed, measured = check_limit(LimitCheck.TRUNCATION)
    assert passed
    assert measured["S_max"] == pytest.approx(18.0)


def test_covariance_check():
    passed, measured = check_spectra(SpectralCheck.COVARIANCE, SEED, n=2, W=3, samples=100)
    assert passed
    assert measured["samples"] == 100


def test_det_ratio_oracle_check():
    passed, measured = check_spectra(SpectralCheck.DET_RATIO_ORACLE, SEED, samples=4000)
    assert passed
    assert measured["stderr"] > 0


def test_participation_check_measures_growth():
    _, measured = check_spectra(SpectralCheck.PARTICIPATION, SEED, n=16, W_values=[2, 4], samples=2)
    assert measured["growth"] > 0
    assert [row[0] for row in measured["table"]["rows"]] == [2, 4]


def test_participation_growth_is_a_ratio_of_medians():
    assert SpectralCheck.PARTICIPATION.value.defaults["factor_range"] == [2.5, 6.0]
    passed, measured = check_spectra(SpectralCheck.PARTICIPATION, SEED, n=16, W_values=[2, 4], samples=2,
                                     factor_range=[0.0, 1e9])
    table = measured["table"]
    assert table["columns"][:2] == ["W", "median_localization"]
    first, last = table["rows"]
    assert measured["growth"] == pytest.approx(last[1] / first[1])
    assert passed


def test_det_ratio_trend_check_tabulates_real_and_imaginary_parts():
    passed, measured = check_spectra(SpectralCheck.DET_RATIO_TREND, SEED, W_values=[2, 4], samples=50,
                                     sigmas=1e6)
    table = measured["table"]
    assert table["name"] == "detratio"
    assert table["columns"] == ["W", "Re", "Im", "stderr_Re", "stderr_Im"]
    assert [row[0] for row in table["rows"]] == [2, 4]
    assert all(row[3] > 0 and row[4] >= 0 for row in table["rows"])
    assert len(measured["distances"]) == 2
    assert passed


def test_crossover_check_rejects_unknown_oracle():
    with pytest.raises(ValueError):
        check_spectra(SpectralCheck.CROSSOVER, SEED, n=2, W=8, samples=2, oracle="goe", min_count=1)
