import math

import numpy as np
import pytest
from scipy import integrate, special

from bandlab.analyzer.berezin import ScalarPoly
from bandlab.analyzer.scalars import r_plus_minus_limit
from bandlab.analyzer.transfer import CompactKernel, HyperbolicKernel, ZonalGrid, assemble_transfer, \
    brute_force_compact_apply, compact_moment, cone_function, correction_eigenvalue, evaluate_sigma_model, \
    hyperbolic_truncation, ks_eigenvalue, ku_eigenvalue, lambda_m11, laplacian_eigen_residuals, \
    moment_identities_check, offdiag_eigenvalues, offdiag_identity, recursion_residual, rep_function, \
    symbol_norms, transfer_polynomials, transfer_report, zonal_kernel_matrix
from bandlab.checks.algebra import PRINTED_COEFFICIENTS
from bandlab.errors import TruncationTooSmallError

XI = (0.5, -0.5, 0.25, -0.25)


@pytest.mark.parametrize("beta_tilde", [1.0, 100.0, 1e4])
def test_trivial_sector_eigenvalue(beta_tilde):
    assert ku_eigenvalue(0, beta_tilde) == pytest.approx(1.0 - math.exp(-beta_tilde), rel=1e-12)


def test_first_sector_eigenvalue():
    expected = (1.0 - math.exp(-100.0)) - 2.0 / 100.0 * special.gammainc(2, 100.0)
    assert ku_eigenvalue(1, 100.0) == pytest.approx(expected, rel=1e-12)
    assert ku_eigenvalue(1, 100.0) == pytest.approx(0.98, abs=1e-10)


@pytest.mark.parametrize("l", range(1, 6))
def test_sector_eigenvalue_asymptotics(l):
    beta_tilde = 1000.0
    residual = abs(ku_eigenvalue(l, beta_tilde) - (1.0 - l * (l + 1) / beta_tilde))
    assert residual <= 5.0 * l ** 4 / beta_tilde ** 2


@pytest.mark.parametrize("l, power", [(3, 0), (5, 0), (5, 1), (7, 2)])
def test_compact_moment_against_adaptive_quadrature(l, power):
    beta_tilde = 10.0
    reference, _ = integrate.quad(
        lambda x: beta_tilde * math.exp(-beta_tilde * x) * x ** power * special.eval_legendre(l, 1 - 2 * x),
        0.0, 1.0, epsabs=1e-14, epsrel=1e-12)
    assert compact_moment(l, beta_tilde, power) == pytest.approx(reference, rel=1e-9, abs=1e-13)


def test_hyperbolic_sector_eigenvalue_asymptotics():
    rho = 0.5
    assert ks_eigenvalue(rho, 1000.0) == pytest.approx(1.0 - (rho ** 2 + 0.25) / 1000.0, abs=5e-5)


@pytest.mark.parametrize("l", range(5))
def test_rep_function_diagonal_is_legendre(l):
    theta = np.linspace(0.0, np.pi, 7)
    assert np.allclose(rep_function(l, 0, 0, theta), special.eval_legendre(l, np.cos(theta)), atol=1e-12)


def test_rep_function_at_identity():
    for m in (-2, -1, 0, 1, 2):
        for k in (-2, -1, 0, 1, 2):
            assert rep_function(2, m, k, 0.0) == pytest.approx(1.0 if m == k else 0.0, abs=1e-14)
    with pytest.raises(ValueError):
        rep_function(1, 2, 0, 0.0)


def test_cone_function_at_origin():
    for rho in (0.0, 0.5, 3.0):
        assert cone_function(rho, 1.0) == pytest.approx(1.0)


def test_zonal_grid_rules():
    grid = ZonalGrid.build(8, 16, 5.0)
    assert grid.u_weights.sum() == pytest.approx(1.0)
    assert grid.s_weights.sum() == pytest.approx(5.0)
    assert grid.refined().counts == (16, 32)
    assert grid.refined().s_max == 10.0
    with pytest.raises(ValueError):
        ZonalGrid.build(1, 16)


def test_hyperbolic_truncation_at_band_center():
    assert hyperbolic_truncation(0.0, 0.5, XI) == pytest.approx(18.0)


def test_nystrom_compact_kernel_reproduces_sector_eigenvalues():
    beta_tilde = 200.0
    matrix = CompactKernel(beta_tilde).matrix(ZonalGrid.build())
    discrete = np.sort(np.linalg.eigvals(matrix).real)[::-1][:5]
    exact = np.array([ku_eigenvalue(l, beta_tilde) for l in range(5)])
    assert np.allclose(discrete, exact, atol=1e-6)


def test_nystrom_matches_brute_force_sphere_quadrature():
    beta_tilde = 50.0
    grid = ZonalGrid.build(16, 8)
    function = lambda u: 1.0 + u - 2.0 * u ** 2
    discrete = CompactKernel(beta_tilde).matrix(grid) @ function(grid.u_nodes)
    brute = brute_force_compact_apply(beta_tilde, function, grid.u_nodes)
    assert np.allclose(discrete, brute, atol=1e-8)


def test_hyperbolic_kernel_is_a_contraction():
    spectrum = HyperbolicKernel(200.0).symmetric_spectrum(ZonalGrid.build())
    assert spectrum[0] <= 1.0 + 1e-9


def test_truncation_defect_is_reported():
    grid = ZonalGrid.build(8, 8, s_max=1.0, decay=0.0)
    with pytest.raises(TruncationTooSmallError) as info:
        zonal_kernel_matrix(100.0, grid, max_power=0)
    assert info.value.code == "TRUNCATION_TOO_SMALL"


@pytest.mark.parametrize("l", [1, 2, 3])
def test_offdiagonal_identity(l):
    m10, _ = offdiag_eigenvalues(l, 1000.0)
    assert abs(m10.real) < 1e-10
    assert abs(m10 - offdiag_identity(l, 1000.0)) < 1e-8


@pytest.mark.parametrize("beta_tilde", [1e3, 1e4])
@pytest.mark.parametrize("l", [1, 2, 3, 4])
def test_leading_order_recursion_is_a_sanity_bound(l, beta_tilde):
    residual = recursion_residual(l, beta_tilde)
    assert residual * beta_tilde <= 10.0
    m10, _ = offdiag_eigenvalues(l, beta_tilde)
    assert abs(m10 - offdiag_identity(l, beta_tilde)) < 1e-8


def test_second_offdiagonal_sector_is_second_order():
    assert lambda_m11(1, 100.0) == pytest.approx(-2.0 / 100.0 ** 2, rel=1e-3)
    assert abs(lambda_m11(1, 100.0)) <= 1.0 / 100.0


def test_correction_eigenvalue_is_small_and_decays():
    beta_tilde = 1000.0
    near = correction_eigenvalue(1, 0.0, beta_tilde, 1.0 + 1.0 / 8.0)
    far = correction_eigenvalue(1, 0.0, beta_tilde, 1e3)
    assert abs(near) <= beta_tilde ** -3
    assert abs(far) <= 1e-4 * abs(near)
    with pytest.raises(ValueError):
        correction_eigenvalue(1, 0.0, beta_tilde, 0.5)


def test_moment_identities():
    assert moment_identities_check(100.0).passed


def test_laplacian_eigen_relations():
    residuals = laplacian_eigen_residuals()
    assert max(residuals.values()) < 1e-4


def test_corner_symbol_is_scaled_top_coefficient():
    k41 = ScalarPoly.parse(PRINTED_COEFFICIENTS["n1*n2*n1p*n2p"])
    assert transfer_polynomials()["K3"] == k41 * ScalarPoly.variable("ib", -2)


def test_transfer_needs_two_sites():
    with pytest.raises(ValueError):
        assemble_transfer(0.0, 0.5, XI, 2500.0, 1)


def test_sigma_model_approaches_closed_form():
    n, beta = 8, 2500.0
    value = evaluate_sigma_model(0.0, 0.5, XI, beta, n)
    closed = r_plus_minus_limit(0.0, 0.5, XI)
    assert abs(value - closed) / abs(closed) <= 5.0 * n * math.log(n) ** 2 / 1e4


def test_transfer_report_fields():
    report = transfer_report(0.0, 0.5, XI, 2500.0, 4)
    assert set(report) == {"value_re", "value_im", "closed_form_re", "closed_form_im", "rel_dev", "grid_report"}
    assert report["grid_report"]["beta_tilde"] == pytest.approx(1e4)
    assert len(report["grid_report"]["diagonal_defects"]) == 4
    assert set(report["grid_report"]["symbol_norms"]) == {"K1", "K2", "K3"}


def test_offdiagonal_symbols_nearly_annihilate_constants():
    beta_tilde = 1000.0
    norms = symbol_norms(zonal_kernel_matrix(beta_tilde, ZonalGrid.build()))
    # u and s are exponential with mean 1/beta_tilde under K_U and K_S: K1 1 = K2 1 = 1/bt, K3 1 = 1/bt^2
    assert norms["K1"] == pytest.approx(1.0 / beta_tilde, rel=0.05)
    assert norms["K2"] == pytest.approx(norms["K1"], rel=1e-6)
    assert norms["K3"] <= norms["K1"]
    assert max(norms.values()) <= 20.0 / beta_tilde


def test_sigma_model_with_equal_shifts_is_one():
    n, beta = 8, 2500.0
    xi = (0.5, -0.5, 0.5, -0.5)
    assert r_plus_minus_limit(0.0, 0.5, xi) == pytest.approx(1.0, abs=1e-12)
    value = evaluate_sigma_model(0.0, 0.5, xi, beta, n)
    assert abs(value - 1.0) <= 5.0 * n * math.log(n) ** 2 / 1e4


def test_sigma_model_is_grid_convergent():
    grid = ZonalGrid.build(24, 64, hyperbolic_truncation(0.0, 0.5, XI))
    coarse = evaluate_sigma_model(0.0, 0.5, XI, 2500.0, 4, grid=grid)
    fine = evaluate_sigma_model(0.0, 0.5, XI, 2500.0, 4, grid=grid.refined())
    assert abs(fine - coarse) / abs(fine) < 1e-4


def test_sigma_model_at_vanishing_shifts_is_finite():
    xi = (0.0, 0.0, 0.0, 0.0)
    operator = assemble_transfer(0.0, 0.0, xi, 250.0, 4)
    assert operator.prefactor == 1.0
    assert np.allclose(operator.F_hat[0, 0], 1.0) and np.allclose(operator.F_hat[0, 3], 0.0)
    assert np.allclose(operator.fvec[3], 1.0) and np.allclose(operator.fvec[0], -1.0)
    assert np.allclose(operator.gvec[0], 1.0) and np.allclose(operator.gvec[3], -1.0)
    assert np.allclose(operator.fvec[1:3], 0.0)
    assert np.isfinite(evaluate_sigma_model(0.0, 0.0, xi, 250.0, 4))
