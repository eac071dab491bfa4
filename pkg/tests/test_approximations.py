"""Log-normal and delta-method approximations, temperature derivatives, curvature."""

import dataclasses
import math

import numpy as np
import pytest

from gaplab import approximations as ap
from gaplab import averaging as av
from gaplab.functions import SmoothFunction
from gaplab.models import GaussianMean
from gaplab.sampling import IID_FRESH, SamplingMode
from gaplab.steady_state import density_from_log_values, trapezoid_weights, uniform_axis

MODEL = GaussianMean(0.0, 1.0)
MODE = SamplingMode(IID_FRESH)


@pytest.fixture(scope="module")
def ens():
    return av.build_ensemble(MODEL, MODE, 25, 25, 3000, 77,
                             av.EnsembleConfig(T=0.05, alpha=0.1, beta=0.5, n_nodes=301))


@pytest.fixture(scope="module")
def stats(ens):
    return ap.compute_potential_stats(ens)


def _synthetic_stats(axis, **overrides):
    """Minimal stats object with flat defaults, for arithmetic-level checks."""
    n = len(axis)
    w = trapezoid_weights(axis)
    rho = np.full(n, 1.0 / np.sum(w))
    base = dict(axes=(axis,), weights=w, rho_bar=rho, T=0.1, n_train=25,
                v_bar=np.zeros(n), a_bar=np.zeros(n), g_bar=np.zeros(n),
                U_bar=np.ones(n), U_pop=np.ones(n), sigma_ell2=np.ones(n),
                sigma_v2=np.zeros(n), sigma_a2=np.zeros(n), sigma_g2=np.zeros(n),
                sigma_u2=np.zeros(n), sigma_va=np.zeros(n), sigma_vu=np.zeros(n),
                sigma_au=np.zeros(n), sigma_gu=np.zeros(n))
    base.update(overrides)
    return ap.PotentialStats(**base)


class TestPotentialStats:
    def test_variance_decompositions_hold(self, ens, stats):
        t = ens.T
        np.testing.assert_allclose(
            stats.sigma_g2,
            (4 / t ** 2) * stats.sigma_v2 + stats.sigma_a2 + (4 / t) * stats.sigma_va,
            rtol=1e-10)
        np.testing.assert_allclose(
            stats.sigma_gu, (2 / t) * stats.sigma_vu + stats.sigma_au, rtol=1e-10)

    def test_variances_nonnegative(self, stats):
        for field in (stats.sigma_v2, stats.sigma_a2, stats.sigma_g2, stats.sigma_u2):
            assert np.min(field) >= -1e-12

    def test_sigma_v2_closed_form_frozen_covariance(self):
        # v is quadratic in theta with coefficients linear/quadratic in the sample
        # mean, so its variance over data sets is explicit when D is frozen
        n, m, T, alpha, beta = 25, 6000, 0.05, 0.1, 0.5
        e = av.build_ensemble(MODEL, MODE, n, n, m, 77,
                              av.EnsembleConfig(T=T, alpha=alpha, beta=beta,
                                                freeze_covariance=True, n_nodes=301))
        s = ap.compute_potential_stats(e)
        precond = 1.0 + beta ** 2
        sig2 = 1.0 / n
        nodes = e.nodes()
        closed = (nodes ** 2 * sig2 + sig2 ** 2 / (2 * (1 + alpha) ** 2)) / precond ** 2
        se = s.sigma_v2 * math.sqrt(2.0 / (m - 1)) + 1e-12
        assert np.max(np.abs(s.sigma_v2 - closed) / se) < 3.0

    def test_data_independent_potential_has_zero_variance(self, ens):
        frozen = dataclasses.replace(
            ens, v=np.tile(ens.v[0], (ens.m, 1)), a=np.tile(ens.a[0], (ens.m, 1)),
            g=np.tile(ens.g[0], (ens.m, 1)))
        s = ap.compute_potential_stats(frozen)
        np.testing.assert_allclose(s.sigma_g2, 0.0, atol=1e-14)


class TestLogNormalDensity:
    def test_degenerate_variance_equals_boltzmann_of_mean_potential(self, stats):
        degenerate = dataclasses.replace(stats, sigma_g2=np.zeros_like(stats.sigma_g2))
        dens = ap.lognormal_rho_bar(degenerate)
        direct = density_from_log_values(stats.axes, -stats.g_bar)
        np.testing.assert_allclose(dens.values, direct.values, rtol=1e-10)

    def test_matches_true_mean_density_when_potential_is_gaussian(self):
        e = av.build_ensemble(MODEL, MODE, 100, 100, 6000, 13,
                              av.EnsembleConfig(T=1.0, freeze_covariance=True,
                                                n_nodes=301))
        s = ap.compute_potential_stats(e)
        dens = ap.lognormal_rho_bar(s)
        tv = 0.5 * float(np.sum(np.abs(dens.values - e.rho_bar_values) * e.weights))
        assert tv < 0.01

    def test_heavy_variance_reported_not_asserted(self, stats):
        # strongly fluctuating potentials push mass outward; the distance to the
        # true mean density is finite and merely logged by callers
        inflated = dataclasses.replace(stats, sigma_g2=4.0 * stats.sigma_g2)
        dens = ap.lognormal_rho_bar(inflated, boundary_tol=1e-6)
        assert np.isfinite(dens.logZ)


class TestLogNormalGap:
    def test_zero_when_no_covariance(self, stats):
        silent = dataclasses.replace(stats, sigma_gu=np.zeros_like(stats.sigma_gu),
                                     sigma_u2=np.zeros_like(stats.sigma_u2))
        assert ap.lognormal_gap(silent).value == pytest.approx(0.0, abs=1e-15)

    def test_saturates_to_test_loss_in_interpolation_regime(self, stats):
        big = dataclasses.replace(stats, sigma_gu=1e4 * np.ones_like(stats.sigma_gu))
        res = ap.lognormal_gap(big)
        assert res.regime == "interpolation"
        assert res.value == pytest.approx(res.interpolation_value, rel=1e-12)

    def test_nonnegative_when_covariance_nonnegative(self, stats):
        flipped = dataclasses.replace(stats, sigma_gu=np.abs(stats.sigma_gu))
        assert ap.lognormal_gap(flipped).value >= 0

    def test_small_exponent_expansion_tracks_full_expression(self, stats):
        res = ap.lognormal_gap(stats)
        assert res.regime == "small_exponent"
        assert res.small_exponent_value == pytest.approx(res.value, rel=0.05)

    def test_vanishing_train_loss_saturates_factor(self, stats):
        zeroed = dataclasses.replace(stats, U_bar=np.zeros_like(stats.U_bar))
        res = ap.lognormal_gap(zeroed)
        assert res.value == pytest.approx(0.0, abs=1e-15)
        assert res.regime == "interpolation"


class TestGapUpperBounds:
    def test_all_zero_stats_give_zero_small_sigma_bound(self):
        axis = uniform_axis(-1, 1, 51)
        s = _synthetic_stats(axis)
        bounds = ap.lognormal_gap_upper_bounds(s)
        assert bounds.sgd_small_sigma == 0.0
        assert bounds.generic == 0.0

    def test_halving_temperature_quadruples_exponent_term(self):
        axis = uniform_axis(-1, 1, 51)
        s = _synthetic_stats(axis, sigma_v2=np.full(51, 1e-4))
        colder = dataclasses.replace(s, T=s.T / 2)
        log_ratio_hot = math.log(ap.lognormal_gap_upper_bounds(s).sgd_large_sigma
                                 * math.sqrt(s.n_train))
        log_ratio_cold = math.log(ap.lognormal_gap_upper_bounds(colder).sgd_large_sigma
                                  * math.sqrt(s.n_train))
        expo_hot = 2 * 1e-4 / s.T ** 2
        assert log_ratio_cold == pytest.approx(4 * expo_hot, rel=1e-9)
        assert log_ratio_hot == pytest.approx(expo_hot, rel=1e-9)

    def test_bounds_dominate_gap_in_validity_regime(self, ens, stats):
        bounds = ap.lognormal_gap_upper_bounds(stats)
        exact = av.gap_direct(ens)
        if bounds.mean_sigma_g2 < 0.3:
            assert bounds.sgd_small_sigma >= exact.value - 3 * exact.stderr


class TestDeltaMethod:
    def test_linear_pair_recovers_covariance_entry(self):
        f = SmoothFunction.affine([1.0, 0.0])
        h = SmoothFunction.affine([0.0, 1.0])
        sigma = np.array([[2.0, 0.7], [0.7, 1.5]])
        got = ap.delta_method_cov(f, h, [0.3, -0.2], sigma)
        assert got == pytest.approx(0.7, rel=1e-14)

    def test_constant_function_gives_zero(self):
        f = SmoothFunction.constant(4.0, dim=2)
        h = SmoothFunction.affine([1.0, 1.0])
        assert ap.delta_method_cov(f, h, [0.0, 0.0], np.eye(2)) == 0.0

    def test_square_case_value(self):
        square = SmoothFunction(lambda x: float(x[0]) ** 2,
                                lambda x: np.array([2.0 * float(x[0])]),
                                lambda x: np.array([[2.0]]))
        got = ap.delta_method_cov(square, square, [1.0], [[0.01]])
        # 4 mu^2 sigma^2 - sigma^4 / this expansion: 0.04 - 0.0001 = 0.0399
        assert got == pytest.approx(0.0399, abs=1e-15)

    def test_rejects_indefinite_covariance(self):
        f = SmoothFunction.affine([1.0])
        with pytest.raises(ValueError):
            ap.delta_method_cov(f, f, [0.0], [[-1.0]])


class TestDeltaMethodGap:
    def test_zero_covariance_gives_zero(self, stats):
        silent = dataclasses.replace(stats, sigma_gu=np.zeros_like(stats.sigma_gu),
                                     sigma_vu=np.zeros_like(stats.sigma_vu),
                                     sigma_au=np.zeros_like(stats.sigma_au))
        dens = ap.mean_dataset_density(MODEL, stats.n_train, stats.T, alpha=0.1,
                                       beta=0.5, axes=stats.axes)
        res = ap.delta_method_gap(silent, dens)
        assert res.value == 0.0 and res.v_part == 0.0 and res.a_part == 0.0

    def test_positive_when_covariance_positive(self, stats):
        positive = dataclasses.replace(stats, sigma_gu=np.abs(stats.sigma_gu))
        dens = ap.mean_dataset_density(MODEL, stats.n_train, stats.T, alpha=0.1,
                                       beta=0.5, axes=stats.axes)
        assert ap.delta_method_gap(positive, dens).value > 0

    def test_split_adds_up(self, ens, stats):
        dens = ap.mean_dataset_density(MODEL, stats.n_train, stats.T, alpha=0.1,
                                       beta=0.5, axes=stats.axes)
        res = ap.delta_method_gap(stats, dens)
        assert res.value == pytest.approx(res.v_part + res.a_part, rel=1e-10)

    def test_grid_mismatch_rejected(self, stats):
        other = ap.mean_dataset_density(MODEL, stats.n_train, stats.T, n_nodes=51)
        with pytest.raises(ValueError):
            ap.delta_method_gap(stats, other)


class TestOptimalTemperature:
    def test_no_overfitting_term_pins_smallest_temperature(self):
        def builder(T):
            e = av.build_ensemble(MODEL, MODE, 20, 20, 300, 5,
                                  av.EnsembleConfig(T=T, n_nodes=201))
            v0 = np.tile(e.v[0], (e.m, 1))
            a0 = np.tile(e.a[0], (e.m, 1))
            g0 = (2.0 / T) * v0 + a0
            rho0 = np.tile(density_from_log_values(e.axes, -g0[0]).values, (e.m, 1))
            return dataclasses.replace(e, v=v0, a=a0, g=g0, rho=rho0)

        grid = np.geomspace(1e-3, 1e-1, 6)
        res = ap.optimal_temperature(MODEL, builder, grid)
        np.testing.assert_allclose(res.formula_values[np.isfinite(res.formula_values)],
                                   0.0, atol=1e-10)
        assert res.T_opt_scan == pytest.approx(grid[0])
        assert math.isnan(res.T_opt_formula)
        assert not res.no_learning

    def test_scan_derivative_sign_matches_formula_expression(self):
        # at moderate temperatures the covariance expression reproduces the sign
        # of the finite-difference slope of the scanned test loss
        def builder(T):
            return av.build_ensemble(MODEL, MODE, 20, 20, 1200, 7,
                                     av.EnsembleConfig(T=T, n_nodes=301))
        grid = np.geomspace(0.2, 2.0, 5)
        res = ap.optimal_temperature(MODEL, builder, grid)
        fd_signs = np.sign(np.diff(res.scan_values))
        for i in range(len(grid) - 1):
            t_mid = math.sqrt(grid[i] * grid[i + 1])
            e = builder(t_mid)
            s = ap.compute_potential_stats(e)
            num = s.rho_bar_cov(s.U_pop, s.v_bar - s.sigma_va)
            correction = (2.0 / t_mid ** 3) * s.rho_bar_cov(s.U_pop, s.sigma_v2)
            deriv = (2.0 / t_mid ** 2) * num - 2 * correction
            assert np.sign(deriv) == fd_signs[i]


class TestTrainLossTemperatureDerivative:
    def test_strictly_positive_for_aligned_potential(self, ens):
        est = ap.train_loss_T_derivative(ens)
        assert est.value > 0

    def test_doubling_temperature_with_frozen_stats_quarters_prefactor(self, ens):
        hot = dataclasses.replace(ens, T=2 * ens.T)
        assert ap.train_loss_T_derivative(hot).value == pytest.approx(
            ap.train_loss_T_derivative(ens).value / 4, rel=1e-12)

    def test_matches_finite_difference(self):
        T, m = 0.5, 2000
        def build(t):
            return av.build_ensemble(MODEL, MODE, 20, 20, m, 3,
                                     av.EnsembleConfig(T=t, n_nodes=301))
        e = build(T)
        hi, lo = build(T * 1.05), build(T * 0.95)
        per_rep = (2.0 / T ** 2) * (((e.v * e.train_loss) * e.rho) @ e.weights
                                    - ((e.v * e.rho) @ e.weights)
                                    * ((e.train_loss * e.rho) @ e.weights))
        fd = (((hi.train_loss * hi.rho) - (lo.train_loss * lo.rho)) @ e.weights) / (0.1 * T)
        resid = per_rep - fd
        assert abs(resid.mean()) < 3 * resid.std(ddof=1) / math.sqrt(m)


class TestCurvature:
    def _component(self, **kw):
        base = dict(weight=1.0, mean=[0.1, -0.2], cov=[[0.3, 0.05], [0.05, 0.2]],
                    train_min=[0.0, 0.0], test_min=[0.05, 0.05], train_loss=0.2,
                    test_loss=0.3, train_curv=[[1.0, 0.2], [0.2, 2.0]],
                    test_curv=[[1.5, 0.1], [0.1, 1.0]])
        base.update(kw)
        return ap.CurvatureComponent(**base)

    def test_flat_curvature_returns_depths(self):
        comp = self._component(train_curv=np.zeros((2, 2)), test_curv=np.zeros((2, 2)))
        test, train = ap.curvature_expansion(ap.CurvatureSpec([comp]))
        assert test == 0.3 and train == 0.2

    def test_doubling_shift_quadruples_quadratic_penalty(self):
        def penalty(scale):
            comp = self._component(mean=[0.0, 0.0], train_min=[0.0, 0.0],
                                   test_min=list(-scale * np.array([0.2, 0.1])),
                                   cov=np.zeros((2, 2)), test_loss=0.0)
            return ap.curvature_expansion(ap.CurvatureSpec([comp]))[0]
        assert penalty(2.0) == pytest.approx(4 * penalty(1.0), rel=1e-12)

    def test_weights_validated(self):
        with pytest.raises(ValueError):
            ap.CurvatureSpec([self._component(weight=0.4)])

    def test_exact_for_quadratic_losses(self):
        # direct Gaussian expectation of a quadratic: depth + trace + offset terms
        rng = np.random.default_rng(4)
        comp = self._component()
        test, train = ap.curvature_expansion(ap.CurvatureSpec([comp]))
        mu = np.asarray(comp.mean)
        cov = np.asarray(comp.cov)
        ce = np.asarray(comp.test_curv)
        d = mu - np.asarray(comp.test_min)
        exact = comp.test_loss + 0.5 * (d @ ce @ d + np.trace(ce @ cov))
        assert test == pytest.approx(exact, abs=1e-12)
        samples = rng.multivariate_normal(mu, cov, 400_000)
        diffs = samples - np.asarray(comp.test_min)
        mc = comp.test_loss + 0.5 * np.mean(np.einsum("ni,ij,nj->n", diffs, ce, diffs))
        assert test == pytest.approx(mc, rel=5e-3)


class TestSamplingShiftCurvature:
    QUAD = SmoothFunction.quadratic_form([[2.0, 0.3], [0.3, 1.0]], center=[0.1, -0.1],
                                         offset=0.05)

    def test_zero_shift_returns_function_value(self):
        corrected = ap.sampling_shift_curvature(self.QUAD, np.zeros((2, 2)))
        theta = np.array([0.4, 0.2])
        assert corrected(theta) == pytest.approx(self.QUAD.value(theta), rel=1e-15)

    def test_exact_for_quadratic_under_gaussian_shift(self):
        cov = np.array([[0.04, 0.01], [0.01, 0.09]])
        corrected = ap.sampling_shift_curvature(self.QUAD, cov)
        theta = np.array([0.3, -0.5])
        rng = np.random.default_rng(9)
        shifts = rng.multivariate_normal(np.zeros(2), cov, 300_000)
        mc = np.mean([self.QUAD.value(theta - s) for s in shifts[:50_000]])
        exact = self.QUAD.value(theta) + 0.5 * np.trace(self.QUAD.hessian(theta) @ cov)
        assert corrected(theta) == pytest.approx(exact, rel=1e-12)
        assert corrected(theta) == pytest.approx(mc, rel=2e-3)

    def test_linear_in_shift_covariance(self):
        theta = np.array([0.2, 0.2])
        base = self.QUAD.value(theta)
        c1 = ap.sampling_shift_curvature(self.QUAD, 0.01 * np.eye(2))(theta) - base
        c3 = ap.sampling_shift_curvature(self.QUAD, 0.03 * np.eye(2))(theta) - base
        assert c3 == pytest.approx(3 * c1, rel=1e-12)
