"""Loss-family unit tests: closed forms, finite-difference oracles, covariance shape."""

import math

import numpy as np
import pytest

from gaplab.models import (FAMILIES, GaussianMean, LogisticRegression2D,
                           NonlinearRegression1D, Quadratic2D, model_from_config,
                           population_loss_and_variance)

ALL_MODELS = [GaussianMean(0.3, 1.2), NonlinearRegression1D(0.5, 0.8, 0.3),
              Quadratic2D(m_star=(0.2, -0.4), cov=[[1.0, 0.3], [0.3, 0.8]]),
              LogisticRegression2D((1.0, -0.5))]


def _random_point(model, rng):
    theta = rng.normal(scale=1.5, size=model.dim)
    x = model.sample(1, rng)[0]
    return theta, x


class TestPerExampleLoss:
    def test_gaussian_mean_exact_fit(self):
        assert GaussianMean().per_example_loss([0.0], 0.0) == 0.0

    def test_gaussian_mean_quadratic(self):
        assert GaussianMean().per_example_loss([2.0], 0.0) == 2.0

    def test_nonlinear_link_value(self):
        # independent scalar calculation of 0.5 * (f(1) - 1)^2 with f(t) = t + 0.3 sin t
        model = NonlinearRegression1D(theta_star=0.0, s=1.0, amp=0.3)
        expected = 0.5 * (1.0 + 0.3 * math.sin(1.0) - 1.0) ** 2
        assert model.per_example_loss([1.0], 1.0) == pytest.approx(expected, abs=1e-15)

    @pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.name)
    def test_losses_nonnegative(self, model):
        rng = np.random.default_rng(7)
        for _ in range(50):
            theta = rng.normal(scale=2.0, size=model.dim)
            xs = model.sample(20, rng)
            assert np.all(model.losses(theta, xs) >= 0)

    def test_dimension_mismatch_raises(self):
        with pytest.raises(ValueError):
            GaussianMean().per_example_loss([0.0, 1.0], 0.0)
        with pytest.raises(ValueError):
            Quadratic2D().losses([0.0], np.zeros((3, 2)))

    def test_nonfinite_theta_raises(self):
        with pytest.raises(ValueError):
            GaussianMean().losses([np.nan], np.zeros(3))


class TestGradients:
    def test_gaussian_mean_values(self):
        model = GaussianMean()
        assert model.loss_gradient([2.0], 0.0)[0] == 2.0
        assert model.loss_gradient([1.3], 1.3)[0] == 0.0

    @pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.name)
    def test_matches_central_differences(self, model):
        rng = np.random.default_rng(11)
        h = 1e-6
        for _ in range(25):
            theta, x = _random_point(model, rng)
            grad = model.loss_gradient(theta, x)
            for i in range(model.dim):
                e = np.zeros(model.dim)
                e[i] = h
                fd = (model.per_example_loss(theta + e, x)
                      - model.per_example_loss(theta - e, x)) / (2 * h)
                assert grad[i] == pytest.approx(fd, rel=1e-6, abs=1e-9)

    @pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.name)
    def test_mean_hessian_matches_gradient_differences(self, model):
        rng = np.random.default_rng(13)
        xs = model.sample(15, rng)
        theta = rng.normal(size=model.dim)
        hess = model.mean_hessian(theta, xs)
        h = 1e-6
        for i in range(model.dim):
            e = np.zeros(model.dim)
            e[i] = h
            fd = (model.mean_gradient(theta + e, xs) - model.mean_gradient(theta - e, xs)) / (2 * h)
            np.testing.assert_allclose(hess[:, i], fd, rtol=1e-5, atol=1e-7)


class TestSetLoss:
    def test_symmetric_pair(self):
        assert GaussianMean().train_set_loss([0.0], np.array([-1.0, 1.0])) == 0.5

    def test_at_sample_mean_equals_half_biased_variance(self):
        rng = np.random.default_rng(3)
        xs = rng.normal(size=17)
        model = GaussianMean()
        got = model.train_set_loss([xs.mean()], xs)
        assert got == pytest.approx(0.5 * xs.var(), rel=1e-12)

    def test_single_example(self):
        model = NonlinearRegression1D()
        xs = np.array([0.7])
        assert model.train_set_loss([0.2], xs) == model.per_example_loss([0.2], 0.7)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(5)
        for model in ALL_MODELS:
            xs = model.sample(12, rng)
            theta = rng.normal(size=model.dim)
            shuffled = xs[rng.permutation(12)]
            assert model.train_set_loss(theta, xs) == pytest.approx(
                model.train_set_loss(theta, shuffled), rel=1e-12)

    def test_empty_set_raises(self):
        with pytest.raises(ValueError):
            GaussianMean().train_set_loss([0.0], np.array([]))


class TestGradientCovariance:
    def test_gaussian_pair_is_unit(self):
        model = GaussianMean()
        for theta in (-2.0, 0.0, 1.7):
            cov = model.gradient_covariance([theta], np.array([-1.0, 1.0]))
            assert cov[0, 0] == pytest.approx(1.0, rel=1e-14)

    def test_repeated_examples_zero(self):
        for model in ALL_MODELS:
            xs = np.repeat(model.sample(1, np.random.default_rng(0)), 8, axis=0)
            cov = model.gradient_covariance(np.zeros(model.dim), xs)
            np.testing.assert_allclose(cov, 0.0, atol=1e-14)

    def test_two_pass_oracle(self):
        # independent two-pass covariance of the per-example gradients
        model = NonlinearRegression1D(0.0, 1.0, 0.3)
        rng = np.random.default_rng(9)
        xs = model.sample(40, rng)
        theta = np.array([0.6])
        grads = np.array([model.loss_gradient(theta, x) for x in xs])
        centered = grads - grads.mean(axis=0)
        oracle = sum(np.outer(g, g) for g in centered) / len(xs)
        np.testing.assert_allclose(model.gradient_covariance(theta, xs), oracle, atol=1e-12)

    @pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.name)
    def test_symmetric_psd(self, model):
        rng = np.random.default_rng(21)
        for _ in range(20):
            xs = model.sample(10, rng)
            theta = rng.normal(size=model.dim)
            cov = model.gradient_covariance(theta, xs)
            np.testing.assert_allclose(cov, cov.T, atol=1e-14)
            assert np.min(np.linalg.eigvalsh(cov)) >= -1e-12

    def test_gaussian_mean_theta_independent(self):
        model = GaussianMean()
        rng = np.random.default_rng(2)
        xs = model.sample(25, rng)
        values = [model.gradient_covariance([t], xs)[0, 0]
                  for t in rng.normal(scale=3.0, size=10)]
        assert np.ptp(values) == 0.0


class TestPopulationStats:
    def test_gaussian_closed_form(self):
        mean, var = population_loss_and_variance(GaussianMean(0.0, 1.0), [0.0])
        assert mean == 0.5
        # fourth Gaussian moment: Var(x^2/2) = (E[x^4] - E[x^2]^2)/4 = (3 - 1)/4
        assert var == 0.5

    def test_monte_carlo_within_three_stderr(self):
        model = GaussianMean(0.0, 1.0)
        theta = [0.4]
        mean_mc, var_mc = model.mc_population_stats(theta, n_mc=1_000_000, seed=42)
        mean_cf, var_cf = model.population_stats(theta)
        se_mean = math.sqrt(var_cf / 1e6)
        assert abs(mean_mc - mean_cf) < 3 * se_mean

    def test_quadratic_mc_against_quadratic_form_identity(self):
        # closed form for Var((u'Au)/2), u ~ N(d, S): Tr((AS)^2)/2 + d'ASAd
        model = Quadratic2D(m_star=(0.1, -0.2), cov=[[1.0, 0.4], [0.4, 0.7]])
        theta = np.array([0.5, 0.3])
        d = theta - model.m_star
        a_s = model.matrix @ model.cov
        var_cf = 0.5 * np.trace(a_s @ a_s) + d @ model.matrix @ model.cov @ model.matrix @ d
        mean_cf = 0.5 * d @ model.matrix @ d + 0.5 * np.trace(a_s)
        mean_mc, var_mc = model.mc_population_stats(theta, n_mc=400_000, seed=3)
        assert mean_mc == pytest.approx(mean_cf, abs=4 * math.sqrt(var_cf / 4e5))
        assert var_mc == pytest.approx(var_cf, rel=0.02)

    def test_population_grid_matches_pointwise(self):
        model = GaussianMean(0.5, 2.0)
        thetas = np.linspace(-1, 2, 7)
        means, variances = model.population_grid(thetas)
        for t, m_val, v_val in zip(thetas, means, variances):
            mean_cf, var_cf = model.population_stats([t])
            assert m_val == pytest.approx(mean_cf, rel=1e-12)
            assert v_val == pytest.approx(var_cf, rel=1e-12)


class TestGridAndChainPaths:
    @pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.name)
    def test_grid_helpers_match_single_point(self, model):
        rng = np.random.default_rng(31)
        xs = model.sample(9, rng)
        if model.dim == 1:
            thetas = rng.normal(size=5)
            point = lambda t: np.array([t])  # noqa: E731
        else:
            thetas = rng.normal(size=(5, model.dim))
            point = lambda t: t  # noqa: E731
        losses = model.loss_grid(thetas, xs)
        grads = model.mean_gradient_grid(thetas, xs)
        covs = model.gradient_covariance_grid(thetas, xs)
        for i, t in enumerate(thetas):
            assert losses[i] == pytest.approx(model.train_set_loss(point(t), xs), rel=1e-12)
            g = model.mean_gradient(point(t), xs)
            c = model.gradient_covariance(point(t), xs)
            if model.dim == 1:
                assert grads[i] == pytest.approx(g[0], rel=1e-12)
                assert covs[i] == pytest.approx(c[0, 0], rel=1e-12, abs=1e-15)
            else:
                np.testing.assert_allclose(grads[i], g, rtol=1e-12)
                np.testing.assert_allclose(covs[i], c, rtol=1e-12, atol=1e-15)

    @pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: m.name)
    def test_chain_gradient_matches_mean_gradient(self, model):
        rng = np.random.default_rng(33)
        train = model.sample(30, rng)
        n_chains, batch = 6, 5
        idx = rng.integers(0, 30, size=(n_chains, batch))
        batches = train[idx]
        if model.dim == 1:
            thetas = rng.normal(size=n_chains)
            got = model.chain_mean_gradient(thetas, batches)
            for c in range(n_chains):
                want = model.mean_gradient([thetas[c]], batches[c])[0]
                assert got[c] == pytest.approx(want, rel=1e-12)
        else:
            thetas = rng.normal(size=(n_chains, model.dim))
            got = model.chain_mean_gradient(thetas, batches)
            for c in range(n_chains):
                np.testing.assert_allclose(
                    got[c], model.mean_gradient(thetas[c], batches[c]), rtol=1e-12)

    def test_mean_train_set_has_exact_statistics(self):
        model = GaussianMean(0.7, 1.3)
        for n in (6, 9, 20):
            xs = model.mean_train_set(n)
            assert len(xs) == n
            assert np.mean(xs) == pytest.approx(0.7, abs=1e-12)
            assert np.var(xs) == pytest.approx(1.3 ** 2, rel=1e-12)
        q = Quadratic2D(m_star=(0.2, 0.5), cov=[[1.0, 0.2], [0.2, 0.5]])
        xs = q.mean_train_set(8)
        np.testing.assert_allclose(np.mean(xs, axis=0), q.m_star, atol=1e-12)
        np.testing.assert_allclose(np.cov(xs.T, bias=True), q.cov, atol=1e-12)


class TestAccuracy:
    def test_only_logistic_defines_accuracy(self):
        logistic = LogisticRegression2D((2.0, 0.0))
        xs = np.array([[1.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.5, 1.0, 0.0]])
        # theta = (1, 0): predicts 1, 0, 1 -> two of three correct
        assert logistic.accuracy([1.0, 0.0], xs) == pytest.approx(2.0 / 3.0)
        for model in ALL_MODELS[:3]:
            with pytest.raises(NotImplementedError):
                model.accuracy(np.zeros(model.dim), model.sample(3, np.random.default_rng(0)))

    def test_teacher_labels_learnable(self):
        model = LogisticRegression2D((1.5, -1.0))
        rng = np.random.default_rng(8)
        xs = model.sample(4000, rng)
        acc_teacher = model.accuracy(model.theta_star, xs)
        acc_orthogonal = model.accuracy([-1.0, -1.5], xs)
        assert acc_teacher > 0.7 > acc_orthogonal + 0.15


def test_model_from_config_roundtrip():
    model = model_from_config({"family": "gaussian_mean", "m_star": 0.5, "s": 2.0})
    assert isinstance(model, GaussianMean)
    assert model.s == 2.0
    with pytest.raises(ValueError):
        model_from_config({"family": "unknown"})
    assert set(FAMILIES) == {"gaussian_mean", "nonlinear_regression_1d",
                             "quadratic_2d", "logistic_regression_2d"}
