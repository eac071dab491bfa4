"""Toy loss families with exact gradients and population statistics.

All families keep the parameter dimension at 1 or 2 so parameter densities
stay integrable on grids. Gradients are analytic; population moments are
closed form for the Gaussian-mean family and Monte Carlo for the rest.

Sample conventions: 1-d families use arrays of shape (n,); the quadratic
family uses (n, 2); the logistic family uses (n, 3) with columns
(feature_1, feature_2, label).
"""

from __future__ import annotations

import numpy as np


def as_theta(theta, dim: int) -> np.ndarray:
    """Validate and coerce a parameter point to shape (dim,)."""
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    if th.shape != (dim,):
        raise ValueError(f"parameter has shape {th.shape}, model expects ({dim},)")
    if not np.all(np.isfinite(th)):
        raise ValueError("parameter entries must be finite")
    return th


def _check_samples(xs, columns: int) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    expected_ndim = 1 if columns == 1 else 2
    if xs.ndim != expected_ndim or (columns > 1 and xs.shape[1] != columns):
        raise ValueError(f"sample array has shape {xs.shape}, expected (n,{columns})"
                         if columns > 1 else f"sample array has shape {xs.shape}, expected (n,)")
    if xs.shape[0] == 0:
        raise ValueError("empty sample set")
    return xs


class LossModel:
    """Base class: a loss family plus the population that generates samples."""

    dim: int = 1
    sample_columns: int = 1
    name: str = "loss_model"
    has_accuracy: bool = False

    # -- core per-sample interface -------------------------------------------------

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n i.i.d. samples from the population."""
        raise NotImplementedError

    def losses(self, theta, xs) -> np.ndarray:
        """Per-example losses, shape (n,); every entry is >= 0."""
        raise NotImplementedError

    def gradients(self, theta, xs) -> np.ndarray:
        """Per-example loss gradients, shape (n, dim)."""
        raise NotImplementedError

    def mean_hessian(self, theta, xs) -> np.ndarray:
        """Hessian of the set loss, shape (dim, dim)."""
        raise NotImplementedError

    # -- derived set-level quantities ----------------------------------------------

    def per_example_loss(self, theta, x) -> float:
        return float(self.losses(theta, np.atleast_1d(np.asarray(x, float))
                                 if self.sample_columns == 1 else np.asarray(x, float)[None, :])[0])

    def loss_gradient(self, theta, x) -> np.ndarray:
        xs = np.atleast_1d(np.asarray(x, float)) if self.sample_columns == 1 \
            else np.asarray(x, float)[None, :]
        return self.gradients(theta, xs)[0]

    def train_set_loss(self, theta, xs) -> float:
        xs = _check_samples(xs, self.sample_columns)
        return float(np.mean(self.losses(theta, xs)))

    def mean_gradient(self, theta, xs) -> np.ndarray:
        xs = _check_samples(xs, self.sample_columns)
        return self.gradients(theta, xs).mean(axis=0)

    def gradient_covariance(self, theta, xs) -> np.ndarray:
        """Biased (1/n) sample covariance of per-example gradients, shape (dim, dim)."""
        xs = _check_samples(xs, self.sample_columns)
        g = self.gradients(theta, xs)
        gc = g - g.mean(axis=0)
        return gc.T @ gc / g.shape[0]

    def accuracy(self, theta, xs) -> float:
        raise NotImplementedError(f"{self.name} defines no accuracy metric")

    # -- population statistics -----------------------------------------------------

    def population_stats(self, theta):
        """(mean loss, loss variance) under the population, or None if no closed form."""
        return None

    def mc_population_stats(self, theta, n_mc: int, seed: int):
        if n_mc < 2:
            raise ValueError("n_mc must be >= 2")
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        ls = self.losses(theta, self.sample(n_mc, rng))
        return float(ls.mean()), float(ls.var(ddof=1))

    def population_gradient_covariance(self, theta) -> np.ndarray:
        """Covariance of the per-example gradient under the population."""
        raise NotImplementedError

    def closed_form_minimizer(self, train, alpha: float):
        """Minimizer of the regularized set loss, or None when only search applies."""
        return None

    # -- vectorized grid paths (thetas is (N,) for dim 1, (N,2) for dim 2) ----------

    def loss_grid(self, thetas, xs) -> np.ndarray:
        return np.array([self.train_set_loss(t, xs) for t in np.atleast_1d(thetas)])

    def mean_gradient_grid(self, thetas, xs) -> np.ndarray:
        out = np.array([self.mean_gradient(t, xs) for t in np.atleast_1d(thetas)])
        return out[:, 0] if self.dim == 1 else out

    def gradient_covariance_grid(self, thetas, xs) -> np.ndarray:
        out = np.array([self.gradient_covariance(t, xs) for t in np.atleast_1d(thetas)])
        return out[:, 0, 0] if self.dim == 1 else out

    def population_grid(self, thetas, n_mc: int = 200_000, seed: int = 0):
        """(mean loss, loss variance) per grid node; MC with shared draws by default."""
        thetas = np.atleast_1d(thetas)
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        xs = self.sample(n_mc, rng)
        means = np.empty(len(thetas))
        variances = np.empty(len(thetas))
        for i, t in enumerate(thetas):
            ls = self.losses(t, xs)
            means[i] = ls.mean()
            variances[i] = ls.var(ddof=1)
        return means, variances

    def chain_mean_gradient(self, thetas: np.ndarray, batches: np.ndarray) -> np.ndarray:
        """Mini-batch mean gradients for a bank of chains.

        thetas: (C,) or (C, dim); batches: (C, B) or (C, B, columns).
        Returns the same leading shape as thetas.
        """
        single = [self.mean_gradient(np.atleast_1d(t), b) for t, b in zip(thetas, batches)]
        out = np.array(single)
        return out[:, 0] if self.dim == 1 and thetas.ndim == 1 else out

    def mean_train_set(self, n: int) -> np.ndarray:
        """A finite set whose sufficient statistics equal their population expectations."""
        raise NotImplementedError


class GaussianMean(LossModel):
    """Scalar mean estimation: l(theta, x) = (theta - x)^2 / 2, x ~ N(m_star, s^2).

    The canonical analytic family: the gradient covariance over any sample set
    is independent of theta, and every population moment is closed form.
    """

    dim = 1
    sample_columns = 1
    name = "gaussian_mean"

    def __init__(self, m_star: float = 0.0, s: float = 1.0):
        if s <= 0:
            raise ValueError("noise scale s must be positive")
        self.m_star = float(m_star)
        self.s = float(s)

    def sample(self, n, rng):
        return self.m_star + self.s * rng.standard_normal(n)

    def losses(self, theta, xs):
        th = as_theta(theta, 1)[0]
        return 0.5 * (th - np.asarray(xs, float)) ** 2

    def gradients(self, theta, xs):
        th = as_theta(theta, 1)[0]
        return (th - np.asarray(xs, float))[:, None]

    def mean_hessian(self, theta, xs):
        return np.array([[1.0]])

    def gradient_covariance(self, theta, xs):
        as_theta(theta, 1)
        xs = _check_samples(xs, 1)
        # gradients are theta - x_i, so the spread is exactly the sample variance
        return np.array([[float(np.var(xs))]])

    def population_stats(self, theta):
        d = as_theta(theta, 1)[0] - self.m_star
        mean = 0.5 * d * d + 0.5 * self.s ** 2
        var = d * d * self.s ** 2 + 0.5 * self.s ** 4
        return mean, var

    def population_gradient_covariance(self, theta):
        return np.array([[self.s ** 2]])

    def loss_grid(self, thetas, xs):
        d = np.atleast_1d(thetas)[:, None] - np.asarray(xs, float)[None, :]
        return 0.5 * np.mean(d * d, axis=1)

    def mean_gradient_grid(self, thetas, xs):
        return np.atleast_1d(thetas) - float(np.mean(xs))

    def gradient_covariance_grid(self, thetas, xs):
        return np.full(len(np.atleast_1d(thetas)), float(np.var(xs)))

    def population_grid(self, thetas, n_mc=0, seed=0):
        d = np.atleast_1d(thetas) - self.m_star
        return 0.5 * d * d + 0.5 * self.s ** 2, d * d * self.s ** 2 + 0.5 * self.s ** 4

    def chain_mean_gradient(self, thetas, batches):
        return thetas - batches.mean(axis=1)

    def mean_train_set(self, n):
        return self.m_star + self.s * _unit_variance_pattern(n)

    def closed_form_minimizer(self, train, alpha):
        return np.array([float(np.mean(train)) / (1.0 + alpha)])


class NonlinearRegression1D(LossModel):
    """Scalar regression through a monotone link: l = (f(theta) - x)^2 / 2.

    f(theta) = theta + amp * sin(theta) with |amp| < 1, so the link is strictly
    increasing and the train minimizer is unique. The gradient covariance is
    f'(theta)^2 * var(x): genuinely theta-dependent, which makes the divergence
    potential ln(D + beta^2) nontrivial.
    """

    dim = 1
    sample_columns = 1
    name = "nonlinear_regression_1d"

    def __init__(self, theta_star: float = 0.0, s: float = 1.0, amp: float = 0.3):
        if not abs(amp) < 1:
            raise ValueError("need |amp| < 1 for a monotone link")
        if s <= 0:
            raise ValueError("noise scale s must be positive")
        self.theta_star = float(theta_star)
        self.s = float(s)
        self.amp = float(amp)

    def link(self, theta):
        return theta + self.amp * np.sin(theta)

    def link_prime(self, theta):
        return 1.0 + self.amp * np.cos(theta)

    def link_second(self, theta):
        return -self.amp * np.sin(theta)

    def sample(self, n, rng):
        return self.link(self.theta_star) + self.s * rng.standard_normal(n)

    def losses(self, theta, xs):
        th = as_theta(theta, 1)[0]
        return 0.5 * (self.link(th) - np.asarray(xs, float)) ** 2

    def gradients(self, theta, xs):
        th = as_theta(theta, 1)[0]
        return ((self.link(th) - np.asarray(xs, float)) * self.link_prime(th))[:, None]

    def mean_hessian(self, theta, xs):
        th = as_theta(theta, 1)[0]
        resid = self.link(th) - float(np.mean(xs))
        return np.array([[self.link_prime(th) ** 2 + resid * self.link_second(th)]])

    def population_gradient_covariance(self, theta):
        th = as_theta(theta, 1)[0]
        return np.array([[self.link_prime(th) ** 2 * self.s ** 2]])

    def loss_grid(self, thetas, xs):
        r = self.link(np.atleast_1d(thetas))[:, None] - np.asarray(xs, float)[None, :]
        return 0.5 * np.mean(r * r, axis=1)

    def mean_gradient_grid(self, thetas, xs):
        th = np.atleast_1d(thetas)
        return (self.link(th) - float(np.mean(xs))) * self.link_prime(th)

    def gradient_covariance_grid(self, thetas, xs):
        th = np.atleast_1d(thetas)
        return self.link_prime(th) ** 2 * float(np.var(xs))

    def chain_mean_gradient(self, thetas, batches):
        return (self.link(thetas) - batches.mean(axis=1)) * self.link_prime(thetas)

    def mean_train_set(self, n):
        return self.link(self.theta_star) + self.s * _unit_variance_pattern(n)


class Quadratic2D(LossModel):
    """Two-parameter quadratic loss l = (theta - x)' A (theta - x) / 2, x ~ N(m_star, S).

    With A = I the potential line integrals are path independent; a non-commuting
    A makes the integrand rotational, which the potential code must detect.
    """

    dim = 2
    sample_columns = 2
    name = "quadratic_2d"

    def __init__(self, m_star=(0.0, 0.0), cov=None, matrix=None):
        self.m_star = np.asarray(m_star, dtype=float).reshape(2)
        self.cov = np.eye(2) if cov is None else np.asarray(cov, dtype=float).reshape(2, 2)
        self.matrix = np.eye(2) if matrix is None else np.asarray(matrix, dtype=float).reshape(2, 2)
        if not np.allclose(self.matrix, self.matrix.T):
            raise ValueError("loss matrix must be symmetric")
        if np.any(np.linalg.eigvalsh(self.matrix) <= 0):
            raise ValueError("loss matrix must be positive definite")

    def sample(self, n, rng):
        return rng.multivariate_normal(self.m_star, self.cov, size=n)

    def losses(self, theta, xs):
        d = as_theta(theta, 2)[None, :] - _check_samples(xs, 2)
        return 0.5 * np.einsum("ni,ij,nj->n", d, self.matrix, d)

    def gradients(self, theta, xs):
        d = as_theta(theta, 2)[None, :] - _check_samples(xs, 2)
        return d @ self.matrix

    def mean_hessian(self, theta, xs):
        return self.matrix.copy()

    def population_gradient_covariance(self, theta):
        return self.matrix @ self.cov @ self.matrix

    def loss_grid(self, thetas, xs):
        xs = _check_samples(xs, 2)
        d = np.asarray(thetas)[:, None, :] - xs[None, :, :]
        return 0.5 * np.einsum("nmi,ij,nmj->n", d, self.matrix, d) / xs.shape[0]

    def mean_gradient_grid(self, thetas, xs):
        return (np.asarray(thetas) - np.mean(xs, axis=0)[None, :]) @ self.matrix

    def gradient_covariance_grid(self, thetas, xs):
        xs = _check_samples(xs, 2)
        c = np.cov(xs.T, bias=True)
        d = self.matrix @ c @ self.matrix
        return np.broadcast_to(d, (len(thetas), 2, 2)).copy()

    def chain_mean_gradient(self, thetas, batches):
        return (thetas - batches.mean(axis=1)) @ self.matrix

    def closed_form_minimizer(self, train, alpha):
        xbar = np.mean(_check_samples(train, 2), axis=0)
        return np.linalg.solve(self.matrix + alpha * np.eye(2), self.matrix @ xbar)

    def mean_train_set(self, n):
        if n % 4 != 0:
            raise ValueError("need n divisible by 4 to realize exact 2-d moments")
        ell = np.linalg.cholesky(self.cov)
        block = np.sqrt(2.0) * np.vstack([ell.T, -ell.T])
        return self.m_star + np.tile(block, (n // 4, 1))


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class LogisticRegression2D(LossModel):
    """Two-weight logistic regression on Gaussian features with a teacher labeler.

    Samples are (u1, u2, y) with u ~ N(0, I) and y ~ Bernoulli(sigmoid(u . theta_star)).
    The only family with an accuracy metric (thresholded prediction).
    """

    dim = 2
    sample_columns = 3
    name = "logistic_regression_2d"
    has_accuracy = True

    def __init__(self, theta_star=(1.0, -1.0)):
        self.theta_star = np.asarray(theta_star, dtype=float).reshape(2)

    def sample(self, n, rng):
        u = rng.standard_normal((n, 2))
        y = (rng.random(n) < _sigmoid(u @ self.theta_star)).astype(float)
        return np.column_stack([u, y])

    def losses(self, theta, xs):
        th = as_theta(theta, 2)
        xs = _check_samples(xs, 3)
        z = xs[:, :2] @ th
        y = xs[:, 2]
        # -log likelihood written with logaddexp for stability; always >= 0
        return np.logaddexp(0.0, z) - y * z

    def gradients(self, theta, xs):
        th = as_theta(theta, 2)
        xs = _check_samples(xs, 3)
        resid = _sigmoid(xs[:, :2] @ th) - xs[:, 2]
        return resid[:, None] * xs[:, :2]

    def mean_hessian(self, theta, xs):
        th = as_theta(theta, 2)
        xs = _check_samples(xs, 3)
        p = _sigmoid(xs[:, :2] @ th)
        w = p * (1.0 - p)
        return (xs[:, :2] * w[:, None]).T @ xs[:, :2] / xs.shape[0]

    def accuracy(self, theta, xs):
        th = as_theta(theta, 2)
        xs = _check_samples(xs, 3)
        predicted = (xs[:, :2] @ th > 0).astype(float)
        return float(np.mean(predicted == xs[:, 2]))

    def chain_mean_gradient(self, thetas, batches):
        z = np.einsum("cbi,ci->cb", batches[:, :, :2], thetas)
        resid = _sigmoid(z) - batches[:, :, 2]
        return np.einsum("cb,cbi->ci", resid, batches[:, :, :2]) / batches.shape[1]


def _unit_variance_pattern(n: int) -> np.ndarray:
    """n values with exact zero mean and exact unit biased variance."""
    if n < 2:
        raise ValueError("need at least two points")
    if n % 2 == 0:
        return np.tile([1.0, -1.0], n // 2)
    c = np.sqrt(n / (n - 1.0))
    return np.concatenate([np.tile([c, -c], n // 2), [0.0]])


def population_loss_and_variance(model: LossModel, theta, n_mc: int = 100_000, seed: int = 0):
    """Population mean and variance of the per-example loss at theta.

    Closed form when the family provides one, otherwise an unbiased Monte
    Carlo estimate over n_mc fresh draws.
    """
    closed = model.population_stats(theta)
    if closed is not None:
        return closed
    return model.mc_population_stats(theta, n_mc, seed)


FAMILIES = {
    GaussianMean.name: GaussianMean,
    NonlinearRegression1D.name: NonlinearRegression1D,
    Quadratic2D.name: Quadratic2D,
    LogisticRegression2D.name: LogisticRegression2D,
}


def model_from_config(cfg: dict) -> LossModel:
    """Instantiate a family from a config mapping: {"family": name, **kwargs}."""
    cfg = dict(cfg)
    family = cfg.pop("family")
    if family not in FAMILIES:
        raise ValueError(f"unknown model family {family!r}; choices: {sorted(FAMILIES)}")
    return FAMILIES[family](**cfg)
