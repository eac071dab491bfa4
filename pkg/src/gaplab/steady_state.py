"""Boltzmann steady-state densities on parameter grids.

Builds the two line-integral potentials that define the stationary density of
noisy gradient dynamics (drift potential v preconditioned by the gradient
covariance, plus the divergence potential a), normalizes exp(-g) on rectangular
quadrature grids, and verifies stationarity through the probability current.

Two evaluation routes exist on purpose: point callables use adaptive
quadrature, while grid builders use dense cumulative trapezoids; tests pin the
two against each other and against closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize
from scipy.special import logsumexp

from .models import LossModel, as_theta


class BoundaryMassError(Exception):
    """The density has non-negligible mass at the grid boundary."""


class PathDependenceError(Exception):
    """The potential integrand is not a gradient field: axis-ordered paths disagree."""


PATH_TOL = 1e-5


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

def trapezoid_weights(axis: np.ndarray) -> np.ndarray:
    """Trapezoid quadrature weights for a sorted 1-d node list."""
    axis = np.asarray(axis, dtype=float)
    if axis.ndim != 1 or len(axis) < 2:
        raise ValueError("axis must be a 1-d array with at least two nodes")
    w = np.empty_like(axis)
    w[0] = 0.5 * (axis[1] - axis[0])
    w[-1] = 0.5 * (axis[-1] - axis[-2])
    w[1:-1] = 0.5 * (axis[2:] - axis[:-2])
    return w


def uniform_axis(lo: float, hi: float, n_nodes: int) -> np.ndarray:
    if not hi > lo:
        raise ValueError("need hi > lo")
    return np.linspace(lo, hi, n_nodes)


@dataclass
class DensityGrid:
    """Normalized density values on a rectangular grid with quadrature weights."""

    axes: tuple
    values: np.ndarray
    weights: np.ndarray
    logZ: float = 0.0

    def __post_init__(self):
        self.axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        shape = tuple(len(a) for a in self.axes)
        if self.values.shape != shape or self.weights.shape != shape:
            raise ValueError("values/weights shape must match the axes")
        if np.any(~np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("density values must be finite and nonnegative")
        total = float(np.sum(self.values * self.weights))
        if abs(total - 1.0) > 1e-8:
            raise ValueError(f"density not normalized: integral = {total!r}")

    @property
    def dim(self) -> int:
        return len(self.axes)

    def nodes(self) -> np.ndarray:
        """Flattened node coordinates, shape (n_nodes,) in 1-d or (n_nodes, dim)."""
        if self.dim == 1:
            return self.axes[0]
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def expectation(self, f_values: np.ndarray) -> float:
        f = np.asarray(f_values, dtype=float).reshape(self.values.shape)
        return float(np.sum(f * self.values * self.weights))

    def mean(self) -> np.ndarray:
        nodes = self.nodes()
        if self.dim == 1:
            return np.array([self.expectation(nodes)])
        return np.array([self.expectation(nodes[:, i]) for i in range(self.dim)])

    def covariance(self) -> np.ndarray:
        nodes = np.atleast_2d(self.nodes().reshape(-1, self.dim))
        mu = self.mean()
        d = nodes - mu
        cov = np.empty((self.dim, self.dim))
        for i in range(self.dim):
            for j in range(self.dim):
                cov[i, j] = self.expectation(d[:, i] * d[:, j])
        return cov

    def cdf_1d(self) -> np.ndarray:
        """Cumulative distribution at the grid nodes (1-d grids only)."""
        if self.dim != 1:
            raise ValueError("cdf_1d needs a 1-d grid")
        ax, v = self.axes[0], self.values
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(ax))])
        return cdf / cdf[-1]

    def to_csv(self, path) -> None:
        nodes = self.nodes().reshape(-1, self.dim)
        header = ",".join(f"theta_{i}" for i in range(self.dim)) + ",density,weight"
        table = np.column_stack([nodes, self.values.ravel(), self.weights.ravel()])
        np.savetxt(path, table, delimiter=",", header=header, comments="")


def density_from_log_values(axes, log_values: np.ndarray, boundary_tol: float = 1e-12,
                            check_boundary: bool = True) -> DensityGrid:
    """Normalize exp(log_values) on the grid; logZ is computed with log-sum-exp."""
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    wlist = [trapezoid_weights(a) for a in axes]
    weights = wlist[0] if len(axes) == 1 else np.multiply.outer(*wlist)
    log_values = np.asarray(log_values, dtype=float).reshape(weights.shape)
    if check_boundary:
        interior_max = np.max(log_values)
        boundary_max = _boundary_max(log_values)
        if boundary_max > interior_max + np.log(boundary_tol):
            raise BoundaryMassError(
                f"boundary density is {np.exp(boundary_max - interior_max):.3e} of the peak; "
                "enlarge the grid")
    logZ = float(logsumexp(log_values + np.log(weights)))
    values = np.exp(log_values - logZ)
    # one exact renormalization pass to absorb quadrature-of-exponent roundoff
    values = values / np.sum(values * weights)
    return DensityGrid(axes=axes, values=values, weights=weights, logZ=logZ)


def _boundary_max(arr: np.ndarray) -> float:
    if arr.ndim == 1:
        return float(max(arr[0], arr[-1]))
    edges = [arr[0, :], arr[-1, :], arr[:, 0], arr[:, -1]]
    return float(max(np.max(e) for e in edges))


# ---------------------------------------------------------------------------
# effective potentials
# ---------------------------------------------------------------------------

def train_minimizer(model: LossModel, train: np.ndarray, alpha: float = 0.0) -> np.ndarray:
    """Minimizer of the regularized train-set loss (bisection in 1-d, Newton in 2-d)."""
    closed = model.closed_form_minimizer(train, alpha)
    if closed is not None:
        return np.asarray(closed, dtype=float)
    if model.dim == 1:
        def h(t):
            return float(model.mean_gradient(np.array([t]), train)[0]) + alpha * t

        lo, hi = -1.0, 1.0
        for _ in range(80):
            if h(lo) < 0 < h(hi):
                break
            lo, hi = 2 * lo, 2 * hi
        else:
            raise RuntimeError("could not bracket the train minimizer")
        return np.array([optimize.brentq(h, lo, hi, xtol=1e-13)])

    theta = np.zeros(model.dim)
    for _ in range(100):
        g = model.mean_gradient(theta, train) + alpha * theta
        hess = model.mean_hessian(theta, train) + alpha * np.eye(model.dim)
        step = np.linalg.solve(hess, g)
        theta = theta - step
        if np.max(np.abs(step)) < 1e-13:
            return theta
    raise RuntimeError("Newton search for the train minimizer did not converge")


def _precond_field(model, train, alpha, beta):
    """(D + beta^2 I)^{-1} (grad U + alpha theta) as a function of theta."""
    def field(theta):
        theta = as_theta(theta, model.dim)
        d = model.gradient_covariance(theta, train) + beta ** 2 * np.eye(model.dim)
        rhs = model.mean_gradient(theta, train) + alpha * theta
        return np.linalg.solve(d, rhs)
    return field


def _cov_divergence(model, train, theta, step=1e-5):
    """Divergence of the gradient covariance, (div D)_i = sum_j d_j D_ij, by central FD."""
    theta = as_theta(theta, model.dim)
    div = np.zeros(model.dim)
    for j in range(model.dim):
        e = np.zeros(model.dim)
        e[j] = step
        dp = model.gradient_covariance(theta + e, train)
        dm = model.gradient_covariance(theta - e, train)
        div += (dp[:, j] - dm[:, j]) / (2 * step)
    return div


def _divergence_field(model, train, beta):
    def field(theta):
        theta = as_theta(theta, model.dim)
        d = model.gradient_covariance(theta, train) + beta ** 2 * np.eye(model.dim)
        return np.linalg.solve(d, _cov_divergence(model, train, theta))
    return field


def _line_integral_2d(field: Callable, start: np.ndarray, end: np.ndarray, order: str) -> float:
    """Integrate a vector field along an axis-aligned two-leg path."""
    sx, sy = start
    ex, ey = end
    if order == "xy":
        leg1 = integrate.quad(lambda u: field(np.array([u, sy]))[0], sx, ex, epsabs=1e-10)[0]
        leg2 = integrate.quad(lambda u: field(np.array([ex, u]))[1], sy, ey, epsabs=1e-10)[0]
    else:
        leg1 = integrate.quad(lambda u: field(np.array([sx, u]))[1], sy, ey, epsabs=1e-10)[0]
        leg2 = integrate.quad(lambda u: field(np.array([u, ey]))[0], sx, ex, epsabs=1e-10)[0]
    return leg1 + leg2


def _potential_from_field(model, field, base_point) -> Callable:
    base = np.atleast_1d(np.asarray(base_point, dtype=float))

    if model.dim == 1:
        def v1(theta):
            t = float(np.atleast_1d(theta)[0])
            return integrate.quad(lambda u: field(np.array([u]))[0], base[0], t,
                                  epsabs=1e-8, limit=200)[0]
        return v1

    def v2(theta):
        t = as_theta(theta, 2)
        first = _line_integral_2d(field, base, t, "xy")
        second = _line_integral_2d(field, base, t, "yx")
        if abs(first - second) > PATH_TOL:
            raise PathDependenceError(
                f"axis-ordered path integrals differ by {abs(first - second):.3e} at {t}")
        return first
    return v2


def effective_potential_v(model: LossModel, train: np.ndarray, alpha: float, beta: float,
                          base_point) -> Callable:
    """Drift potential: line integral of (D+beta^2 I)^{-1}(grad U + alpha theta)."""
    if model.dim not in (1, 2):
        raise ValueError("potentials are only defined for 1- or 2-parameter families")
    return _potential_from_field(model, _precond_field(model, train, alpha, beta), base_point)


def effective_potential_a(model: LossModel, train: np.ndarray, alpha: float, beta: float,
                          base_point) -> Callable:
    """Divergence potential; reduces to ln(D + beta^2) - ln(D(base) + beta^2) in 1-d."""
    if model.dim == 1:
        base = float(np.atleast_1d(base_point)[0])
        d_base = float(model.gradient_covariance(np.array([base]), train)[0, 0])

        def a1(theta):
            t = np.array([float(np.atleast_1d(theta)[0])])
            d = float(model.gradient_covariance(t, train)[0, 0])
            return np.log(d + beta ** 2) - np.log(d_base + beta ** 2)
        return a1
    if model.dim == 2:
        return _potential_from_field(model, _divergence_field(model, train, beta), base_point)
    raise ValueError("potentials are only defined for 1- or 2-parameter families")


@dataclass
class EffectivePotential:
    """The stationary-density exponent g = (2/T) v + a and its two pieces."""

    v: Callable
    a: Callable
    T: float
    dataset_id: Optional[int] = None

    def g(self, theta) -> float:
        return (2.0 / self.T) * self.v(theta) + self.a(theta)


def make_effective_potential(model: LossModel, train: np.ndarray, T: float,
                             alpha: float = 0.0, beta: float = 0.0,
                             base_point=None, dataset_id=None) -> EffectivePotential:
    if T <= 0:
        raise ValueError("temperature must be positive")
    if base_point is None:
        base_point = train_minimizer(model, train, alpha)
    v = effective_potential_v(model, train, alpha, beta, base_point)
    a = effective_potential_a(model, train, alpha, beta, base_point)
    return EffectivePotential(v=v, a=a, T=T, dataset_id=dataset_id)


# ---------------------------------------------------------------------------
# fast grid evaluation of the potentials
# ---------------------------------------------------------------------------

def potential_values_1d(model: LossModel, train: np.ndarray, axis: np.ndarray,
                        alpha: float, beta: float, base_point, refine: int = 4,
                        cov_grid_fn=None):
    """(v, a) evaluated on every node of a 1-d axis via dense cumulative trapezoids.

    cov_grid_fn optionally replaces the sample gradient covariance (e.g. with the
    population one) wherever the preconditioner is evaluated.
    """
    axis = np.asarray(axis, dtype=float)
    base = float(np.atleast_1d(base_point)[0])
    if cov_grid_fn is None:
        cov_grid_fn = lambda t: model.gradient_covariance_grid(t, train)  # noqa: E731
    fine = np.linspace(axis[0], axis[-1], refine * (len(axis) - 1) + 1)
    d_fine = cov_grid_fn(fine) + beta ** 2
    integrand = (model.mean_gradient_grid(fine, train) + alpha * fine) / d_fine
    cum = integrate.cumulative_simpson(integrand, x=fine, initial=0.0)
    if axis[0] <= base <= axis[-1]:
        shift = float(np.interp(base, fine, cum))
    else:  # base point off the grid: shift via one adaptive quadrature
        shift = integrate.quad(
            lambda u: (float(model.mean_gradient(np.array([u]), train)[0]) + alpha * u)
            / (float(cov_grid_fn(np.array([u]))[0]) + beta ** 2),
            axis[0], base, epsabs=1e-10, limit=200)[0]
    v_vals = cum[::refine] - shift

    d_axis = cov_grid_fn(axis) + beta ** 2
    d_base = float(cov_grid_fn(np.array([base]))[0]) + beta ** 2
    a_vals = np.log(d_axis) - np.log(d_base)
    return v_vals, a_vals


def potential_values_2d(model: LossModel, train: np.ndarray, axes,
                        alpha: float, beta: float, base_point):
    """(v, a) on a 2-d grid; raises PathDependenceError if the two axis orders disagree."""
    ax, ay = (np.asarray(a, dtype=float) for a in axes)
    base = as_theta(base_point, 2)
    nx, ny = len(ax), len(ay)
    mesh = np.meshgrid(ax, ay, indexing="ij")
    nodes = np.column_stack([m.ravel() for m in mesh])

    grads = model.mean_gradient_grid(nodes, train) + alpha * nodes
    covs = model.gradient_covariance_grid(nodes, train) + beta ** 2 * np.eye(2)
    field = np.linalg.solve(covs, grads[..., None])[..., 0].reshape(nx, ny, 2)

    v_xy = _two_leg_cumulative(field, ax, ay, base, order="xy")
    v_yx = _two_leg_cumulative(field, ax, ay, base, order="yx")
    spread = float(np.max(np.abs(v_xy - v_yx)))
    if spread > PATH_TOL:
        raise PathDependenceError(
            f"axis-ordered grid integrals differ by up to {spread:.3e}")

    div = _cov_divergence_grid(model, train, ax, ay)
    afield = np.linalg.solve(covs, div.reshape(-1, 2)[..., None])[..., 0].reshape(nx, ny, 2)
    a_xy = _two_leg_cumulative(afield, ax, ay, base, order="xy")
    a_yx = _two_leg_cumulative(afield, ax, ay, base, order="yx")
    if float(np.max(np.abs(a_xy - a_yx))) > PATH_TOL:
        raise PathDependenceError("divergence potential is path dependent on this grid")
    return v_xy, a_xy


def _interp_slice(field_component: np.ndarray, coords: np.ndarray, value: float,
                  axis: int) -> np.ndarray:
    """Linearly interpolate a 2-d array along one axis at a scalar coordinate."""
    k = int(np.clip(np.searchsorted(coords, value), 1, len(coords) - 1))
    w = (value - coords[k - 1]) / (coords[k] - coords[k - 1])
    lo = np.take(field_component, k - 1, axis=axis)
    hi = np.take(field_component, k, axis=axis)
    return (1 - w) * lo + w * hi


def _two_leg_cumulative(field: np.ndarray, ax, ay, base, order: str) -> np.ndarray:
    """Cumulative axis-aligned line integrals from an (interpolated) base point."""
    def cum(values, coords, start):
        out = np.concatenate([[0.0], integrate.cumulative_trapezoid(values, coords)])
        return out - np.interp(start, coords, out)

    bx, by = base
    if order == "xy":
        # along x at y = by, then along y at each fixed x
        leg1 = cum(_interp_slice(field[:, :, 0], ay, by, axis=1), ax, bx)
        leg2 = np.vstack([cum(field[i, :, 1], ay, by) for i in range(field.shape[0])])
        return leg1[:, None] + leg2
    # along y at x = bx, then along x at each fixed y
    leg1 = cum(_interp_slice(field[:, :, 1], ax, bx, axis=0), ay, by)
    leg2 = np.column_stack([cum(field[:, j, 0], ax, bx) for j in range(field.shape[1])])
    return leg1[None, :] + leg2


def _cov_divergence_grid(model, train, ax, ay) -> np.ndarray:
    nx, ny = len(ax), len(ay)
    mesh = np.meshgrid(ax, ay, indexing="ij")
    nodes = np.column_stack([m.ravel() for m in mesh])
    covs = model.gradient_covariance_grid(nodes, train).reshape(nx, ny, 2, 2)
    div = np.zeros((nx, ny, 2))
    for i in range(2):
        div[:, :, i] = (np.gradient(covs[:, :, i, 0], ax, axis=0)
                        + np.gradient(covs[:, :, i, 1], ay, axis=1))
    return div


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------

def boltzmann_density(potential: EffectivePotential, axes, g_values=None,
                      boundary_tol: float = 1e-12) -> DensityGrid:
    """Normalized exp(-g) on the grid; g_values short-circuits the point callable."""
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    if g_values is None:
        if len(axes) == 1:
            g_values = np.array([potential.g(np.array([t])) for t in axes[0]])
        else:
            mesh = np.meshgrid(*axes, indexing="ij")
            nodes = np.column_stack([m.ravel() for m in mesh])
            g_values = np.array([potential.g(t) for t in nodes]).reshape(mesh[0].shape)
    g_values = np.asarray(g_values, dtype=float)
    if np.any(~np.isfinite(g_values)):
        raise ValueError("potential is not finite on every grid node")
    return density_from_log_values(axes, -g_values, boundary_tol=boundary_tol)


def grid_boltzmann_density(model: LossModel, train: np.ndarray, T: float, axes,
                           alpha: float = 0.0, beta: float = 0.0, base_point=None,
                           boundary_tol: float = 1e-12):
    """Fast path: potentials on the grid, then the normalized density.

    Returns (density, v_values, a_values, g_values).
    """
    if base_point is None:
        base_point = train_minimizer(model, train, alpha)
    if model.dim == 1:
        v_vals, a_vals = potential_values_1d(model, train, axes[0], alpha, beta, base_point)
    else:
        v_vals, a_vals = potential_values_2d(model, train, axes, alpha, beta, base_point)
    g_vals = (2.0 / T) * v_vals + a_vals
    dens = density_from_log_values(tuple(axes), -g_vals, boundary_tol=boundary_tol)
    return dens, v_vals, a_vals, g_vals


def empirical_density(theta_samples: np.ndarray, axes, min_samples: int = 1000):
    """Histogram of samples on the grid, normalized with the grid's quadrature weights.

    Returns (DensityGrid, leakage_fraction); samples outside the grid count as leakage.
    """
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    samples = np.asarray(theta_samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.shape[0] < min_samples:
        raise ValueError(f"need at least {min_samples} samples, got {samples.shape[0]}")
    if samples.shape[1] != len(axes):
        raise ValueError("sample dimension does not match the grid")

    edge_list = []
    for ax in axes:
        mids = 0.5 * (ax[1:] + ax[:-1])
        edge_list.append(np.concatenate([[ax[0]], mids, [ax[-1]]]))
    counts, _ = np.histogramdd(samples, bins=edge_list)
    kept = float(counts.sum())
    leakage = 1.0 - kept / samples.shape[0]
    if kept == 0:
        raise ValueError("no samples fall inside the grid")

    wlist = [trapezoid_weights(a) for a in axes]
    weights = wlist[0] if len(axes) == 1 else np.multiply.outer(*wlist)
    values = counts.reshape(weights.shape) / (kept * weights)
    dens = DensityGrid(axes=axes, values=values, weights=weights, logZ=float("nan"))
    return dens, leakage


def ks_statistic(samples: np.ndarray, density: DensityGrid) -> float:
    """Kolmogorov-Smirnov distance between 1-d samples and a grid density."""
    if density.dim != 1:
        raise ValueError("KS comparison is 1-d only")
    xs = np.sort(np.asarray(samples, dtype=float).ravel())
    cdf = np.interp(xs, density.axes[0], density.cdf_1d(), left=0.0, right=1.0)
    n = len(xs)
    upper = np.arange(1, n + 1) / n - cdf
    lower = cdf - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


def density_tv_distance(d1: DensityGrid, d2: DensityGrid) -> float:
    """Total-variation distance between two densities on the same grid."""
    if any(len(a) != len(b) or not np.allclose(a, b) for a, b in zip(d1.axes, d2.axes)):
        raise ValueError("densities must share axes")
    return 0.5 * float(np.sum(np.abs(d1.values - d2.values) * d1.weights))


# ---------------------------------------------------------------------------
# probability current
# ---------------------------------------------------------------------------

def probability_current(density: DensityGrid, model: LossModel, train: np.ndarray,
                        T: float, alpha: float = 0.0, beta: float = 0.0):
    """Stationary-flow residual J = f rho - (1/2) d_j {C_ij rho} in rescaled time.

    Central differences on interior nodes; returns (field, max interior norm).
    Edge entries of the field are NaN.
    """
    if density.dim == 1:
        ax = density.axes[0]
        rho = density.values
        drift = -(model.mean_gradient_grid(ax, train) + alpha * ax)
        cov = T * (model.gradient_covariance_grid(ax, train) + beta ** 2)
        prod = cov * rho
        j = np.full_like(rho, np.nan)
        j[1:-1] = drift[1:-1] * rho[1:-1] - 0.5 * (prod[2:] - prod[:-2]) / (ax[2:] - ax[:-2])
        return j, float(np.max(np.abs(j[1:-1])))

    ax, ay = density.axes
    nx, ny = len(ax), len(ay)
    mesh = np.meshgrid(ax, ay, indexing="ij")
    nodes = np.column_stack([m.ravel() for m in mesh])
    rho = density.values
    drift = -(model.mean_gradient_grid(nodes, train) + alpha * nodes).reshape(nx, ny, 2)
    cov = T * (model.gradient_covariance_grid(nodes, train)
               + beta ** 2 * np.eye(2)).reshape(nx, ny, 2, 2)
    j = np.full((nx, ny, 2), np.nan)
    for i in range(2):
        flux = drift[:, :, i] * rho
        for k, axis_coords, axis_id in ((0, ax, 0), (1, ay, 1)):
            prod = cov[:, :, i, k] * rho
            flux = flux - 0.5 * np.gradient(prod, axis_coords, axis=axis_id)
        j[:, :, i] = flux
    interior = j[1:-1, 1:-1, :]
    return j, float(np.max(np.abs(interior)))


# ---------------------------------------------------------------------------
# automatic grid sizing
# ---------------------------------------------------------------------------

def axes_from_samples(samples: np.ndarray, n_nodes: int = 513, n_sd: float = 8.0):
    """Uniform axes covering mean +/- n_sd standard deviations of pilot samples."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    out = []
    for k in range(samples.shape[1]):
        mu, sd = samples[:, k].mean(), samples[:, k].std()
        out.append(uniform_axis(mu - n_sd * sd, mu + n_sd * sd, n_nodes))
    return tuple(out)


def axis_for_train_sets(model: LossModel, trains, T: float, alpha: float = 0.0,
                        beta: float = 0.0, n_nodes: int = 513, n_sd: float = 8.0) -> np.ndarray:
    """Shared 1-d axis covering every train set's Laplace ball around its minimizer."""
    lo, hi = np.inf, -np.inf
    for train in trains:
        tm = train_minimizer(model, train, alpha)
        hess = float(model.mean_hessian(tm, train)[0, 0]) + alpha
        d = float(model.gradient_covariance(tm, train)[0, 0]) + beta ** 2
        curv = (2.0 / T) * hess / d
        sd = 1.0 / np.sqrt(max(curv, 1e-12))
        lo = min(lo, float(tm[0]) - n_sd * sd)
        hi = max(hi, float(tm[0]) + n_sd * sd)
    return uniform_axis(lo, hi, n_nodes)
