"""Approximate gap and test-performance formulas, with exact machinery to grade them.

Everything here consumes the pointwise-over-the-grid statistics of an
AveragingEnsemble: means, variances and covariances across data-set
realizations of the two potentials, the effective potential, and the train
loss. The log-normal route approximates the data-averaged density and the gap;
the delta-method route approximates covariances by second-order Taylor
expansion; curvature expansions approximate test/train performance around
local minima.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .averaging import AveragingEnsemble, Estimate
from .functions import SmoothFunction
from .models import LossModel
from .steady_state import DensityGrid, axis_for_train_sets, density_from_log_values, \
    grid_boltzmann_density

_TINY = 1e-300


@dataclass
class PotentialStats:
    """Per-node ensemble statistics of (v, a, g, train loss) plus population loss."""

    axes: tuple
    weights: np.ndarray
    rho_bar: np.ndarray
    T: float
    n_train: int
    v_bar: np.ndarray
    a_bar: np.ndarray
    g_bar: np.ndarray
    U_bar: np.ndarray            # train loss averaged over data sets
    U_pop: np.ndarray            # population loss on the grid
    sigma_ell2: np.ndarray       # population per-example loss variance
    sigma_v2: np.ndarray
    sigma_a2: np.ndarray
    sigma_g2: np.ndarray
    sigma_u2: np.ndarray
    sigma_va: np.ndarray
    sigma_vu: np.ndarray
    sigma_au: np.ndarray
    sigma_gu: np.ndarray

    def bracket(self, values: np.ndarray) -> float:
        """Double-bracket average: integrate against the data-averaged density."""
        return float(np.sum(self.rho_bar * np.asarray(values) * self.weights))

    def rho_bar_cov(self, f: np.ndarray, h: np.ndarray) -> float:
        return self.bracket(np.asarray(f) * np.asarray(h)) - self.bracket(f) * self.bracket(h)


def _cov_rows(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    xc = x - x.mean(axis=0)
    yc = y - y.mean(axis=0)
    return (xc * yc).sum(axis=0) / (x.shape[0] - 1)


def compute_potential_stats(ens: AveragingEnsemble, n_mc: int = 200_000,
                            seed: int = 0) -> PotentialStats:
    if ens.v is None or ens.a is None or ens.train_loss is None:
        raise ValueError("ensemble lacks potential or set-loss matrices")
    nodes = ens.nodes()
    u_pop, ell_var = ens.model.population_grid(nodes, n_mc=n_mc, seed=seed)
    stats = PotentialStats(
        axes=ens.axes, weights=ens.weights, rho_bar=ens.rho_bar_values,
        T=ens.T, n_train=ens.datasets[0].n_train,
        v_bar=ens.v.mean(axis=0), a_bar=ens.a.mean(axis=0), g_bar=ens.g.mean(axis=0),
        U_bar=ens.train_loss.mean(axis=0), U_pop=u_pop, sigma_ell2=ell_var,
        sigma_v2=ens.v.var(axis=0, ddof=1), sigma_a2=ens.a.var(axis=0, ddof=1),
        sigma_g2=ens.g.var(axis=0, ddof=1), sigma_u2=ens.train_loss.var(axis=0, ddof=1),
        sigma_va=_cov_rows(ens.v, ens.a), sigma_vu=_cov_rows(ens.v, ens.train_loss),
        sigma_au=_cov_rows(ens.a, ens.train_loss), sigma_gu=_cov_rows(ens.g, ens.train_loss))

    # definitional consistency of the variance/covariance decompositions; the
    # absolute floor covers pure float roundoff of the sample moments
    t = ens.T
    g_eps = 1e-12 * (1.0 + float(np.max(np.abs(ens.g))))
    u_eps = 1e-12 * (1.0 + float(np.max(np.abs(ens.train_loss))))
    g_var = (4.0 / t ** 2) * stats.sigma_v2 + stats.sigma_a2 + (4.0 / t) * stats.sigma_va
    tol = 1e-8 * np.abs(stats.sigma_g2) + g_eps ** 2
    if np.any(np.abs(g_var - stats.sigma_g2) > tol):
        raise AssertionError("variance decomposition of the effective potential broke")
    gu = (2.0 / t) * stats.sigma_vu + stats.sigma_au
    tol_gu = 1e-8 * np.abs(stats.sigma_gu) + g_eps * u_eps
    if np.any(np.abs(gu - stats.sigma_gu) > tol_gu):
        raise AssertionError("covariance decomposition of the effective potential broke")
    return stats


# ---------------------------------------------------------------------------
# log-normal approximations
# ---------------------------------------------------------------------------

def lognormal_rho_bar(stats: PotentialStats, boundary_tol: float = 1e-12,
                      T: Optional[float] = None) -> DensityGrid:
    """Data-averaged density approximated as exp(-g_bar + sigma_g^2 / 2), normalized.

    The variance term rewards parameter regions where the potential fluctuates
    across data sets; if it overwhelms the mean potential the exponent stops
    being confining and the boundary-mass check raises.

    Passing T rebuilds the exponent at another temperature from the stored
    potential statistics (v, a and their moments carry no T dependence).
    """
    if T is None:
        exponent = -stats.g_bar + 0.5 * stats.sigma_g2
    else:
        g_bar = (2.0 / T) * stats.v_bar + stats.a_bar
        sigma_g2 = (4.0 / T ** 2) * stats.sigma_v2 + stats.sigma_a2 \
            + (4.0 / T) * stats.sigma_va
        exponent = -g_bar + 0.5 * sigma_g2
    if not np.all(np.isfinite(exponent)):
        raise ValueError("log-normal exponent is not finite on the grid")
    return density_from_log_values(stats.axes, exponent, boundary_tol=boundary_tol)


@dataclass
class LogNormalGap:
    value: float
    regime: str                      # interpolation / small_exponent / intermediate
    mean_exponent: float
    small_exponent_value: float      # (2/T)<<s_vu>> + <<s_au>> + (1/8)<<s_u^4/U^3>>
    interpolation_value: float       # <<U_bar>>


def lognormal_gap(stats: PotentialStats) -> LogNormalGap:
    """Gap approximation <<U (1 - exp(-sigma_gu/U - sigma_u^4/(8 U^4)))>>.

    Where the data-averaged train loss vanishes the exponent is +infinity and
    the factor saturates at 1 (interpolation limit), so the integrand is U
    itself there. Both case-split values are reported alongside; no
    interpolation between regimes is attempted.
    """
    u = stats.U_bar
    safe_u = np.where(u > _TINY, u, 1.0)
    with np.errstate(over="ignore"):
        exponent = np.where(
            u > _TINY,
            stats.sigma_gu / safe_u + stats.sigma_u2 ** 2 / (8.0 * safe_u ** 4),
            np.inf)
        factor = -np.expm1(-np.clip(exponent, None, 700.0))
    value = stats.bracket(u * factor)

    small_terms = (2.0 / stats.T) * stats.sigma_vu + stats.sigma_au \
        + np.where(u > _TINY, stats.sigma_u2 ** 2 / (8.0 * safe_u ** 3), 0.0)
    small_value = stats.bracket(small_terms)
    interp_value = stats.bracket(u)

    finite = np.isfinite(exponent)
    mass = float(np.sum((stats.rho_bar * stats.weights)[finite]))
    mean_exp = float(np.sum((stats.rho_bar * stats.weights * exponent)[finite]) / mass) \
        if mass > 0 else float("inf")
    if mean_exp > 3.0:
        regime = "interpolation"
    elif mean_exp < 1.0 / 3.0:
        regime = "small_exponent"
    else:
        regime = "intermediate"
    return LogNormalGap(value=float(value), regime=regime, mean_exponent=mean_exp,
                        small_exponent_value=float(small_value),
                        interpolation_value=float(interp_value))


@dataclass
class GapUpperBounds:
    generic: float           # (1/sqrt(n)) << sigma_ell sqrt(exp(sigma_g^2) - 1) >>
    sgd_large_sigma: float   # (1/sqrt(n)) << sigma_ell exp(2 sigma_v^2/T^2 + sigma_a^2/2) >>
    sgd_small_sigma: float   # (1/sqrt(n)) << sigma_ell sqrt(4 sigma_v^2/T^2 + sigma_a^2) >>
    mean_sigma_g2: float     # validity indicator for the case split
    mass_sigma_g2_above_1: float


def lognormal_gap_upper_bounds(stats: PotentialStats,
                               n_train: Optional[int] = None) -> GapUpperBounds:
    n = stats.n_train if n_train is None else n_train
    sigma_ell = np.sqrt(np.clip(stats.sigma_ell2, 0.0, None))
    with np.errstate(over="ignore"):
        generic = stats.bracket(sigma_ell * np.sqrt(np.expm1(np.clip(stats.sigma_g2, None, 700.0))))
        large = stats.bracket(sigma_ell * np.exp(
            np.clip((2.0 / stats.T ** 2) * stats.sigma_v2 + 0.5 * stats.sigma_a2, None, 700.0)))
    small = stats.bracket(sigma_ell * np.sqrt(
        (4.0 / stats.T ** 2) * stats.sigma_v2 + stats.sigma_a2))
    mean_s2 = stats.bracket(stats.sigma_g2)
    mass_above = float(np.sum((stats.rho_bar * stats.weights)[stats.sigma_g2 > 1.0]))
    rn = np.sqrt(n)
    return GapUpperBounds(generic=float(generic / rn), sgd_large_sigma=float(large / rn),
                          sgd_small_sigma=float(small / rn), mean_sigma_g2=float(mean_s2),
                          mass_sigma_g2_above_1=mass_above)


# ---------------------------------------------------------------------------
# delta method
# ---------------------------------------------------------------------------

def delta_method_cov(f_spec: SmoothFunction, h_spec: SmoothFunction,
                     mu, sigma) -> float:
    """Second-order delta-method covariance of f and h at mean mu, covariance sigma."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    sig = np.atleast_2d(np.asarray(sigma, dtype=float))
    evals = np.linalg.eigvalsh(0.5 * (sig + sig.T))
    if np.min(evals) < -1e-12 * max(1.0, float(np.max(np.abs(evals)))):
        raise ValueError("covariance matrix is not PSD")
    gf, gh = f_spec.gradient(mu), h_spec.gradient(mu)
    hf, hh = f_spec.hessian(mu), h_spec.hessian(mu)
    first = 0.5 * float(np.trace(sig @ (np.outer(gf, gh) + np.outer(gh, gf))))
    second = 0.25 * float(np.trace(sig @ hf)) * float(np.trace(sig @ hh))
    return first - second


@dataclass
class DeltaMethodGap:
    value: float        # integral of sigma_gu against the mean-data-set density
    v_part: float       # (2/T) <sigma_vu>
    a_part: float       # <sigma_au>


def delta_method_gap(stats: PotentialStats, density_at_mean: DensityGrid) -> DeltaMethodGap:
    """Gap via the delta method: expected (g, train-loss) covariance under rho(.|mu)."""
    if density_at_mean.values.size != stats.rho_bar.size:
        raise ValueError("mean-data-set density must live on the ensemble grid")
    rho_mu = density_at_mean.values.ravel()
    w = stats.weights
    value = float(np.sum(rho_mu * stats.sigma_gu * w))
    v_part = float((2.0 / stats.T) * np.sum(rho_mu * stats.sigma_vu * w))
    a_part = float(np.sum(rho_mu * stats.sigma_au * w))
    return DeltaMethodGap(value=value, v_part=v_part, a_part=a_part)


def mean_dataset_density(model: LossModel, n_train: int, T: float, alpha: float = 0.0,
                         beta: float = 0.0, axes=None, n_nodes: int = 401) -> DensityGrid:
    """Boltzmann density for the data set whose statistics sit at their expectations."""
    train_mu = model.mean_train_set(n_train)
    if axes is None:
        axes = (axis_for_train_sets(model, [train_mu], T, alpha, beta, n_nodes=n_nodes),)
    dens, *_ = grid_boltzmann_density(model, train_mu, T, axes, alpha=alpha, beta=beta)
    return dens


# ---------------------------------------------------------------------------
# temperature dependence
# ---------------------------------------------------------------------------

@dataclass
class OptimalTemperatureResult:
    T_opt_formula: float
    T_opt_scan: float
    T_grid: np.ndarray
    scan_values: np.ndarray          # <<U_pop>> per temperature
    formula_values: np.ndarray       # 2 cov(U, sigma_v^2) / cov(U, v_bar - sigma_va)
    no_learning: bool


def optimal_temperature(model: LossModel, ens_builder: Callable[[float], AveragingEnsemble],
                        T_grid: Sequence[float]) -> OptimalTemperatureResult:
    """Fixed point of the covariance-ratio formula versus the scanned test-loss argmin.

    ens_builder(T) must return an ensemble at that temperature; the scan
    objective integrates the population loss against the data-averaged density.
    """
    T_grid = np.asarray(sorted(T_grid), dtype=float)
    scan = np.empty(len(T_grid))
    formula = np.full(len(T_grid), np.nan)
    any_learning = False
    for i, t in enumerate(T_grid):
        ens = ens_builder(float(t))
        stats = compute_potential_stats(ens)
        scan[i] = stats.bracket(stats.U_pop)
        num = 2.0 * stats.rho_bar_cov(stats.U_pop, stats.sigma_v2)
        den = stats.rho_bar_cov(stats.U_pop, stats.v_bar - stats.sigma_va)
        if den > 0:
            formula[i] = num / den
            any_learning = True
    # the fixed point is the grid temperature closest (in log) to its own formula
    valid = np.isfinite(formula) & (formula > 0)
    if valid.any():
        idx = np.where(valid)[0]
        t_formula = float(T_grid[idx[np.argmin(np.abs(np.log(formula[idx] / T_grid[idx])))]])
    else:
        t_formula = float("nan")
    return OptimalTemperatureResult(
        T_opt_formula=t_formula, T_opt_scan=float(T_grid[int(np.argmin(scan))]),
        T_grid=T_grid, scan_values=scan, formula_values=formula,
        no_learning=not any_learning)


def train_loss_T_derivative(ens: AveragingEnsemble) -> Estimate:
    """d/dT of the total-average train loss: (2/T^2) mean_j Cov_rho_j(v_j, U_j)."""
    if ens.v is None or ens.train_loss is None:
        raise ValueError("ensemble lacks potential or set-loss matrices")
    w = ens.weights
    mean_vu = ((ens.v * ens.train_loss) * ens.rho) @ w
    mean_v = (ens.v * ens.rho) @ w
    mean_u = (ens.train_loss * ens.rho) @ w
    c = mean_vu - mean_v * mean_u
    scale = 2.0 / ens.T ** 2
    return Estimate(float(scale * c.mean()),
                    float(scale * c.std(ddof=1) / np.sqrt(ens.m)))


# ---------------------------------------------------------------------------
# curvature expansions
# ---------------------------------------------------------------------------

@dataclass
class CurvatureComponent:
    weight: float
    mean: np.ndarray             # mixture component mean
    cov: np.ndarray              # mixture component covariance
    train_min: np.ndarray        # minimizer of the data-averaged train loss
    test_min: np.ndarray         # minimizer of the data-averaged test loss
    train_loss: float
    test_loss: float
    train_curv: np.ndarray       # Hessian at the train minimizer
    test_curv: np.ndarray        # Hessian at the test minimizer

    def __post_init__(self):
        for name in ("mean", "train_min", "test_min"):
            setattr(self, name, np.atleast_1d(np.asarray(getattr(self, name), float)))
        for name in ("cov", "train_curv", "test_curv"):
            setattr(self, name, np.atleast_2d(np.asarray(getattr(self, name), float)))
        if np.min(np.linalg.eigvalsh(self.cov)) < -1e-12:
            raise ValueError("component covariance must be PSD")

    @property
    def bias(self) -> np.ndarray:
        return self.mean - self.train_min

    @property
    def shift(self) -> np.ndarray:
        return self.train_min - self.test_min


@dataclass
class CurvatureSpec:
    components: list

    def __post_init__(self):
        w = np.array([c.weight for c in self.components])
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be nonnegative and sum to 1")


def curvature_expansion(spec: CurvatureSpec):
    """Second-order test/train performance of a Gaussian mixture around local minima.

    Returns (test_approx, train_approx): depths plus curvature-times-spread
    plus the quadratic penalty of bias (train) and bias+shift (test).
    """
    test = train = 0.0
    for c in spec.components:
        bs = c.bias + c.shift
        test += c.weight * (c.test_loss + 0.5 * float(np.trace(c.cov @ c.test_curv))
                            + 0.5 * float(bs @ c.test_curv @ bs))
        train += c.weight * (c.train_loss + 0.5 * float(np.trace(c.cov @ c.train_curv))
                             + 0.5 * float(c.bias @ c.train_curv @ c.bias))
    return test, train


def sampling_shift_curvature(h_spec: SmoothFunction, shift_cov) -> Callable:
    """Population loss under zero-mean sampling shift: h(theta) + tr(hess h . cov)/2."""
    cov = np.atleast_2d(np.asarray(shift_cov, dtype=float))
    if np.min(np.linalg.eigvalsh(cov)) < -1e-12:
        raise ValueError("shift covariance must be PSD")

    def corrected(theta) -> float:
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        return float(h_spec.value(th)) + 0.5 * float(np.trace(h_spec.hessian(th) @ cov))
    return corrected
