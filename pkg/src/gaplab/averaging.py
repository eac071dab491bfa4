"""Data-set averaging: bracket operators, exact gap identities, and bounds.

An AveragingEnsemble holds m resampled data sets together with their
steady-state parameter densities on one shared grid, so covariances across
data-set realizations become pointwise array operations. Monte Carlo standard
errors accompany every data-averaged quantity; identity checks compare within
multiples of those.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .models import LossModel
from .sampling import IID_FRESH, DataSetPair, SamplingMode, resample_datasets
from .steady_state import (DensityGrid, axis_for_train_sets, density_from_log_values,
                           potential_values_1d, train_minimizer, trapezoid_weights)


class Estimate(NamedTuple):
    value: float
    stderr: float


@dataclass(frozen=True)
class Observable:
    """A scalar function of (theta, data set), vectorized over grid nodes.

    fn(thetas, dataset) must accept the grid's flat node array ((N,) in 1-d,
    (N, p) otherwise) and return one value per node.
    """

    name: str
    fn: Callable[[np.ndarray, DataSetPair], np.ndarray]

    def __call__(self, thetas: np.ndarray, dataset: DataSetPair) -> np.ndarray:
        return np.asarray(self.fn(thetas, dataset), dtype=float)


def train_loss_observable(model: LossModel) -> Observable:
    return Observable("train_set_loss", lambda th, d: model.loss_grid(th, d.train))


def test_loss_observable(model: LossModel) -> Observable:
    return Observable("test_set_loss", lambda th, d: model.loss_grid(th, d.test))


@dataclass
class EnsembleConfig:
    T: float
    alpha: float = 0.0
    beta: float = 0.0
    n_nodes: int = 401
    n_sd: float = 8.0
    refine: int = 4
    freeze_covariance: bool = False  # precondition with the population gradient covariance


@dataclass
class AveragingEnsemble:
    """m replications sharing one grid: densities, potentials, and set losses."""

    axes: tuple
    weights: np.ndarray          # flat quadrature weights, shape (M,)
    rho: np.ndarray              # (m, M) per-replication normalized densities
    g: np.ndarray                # (m, M) effective potentials
    T: Optional[float] = None
    alpha: float = 0.0
    beta: float = 0.0
    v: Optional[np.ndarray] = None
    a: Optional[np.ndarray] = None
    train_loss: Optional[np.ndarray] = None
    test_loss: Optional[np.ndarray] = None
    datasets: Optional[list] = None
    model: Optional[LossModel] = None

    def __post_init__(self):
        self.rho_bar_values = self.rho.mean(axis=0)
        drift = abs(float(np.sum(self.rho_bar_values * self.weights)) - 1.0)
        if drift > 1e-8:
            raise ValueError(f"mean density drifted off normalization by {drift:.2e}")

    @property
    def m(self) -> int:
        return self.rho.shape[0]

    @property
    def shape(self) -> tuple:
        return tuple(len(a) for a in self.axes)

    def nodes(self) -> np.ndarray:
        if len(self.axes) == 1:
            return self.axes[0]
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def density(self, j: int) -> DensityGrid:
        return DensityGrid(axes=self.axes, values=self.rho[j].reshape(self.shape),
                           weights=self.weights.reshape(self.shape))

    def rho_bar(self) -> DensityGrid:
        return DensityGrid(axes=self.axes, values=self.rho_bar_values.reshape(self.shape),
                           weights=self.weights.reshape(self.shape))

    def observable_matrix(self, f: Observable) -> np.ndarray:
        if self.datasets is None:
            raise ValueError("this ensemble carries no data sets")
        nodes = self.nodes()
        return np.vstack([f(nodes, d) for d in self.datasets])


def build_ensemble(model: LossModel, mode: SamplingMode, n_train: int, n_test: int,
                   m: int, base_seed: int, config: EnsembleConfig) -> AveragingEnsemble:
    """Sample m data-set pairs and build their steady-state densities on one grid."""
    if model.dim != 1:
        raise ValueError("ensemble construction currently supports 1-parameter families")
    if m < 2:
        raise ValueError("need at least two replications")
    datasets = resample_datasets(model, mode, n_train, n_test, m, base_seed)
    trains = [d.train for d in datasets]
    axis = axis_for_train_sets(model, trains, config.T, config.alpha, config.beta,
                               n_nodes=config.n_nodes, n_sd=config.n_sd)
    weights = trapezoid_weights(axis)

    cov_grid_fn = None
    if config.freeze_covariance:
        fine = np.linspace(axis[0], axis[-1], config.refine * (len(axis) - 1) + 1)
        pop = np.array([model.population_gradient_covariance(np.array([t]))[0, 0] for t in fine])
        cov_grid_fn = lambda t: np.interp(t, fine, pop)  # noqa: E731

    n_nodes = len(axis)
    rho = np.empty((m, n_nodes))
    v = np.empty((m, n_nodes))
    a = np.empty((m, n_nodes))
    u_train = np.empty((m, n_nodes))
    u_test = np.empty((m, n_nodes))
    for j, d in enumerate(datasets):
        base = train_minimizer(model, d.train, config.alpha)
        v[j], a[j] = potential_values_1d(model, d.train, axis, config.alpha, config.beta,
                                         base, refine=config.refine, cov_grid_fn=cov_grid_fn)
        g_j = (2.0 / config.T) * v[j] + a[j]
        rho[j] = density_from_log_values((axis,), -g_j).values
        u_train[j] = model.loss_grid(axis, d.train)
        u_test[j] = model.loss_grid(axis, d.test)

    return AveragingEnsemble(axes=(axis,), weights=weights, rho=rho,
                             g=(2.0 / config.T) * v + a, T=config.T,
                             alpha=config.alpha, beta=config.beta, v=v, a=a,
                             train_loss=u_train, test_loss=u_test,
                             datasets=datasets, model=model)


def quartic_ensemble(m: int, seed: int, n_nodes: int = 257,
                     axis_span: float = 6.0) -> AveragingEnsemble:
    """Synthetic ensemble whose potentials are randomized quartics (stress case).

    The base quartic is drawn once, per-replication coefficient jitter plays the
    role of data-set sampling. Densities are Boltzmann in the quartic potential.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 11]))
    axis = np.linspace(-axis_span, axis_span, n_nodes)
    weights = trapezoid_weights(axis)
    base = np.array([rng.uniform(-1.0, 1.0),      # c1
                     rng.uniform(-1.0, 1.0),      # c2
                     rng.uniform(-0.2, 0.2),      # c3
                     rng.uniform(0.3, 1.0)])      # c4
    jitter = np.array([0.25, 0.15, 0.05, 0.05])
    coefs = base[None, :] + jitter[None, :] * rng.standard_normal((m, 4))
    coefs[:, 3] = np.clip(coefs[:, 3], 0.15, None)

    powers = np.vstack([axis, axis ** 2, axis ** 3, axis ** 4])
    g = coefs @ powers
    rho = np.empty_like(g)
    for j in range(m):
        rho[j] = density_from_log_values((axis,), -g[j]).values
    return AveragingEnsemble(axes=(axis,), weights=weights, rho=rho, g=g)


# ---------------------------------------------------------------------------
# bracket operators
# ---------------------------------------------------------------------------

def conditional_average(f: Observable, density: DensityGrid, d: DataSetPair) -> float:
    """<f> : average of f(theta, d) under one parameter density."""
    return density.expectation(f(density.nodes(), d))


def total_average(f: Observable, ens: AveragingEnsemble) -> Estimate:
    """Total expectation of f over parameters and data sets, with stderr over replications."""
    fmat = ens.observable_matrix(f)
    vals = (fmat * ens.rho) @ ens.weights
    return Estimate(float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(ens.m)))


def double_bracket(f: Observable, ens: AveragingEnsemble) -> float:
    """Average of the data-averaged f against the data-averaged density."""
    fbar = ens.observable_matrix(f).mean(axis=0)
    return float(np.sum(ens.rho_bar_values * fbar * ens.weights))


def cov_over_data(f: Observable, ens: AveragingEnsemble) -> np.ndarray:
    """Pointwise sample covariance between rho and f across replications (1/(m-1))."""
    fmat = ens.observable_matrix(f)
    fc = fmat - fmat.mean(axis=0)
    rc = ens.rho - ens.rho_bar_values
    return (fc * rc).sum(axis=0) / (ens.m - 1)


@dataclass
class DecompositionResult:
    lhs: float
    rhs: float
    residual: float
    stderr: float
    cov_term: float
    bracket_term: float


def decomposition_check(f: Observable, ens: AveragingEnsemble) -> DecompositionResult:
    """Total average versus integrated covariance plus double bracket."""
    lhs = total_average(f, ens)
    fmat = ens.observable_matrix(f)
    fc = fmat - fmat.mean(axis=0)
    rc = ens.rho - ens.rho_bar_values
    c_series = (fc * rc) @ ens.weights                   # per-replication covariance mass
    cov_term = float(c_series.sum() / (ens.m - 1))
    bracket = double_bracket(f, ens)
    se_cov = float(c_series.std(ddof=1) * np.sqrt(ens.m) / (ens.m - 1))
    stderr = float(np.hypot(lhs.stderr, se_cov)) + 1e-12
    rhs = cov_term + bracket
    return DecompositionResult(lhs=lhs.value, rhs=rhs, residual=lhs.value - rhs,
                               stderr=stderr, cov_term=cov_term, bracket_term=bracket)


# ---------------------------------------------------------------------------
# the gap
# ---------------------------------------------------------------------------

def _require_losses(ens: AveragingEnsemble):
    if ens.train_loss is None or ens.test_loss is None:
        raise ValueError("ensemble was built without set-loss matrices")


def gap_direct(ens: AveragingEnsemble) -> Estimate:
    """Total average of test minus train set loss (paired over replications)."""
    _require_losses(ens)
    gaps = ((ens.test_loss - ens.train_loss) * ens.rho) @ ens.weights
    return Estimate(float(gaps.mean()), float(gaps.std(ddof=1) / np.sqrt(ens.m)))


def _cov_series_train(ens: AveragingEnsemble) -> np.ndarray:
    uc = ens.train_loss - ens.train_loss.mean(axis=0)
    rc = ens.rho - ens.rho_bar_values
    return (uc * rc) @ ens.weights


def gap_via_covariance(ens: AveragingEnsemble) -> Estimate:
    """The gap as minus the integrated data-sampling covariance of (rho, train loss).

    Only valid when train and test are independent draws from one population,
    so pool-based sampling modes are refused.
    """
    _require_losses(ens)
    if ens.datasets is not None and ens.datasets[0].mode.mode != IID_FRESH:
        raise ValueError("covariance route requires independent train/test sampling "
                         f"(got mode {ens.datasets[0].mode.mode!r})")
    c = _cov_series_train(ens)
    scale = ens.m / (ens.m - 1)
    return Estimate(float(-c.mean() * scale),
                    float(c.std(ddof=1) / np.sqrt(ens.m) * scale))


def gap_identity_residual(ens: AveragingEnsemble) -> Estimate:
    """Paired residual between the direct and covariance gap routes.

    The per-replication series d_j = gap_j + m/(m-1) c_j has mean exactly
    gap_direct - gap_via_covariance; its scatter gives the right stderr for
    the identity test (the two routes share the train-set noise).
    """
    _require_losses(ens)
    gaps = ((ens.test_loss - ens.train_loss) * ens.rho) @ ens.weights
    d = gaps + _cov_series_train(ens) * ens.m / (ens.m - 1)
    return Estimate(float(d.mean()), float(d.std(ddof=1) / np.sqrt(ens.m)))


def gap_upper_bound(ens: AveragingEnsemble, n_mc: int = 200_000, seed: int = 0,
                    n_train: Optional[int] = None) -> float:
    """Cauchy-Schwarz bound: integral of std(rho) * std(loss) / sqrt(n_train).

    n_train defaults to the ensemble's training-set size; passing another value
    rescales only the explicit prefactor (the sigma fields are reused as-is).
    """
    _require_losses(ens)
    sigma_rho = ens.rho.std(axis=0, ddof=1)
    _, loss_var = ens.model.population_grid(ens.nodes(), n_mc=n_mc, seed=seed)
    if n_train is None:
        n_train = ens.datasets[0].n_train
    return float(np.sum(sigma_rho * np.sqrt(loss_var) * ens.weights) / np.sqrt(n_train))


# ---------------------------------------------------------------------------
# effective-potential gap
# ---------------------------------------------------------------------------

@dataclass
class PotentialGapResult:
    lhs: float                   # total average of g under its own densities
    rhs: float                   # double bracket of the data-averaged g
    stderr: float                # influence-function stderr of lhs - rhs
    v_lhs: Optional[float] = None
    v_rhs: Optional[float] = None
    a_lhs: Optional[float] = None
    a_rhs: Optional[float] = None

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs


def _paired_bracket_gap(matrix: np.ndarray, ens: AveragingEnsemble):
    vals = (matrix * ens.rho) @ ens.weights
    lhs = float(vals.mean())
    fbar = matrix.mean(axis=0)
    rhs = float(np.sum(ens.rho_bar_values * fbar * ens.weights))
    # linearized per-replication influence of lhs - rhs
    cross = (ens.rho * fbar[None, :] + matrix * ens.rho_bar_values[None, :]
             - ens.rho_bar_values[None, :] * fbar[None, :]) @ ens.weights
    d = vals - cross
    return lhs, rhs, float(d.std(ddof=1) / np.sqrt(ens.m))


def effective_potential_gap_check(ens: AveragingEnsemble) -> PotentialGapResult:
    """Train-side average of the effective potential never exceeds the test-side one."""
    lhs, rhs, se = _paired_bracket_gap(ens.g, ens)
    result = PotentialGapResult(lhs=lhs, rhs=rhs, stderr=se)
    if ens.v is not None and ens.a is not None:
        result.v_lhs, result.v_rhs, _ = _paired_bracket_gap(ens.v, ens)
        result.a_lhs, result.a_rhs, _ = _paired_bracket_gap(ens.a, ens)
    return result


def ensemble_report(ens: AveragingEnsemble) -> dict:
    """JSON-ready summary of the identity checks on one ensemble."""
    report = {"m": ens.m, "T": ens.T, "alpha": ens.alpha, "beta": ens.beta}
    if ens.train_loss is not None:
        gd = gap_direct(ens)
        resid = gap_identity_residual(ens)
        report["gap_direct"] = {"value": gd.value, "stderr": gd.stderr}
        if ens.datasets[0].mode.mode == IID_FRESH:
            gc = gap_via_covariance(ens)
            report["gap_via_covariance"] = {"value": gc.value, "stderr": gc.stderr}
            report["gap_identity_residual"] = {"value": resid.value, "stderr": resid.stderr}
            report["gap_upper_bound"] = gap_upper_bound(ens)
    pot = effective_potential_gap_check(ens)
    report["potential_gap"] = {"lhs": pot.lhs, "rhs": pot.rhs, "stderr": pot.stderr,
                               "margin": pot.margin}
    return report
