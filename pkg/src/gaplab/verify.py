"""Bundled invariant suites: identities, steady state, approximations, momentum contrast.

Each suite returns a list of check rows {name, value, tolerance, passed, ...};
rows with asserted=False are informational (reported, never gating). The same
functions back the CLI `verify` subcommand and the acceptance tests, so the
gates live in exactly one place.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
from scipy import stats as sstats

from . import averaging as av
from . import approximations as ap
from .diffusion import loss_ode_rhs, observable_drift
from .functions import SmoothFunction
from .models import GaussianMean, LossModel, NonlinearRegression1D
from .optimizers import SGDConfig, sample_stationary, temperature
from .sampling import (DATA_SPLITTING, IID_FRESH, SamplingMode, rng_from_seed,
                       sample_dataset)
from .steady_state import (axis_for_train_sets, grid_boltzmann_density, ks_statistic,
                           probability_current)

PLAIN_COLLAPSE_TV_TOL = 0.05   # calibrated against same-config reruns at 5e4 samples


def _row(name: str, value: float, tolerance: float, passed: bool,
         asserted: bool = True, **detail) -> dict:
    out = {"name": name, "value": float(value), "tolerance": float(tolerance),
           "passed": bool(passed), "asserted": asserted}
    out.update(detail)
    return out


def sample_tv(a: np.ndarray, b: np.ndarray, bins: int = 60) -> float:
    """Total-variation distance between two sample sets on shared histogram bins."""
    a, b = np.ravel(a), np.ravel(b)
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    edges = np.linspace(lo, hi, bins + 1)
    pa, _ = np.histogram(a, bins=edges)
    pb, _ = np.histogram(b, bins=edges)
    return 0.5 * float(np.abs(pa / len(a) - pb / len(b)).sum())


def random_polynomial_observables(n: int, seed: int, degree: int = 3) -> list:
    """Observables polynomial in theta with data-statistic-dependent coefficients."""
    rng = rng_from_seed(seed, 41)
    scales = np.array([1.0, 0.6, 0.3, 0.1])[: degree + 1]
    obs = []
    for k in range(n):
        p = rng.normal(scale=scales)
        q = rng.normal(scale=scales)
        r = rng.normal(scale=scales)

        def fn(thetas, d, p=p, q=q, r=r):
            xbar, xvar = float(np.mean(d.train)), float(np.var(d.train))
            coef = p + q * xbar + r * xvar
            powers = np.vstack([thetas ** j for j in range(len(coef))])
            return coef @ powers
        obs.append(av.Observable(f"poly_{k}", fn))
    return obs


# ---------------------------------------------------------------------------
# identities
# ---------------------------------------------------------------------------

def identities_suite(seed: int = 2024, n_poly: int = 20, m_decomp: int = 1000,
                     m_gap: int = 2000, gap_temps=(1e-3, 1e-2, 1e-1),
                     n_quartic: int = 200, m_quartic: int = 200) -> list:
    model = GaussianMean(0.0, 1.0)
    mode = SamplingMode(IID_FRESH)
    rows = []

    # exact decomposition over random polynomial observables
    ens = av.build_ensemble(model, mode, 10, 10, m_decomp, seed,
                            av.EnsembleConfig(T=0.01))
    worst = 0.0
    for f in random_polynomial_observables(n_poly, seed + 1):
        res = av.decomposition_check(f, ens)
        worst = max(worst, abs(res.residual) / res.stderr)
    rows.append(_row("decomposition_polynomials", worst, 3.0, worst < 3.0,
                     n_observables=n_poly, m=m_decomp))

    # direct gap versus covariance route, plus the Cauchy-Schwarz bound
    gap_ensembles = []
    for T in gap_temps:
        e = av.build_ensemble(model, mode, 10, 10, m_gap, seed + 7, av.EnsembleConfig(T=T))
        gap_ensembles.append(e)
        resid = av.gap_identity_residual(e)
        ratio = abs(resid.value) / resid.stderr
        rows.append(_row(f"gap_identity_T{T:g}", ratio, 3.0, ratio < 3.0,
                         residual=resid.value, stderr=resid.stderr,
                         gap_direct=av.gap_direct(e).value,
                         gap_via_covariance=av.gap_via_covariance(e).value))
        bound = av.gap_upper_bound(e)
        gap = av.gap_via_covariance(e).value
        rows.append(_row(f"gap_bound_T{T:g}", abs(gap), bound, abs(gap) <= bound))

    # test-loss covariance vanishes under independent sampling
    e0 = gap_ensembles[1]
    u_test = e0.observable_matrix(av.test_loss_observable(model))
    c = ((u_test - u_test.mean(axis=0)) * (e0.rho - e0.rho_bar_values)) @ e0.weights
    p_value = float(sstats.ttest_1samp(c, 0.0).pvalue)
    rows.append(_row("test_cov_zero_iid", p_value, 0.01, p_value > 0.01,
                     integrated_cov=float(c.mean() * e0.m / (e0.m - 1))))

    split_mode = SamplingMode(DATA_SPLITTING, pool_size=30, pool_seed=77)
    es = av.build_ensemble(model, split_mode, 20, 10, m_decomp, seed + 9,
                           av.EnsembleConfig(T=0.05))
    u_test_s = es.observable_matrix(av.test_loss_observable(model))
    cs = ((u_test_s - u_test_s.mean(axis=0)) * (es.rho - es.rho_bar_values)) @ es.weights
    p_split = float(sstats.ttest_1samp(cs, 0.0).pvalue)
    rows.append(_row("test_cov_data_splitting_pool30", p_split, 0.01, True, asserted=False,
                     integrated_cov=float(cs.mean() * es.m / (es.m - 1)),
                     note="reported only; splitting couples train and test"))

    # effective-potential gap positivity
    worst_ratio, violations = -np.inf, 0
    for e in gap_ensembles:
        res = av.effective_potential_gap_check(e)
        ratio = (res.lhs - res.rhs) / res.stderr
        worst_ratio = max(worst_ratio, ratio)
        violations += ratio > 3.0
    rows.append(_row("potential_gap_gaussian", worst_ratio, 3.0, violations == 0,
                     n_ensembles=len(gap_ensembles)))

    worst_q, viol_q = -np.inf, 0
    for k in range(n_quartic):
        qe = av.quartic_ensemble(m_quartic, seed + 100 + k)
        res = av.effective_potential_gap_check(qe)
        ratio = (res.lhs - res.rhs) / res.stderr
        worst_q = max(worst_q, ratio)
        viol_q += ratio > 3.0
    rows.append(_row("potential_gap_quartics", worst_q, 3.0, viol_q == 0,
                     n_ensembles=n_quartic, violations=int(viol_q)))
    return rows


# ---------------------------------------------------------------------------
# steady state
# ---------------------------------------------------------------------------

def steady_state_suite(seed: int = 321, n_train: int = 64, lam: float = 1e-2,
                       n_nodes: int = 1025, ks_tol: float = 0.02,
                       current_tol: float = 1e-4, n_samples: int = 100_000) -> list:
    rows = []
    mode = SamplingMode(IID_FRESH)
    for model in (GaussianMean(0.0, 1.0), NonlinearRegression1D(0.0, 1.0, 0.3)):
        pair = sample_dataset(model, mode, n_train, n_train, seed)
        cfg = SGDConfig(lam=lam, B=1, seed=seed + 1)
        T = temperature(cfg)
        n_collect = n_samples // 100
        samples = sample_stationary(model, pair.train, cfg, n_chains=100,
                                    burn_steps=2000, n_collect=n_collect,
                                    spacing=120, seed=seed + 2)
        axis = axis_for_train_sets(model, [pair.train], T, n_nodes=n_nodes)
        dens, *_ = grid_boltzmann_density(model, pair.train, T, (axis,))
        ks = ks_statistic(samples, dens)
        rows.append(_row(f"ks_{model.name}", ks, ks_tol, ks < ks_tol,
                         n_samples=len(samples)))
        _, jmax = probability_current(dens, model, pair.train, T)
        rows.append(_row(f"current_{model.name}", jmax, current_tol, jmax < current_tol))
        axis2 = axis_for_train_sets(model, [pair.train], T, n_nodes=2 * (n_nodes - 1) + 1)
        dens2, *_ = grid_boltzmann_density(model, pair.train, T, (axis2,))
        _, jmax2 = probability_current(dens2, model, pair.train, T)
        rows.append(_row(f"current_refinement_{model.name}", jmax2, jmax / 2,
                         jmax2 <= jmax / 2, coarse=jmax, fine=jmax2))

    rows.extend(moment_stationarity_checks(seed=seed + 5))
    return rows


def moment_stationarity_checks(seed: int = 5, n_train: int = 64, T: float = 0.01,
                               alpha: float = 0.05, beta: float = 0.3,
                               n_samples: int = 200_000) -> list:
    """Drift of mean, covariance, and both set losses vanish at the exact steady state."""
    model = GaussianMean(0.0, 1.0)
    pair = sample_dataset(model, SamplingMode(IID_FRESH), n_train, n_train, seed)
    d = float(np.var(pair.train))
    xbar = float(np.mean(pair.train))
    mean = xbar / (1.0 + alpha)
    var = T * (d + beta ** 2) / (2.0 * (1.0 + alpha))
    rng = rng_from_seed(seed, 51)
    samples = rng.normal(mean, math.sqrt(var), n_samples)
    cfg = SGDConfig(lam=T, B=1, alpha=alpha, beta=beta)

    rows = []
    checks = [
        ("mean_drift", observable_drift(SmoothFunction.affine([1.0]), samples,
                                        model, pair.train, cfg)),
        ("covariance_drift", observable_drift(
            SmoothFunction.quadratic_form([[2.0]], center=[mean]), samples,
            model, pair.train, cfg)),
        ("train_loss_drift", loss_ode_rhs("train", samples, model, pair, cfg)),
        ("test_loss_drift", loss_ode_rhs("test", samples, model, pair, cfg)),
    ]
    for name, est in checks:
        ratio = abs(est.value) / est.stderr
        rows.append(_row(f"stationary_{name}", ratio, 3.0, ratio < 3.0,
                         value_raw=est.value, stderr=est.stderr))

    axis = axis_for_train_sets(model, [pair.train], T, alpha, beta, n_nodes=1025)
    dens, *_ = grid_boltzmann_density(model, pair.train, T, (axis,), alpha=alpha, beta=beta)
    grid_var = float(dens.covariance()[0, 0])
    rows.append(_row("fluctuation_dissipation_variance", abs(grid_var - var), 1e-6,
                     abs(grid_var - var) < 1e-6, closed_form=var, grid=grid_var))
    return rows


# ---------------------------------------------------------------------------
# approximations
# ---------------------------------------------------------------------------

def approximations_suite(seed: int = 99, mc_oracle_samples: int = 10_000_000) -> list:
    rows = []
    rng = rng_from_seed(seed, 61)

    # delta-method covariance: exact on affine pairs
    worst = 0.0
    for _ in range(50):
        dim = int(rng.integers(1, 4))
        cf, ch = rng.standard_normal(dim), rng.standard_normal(dim)
        mu = rng.standard_normal(dim)
        root = rng.standard_normal((dim, dim))
        sigma = root @ root.T + 0.1 * np.eye(dim)
        got = ap.delta_method_cov(SmoothFunction.affine(cf), SmoothFunction.affine(ch),
                                  mu, sigma)
        worst = max(worst, abs(got - float(cf @ sigma @ ch)))
    rows.append(_row("delta_cov_affine_exact", worst, 1e-12, worst < 1e-12))

    # delta-method covariance of x^2 with itself at mu=1, sigma^2=0.01
    square = SmoothFunction(lambda x: float(x[0]) ** 2,
                            lambda x: np.array([2.0 * float(x[0])]),
                            lambda x: np.array([[2.0]]))
    got = ap.delta_method_cov(square, square, [1.0], [[0.01]])
    rows.append(_row("delta_cov_square_value", got, 1e-12, abs(got - 0.0399) < 1e-12))
    x = 1.0 + 0.1 * rng_from_seed(seed, 62).standard_normal(mc_oracle_samples)
    mc = float(np.var(x ** 2, ddof=1))
    rows.append(_row("delta_cov_square_mc_oracle", mc, 0.0, 0.0395 <= mc <= 0.0410,
                     delta_value=got, window="[0.0395, 0.0410]"))

    # curvature expansion: exact for quadratic losses under Gaussian mixtures
    worst_curv = 0.0
    for _ in range(20):
        comps, exact_test, exact_train = [], 0.0, 0.0
        weights = rng.dirichlet(np.ones(2))
        for k in range(2):
            mu_k = rng.standard_normal(2)
            root = rng.standard_normal((2, 2))
            cov_k = root @ root.T + 0.05 * np.eye(2)
            tmin, emin = rng.standard_normal(2), rng.standard_normal(2)
            ct = _random_spd(rng)
            ce = _random_spd(rng)
            ul, ue = float(rng.uniform(0, 1)), float(rng.uniform(0, 1))
            comps.append(ap.CurvatureComponent(
                weight=float(weights[k]), mean=mu_k, cov=cov_k, train_min=tmin,
                test_min=emin, train_loss=ul, test_loss=ue, train_curv=ct, test_curv=ce))
            exact_test += weights[k] * (ue + 0.5 * ((mu_k - emin) @ ce @ (mu_k - emin)
                                                    + np.trace(ce @ cov_k)))
            exact_train += weights[k] * (ul + 0.5 * ((mu_k - tmin) @ ct @ (mu_k - tmin)
                                                     + np.trace(ct @ cov_k)))
        test, train = ap.curvature_expansion(ap.CurvatureSpec(comps))
        worst_curv = max(worst_curv, abs(test - exact_test), abs(train - exact_train))
    rows.append(_row("curvature_expansion_exact", worst_curv, 1e-10, worst_curv < 1e-10))

    rows.extend(train_derivative_checks(seed=seed + 3))
    rows.extend(approximation_gate_checks(seed=seed + 5))
    return rows


def _random_spd(rng) -> np.ndarray:
    root = rng.standard_normal((2, 2))
    return root @ root.T + 0.05 * np.eye(2)


def train_derivative_checks(seed: int = 7, temps=(0.25, 0.5, 1.0), m: int = 2000,
                            n_train: int = 20, rel_step: float = 0.05) -> list:
    """The temperature derivative of the train loss matches a centered finite difference."""
    model = GaussianMean(0.0, 1.0)
    mode = SamplingMode(IID_FRESH)
    rows = []
    for T in temps:
        def build(t):
            return av.build_ensemble(model, mode, n_train, n_train, m, seed,
                                     av.EnsembleConfig(T=t, n_nodes=401))
        ens = build(T)
        hi, lo = build(T * (1 + rel_step)), build(T * (1 - rel_step))
        deriv = ap.train_loss_T_derivative(ens)
        u_hi = ((hi.train_loss * hi.rho) @ hi.weights)
        u_lo = ((lo.train_loss * lo.rho) @ lo.weights)
        u_c = ((ens.train_loss * ens.rho) @ ens.weights)
        fd = (u_hi - u_lo) / (2 * rel_step * T)
        per_rep = (2.0 / T ** 2) * (((ens.v * ens.train_loss) * ens.rho) @ ens.weights
                                    - ((ens.v * ens.rho) @ ens.weights)
                                    * ((ens.train_loss * ens.rho) @ ens.weights))
        resid = per_rep - fd
        ratio = abs(resid.mean()) / (resid.std(ddof=1) / math.sqrt(m))
        rows.append(_row(f"train_dT_T{T:g}", ratio, 3.0, ratio < 3.0,
                         derivative=deriv.value, fd=float(fd.mean()),
                         positive=bool(deriv.value > 0), u_center=float(u_c.mean())))
    return rows


def approximation_gate_checks(seed: int = 13, T: float = 1.0, n_train: int = 100,
                              beta: float = 1.0, m: int = 16_000,
                              lognormal_gate: float = 0.25, delta_gate: float = 0.35,
                              tv_gate: float = 0.01) -> list:
    """Regression gates: approximate gaps against the exact Monte Carlo gap.

    The gate config lives where the log-normal assumptions hold: the isotropic
    noise floor beta^2 keeps the preconditioner's data randomness small, and m
    is large enough that the exact-gap oracle noise is a few percent.
    """
    model = GaussianMean(0.0, 1.0)
    mode = SamplingMode(IID_FRESH)
    rows = []
    ens = av.build_ensemble(model, mode, n_train, n_train, m, seed,
                            av.EnsembleConfig(T=T, beta=beta, n_nodes=401))
    stats = ap.compute_potential_stats(ens)
    exact = av.gap_direct(ens)

    ln = ap.lognormal_gap(stats)
    rel_ln = abs(ln.value - exact.value) / abs(exact.value)
    rows.append(_row("lognormal_gap_gate", rel_ln, lognormal_gate, rel_ln < lognormal_gate,
                     approx=ln.value, exact=exact.value, regime=ln.regime))

    dens_mu = ap.mean_dataset_density(model, n_train, T, beta=beta, axes=ens.axes)
    dg = ap.delta_method_gap(stats, dens_mu)
    rel_d = abs(dg.value - exact.value) / abs(exact.value)
    rows.append(_row("delta_gap_gate", rel_d, delta_gate, rel_d < delta_gate,
                     approx=dg.value, exact=exact.value))

    bounds = ap.lognormal_gap_upper_bounds(stats)
    if bounds.mean_sigma_g2 < 0.3:
        ok = bounds.sgd_small_sigma >= exact.value - 3 * exact.stderr
        rows.append(_row("lognormal_bound_small_sigma", bounds.sgd_small_sigma,
                         exact.value, ok, mean_sigma_g2=bounds.mean_sigma_g2))
    else:
        rows.append(_row("lognormal_bound_small_sigma", bounds.sgd_small_sigma,
                         exact.value, True, asserted=False,
                         note="validity predicate sigma_g^2 << 1 not met",
                         mean_sigma_g2=bounds.mean_sigma_g2))

    # log-normal density: exact when the potential is Gaussian across data sets
    ens_frozen = av.build_ensemble(model, mode, n_train, n_train, 2 * m, seed + 1,
                                   av.EnsembleConfig(T=T, n_nodes=401,
                                                     freeze_covariance=True))
    stats_f = ap.compute_potential_stats(ens_frozen)
    ln_density = ap.lognormal_rho_bar(stats_f)
    tv = 0.5 * float(np.sum(np.abs(ln_density.values - ens_frozen.rho_bar_values)
                            * ens_frozen.weights))
    rows.append(_row("lognormal_rho_bar_tv", tv, tv_gate, tv < tv_gate, m=2 * m))
    return rows


# ---------------------------------------------------------------------------
# momentum contrast
# ---------------------------------------------------------------------------

def momentum_contrast_suite(seed: int = 17, n_train: int = 100, alpha: float = 5e-4,
                            T: float = 2e-4, tv_tol: float = PLAIN_COLLAPSE_TV_TOL,
                            n_collect: int = 500) -> list:
    """Plain SGD collapses onto temperature; momentum SGD's state distribution does not.

    Plain runs at (0.1, 500) and (0.02, 100) share T and alpha; their stationary
    parameter histograms agree within the calibrated TV tolerance once time is
    rescaled (burn-in and spacing measured in units of 1/lam). Momentum at fixed
    T across batch sizes 10 and 100 produces state distributions that differ far
    beyond it: the momentum coordinate's stationary scale tracks the batch size.
    The parameter marginal of momentum runs is reported for context.
    """
    model = GaussianMean(0.0, 1.0)
    pair = sample_dataset(model, SamplingMode(IID_FRESH), n_train, n_train, seed)

    def sample(lam, B, mu, s, with_momentum=False):
        cfg = SGDConfig(lam=lam, B=B, alpha=alpha, mu=mu, seed=s)
        burn = int(60 / lam)
        spacing = max(1, int(2 / lam))
        return sample_stationary(model, pair.train, cfg, n_chains=100, burn_steps=burn,
                                 n_collect=n_collect, spacing=spacing, seed=s,
                                 return_momentum=with_momentum)

    rows = []
    a = sample(0.1, 500, 0.0, seed + 1)
    b = sample(0.02, 100, 0.0, seed + 2)
    tv_plain = sample_tv(a, b)
    rows.append(_row("plain_temperature_collapse", tv_plain, tv_tol, tv_plain < tv_tol,
                     pair_a=(0.1, 500), pair_b=(0.02, 100)))

    th1, v1 = sample(T * 10, 10, 0.9, seed + 3, with_momentum=True)
    th2, v2 = sample(T * 100, 100, 0.9, seed + 4, with_momentum=True)
    tv_state = sample_tv(v1, v2)
    rows.append(_row("momentum_state_contrast", tv_state, tv_tol, tv_state > tv_tol,
                     batch_sizes=(10, 100),
                     theta_marginal_tv=sample_tv(th1, th2),
                     v_std_ratio=float(v1.std() / v2.std())))
    return rows


SUITES = {
    "identities": identities_suite,
    "steady_state": steady_state_suite,
    "approximations": approximations_suite,
    "momentum_contrast": momentum_contrast_suite,
}


def run_suite(name: str, **kwargs) -> dict:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choices: {sorted(SUITES)}")
    checks = SUITES[name](**kwargs)
    gating = [c for c in checks if c.get("asserted", True)]
    return {"suite": name, "passed": all(c["passed"] for c in gating), "checks": checks}
