"""Continuous-time diffusion approximations of the SGD variants.

Euler-Maruyama integration of the parameter Langevin equation, the coupled
momentum Langevin with its shared noise source, and Monte Carlo evaluation of
the observable-drift identities that characterize the steady state.

Time can be rescaled so the learning rate is absorbed (t' = lam * t), leaving
temperature and the weight-decay coefficient as the only parameters; specs
built through the helpers default to that convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .averaging import Estimate
from .functions import SmoothFunction
from .models import LossModel
from .optimizers import OptimizerState, SGDConfig, temperature
from .sampling import DataSetPair, rng_from_seed


def matrix_sqrt_psd(mat: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Symmetric square root with eigenvalue clamping at zero (tolerance tol)."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    evals, evecs = np.linalg.eigh(0.5 * (mat + mat.T))
    scale = max(1.0, float(np.max(np.abs(evals))))
    if np.min(evals) < -tol * scale:
        raise ValueError(f"matrix is not PSD: min eigenvalue {np.min(evals):.3e}")
    return (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.T


@dataclass
class DiffusionSpec:
    """Parameter-space diffusion: d theta = drift dt + sqrt(C) dW."""

    drift: Callable[[np.ndarray], np.ndarray]
    diffusion_matrix: Callable[[np.ndarray], np.ndarray]
    dt: float
    steps: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")


def plain_sgd_diffusion_spec(model: LossModel, train: np.ndarray, T: float,
                             alpha: float = 0.0, beta: float = 0.0,
                             dt: float = 0.05, steps: int = 0, seed: int = 0,
                             lam: Optional[float] = None) -> DiffusionSpec:
    """Diffusion limit of plain SGD; rescaled time unless a learning rate is given."""
    scale = 1.0 if lam is None else lam
    eye = np.eye(model.dim)

    def drift(theta):
        return -scale * (model.mean_gradient(theta, train) + alpha * theta)

    def diffusion(theta):
        return scale * T * (model.gradient_covariance(theta, train) + beta ** 2 * eye)

    return DiffusionSpec(drift=drift, diffusion_matrix=diffusion, dt=dt,
                         steps=steps, seed=seed)


def euler_maruyama_step(spec: DiffusionSpec, theta: np.ndarray,
                        rng: np.random.Generator) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    g = matrix_sqrt_psd(spec.diffusion_matrix(theta))
    z = rng.standard_normal(theta.shape)
    return theta + spec.drift(theta) * spec.dt + math.sqrt(spec.dt) * (g @ z)


def em_stationary_1d(model: LossModel, train: np.ndarray, T: float,
                     alpha: float = 0.0, beta: float = 0.0, dt: float = 0.05,
                     n_chains: int = 64, burn_steps: int = 4000,
                     n_collect: int = 400, spacing: int = 50,
                     seed: int = 0) -> np.ndarray:
    """Vectorized Euler-Maruyama stationary samples in rescaled time (1-d models)."""
    if model.dim != 1:
        raise ValueError("vectorized sampler is 1-d only")
    rng = rng_from_seed(seed, 29)
    theta = np.zeros(n_chains)
    sqdt = math.sqrt(dt)
    collected = []
    for t in range(burn_steps + n_collect * spacing):
        drift = -(model.mean_gradient_grid(theta, train) + alpha * theta)
        cvals = T * (model.gradient_covariance_grid(theta, train) + beta ** 2)
        theta = theta + drift * dt + np.sqrt(cvals) * sqdt * rng.standard_normal(n_chains)
        if t >= burn_steps and (t - burn_steps) % spacing == 0:
            collected.append(theta.copy())
    out = np.concatenate(collected)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("Euler-Maruyama sampling diverged; reduce dt")
    return out


@dataclass
class MomentumDiffusionSpec:
    """Coupled (theta, v) Langevin for momentum SGD; both blocks share one Wiener draw."""

    model: LossModel
    train: np.ndarray
    lam: float
    T: float
    mu: float
    alpha: float = 0.0
    dt: float = 0.01
    steps: int = 0
    seed: int = 0

    @property
    def batch_size(self) -> float:
        return self.lam / self.T


def momentum_langevin_step(spec: MomentumDiffusionSpec, state: OptimizerState,
                           rng: np.random.Generator) -> OptimizerState:
    """One Euler-Maruyama step of the momentum Langevin; the same Wiener increment
    drives the theta block (scaled sqrt(lam T)) and the v block (scaled 1/sqrt(B))."""
    model, train = spec.model, spec.train
    theta, v = state.theta, state.v
    grad = model.mean_gradient(theta, train)
    g = matrix_sqrt_psd(model.gradient_covariance(theta, train))
    dw = math.sqrt(spec.dt) * rng.standard_normal(theta.shape)
    shared = g @ dw
    theta_new = (theta - spec.lam * (spec.mu * v + grad + spec.alpha * theta) * spec.dt
                 + math.sqrt(spec.lam * spec.T) * shared)
    v_new = (v + ((spec.mu - 1.0) * v + grad + spec.alpha * theta) * spec.dt
             + shared / math.sqrt(spec.batch_size))
    return OptimizerState(theta=theta_new, v=v_new, t=state.t + 1)


# ---------------------------------------------------------------------------
# observable dynamics at and off the steady state
# ---------------------------------------------------------------------------

def _as_sample_matrix(theta_samples, dim: int) -> np.ndarray:
    arr = np.asarray(theta_samples, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape[1] != dim:
        raise ValueError(f"samples have dimension {arr.shape[1]}, model expects {dim}")
    return arr


def observable_drift(phi: SmoothFunction, theta_samples, model: LossModel,
                     train: np.ndarray, config: SGDConfig) -> Estimate:
    """Monte Carlo estimate of d<phi>/dt under the plain-SGD diffusion.

    Evaluates -lam <dphi . (grad U + alpha theta)> + (lam T / 2) <tr((D + beta^2) hess phi)>
    over the supplied parameter samples; zero (within noise) characterizes
    stationary sample sets.
    """
    samples = _as_sample_matrix(theta_samples, model.dim)
    lam, T = config.lam, temperature(config)
    eye = np.eye(model.dim)
    terms = np.empty(len(samples))
    for i, th in enumerate(samples):
        grad_u = model.mean_gradient(th, train) + config.alpha * th
        d = model.gradient_covariance(th, train) + config.beta ** 2 * eye
        terms[i] = (-lam * float(phi.gradient(th) @ grad_u)
                    + 0.5 * lam * T * float(np.trace(d @ phi.hessian(th))))
    return Estimate(float(terms.mean()), float(terms.std(ddof=1) / np.sqrt(len(terms))))


def loss_ode_rhs(which: str, theta_samples, model: LossModel, pair: DataSetPair,
                 config: SGDConfig) -> Estimate:
    """Right-hand side of the train/test set-loss ODE at the supplied samples."""
    if which not in ("train", "test"):
        raise ValueError("which must be 'train' or 'test'")
    samples = _as_sample_matrix(theta_samples, model.dim)
    lam, T = config.lam, temperature(config)
    eye = np.eye(model.dim)
    terms = np.empty(len(samples))
    for i, th in enumerate(samples):
        grad_train = model.mean_gradient(th, pair.train)
        d = model.gradient_covariance(th, pair.train) + config.beta ** 2 * eye
        if which == "train":
            grad_f, hess_f = grad_train, model.mean_hessian(th, pair.train)
        else:
            grad_f, hess_f = (model.mean_gradient(th, pair.test),
                              model.mean_hessian(th, pair.test))
        terms[i] = (-lam * (float(grad_f @ grad_train) + config.alpha * float(th @ grad_f))
                    + 0.5 * lam * T * float(np.trace(hess_f @ d)))
    return Estimate(float(terms.mean()), float(terms.std(ddof=1) / np.sqrt(len(terms))))
