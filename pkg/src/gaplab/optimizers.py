"""Discrete-time SGD variants and trajectory recording.

Plain SGD follows
    theta' = theta - (lam/B) sum_B grad l - lam*alpha*theta + sqrt(lam*T)*beta*w,
with temperature T = lam/B (initial lam under a schedule). The momentum variant
matches the common ML-framework update order
    v' = mu*v + batch_grad + alpha*theta;  theta' = theta - lam*v',
and carries no isotropic noise term. Mini-batches are drawn uniformly with
replacement from the training set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .models import LossModel
from .sampling import DataSetPair, rng_from_seed

CONSTANT = "constant"
COSINE = "cosine"


@dataclass
class SGDConfig:
    lam: float
    B: int
    alpha: float = 0.0
    beta: float = 0.0
    mu: float = 0.0
    schedule: str = CONSTANT
    t_f: Optional[int] = None
    steps: int = 0
    seed: int = 0
    full_batch: bool = False
    theta0: Optional[tuple] = None

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("learning rate must be nonnegative")
        if self.B < 1:
            raise ValueError("batch size must be >= 1")
        if not 0.0 <= self.mu < 1.0:
            raise ValueError("momentum coefficient must lie in [0, 1)")
        if self.schedule not in (CONSTANT, COSINE):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.schedule == COSINE:
            if self.t_f is None or self.t_f < self.steps:
                raise ValueError("cosine schedule needs t_f >= steps")

    def lam_at(self, t: int) -> float:
        if self.schedule == COSINE:
            return cosine_lr(self.lam, t, self.t_f)
        return self.lam


def temperature(config: SGDConfig) -> float:
    """T = (initial) learning rate / batch size."""
    return config.lam / config.B


def cosine_lr(lambda0: float, t: int, t_f: int) -> float:
    """lambda0 * cos(pi t / (2 t_f)); decays from lambda0 at t=0 to 0 at t=t_f."""
    if not 0 <= t <= t_f:
        raise ValueError(f"step {t} outside the schedule range [0, {t_f}]")
    return lambda0 * math.cos(0.5 * math.pi * t / t_f)


@dataclass
class OptimizerState:
    theta: np.ndarray
    v: np.ndarray
    t: int = 0


def init_state(config: SGDConfig, dim: int) -> OptimizerState:
    theta = np.zeros(dim) if config.theta0 is None else np.asarray(config.theta0, float).copy()
    return OptimizerState(theta=theta, v=np.zeros(dim), t=0)


def _batch(train: np.ndarray, config: SGDConfig, rng: np.random.Generator) -> np.ndarray:
    if config.full_batch:
        return train
    idx = rng.integers(0, train.shape[0], size=config.B)
    return train[idx]


def step_plain(state: OptimizerState, config: SGDConfig, model: LossModel,
               train: np.ndarray, rng: np.random.Generator) -> OptimizerState:
    if config.mu != 0.0:
        raise ValueError("step_plain requires mu = 0")
    lam_t = config.lam_at(state.t)
    grad = model.mean_gradient(state.theta, _batch(train, config, rng))
    theta = state.theta - lam_t * grad - lam_t * config.alpha * state.theta
    if config.beta != 0.0:
        noise_scale = math.sqrt(lam_t * temperature(config)) * config.beta
        theta = theta + noise_scale * rng.standard_normal(theta.shape)
    return OptimizerState(theta=theta, v=state.v, t=state.t + 1)


def step_momentum(state: OptimizerState, config: SGDConfig, model: LossModel,
                  train: np.ndarray, rng: np.random.Generator) -> OptimizerState:
    if config.mu <= 0.0:
        raise ValueError("step_momentum requires mu > 0")
    lam_t = config.lam_at(state.t)
    grad = model.mean_gradient(state.theta, _batch(train, config, rng))
    v = config.mu * state.v + grad + config.alpha * state.theta
    return OptimizerState(theta=state.theta - lam_t * v, v=v, t=state.t + 1)


@dataclass
class TrajectoryRecord:
    """Per-epoch metric series from one optimizer (or diffusion) run."""

    train_loss: np.ndarray
    test_loss: np.ndarray
    train_acc: Optional[np.ndarray]
    test_acc: Optional[np.ndarray]
    theta_epochs: np.ndarray
    thetas: np.ndarray
    final_theta: np.ndarray
    diverged: bool = False
    truncation_epoch: Optional[int] = None

    @property
    def n_epochs(self) -> int:
        return len(self.train_loss)

    def series(self, name: str) -> np.ndarray:
        out = getattr(self, name)
        if out is None:
            raise ValueError(f"run recorded no {name}")
        return out


def run(config: SGDConfig, model: LossModel, pair: DataSetPair,
        epoch_length: Optional[int] = None, record_every: int = 1) -> TrajectoryRecord:
    """Run the configured variant, recording set metrics once per epoch.

    An epoch is ceil(n_train / B) updates unless overridden. The initial point
    is recorded as epoch 0. Any non-finite metric stops the run with the
    diverged flag set and the record truncated at the last finite epoch.
    """
    if epoch_length is None:
        epoch_length = max(1, math.ceil(pair.n_train / config.B))
    if epoch_length < 1:
        raise ValueError("epoch_length must be >= 1")
    rng = rng_from_seed(config.seed, 17)
    state = init_state(config, model.dim)
    stepper = step_momentum if config.mu > 0 else step_plain

    train_loss, test_loss = [], []
    train_acc, test_acc = [], []
    theta_epochs, thetas = [], []
    diverged = False

    def record(epoch: int) -> bool:
        with np.errstate(over="ignore", invalid="ignore"):
            tr = model.train_set_loss(state.theta, pair.train) if np.all(np.isfinite(state.theta)) else float("nan")
            te = model.train_set_loss(state.theta, pair.test) if np.isfinite(tr) else float("nan")
        if not (np.isfinite(tr) and np.isfinite(te)):
            return False
        train_loss.append(tr)
        test_loss.append(te)
        if model.has_accuracy:
            train_acc.append(model.accuracy(state.theta, pair.train))
            test_acc.append(model.accuracy(state.theta, pair.test))
        if epoch % record_every == 0:
            theta_epochs.append(epoch)
            thetas.append(state.theta.copy())
        return True

    record(0)
    n_epochs = config.steps // epoch_length
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, n_epochs + 1):
            for _ in range(epoch_length):
                state = stepper(state, config, model, pair.train, rng)
            if not record(epoch):
                diverged = True
                break

    return TrajectoryRecord(
        train_loss=np.array(train_loss), test_loss=np.array(test_loss),
        train_acc=np.array(train_acc) if model.has_accuracy else None,
        test_acc=np.array(test_acc) if model.has_accuracy else None,
        theta_epochs=np.array(theta_epochs, dtype=int),
        thetas=np.array(thetas) if thetas else np.zeros((0, model.dim)),
        final_theta=state.theta.copy(), diverged=diverged)


def sample_stationary(model: LossModel, train: np.ndarray, config: SGDConfig,
                      n_chains: int = 64, burn_steps: int = 5000,
                      n_collect: int = 400, spacing: int = 100,
                      seed: int = 0, return_momentum: bool = False):
    """Steady-state samples of the optimizer state from a bank of independent chains.

    Vectorizes the update over chains, which makes decorrelated stationary
    sampling cheap: chains are independent, and within-chain draws are spaced.
    Returns parameter samples, shape (n_chains * n_collect,) for 1-d models and
    (n, dim) otherwise; with return_momentum=True returns (thetas, vs) so the
    full optimizer state distribution can be compared (for momentum runs the
    state is the pair, and only the pair distinguishes batch sizes at fixed
    temperature on smooth toy losses).
    """
    rng = rng_from_seed(seed, 23)
    n = train.shape[0]
    if model.dim == 1:
        thetas = np.zeros(n_chains)
        vs = np.zeros(n_chains)
        noise_shape = (n_chains,)
    else:
        thetas = np.zeros((n_chains, model.dim))
        vs = np.zeros((n_chains, model.dim))
        noise_shape = (n_chains, model.dim)

    if config.schedule != CONSTANT:
        raise ValueError("stationary sampling needs a constant learning rate")
    momentum = config.mu > 0
    lam_t = config.lam
    collected, collected_v = [], []
    total = burn_steps + n_collect * spacing
    for t in range(total):
        batch = train[rng.integers(0, n, size=(n_chains, config.B))]
        grad = model.chain_mean_gradient(thetas, batch)
        if momentum:
            vs = config.mu * vs + grad + config.alpha * thetas
            thetas = thetas - lam_t * vs
        else:
            thetas = thetas - lam_t * (grad + config.alpha * thetas)
            if config.beta != 0.0:
                scale = math.sqrt(lam_t * temperature(config)) * config.beta
                thetas = thetas + scale * rng.standard_normal(noise_shape)
        if t >= burn_steps and (t - burn_steps) % spacing == 0:
            collected.append(thetas.copy())
            if return_momentum:
                collected_v.append(vs.copy())
    out = np.concatenate(collected, axis=0)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("stationary sampling diverged; lower the learning rate")
    if return_momentum:
        return out, np.concatenate(collected_v, axis=0)
    return out
