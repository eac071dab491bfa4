"""Temperature-sweep experiment pipeline.

One sweep runs a grid of (learning rate, batch size) pairs across seeds,
budgets epochs inversely with temperature against a reference run, truncates
trailing instability spikes, extracts steady-state medians, and fits the
gap-versus-temperature model (a/T + b) exp(-T/c) to the per-temperature mean
gaps. Outputs are a runs.csv with a fixed schema plus a summary.json; repeated
sweeps with the same config are byte-identical.
"""

from __future__ import annotations

import concurrent.futures
import csv
import json
import math
import os
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import optimize

from .models import LossModel, model_from_config
from .optimizers import COSINE, SGDConfig, TrajectoryRecord, run, temperature
from .sampling import SamplingMode, sample_dataset

VARIANTS = ("plain", "momentum", "cosine", "momentum_cosine")


def epoch_budget(T: float, n_ref: int = 300, t_ref: float = 2e-4) -> int:
    """Epochs for a run at temperature T, scaled from the reference and clamped to [1, 4]x."""
    if T <= 0:
        raise ValueError("temperature must be positive")
    factor = max(1.0, min(4.0, 1.0 + 0.25 * (t_ref / T - 1.0)))
    return round(n_ref * factor)


def detect_spike(series) -> Optional[int]:
    """Index where a trailing instability starts, or None.

    A spike is flagged when the last 7 epochs average above the last 25; the
    truncation point is the first epoch of the maximal trailing run of values
    above the last-25 mean. Series shorter than 25 are never flagged.
    """
    s = np.asarray(series, dtype=float)
    n = len(s)
    if n < 25:
        return None
    m25 = s[-25:].mean()
    if not s[-7:].mean() > m25:
        return None
    i = n
    while i > 0 and s[i - 1] > m25:
        i -= 1
    return i


class LossStats(NamedTuple):
    mean: float
    std: float
    undefined_std: bool


def per_example_loss_stats(model: LossModel, theta, test) -> LossStats:
    """Mean and sample standard deviation (1/(n-1)) of per-example losses on a set."""
    test = np.asarray(test, dtype=float)
    losses = model.losses(theta, test)
    if losses.shape[0] == 1:
        return LossStats(float(losses[0]), float("nan"), True)
    return LossStats(float(losses.mean()), float(losses.std(ddof=1)), False)


def steady_state_metrics(record: TrajectoryRecord, window: int = 50) -> dict:
    """Median of each series over the final window after spike truncation.

    Diverged runs yield no metrics, only the flag. A post-truncation tail
    shorter than the window is used whole and flagged short.
    """
    if record.diverged:
        return {"diverged": True}
    end = record.truncation_epoch if record.truncation_epoch is not None else record.n_epochs
    end = min(end, record.n_epochs)
    if end < 1:
        return {"diverged": True}
    tail = slice(max(0, end - window), end)
    out = {
        "diverged": False,
        "short_window": end < window,
        "used_epochs": end,
        "train_loss": float(np.median(record.train_loss[tail])),
        "test_loss": float(np.median(record.test_loss[tail])),
    }
    out["gap"] = out["test_loss"] - out["train_loss"]
    if record.train_acc is not None:
        out["train_acc"] = float(np.median(record.train_acc[tail]))
        out["test_acc"] = float(np.median(record.test_acc[tail]))
    return out


# ---------------------------------------------------------------------------
# gap-versus-temperature model
# ---------------------------------------------------------------------------

@dataclass
class GapFit:
    a: float
    b: float
    c: float
    rss: float
    converged: bool
    r_squared: float
    n_points: int

    def predict(self, T) -> np.ndarray:
        T = np.asarray(T, dtype=float)
        return (self.a / T + self.b) * np.exp(-T / self.c)


def fit_gap_model(points: Sequence, init=None) -> GapFit:
    """Nonlinear least squares for gap(T) = (a/T + b) exp(-T/c), a and c positive.

    Positivity is enforced by fitting log a and log c; b is unconstrained. The
    fit runs on gaps normalized by their peak magnitude so the convergence
    test (projected gradient below 1e-10 within 500 iterations) is scale-free.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (T, gap) rows")
    T, y = pts[:, 0], pts[:, 1]
    if len(np.unique(T)) < 4:
        raise ValueError("need at least 4 distinct temperatures")
    if np.any(T <= 0):
        raise ValueError("temperatures must be positive")

    scale = max(float(np.max(np.abs(y))), 1e-300)
    ys = y / scale
    if init is None:
        b0 = float(np.min(ys))
        i0 = int(np.argmin(T))
        a0 = max((ys[i0] - b0) * T[i0], 1e-8)
        c0 = 10.0 * float(np.max(T))
    else:
        a0, b0, c0 = init
        a0, c0 = max(a0 / scale, 1e-300), max(c0, 1e-300)
        b0 = b0 / scale

    def residuals(p):
        return (np.exp(p[0]) / T + p[1]) * np.exp(-T / np.exp(p[2])) - ys

    x0 = np.array([math.log(a0), b0, math.log(c0)])
    res = optimize.least_squares(residuals, x0, method="lm", xtol=1e-15, ftol=1e-15,
                                 gtol=1e-12, max_nfev=500 * 4)
    grad_norm = float(np.max(np.abs(res.jac.T @ res.fun))) if res.jac.size else float("inf")
    converged = bool(res.success) and grad_norm < 1e-10
    r = res.fun
    rss = float(r @ r) * scale ** 2
    sstot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - rss / sstot if sstot > 0 else float("nan")
    return GapFit(a=float(np.exp(res.x[0])) * scale, b=float(res.x[1]) * scale,
                  c=float(np.exp(res.x[2])), rss=rss, converged=converged,
                  r_squared=r2, n_points=len(T))


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@dataclass
class SweepConfig:
    model: LossModel
    mode: SamplingMode
    n_train: int
    n_test: int
    pairs: list                  # (learning rate, batch size) pairs
    seeds: list
    variant: str = "plain"
    alpha: float = 5e-4
    beta: float = 0.0
    mu: float = 0.9
    n_ref: int = 300
    t_ref: float = 2e-4
    window: int = 50
    theta0: Optional[tuple] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choices: {VARIANTS}")
        if not self.pairs or not self.seeds:
            raise ValueError("need at least one (lam, B) pair and one seed")
        for lam, b in self.pairs:
            if lam <= 0 or b < 1:
                raise ValueError(f"invalid pair ({lam}, {b})")

    @classmethod
    def from_dict(cls, cfg: dict) -> "SweepConfig":
        cfg = dict(cfg)
        model = model_from_config(cfg.pop("model"))
        sampling = cfg.pop("sampling")
        mode = SamplingMode(mode=sampling.get("mode", "iid_fresh"),
                            pool_size=sampling.get("pool_size"),
                            pool_seed=sampling.get("pool_seed", 0))
        known = {k: cfg[k] for k in ("variant", "alpha", "beta", "mu", "n_ref", "t_ref",
                                     "window", "theta0") if k in cfg}
        pairs = [tuple(p) for p in cfg["pairs"]]
        return cls(model=model, mode=mode, n_train=sampling["n_train"],
                   n_test=sampling["n_test"], pairs=pairs, seeds=list(cfg["seeds"]), **known)


CSV_COLUMNS = ["run_id", "mode", "variant", "lambda", "B", "T", "seed", "epochs",
               "diverged", "truncation_epoch", "train_loss", "test_loss", "gap",
               "train_acc", "test_acc", "sigma_ell_test"]


def _sgd_config(cfg: SweepConfig, lam: float, B: int, seed: int, steps: int) -> SGDConfig:
    momentum = cfg.variant in ("momentum", "momentum_cosine")
    cosine = cfg.variant in ("cosine", "momentum_cosine")
    return SGDConfig(lam=lam, B=B, alpha=cfg.alpha, beta=cfg.beta,
                     mu=cfg.mu if momentum else 0.0,
                     schedule=COSINE if cosine else "constant",
                     t_f=steps if cosine else None,
                     steps=steps, seed=seed, theta0=cfg.theta0)


def run_single(cfg: SweepConfig, lam: float, B: int, seed: int) -> dict:
    """One sweep cell: sample data, budget epochs, run, truncate, extract metrics."""
    T = lam / B
    epochs = epoch_budget(T, cfg.n_ref, cfg.t_ref)
    epoch_length = max(1, math.ceil(cfg.n_train / B))
    pair = sample_dataset(cfg.model, cfg.mode, cfg.n_train, cfg.n_test, seed)
    sgd = _sgd_config(cfg, lam, B, seed, steps=epochs * epoch_length)
    record = run(sgd, cfg.model, pair, epoch_length=epoch_length)
    if not record.diverged:
        record.truncation_epoch = detect_spike(record.train_loss)
    metrics = steady_state_metrics(record, window=cfg.window)

    row = {"run_id": f"{cfg.variant}-lam{lam:g}-B{B}-seed{seed}",
           "mode": cfg.mode.mode, "variant": cfg.variant, "lambda": lam, "B": B,
           "T": T, "seed": seed, "epochs": epochs,
           "diverged": metrics["diverged"],
           "truncation_epoch": record.truncation_epoch if record.truncation_epoch is not None else -1,
           "train_loss": float("nan"), "test_loss": float("nan"), "gap": float("nan"),
           "train_acc": float("nan"), "test_acc": float("nan"),
           "sigma_ell_test": float("nan")}
    if not metrics["diverged"]:
        row.update({k: metrics[k] for k in ("train_loss", "test_loss", "gap") })
        for k in ("train_acc", "test_acc"):
            if k in metrics:
                row[k] = metrics[k]
        end = metrics["used_epochs"]
        kept = record.theta_epochs <= (end - 1)
        theta_last = record.thetas[kept][-1] if kept.any() else record.final_theta
        row["sigma_ell_test"] = per_example_loss_stats(cfg.model, theta_last, pair.test).std
    return row


def _job(args):
    cfg, lam, B, seed = args
    return (lam, B, seed), run_single(cfg, lam, B, seed)


def run_sweep(cfg: SweepConfig, out_dir: str, threads: int = 1) -> dict:
    """Run every (pair, seed) cell, write runs.csv and summary.json, return the summary."""
    os.makedirs(out_dir, exist_ok=True)
    jobs = sorted((float(lam), int(B), int(seed))
                  for lam, B in cfg.pairs for seed in cfg.seeds)
    if threads > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            results = dict(pool.map(_job, [(cfg, *j) for j in jobs]))
    else:
        results = dict(_job((cfg, *j)) for j in jobs)
    rows = [results[j] for j in jobs]

    csv_path = os.path.join(out_dir, "runs.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])

    summary = summarize_sweep(rows)
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
    return summary


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.12g}"
    return x


def summarize_sweep(rows: list) -> dict:
    """Per-temperature aggregates, the gap-model fit, and the prediction checks."""
    valid = [r for r in rows if not r["diverged"]]
    temps = sorted({r["T"] for r in valid})
    per_t = []
    for t in temps:
        sub = [r for r in valid if r["T"] == t]
        entry = {"T": t, "n_runs": len(sub)}
        for key in ("train_loss", "test_loss", "gap"):
            vals = np.array([r[key] for r in sub], dtype=float)
            entry[key] = {"mean": float(vals.mean()),
                          "stderr": float(vals.std(ddof=1) / np.sqrt(len(vals)))
                          if len(vals) > 1 else float("nan")}
        per_t.append(entry)

    summary = {"n_runs": len(rows), "n_diverged": len(rows) - len(valid), "per_T": per_t}
    if len(per_t) >= 4:
        points = [(e["T"], e["gap"]["mean"]) for e in per_t]
        fit = fit_gap_model(points)
        summary["gap_fit"] = {"a": fit.a, "b": fit.b, "c": fit.c, "rss": fit.rss,
                              "converged": fit.converged, "r_squared": fit.r_squared}
        summary["predictions"] = prediction_checks(per_t, fit)
    return summary


def prediction_checks(per_t: list, fit: GapFit) -> dict:
    """The three sweep-level behavior checks.

    A: the gap model fits the per-T mean gaps (converged, a > 0, R^2 > 0.9).
    B: the mean test loss has a strictly interior argmin over the T grid.
    C: the mean train loss is non-decreasing in T within 3 pairwise stderr.
    """
    test_means = np.array([e["test_loss"]["mean"] for e in per_t])
    train_means = np.array([e["train_loss"]["mean"] for e in per_t])
    train_se = np.array([e["train_loss"]["stderr"] for e in per_t])
    argmin = int(np.argmin(test_means))
    interior = 0 < argmin < len(per_t) - 1
    c_ok, worst = True, 0.0
    for i in range(len(per_t) - 1):
        se = math.hypot(train_se[i], train_se[i + 1])
        drop = train_means[i] - train_means[i + 1]
        worst = max(worst, drop - 3 * se)
        if drop > 3 * se:
            c_ok = False
    return {
        "A_gap_fit": {"passed": bool(fit.converged and fit.a > 0
                                     and np.isfinite(fit.r_squared) and fit.r_squared > 0.9),
                      "converged": fit.converged, "a": fit.a, "r_squared": fit.r_squared},
        "B_interior_optimum": {"passed": bool(interior), "argmin_index": argmin,
                               "n_temperatures": len(per_t)},
        "C_train_loss_monotone": {"passed": bool(c_ok), "worst_violation": worst},
    }
