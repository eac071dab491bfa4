"""Command-line front end.

Subcommands:
    sweep    run a temperature sweep from a JSON config into an output directory
    verify   run one named invariant suite and write a JSON report
    fit      fit the gap-versus-temperature model to a (T, gap) CSV
    density  write the steady-state density grid for one sampled train set
    approx   approximation-versus-exact comparison table for one ensemble

Exit codes: 0 success, 1 configuration error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import approximations as ap
from . import averaging as av
from .harness import SweepConfig, fit_gap_model, run_sweep
from .models import model_from_config
from .sampling import SamplingMode, sample_dataset
from .steady_state import axis_for_train_sets, grid_boltzmann_density, uniform_axis
from .verify import SUITES, run_suite


def _load_config(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _sampling_mode(cfg: dict) -> SamplingMode:
    return SamplingMode(mode=cfg.get("mode", "iid_fresh"),
                        pool_size=cfg.get("pool_size"),
                        pool_seed=cfg.get("pool_seed", 0))


def cmd_sweep(args) -> int:
    cfg_dict = _load_config(args.config)
    if args.seed is not None:
        cfg_dict["seeds"] = [args.seed]
    cfg = SweepConfig.from_dict(cfg_dict)
    summary = run_sweep(cfg, args.out, threads=args.threads)
    print(f"{summary['n_runs']} runs ({summary['n_diverged']} diverged) -> {args.out}")
    if "predictions" in summary:
        for key, res in summary["predictions"].items():
            print(f"  {key}: {'pass' if res['passed'] else 'FAIL'}")
    return 0


def cmd_verify(args) -> int:
    report = run_suite(args.suite)
    for c in report["checks"]:
        status = "pass" if c["passed"] else "FAIL"
        if not c.get("asserted", True):
            status = "info"
        print(f"[{status}] {c['name']}: value={c['value']:.6g} tolerance={c['tolerance']:.6g}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0 if report["passed"] else 2


def cmd_fit(args) -> int:
    points = np.loadtxt(args.points, delimiter=",", skiprows=1, ndmin=2)
    fit = fit_gap_model(points[:, :2])
    out = {"a": fit.a, "b": fit.b, "c": fit.c, "rss": fit.rss,
           "converged": fit.converged, "r_squared": fit.r_squared}
    print(json.dumps(out, indent=2))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(out, fh, indent=2)
            fh.write("\n")
    return 0


def cmd_density(args) -> int:
    cfg = _load_config(args.config)
    model = model_from_config(cfg["model"])
    sampling = cfg["sampling"]
    pair = sample_dataset(model, _sampling_mode(sampling), sampling["n_train"],
                          sampling["n_test"], seed=cfg.get("seed", 0))
    T = cfg["T"]
    alpha, beta = cfg.get("alpha", 0.0), cfg.get("beta", 0.0)
    if "grid" in cfg:
        axes = tuple(uniform_axis(lo, hi, n) for lo, hi, n in cfg["grid"])
    else:
        axes = (axis_for_train_sets(model, [pair.train], T, alpha, beta,
                                    n_nodes=cfg.get("n_nodes", 513)),)
    dens, *_ = grid_boltzmann_density(model, pair.train, T, axes, alpha=alpha, beta=beta)
    dens.to_csv(args.out)
    print(f"density grid ({dens.values.size} nodes, logZ={dens.logZ:.6g}) -> {args.out}")
    return 0


def cmd_approx(args) -> int:
    cfg = _load_config(args.config)
    model = model_from_config(cfg["model"])
    sampling = cfg["sampling"]
    ens = av.build_ensemble(
        model, _sampling_mode(sampling), sampling["n_train"], sampling["n_test"],
        cfg.get("m", 2000), cfg.get("seed", 0),
        av.EnsembleConfig(T=cfg["T"], alpha=cfg.get("alpha", 0.0),
                          beta=cfg.get("beta", 0.0), n_nodes=cfg.get("n_nodes", 401)))
    stats = ap.compute_potential_stats(ens)
    exact = av.gap_direct(ens)
    ln = ap.lognormal_gap(stats)
    bounds = ap.lognormal_gap_upper_bounds(stats)
    dens_mu = ap.mean_dataset_density(model, sampling["n_train"], cfg["T"],
                                      alpha=cfg.get("alpha", 0.0),
                                      beta=cfg.get("beta", 0.0), axes=ens.axes)
    dg = ap.delta_method_gap(stats, dens_mu)

    def rel(x):
        return abs(x - exact.value) / abs(exact.value) if exact.value else float("nan")

    rows = [
        ("gap_exact", exact.value, exact.value, 0.0, ""),
        ("gap_lognormal", exact.value, ln.value, rel(ln.value), ln.regime),
        ("gap_lognormal_small_exponent", exact.value, ln.small_exponent_value,
         rel(ln.small_exponent_value), f"mean_exponent={ln.mean_exponent:.3g}"),
        ("gap_delta_method", exact.value, dg.value, rel(dg.value), ""),
        ("bound_generic", exact.value, bounds.generic, float("nan"),
         f"mean_sigma_g2={bounds.mean_sigma_g2:.3g}"),
        ("bound_sgd_large_sigma", exact.value, bounds.sgd_large_sigma, float("nan"),
         "valid when sigma_g^2 >> 1"),
        ("bound_sgd_small_sigma", exact.value, bounds.sgd_small_sigma, float("nan"),
         "valid when sigma_g^2 << 1"),
    ]
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["quantity", "exact", "approx", "relative_error", "validity"])
        for r in rows:
            writer.writerow([r[0], f"{r[1]:.10g}", f"{r[2]:.10g}", f"{r[3]:.6g}", r[4]])
    print(f"approximation table -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaplab",
                                     description="generalization-gap laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run a temperature sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=None,
                   help="replace the config's seed list with this single seed")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run one invariant suite")
    p.add_argument("--suite", required=True, choices=sorted(SUITES))
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("fit", help="fit the gap-versus-temperature model")
    p.add_argument("--points", required=True, help="CSV with header and T,gap columns")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("density", help="write a steady-state density grid as CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("approx", help="approximation-versus-exact comparison table")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_approx)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (KeyError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
