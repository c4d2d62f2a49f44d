"""Experiment driver CLI.

Subcommands:
  gen-data  -- write a seeded regression dataset to CSV
  run       -- single training run, one CSV row per step
  sweep     -- strategy x temperature x seed grid, summary CSV per cell
  verify    -- brute-force oracle suite; nonzero exit on any failure

Configs are flat key-value JSON files. Every output gets a sidecar
<out>.meta.json with the fully resolved config so results are reproducible
from their artifacts alone.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .core import ConfigError, ReweightConfig, Strategy, TemperatureSchedule
from .diagnostics import CSV_COLUMNS
from .optim import StepSizeRule, Trajectory, run_training
from .problems import (
    NonconvexProblem,
    QuadraticProblem,
    RegressionProblem,
    gen_quadratic_suite,
    gen_regression,
)
from . import verify as verify_mod

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3

GEN_DEFAULTS = {
    "p": 64,
    "n": 3200,
    "m": 800,
    "noise_c": 0.01,
    "n_test": 800,
    "seed": 0,
}

# lr calibrated once on the default dataset: the largest power-of-ten
# learning rate at which the uniform baseline both remains stable and is
# still in its descent phase at the 2000-step horizon. 1e-2 is also
# stable but reaches the stationary point by roughly step 700, at which
# point every strategy coincides; 1e-3 keeps the horizon informative.
# The DRO-KL stability contrast uses 1e-2, the largest stable shared lr
# (see configs/dro_kl.json).
RUN_DEFAULTS = {
    "problem": "regression",
    "strategy": "linupper",
    "alpha": 1.0,
    "schedule": "step_drop",
    "r_initial": 100.0,
    "r_final": 1.0,
    "warmup_steps": 100,
    "cap": None,
    "dro_tau": None,
    "stepsize_rule": "fixed",
    "lr": 0.001,
    "batch_size": 32,
    "steps": 2000,
    "seed": 0,
    "momentum": False,
    # regression problem parameters
    "p": 64,
    "n": 3200,
    "m": 800,
    "noise_c": 0.01,
    "n_test": 800,
    "data_seed": 0,
    # quadratic / nonconvex problem parameters
    "M": 64,
    "d": 16,
    "cond_max": 10.0,
}


def _load_config(path, defaults):
    cfg = dict(defaults)
    if path:
        with open(path) as fh:
            user = json.load(fh)
        unknown = set(user) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(user)
    return cfg


def _write_meta(out_path, cfg):
    with open(str(out_path) + ".meta.json", "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _make_problem(cfg):
    name = cfg["problem"]
    if name == "regression":
        data = gen_regression(
            p=cfg["p"], n=cfg["n"], m=cfg["m"], noise_c=cfg["noise_c"],
            seed=cfg["data_seed"], n_test=cfg["n_test"],
        )
        return RegressionProblem(data)
    if name == "quadratic":
        suite = gen_quadratic_suite(
            M=cfg["M"], d=cfg["d"], cond_max=cfg["cond_max"], seed=cfg["data_seed"]
        )
        return QuadraticProblem(suite)
    if name == "nonconvex":
        return NonconvexProblem(n_samples=cfg["M"], dim=cfg["d"], seed=cfg["data_seed"])
    raise ConfigError(f"unknown problem {name!r}")


def _make_reweight_config(cfg):
    schedule = TemperatureSchedule(
        kind=cfg["schedule"],
        r_initial=cfg["r_initial"],
        r_final=cfg["r_final"],
        warmup_steps=cfg["warmup_steps"],
    )
    name = cfg["strategy"]
    if name == "capped":
        cap = cfg["cap"] if cfg["cap"] is not None else 2.0 / cfg["batch_size"]
        return ReweightConfig(strategy=Strategy.LINUPPER, alpha=cfg["alpha"],
                              schedule=schedule, cap=cap)
    if name == "dro_kl":
        tau = cfg["dro_tau"] if cfg["dro_tau"] is not None else cfg["r_final"]
        return ReweightConfig(strategy=Strategy.LINUPPER, alpha=cfg["alpha"],
                              schedule=schedule, dro_tau=tau)
    try:
        strategy = Strategy(name)
    except ValueError:
        raise ConfigError(f"unknown strategy {name!r}") from None
    return ReweightConfig(strategy=strategy, alpha=cfg["alpha"], schedule=schedule)


def _make_stepsize(cfg, problem):
    kind = cfg["stepsize_rule"]
    if kind == "fixed":
        return StepSizeRule(kind="fixed", eta=cfg["lr"])
    if kind == "convex_theory":
        return StepSizeRule(kind="convex_theory", L=problem.L)
    if kind == "sqrt_horizon":
        return StepSizeRule(kind="sqrt_horizon", L=problem.L, horizon_T=cfg["steps"])
    raise ConfigError(f"unknown stepsize_rule {kind!r}")


def _write_trajectory_csv(out_path, traj: Trajectory):
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(CSV_COLUMNS)
        for rec in traj.records:
            writer.writerow(rec.csv_row())


def cmd_gen_data(args) -> int:
    cfg = _load_config(args.config, GEN_DEFAULTS)
    if args.seed is not None:
        cfg["seed"] = args.seed
    data = gen_regression(
        p=cfg["p"], n=cfg["n"], m=cfg["m"], noise_c=cfg["noise_c"],
        seed=cfg["seed"], n_test=cfg["n_test"],
    )
    with open(args.out, "w", newline="") as fh:
        fh.write(data.to_csv())
    _write_meta(args.out, cfg)
    rows, cols = data.X.shape
    print(f"wrote {rows} rows x {cols + 2} columns (seed {cfg['seed']}) to {args.out}")
    return EXIT_OK


def run_one(cfg) -> Trajectory:
    """Execute a single run from a resolved config dict."""
    problem = _make_problem(cfg)
    rw = _make_reweight_config(cfg)
    rule = _make_stepsize(cfg, problem)
    return run_training(
        problem,
        rw,
        rule,
        batch_size=cfg["batch_size"],
        steps=cfg["steps"],
        seed=cfg["seed"],
        momentum=cfg["momentum"],
    )


def cmd_run(args) -> int:
    cfg = _load_config(args.config, RUN_DEFAULTS)
    if args.seed is not None:
        cfg["seed"] = args.seed
    traj = run_one(cfg)
    _write_trajectory_csv(args.out, traj)
    _write_meta(args.out, cfg)
    if traj.diverged:
        print(f"diverged at step {traj.divergence_step}; "
              f"wrote {len(traj.records)} steps to {args.out}")
        return EXIT_DIVERGED
    print(f"converged; wrote {len(traj.records)} steps to {args.out}")
    return EXIT_OK


SWEEP_DEFAULTS = dict(RUN_DEFAULTS)
SWEEP_DEFAULTS.update({
    "strategies": ["uniform", "linupper", "quadratic", "extremes"],
    "r_values": [1.0],
    "seeds": [0, 1, 2, 3, 4],
})


def _sweep_cell(cfg, out_dir, strategy, r, seed):
    cell = dict(cfg)
    cell.update({"strategy": strategy, "r_initial": r, "r_final": r,
                 "schedule": "constant", "seed": seed})
    for key in ("strategies", "r_values", "seeds"):
        cell.pop(key)
    name = f"{strategy}_r{r}_seed{seed}.csv"
    out_path = os.path.join(out_dir, name)
    try:
        traj = run_one(cell)
        _write_trajectory_csv(out_path, traj)
        _write_meta(out_path, cell)
        test_losses = [rec.test_loss for rec in traj.records if rec.test_loss is not None]
        final = test_losses[-1] if test_losses else ""
        auc = float(np.mean(test_losses)) if test_losses else ""
        status = "diverged" if traj.diverged else "ok"
    except Exception as exc:  # record the failure, keep sweeping
        final, auc, status = "", "", f"error: {exc}"
    return {"strategy": strategy, "r": r, "seed": seed,
            "final_test_loss": final, "auc_test_loss": auc, "status": status}


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config, SWEEP_DEFAULTS)
    os.makedirs(args.out, exist_ok=True)
    cells = [
        (strategy, r, seed)
        for strategy in cfg["strategies"]
        for r in cfg["r_values"]
        for seed in cfg["seeds"]
    ]
    threads = args.threads or int(os.environ.get("REWEIGHT_THREADS", "1"))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda c: _sweep_cell(cfg, args.out, *c), cells))
    else:
        rows = [_sweep_cell(cfg, args.out, *c) for c in cells]
    summary_path = os.path.join(args.out, "summary.csv")
    with open(summary_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(["strategy", "r", "seed", "final_test_loss", "auc_test_loss", "status"])
        for row in rows:
            writer.writerow([row["strategy"], row["r"], row["seed"],
                             row["final_test_loss"], row["auc_test_loss"], row["status"]])
    _write_meta(summary_path, cfg)
    print(f"sweep complete: {len(rows)} cells, summary at {summary_path}")
    return EXIT_OK


def cmd_verify(args) -> int:
    ok = verify_mod.run_all(verbose=True)
    return EXIT_OK if ok else EXIT_VERIFY_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reweight",
                                     description="loss-based sample reweighting experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen-data", help="generate the regression dataset CSV")
    p_run = sub.add_parser("run", help="single training run -> trajectory CSV")
    p_sweep = sub.add_parser("sweep", help="strategy x r x seed sweep -> summary CSV")
    p_verify = sub.add_parser("verify", help="run the brute-force oracle suite")

    for p in (p_gen, p_run, p_sweep, p_verify):
        p.add_argument("--config", default=None, help="flat JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (fallback: REWEIGHT_THREADS)")
    p_gen.add_argument("--out", required=True)
    p_run.add_argument("--out", required=True)
    p_sweep.add_argument("--out", required=True, help="output directory")

    p_gen.set_defaults(func=cmd_gen_data)
    p_run.set_defaults(func=cmd_run)
    p_sweep.set_defaults(func=cmd_sweep)
    p_verify.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
