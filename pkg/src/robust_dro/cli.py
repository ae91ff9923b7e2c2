"""robust-dro command line: dataset generation, contamination, solving,
baselines, robust mean estimation, benchmark sweeps, and report
conversion.

Datasets travel as CSV (``x0,...,x{d-1},y``); solver outputs are JSON
with the learned parameter, the per-iteration objective trace, the
oracle call count and a config echo.  ``bench`` exits nonzero if any
grid cell failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import data as datamod
from .baselines import doro_cvar, dro_objective_eval, erm_subgradient, oracle_solve
from .data import ContaminationSpec, prepend_ones
from .harness import ExperimentConfig, all_rows_ok, emit_report, rows_from_csv, rows_from_json, run_experiment
from .losses import LossFamily, NormRegularizer
from .robust_mean import robust_mean_estimation, trimmed_mean_estimation
from .solver import PDHGConfig, pipeline


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--loss", default="hinge", choices=("lad", "huber", "hinge", "logistic"))
    p.add_argument("--reg-s", default="2", choices=("1", "2", "inf"), help="regularizer norm exponent")
    p.add_argument("--rho", type=float, default=0.1, help="DRO radius")
    p.add_argument("--epsilon", type=float, required=True, help="corruption fraction")
    p.add_argument("--sigma", type=float, default=1.0, help="covariance operator norm bound (sqrt)")
    p.add_argument("--delta-const", type=float, default=2.0)
    p.add_argument("--w0-bound", type=float, default=10.0)
    p.add_argument("--gamma-dist", type=float, default=None, help="skip tuning and use this distance for gamma")
    p.add_argument("--exact-oracle", action="store_true", help="use the exact mean oracle (clean data)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--input", required=True, help="input CSV")
    p.add_argument("--output", default=None, help="output JSON (default stdout)")


def _solver_config(args) -> PDHGConfig:
    return PDHGConfig(
        epsilon=args.epsilon if args.epsilon > 0 else 1e-6,
        sigma=args.sigma,
        lipschitz=1.0,
        delta_constant=args.delta_const,
        w0_bound=args.w0_bound,
        gamma_dist=args.gamma_dist,
        reg_exponent=args.reg_s,
        dro_radius=args.rho,
        exact_oracle=args.exact_oracle or args.epsilon == 0,
    )


def _emit_json(payload: dict, output: str | None) -> None:
    text = json.dumps(payload, indent=1) + "\n"
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_generate(args) -> int:
    planted = np.array([float(v) for v in args.planted.split(",")]) if args.planted else None
    if planted is None:
        planted = np.zeros(args.dim)
        if args.dim > 1:
            planted[1] = args.planted_norm
    ds = datamod.generate_synthetic(
        args.dim,
        args.n,
        planted,
        sigma=args.sigma,
        task=args.task,
        noise_std=args.noise_std,
        flip_prob=args.flip_prob,
        covariate_law=args.law,
        student_dof=args.dof,
        seed=args.seed,
    )
    datamod.to_csv(ds, args.output)
    if args.sidecar:
        datamod.write_sidecar(ds, args.sidecar)
    return 0


def _cmd_corrupt(args) -> int:
    ds = datamod.from_csv(args.input, sigma=args.sigma)
    if args.adversary == "none":
        adv = None
    elif args.adversary == "far-cluster":
        direction = tuple(float(v) for v in args.direction.split(",")) if args.direction else None
        adv = datamod.FarCluster(direction=direction, magnitude=args.magnitude, label=args.label)
    elif args.adversary == "doro":
        adv = datamod.DoroCounterexample()
    else:
        adv = datamod.LabelFlipPlusLeverage(magnitude=args.magnitude if args.magnitude else 10.0)
    out = datamod.contaminate(ds, ContaminationSpec(args.epsilon, adv), seed=args.seed)
    datamod.to_csv(out, args.output)
    if args.sidecar:
        datamod.write_sidecar(out, args.sidecar)
    return 0


def _cmd_solve(args) -> int:
    ds = datamod.from_csv(args.input, sigma=args.sigma)
    loss = LossFamily(args.loss)
    cfg = _solver_config(args)
    reg = NormRegularizer(args.reg_s, args.rho * loss.lipschitz)
    res = pipeline(ds, loss, reg, cfg)
    _emit_json(
        {
            "w_hat": [float(v) for v in res.w_hat],
            "objective_trace": res.objective_trace,
            "oracle_calls": res.oracle_calls,
            "gamma_used": res.gamma_used,
            "iterations": res.t_used,
            "tuning_runs": res.tuning_runs,
            "config": {
                "seed": args.seed,
                **{k: (v if not isinstance(v, np.ndarray) else list(v)) for k, v in asdict(cfg).items()},
            },
        },
        args.output,
    )
    return 0


def _cmd_baseline(args) -> int:
    ds = datamod.from_csv(args.input, sigma=args.sigma)
    loss = LossFamily(args.loss)
    reg = NormRegularizer(args.reg_s, args.rho * loss.lipschitz)
    lifted = prepend_ones(ds)
    payload: dict = {"method": args.method}
    if args.method == "oracle":
        res = oracle_solve(lifted, loss, reg, tol=args.tol)
        payload.update(w_hat=[float(v) for v in res.w], objective=res.objective, converged=res.converged)
    elif args.method == "erm":
        w = erm_subgradient(lifted, loss, reg, args.iters)
        payload.update(w_hat=[float(v) for v in w], objective=dro_objective_eval(w, lifted, loss, reg))
    elif args.method == "doro":
        w = doro_cvar(lifted, loss, args.epsilon, alpha=args.alpha, iters=args.iters, seed=args.seed, reg=reg)
        payload.update(w_hat=[float(v) for v in w], objective=dro_objective_eval(w, lifted, loss, reg))
    else:
        est = trimmed_mean_estimation(ds.covariates, args.epsilon)
        payload.update(estimate=[float(v) for v in est])
    _emit_json(payload, args.output)
    return 0


def _cmd_robust_mean(args) -> int:
    ds = datamod.from_csv(args.input)
    points = ds.covariates
    estimate = robust_mean_estimation(points, args.epsilon)
    _emit_json({"estimate": [float(v) for v in estimate], "epsilon": args.epsilon}, args.output)
    return 0


def _cmd_bench(args) -> int:
    cfg = ExperimentConfig.from_json(args.config)
    rows = run_experiment(cfg)
    emit_report(rows, args.format, args.output)
    return 0 if all_rows_ok(rows) else 1


def _cmd_report(args) -> int:
    text = Path(args.input).read_text()
    rows = rows_from_json(text) if args.input.endswith(".json") else rows_from_csv(text)
    out = emit_report(rows, args.format, args.output)
    if not args.output:
        sys.stdout.write(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robust-dro", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="draw a synthetic dataset to CSV")
    p.add_argument("--dim", type=int, required=True, help="parameter dimension incl. intercept slot")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--planted", default=None, help="comma-separated coefficients, intercept first")
    p.add_argument("--planted-norm", type=float, default=2.0)
    p.add_argument("--task", default="classification", choices=("regression", "classification"))
    p.add_argument("--noise-std", type=float, default=0.1)
    p.add_argument("--flip-prob", type=float, default=0.0)
    p.add_argument("--law", default="gaussian", choices=("gaussian", "student_t"))
    p.add_argument("--dof", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.add_argument("--sidecar", default=None)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("corrupt", help="apply a contamination adversary to a CSV dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--adversary", default="far-cluster", choices=("none", "far-cluster", "doro", "label-flip"))
    p.add_argument("--magnitude", type=float, default=None)
    p.add_argument("--direction", default=None, help="comma-separated vector")
    p.add_argument("--label", type=float, default=None)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.add_argument("--sidecar", default=None)
    p.set_defaults(func=_cmd_corrupt)

    p = sub.add_parser("solve", help="outlier-robust DRO solve of a raw CSV dataset")
    _add_solver_flags(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("baseline", help="run a baseline method")
    p.add_argument("--method", required=True, choices=("oracle", "erm", "doro", "trimmed-mean"))
    p.add_argument("--iters", type=int, default=2000)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-6)
    _add_solver_flags(p)
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("robust-mean", help="robust mean of CSV points")
    p.add_argument("--input", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_robust_mean)

    p = sub.add_parser("bench", help="run a config-driven sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--format", default="csv", choices=("csv", "json"))
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("report", help="convert a report between CSV and JSON")
    p.add_argument("--input", required=True)
    p.add_argument("--format", default="csv", choices=("csv", "json"))
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
