"""Benchmark harness: config-driven sweeps over (seed, epsilon, adversary,
method) with excess-risk accounting against a clean-subset oracle.

Ground truth (the uncorrupted sample, its stable subset, the planted
parameter) is confined to this module: solvers only ever see the
contaminated dataset.  Each grid cell reports the regularized objective
of the learned parameter on the clean stable subset minus that subset's
oracle optimum, so the headline number is exactly the quantity the
robustness guarantees bound.

Runs are deterministic for a fixed config; the worker pool size is taken
from the RD_THREADS environment variable (rows are independent, and the
report order follows the config grid, not completion order).
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .baselines import doro_cvar, dro_objective_eval, erm_subgradient, oracle_solve
from .data import (
    ContaminationSpec,
    Dataset,
    DoroCounterexample,
    FarCluster,
    LabelFlipPlusLeverage,
    contaminate,
    generate_synthetic,
    prepend_ones,
)
from .losses import LossFamily, NormRegularizer
from .robust_mean import stability_filter
from .solver import PDHGConfig, pipeline

METHODS = ("pdhg", "erm", "doro")

REPORT_COLUMNS = (
    "method",
    "adversary",
    "epsilon",
    "seed",
    "excess_clean_objective",
    "param_error",
    "wallclock",
    "oracle_calls",
    "status",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one sweep.

    ``planted`` is either an explicit length-``dim`` coefficient list
    (intercept first) or a spec dict: {"kind": "first_axis" | "random",
    "norm": float, "intercept": float}.  Adversaries are "none",
    "far_cluster", "doro_counterexample", "label_flip", or a dict with a
    "kind" key plus adversary fields; a far-cluster "direction" of
    "planted" aims the outliers along the planted coefficients.
    """

    dim: int
    n_samples: int
    seeds: tuple[int, ...]
    epsilons: tuple[float, ...]
    adversaries: tuple = ("none",)
    methods: tuple[str, ...] = ("pdhg",)
    sigma: float = 1.0
    task: str = "classification"
    loss: str = "hinge"
    reg_exponent: str = "2"
    dro_radius: float = 0.1
    planted: object = None
    noise_std: float = 0.1
    flip_prob: float = 0.0
    covariate_law: str = "gaussian"
    student_dof: float | None = None
    delta_constant: float = 2.0
    w0_bound: float = 10.0
    gamma_dist: float | None = None
    eval_constant: float = 2.0
    max_iters_cap: int = 200_000
    clean_epsilon: float = 1e-6
    erm_iters: int = 2000
    doro_iters: int = 100
    doro_alpha: float = 1.0
    oracle_tol: float = 1e-6

    def __post_init__(self) -> None:
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if list(self.epsilons) != sorted(self.epsilons):
            raise ValueError("epsilon values must be sorted ascending")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        for key in ("seeds", "epsilons", "adversaries", "methods"):
            if key in raw and isinstance(raw[key], list):
                raw[key] = tuple(tuple(v) if isinstance(v, list) else v for v in raw[key])
        return cls(**raw)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class MetricsRow:
    method: str
    adversary: str
    epsilon: float
    seed: int
    excess_clean_objective: float
    param_error: float
    wallclock: float
    oracle_calls: int
    status: str = "ok"


def _resolve_planted(cfg: ExperimentConfig, seed: int) -> np.ndarray:
    spec = cfg.planted
    if spec is None:
        spec = {"kind": "first_axis", "norm": 2.0, "intercept": 0.0}
    if isinstance(spec, (list, tuple, np.ndarray)):
        w = np.asarray(spec, dtype=float)
        if w.shape != (cfg.dim,):
            raise ValueError(f"planted coefficients must have length {cfg.dim}")
        return w
    kind = spec.get("kind", "first_axis")
    norm = float(spec.get("norm", 2.0))
    w = np.zeros(cfg.dim)
    w[0] = float(spec.get("intercept", 0.0))
    if cfg.dim > 1:
        if kind == "first_axis":
            w[1] = norm
        elif kind == "random":
            u = np.random.default_rng(seed + 710_117).standard_normal(cfg.dim - 1)
            w[1:] = norm * u / np.linalg.norm(u)
        else:
            raise ValueError(f"unknown planted kind {kind!r}")
    return w


def _resolve_adversary(spec, planted: np.ndarray, adversary_name_only: bool = False):
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec.get("kind", "none")
    if adversary_name_only:
        return kind
    if kind == "none":
        return None
    if kind == "far_cluster":
        direction = spec.get("direction", "planted")
        if isinstance(direction, str):
            if direction != "planted":
                raise ValueError(f"unknown direction {direction!r}")
            coeffs = planted[1:]
            if coeffs.size == 0 or not np.any(coeffs):
                direction = None
            else:
                direction = tuple(coeffs / np.linalg.norm(coeffs))
        elif direction is not None:
            direction = tuple(float(v) for v in direction)
        return FarCluster(direction=direction, magnitude=spec.get("magnitude"), label=spec.get("label"))
    if kind == "doro_counterexample":
        return DoroCounterexample()
    if kind == "label_flip":
        return LabelFlipPlusLeverage(magnitude=float(spec.get("magnitude", 10.0)))
    raise ValueError(f"unknown adversary kind {kind!r}")


def _solver_config(cfg: ExperimentConfig, epsilon: float, loss: LossFamily) -> PDHGConfig:
    # epsilon = 0 rows run the exact-mean oracle with a small scheduling
    # epsilon, since the robust schedule is undefined at zero corruption
    exact = epsilon == 0.0
    return PDHGConfig(
        epsilon=epsilon if epsilon > 0 else cfg.clean_epsilon,
        sigma=cfg.sigma,
        lipschitz=loss.lipschitz,
        delta_constant=cfg.delta_constant,
        w0_bound=cfg.w0_bound,
        gamma_dist=cfg.gamma_dist,
        reg_exponent=cfg.reg_exponent,
        dro_radius=cfg.dro_radius,
        max_iters_cap=cfg.max_iters_cap,
        exact_oracle=exact,
        eval_constant=cfg.eval_constant,
    )


def run_experiment(cfg: ExperimentConfig) -> list[MetricsRow]:
    """Execute the full grid and return one row per cell, config order."""
    loss = LossFamily(cfg.loss)
    reg = NormRegularizer(cfg.reg_exponent, cfg.dro_radius * loss.lipschitz)

    clean: dict[int, Dataset] = {}
    planted: dict[int, np.ndarray] = {}
    for seed in cfg.seeds:
        planted[seed] = _resolve_planted(cfg, seed)
        clean[seed] = generate_synthetic(
            cfg.dim,
            cfg.n_samples,
            planted[seed],
            sigma=cfg.sigma,
            task=cfg.task,
            noise_std=cfg.noise_std,
            flip_prob=cfg.flip_prob,
            covariate_law=cfg.covariate_law,
            student_dof=cfg.student_dof,
            seed=seed,
        )

    # clean-stable-subset oracle per (seed, epsilon); adversaries share it
    oracle_cache: dict[tuple[int, float], tuple[Dataset, np.ndarray, float]] = {}
    for seed in cfg.seeds:
        for eps in cfg.epsilons:
            ds = clean[seed]
            idx = np.arange(ds.n) if eps == 0.0 else stability_filter(ds, eps)
            eval_ds = prepend_ones(ds.subset(idx))
            res = oracle_solve(eval_ds, loss, reg, tol=cfg.oracle_tol)
            oracle_cache[(seed, eps)] = (eval_ds, res.w, res.objective)

    tasks = []
    for seed in cfg.seeds:
        for eps_index, eps in enumerate(cfg.epsilons):
            for adv_index, adv_spec in enumerate(cfg.adversaries):
                for method in cfg.methods:
                    tasks.append((seed, eps_index, eps, adv_index, adv_spec, method))

    def run_cell(task) -> MetricsRow:
        seed, eps_index, eps, adv_index, adv_spec, method = task
        adv_name = _resolve_adversary(adv_spec, planted[seed], adversary_name_only=True)
        eval_ds, w_star, f_star = oracle_cache[(seed, eps)]
        start = time.perf_counter()
        oracle_calls = 0
        try:
            adversary = _resolve_adversary(adv_spec, planted[seed])
            if eps == 0.0 or adversary is None:
                corrupted = clean[seed]
            else:
                contam_seed = seed * 9973 + eps_index * 131 + adv_index * 17 + 1
                corrupted = contaminate(clean[seed], ContaminationSpec(eps, adversary), seed=contam_seed)
            if method == "pdhg":
                solver_cfg = _solver_config(cfg, eps, loss)
                res = pipeline(corrupted, loss, reg, solver_cfg)
                w = res.w_hat
                oracle_calls = res.oracle_calls * (res.tuning_runs or 1)
            elif method == "erm":
                w = erm_subgradient(prepend_ones(corrupted), loss, reg, cfg.erm_iters)
            else:
                w = doro_cvar(
                    prepend_ones(corrupted), loss, eps, alpha=cfg.doro_alpha,
                    iters=cfg.doro_iters, seed=seed, reg=reg,
                )
            excess = dro_objective_eval(w, eval_ds, loss, reg) - f_star
            param_error = float(np.linalg.norm(w - w_star))
            status = "ok"
        except Exception as exc:  # noqa: BLE001 - a failed cell must not kill the sweep
            excess = math.nan
            param_error = math.nan
            status = f"error: {exc}"
        wallclock = time.perf_counter() - start
        return MetricsRow(method, adv_name, eps, seed, excess, param_error, wallclock, oracle_calls, status)

    workers = max(int(os.environ.get("RD_THREADS", "1")), 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_cell, tasks))
    else:
        rows = [run_cell(t) for t in tasks]
    return rows


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def emit_report(rows: list[MetricsRow], fmt: str, path=None, *, include_wallclock: bool = True) -> str:
    """Serialize rows (CSV with fixed column order and 9-significant-digit
    floats, or JSON with native doubles).  Returns the text; also writes
    it when a path is given."""
    columns = [c for c in REPORT_COLUMNS if include_wallclock or c != "wallclock"]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            d = asdict(row)
            writer.writerow([_fmt(d[c]) for c in columns])
        text = buf.getvalue()
    elif fmt == "json":
        payload = []
        for row in rows:
            d = asdict(row)
            payload.append({c: d[c] for c in columns})
        text = json.dumps(payload, indent=1) + "\n"
    else:
        raise ValueError("format must be 'csv' or 'json'")
    if path is not None:
        Path(path).write_text(text)
    return text


def rows_from_json(text: str) -> list[MetricsRow]:
    return [MetricsRow(**{k: v for k, v in item.items()}) for item in json.loads(text)]


def rows_from_csv(text: str) -> list[MetricsRow]:
    reader = csv.DictReader(io.StringIO(text))
    out = []
    for rec in reader:
        out.append(
            MetricsRow(
                method=rec["method"],
                adversary=rec["adversary"],
                epsilon=float(rec["epsilon"]),
                seed=int(rec["seed"]),
                excess_clean_objective=float(rec["excess_clean_objective"]),
                param_error=float(rec["param_error"]),
                wallclock=float(rec.get("wallclock", 0.0)),
                oracle_calls=int(rec["oracle_calls"]),
                status=rec["status"],
            )
        )
    return out


def all_rows_ok(rows: list[MetricsRow]) -> bool:
    return all(r.status == "ok" for r in rows)
