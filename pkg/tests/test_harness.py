"""Sweep runner determinism, report schema, and serialization round-trips."""

import csv
import io
import json
import math

import pytest

from robust_dro.harness import (
    REPORT_COLUMNS,
    ExperimentConfig,
    MetricsRow,
    all_rows_ok,
    emit_report,
    rows_from_csv,
    rows_from_json,
    run_experiment,
)


def tiny_config(**overrides):
    base = dict(
        dim=4,
        n_samples=300,
        seeds=(0, 1),
        epsilons=(0.0, 0.1),
        adversaries=("far_cluster",),
        methods=("pdhg", "erm"),
        task="classification",
        loss="hinge",
        dro_radius=0.1,
        planted={"kind": "first_axis", "norm": 2.0},
        flip_prob=0.1,
        delta_constant=3.0,
        w0_bound=6.0,
        erm_iters=300,
        doro_iters=30,
        oracle_tol=1e-6,
    )
    base.update(overrides)
    return ExperimentConfig.from_dict(base)


def test_config_validation():
    with pytest.raises(ValueError):
        tiny_config(seeds=(1, 1))
    with pytest.raises(ValueError):
        tiny_config(epsilons=(0.1, 0.05))
    with pytest.raises(ValueError):
        tiny_config(methods=("gradient_boosting",))


def test_run_experiment_grid_and_metrics():
    cfg = tiny_config()
    rows = run_experiment(cfg)
    assert len(rows) == len(cfg.seeds) * len(cfg.epsilons) * len(cfg.methods)
    assert all_rows_ok(rows)
    for row in rows:
        assert row.method in cfg.methods
        assert row.epsilon in cfg.epsilons
        assert row.seed in cfg.seeds
        assert row.adversary == "far_cluster"
        assert row.excess_clean_objective >= -2 * cfg.oracle_tol
        assert row.wallclock >= 0.0
    # no contamination: the robust solve sits at the oracle optimum
    clean_pdhg = [r for r in rows if r.epsilon == 0.0 and r.method == "pdhg"]
    assert all(r.excess_clean_objective <= 0.05 for r in clean_pdhg)


def test_run_experiment_deterministic_reports():
    cfg = tiny_config(seeds=(3,), epsilons=(0.1,), methods=("pdhg",))
    text_a = emit_report(run_experiment(cfg), "csv", include_wallclock=False)
    text_b = emit_report(run_experiment(cfg), "csv", include_wallclock=False)
    assert text_a == text_b


def test_emit_report_header_only_for_empty_rows():
    text = emit_report([], "csv")
    assert text == ",".join(REPORT_COLUMNS) + "\n"


def test_report_json_round_trip():
    rows = [
        MetricsRow("pdhg", "none", 0.1, 7, 0.0123456789, 0.5, 1.25, 42),
        MetricsRow("erm", "far_cluster", 0.05, 8, float("nan"), 0.1, 0.5, 0, status="error: boom"),
    ]
    back = rows_from_json(emit_report(rows, "json"))
    assert back[0] == rows[0]
    assert back[1].status == "error: boom"
    assert math.isnan(back[1].excess_clean_objective)


def test_report_csv_schema_and_parse():
    rows = [MetricsRow("pdhg", "none", 0.1, 7, 1.0 / 3.0, 0.5, 1.25, 42)]
    text = emit_report(rows, "csv")
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert list(parsed[0].keys()) == list(REPORT_COLUMNS)
    assert parsed[0]["excess_clean_objective"] == "0.333333333"  # 9 significant digits
    back = rows_from_csv(text)
    assert back[0].excess_clean_objective == pytest.approx(1.0 / 3.0, abs=1e-9)
    assert back[0].oracle_calls == 42


def test_failed_cells_do_not_kill_the_run():
    # student_t with dof <= 2 raises inside generation, which is a config
    # error; per-cell failures instead come from solver preconditions.
    # Force one: epsilon too small for a whole sample at this N.
    cfg = tiny_config(seeds=(0,), epsilons=(0.001,), methods=("pdhg",), n_samples=300)
    rows = run_experiment(cfg)
    assert len(rows) == 1
    assert rows[0].status.startswith("error:")
    assert math.isnan(rows[0].excess_clean_objective)
    assert not all_rows_ok(rows)


def test_planted_spec_variants():
    cfg = tiny_config(planted=[0.0, 1.0, 0.5, -0.5], seeds=(0,), epsilons=(0.0,), methods=("erm",))
    rows = run_experiment(cfg)
    assert all_rows_ok(rows)
    cfg = tiny_config(planted={"kind": "random", "norm": 1.5}, seeds=(0,), epsilons=(0.0,), methods=("erm",))
    assert all_rows_ok(run_experiment(cfg))


def test_doro_method_runs():
    cfg = tiny_config(methods=("doro",), seeds=(0,), epsilons=(0.1,))
    rows = run_experiment(cfg)
    assert all_rows_ok(rows)
    assert rows[0].method == "doro"


def test_worker_pool_matches_serial(monkeypatch):
    cfg = tiny_config(seeds=(0, 1), epsilons=(0.1,), methods=("pdhg", "erm"))
    monkeypatch.setenv("RD_THREADS", "1")
    serial = emit_report(run_experiment(cfg), "csv", include_wallclock=False)
    monkeypatch.setenv("RD_THREADS", "3")
    pooled = emit_report(run_experiment(cfg), "csv", include_wallclock=False)
    assert serial == pooled
