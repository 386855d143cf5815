import json
import math

import numpy as np
import pytest

from pcpo_lab import harness
from pcpo_lab.harness import (ConfigError, EnvironmentConfig, ExperimentConfig, METHODS, compare, config_from_dict,
                              config_to_dict, holdout_evaluation, load_config, read_metrics_csv, save_config, sweep,
                              train)

THRESHOLD = 8.0


def small(method="pcpo", iterations=8, seeds=(0,), **kw):
    return ExperimentConfig(method=method, iterations=iterations, seeds=seeds, episodes_per_batch=10,
                            environment=EnvironmentConfig(threshold=THRESHOLD), **kw)


def csv_bytes(tmp_path, config, name, threshold=None):
    out = tmp_path / name
    train(config.replace(output_dir=str(out)), threshold=threshold)
    return {p.name: p.read_bytes() for p in sorted(out.glob("seed_*.csv"))}


def test_config_round_trip(tmp_path):
    cfg = small(seeds=(3, 4))
    save_config(cfg, tmp_path / "c.json")
    assert load_config(tmp_path / "c.json") == cfg
    data = config_to_dict(cfg)
    data["bogus"] = 1
    with pytest.raises(ConfigError):
        config_from_dict(data)
    data = config_to_dict(cfg)
    data["barrier"]["sharpness"] = 2
    with pytest.raises(ConfigError):
        config_from_dict(data)
    with pytest.raises(ConfigError):
        ExperimentConfig(method="nope")


def test_zero_iterations(tmp_path):
    run = train(small(iterations=0).replace(output_dir=str(tmp_path)))
    rows = read_metrics_csv(tmp_path / "seed_0.csv")
    assert rows == []
    header = (tmp_path / "seed_0.csv").read_text().splitlines()[0].split(",")
    assert header == run.seeds[0].columns
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["seeds"][0]["iterations"] == 0
    assert "exact_jc_0" in summary["seeds"][0]["initial"]


@pytest.mark.parametrize("method", METHODS)
def test_determinism_all_methods(tmp_path, method):
    a = csv_bytes(tmp_path, small(method), "a")
    b = csv_bytes(tmp_path, small(method), "b")
    assert a == b and a


def test_identical_columns_across_methods():
    cols = {m: harness.run_seed(small(m, iterations=1), 0, (THRESHOLD,)).columns for m in METHODS}
    assert len({tuple(c) for c in cols.values()}) == 1


def test_omega_zero_reduction():
    base = small(iterations=15)
    a = harness.run_seed(base.replace(intrinsic=harness.IntrinsicConfig(omega=0.0)), 0, (THRESHOLD,))
    b = harness.run_seed(base.replace(method="pcpo-no-intrinsic"), 0, (THRESHOLD,))
    skip = {"method", "i_max"} | {c for c in a.columns if c.startswith(("intrinsic_", "gate_"))}
    for ra, rb in zip(a.rows, b.rows):
        for col in a.columns:
            if col not in skip:
                assert repr(ra[col]) == repr(rb[col]), col
    assert len(a.rows) == len(b.rows) == 15


def test_infinite_threshold_lagrangian_reduction():
    cfg = ExperimentConfig(iterations=15, seeds=(1,), episodes_per_batch=10)
    lag = harness.run_seed(cfg.replace(method="lagrangian"), 1, (math.inf,))
    unpen = harness.run_seed(cfg.replace(method="pcpo", barrier=harness.BarrierConfig(enabled=False),
                                         intrinsic=harness.IntrinsicConfig(enabled=False)), 1, (math.inf,))
    assert not lag.error and not unpen.error
    thetas = [c for c in lag.columns if c.startswith("theta_new_")]
    for ra, rb in zip(lag.rows, unpen.rows):
        assert [ra[c] for c in thetas] == [rb[c] for c in thetas]
        assert ra["G"] == rb["G"] and ra["f"] == rb["f"]


def test_failed_seed_marker(tmp_path, monkeypatch):
    real = harness.pcpo_update
    state = {"calls": 0}

    def flaky(*args, **kwargs):
        state["calls"] += 1
        if state["calls"] == 3:
            raise FloatingPointError("synthetic failure")
        return real(*args, **kwargs)

    monkeypatch.setattr(harness, "pcpo_update", flaky)
    run = train(small(iterations=4, seeds=(0, 1)).replace(output_dir=str(tmp_path)))
    assert (tmp_path / "seed_0.FAILED").exists()
    assert not (tmp_path / "seed_1.FAILED").exists()
    assert len(run.seeds[0].rows) == 2 and len(run.seeds[1].rows) == 4
    assert run.summary["seeds"][0]["status"] == "failed"
    assert len(read_metrics_csv(tmp_path / "seed_0.csv")) == 2


def test_self_comparison(tmp_path):
    report = compare(small(seeds=(0, 1)), small(seeds=(0, 1)), tmp_path)
    assert all(r["delta"] == 0.0 for r in report.per_seed)
    assert (tmp_path / "comparison.txt").exists() and (tmp_path / "return.svg").exists()


def test_compare_rejects_mismatch():
    with pytest.raises(ConfigError):
        compare(small(seeds=(0,)), small("lagrangian", seeds=(1,)))


def test_single_value_sweep_matches_train(tmp_path):
    cfg = small(iterations=5)
    report = sweep(cfg, "tau", [20.0], tmp_path)
    run = train(cfg)
    assert report.rows[0]["mean_return"] == pytest.approx(run.summary["seeds"][0]["final_exact_j"])
    sub = next(tmp_path.glob("tau_*"))
    assert (sub / "seed_0.csv").read_bytes() == csv_bytes(tmp_path, cfg, "direct")["seed_0.csv"]
    with pytest.raises(ConfigError):
        sweep(cfg, "tau", [])
    with pytest.raises(ConfigError):
        sweep(cfg, "delta", [0.1])


def test_holdout_evaluation():
    cfg = small(iterations=3)
    with pytest.raises(ConfigError):
        holdout_evaluation(cfg, [0, 5])
    out = holdout_evaluation(cfg, [100, 101])
    assert set(out) == {"0"}
    assert len(out["0"]["per_seed"]) == 2


def test_continuous_environments_run():
    for name in ("point_velocity", "point_circle"):
        cfg = ExperimentConfig(iterations=2, seeds=(0,), episodes_per_batch=3, horizon=20,
                               environment=EnvironmentConfig(name=name, threshold=1.0))
        res = harness.run_seed(cfg, 0, (1.0,))
        assert res.error is None, res.error
        assert len(res.rows) == 2 and math.isnan(res.rows[0]["exact_j"])


def test_file_environment(tmp_path):
    from pcpo_lab.envs import random_cmdp
    random_cmdp(np.random.default_rng(0), 3, 2, 1).save(tmp_path / "env.json")
    cfg = ExperimentConfig(iterations=2, seeds=(0,), episodes_per_batch=5,
                           environment=EnvironmentConfig(name="file", params={"path": str(tmp_path / "env.json")},
                                                         threshold=2.0))
    run = train(cfg)
    assert run.thresholds == (2.0,)
    assert run.summary["seeds"][0]["status"] == "ok"


def test_calibration_uses_unconstrained_run():
    cfg = ExperimentConfig(iterations=1, seeds=(0,), episodes_per_batch=10, calibration_iterations=5)
    d = harness.resolve_threshold(cfg)
    calib = harness.run_seed(cfg.replace(method="trpo", iterations=5), cfg.calibration_seed, (math.inf,))
    assert d == pytest.approx(0.5 * calib.final_cost)
