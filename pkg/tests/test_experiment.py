import dataclasses
import json
from pathlib import Path

import numpy as np
import pytest

from v2x_aoi.ddpg import AgentConfig
from v2x_aoi.environment import EnvConfig
from v2x_aoi.experiment import (CSV_HEADER, ConfigError, ExperimentConfig, MetricsRecord, apply_sweep,
                                config_from_dict, config_hash, expected_cells, load_config, plan_cells,
                                read_metrics, run_experiment, sweep_summary, write_metrics)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def tiny_config(**kw):
    base = dict(scenario="tiny", env=EnvConfig.create(3, periods=8),
                agent=AgentConfig(episodes=2, hidden=(8, 8), batch_size=4),
                sweep_var="max_coverage", sweep_values=(100.0, 200.0), replications=2)
    base.update(kw)
    return ExperimentConfig(**base)


def rec(algo, value, aoi, seed=0):
    return MetricsRecord("s", algo, "packet_size", value, seed, aoi, 0.5, -10.0)


def test_csv_header_exact():
    assert ",".join(CSV_HEADER) == ("scenario,algorithm,sweep_var,sweep_value,seed,norm_aoi,"
                                    "delivery_rate,mean_episode_reward,wallclock_s")


@pytest.mark.parametrize("name,points", [("packet_size_m10", 6), ("coverage_m10", 7), ("power_m10", 5),
                                         ("speed_groups_m10", 14)])
def test_shipped_config_row_counts(name, points):
    cfg = load_config(CONFIGS / f"{name}.yaml", replications=3)
    assert cfg.env.vehicles == 10
    assert len(cfg.points()) == points
    assert len(expected_cells(cfg)) * cfg.replications == points * 4 * 3


def test_every_config_loads():
    for path in sorted(CONFIGS.glob("*.yaml")):
        for profile in (None, "desk", "paper"):
            load_config(path, profile)


def test_desk_profile():
    cfg = load_config(CONFIGS / "coverage_m10.yaml", "desk")
    assert cfg.env.vehicles == 4 and cfg.agent.episodes == 200
    assert cfg.env.state_size == 210


def test_coverage_sweep_sets_gm_radius():
    env = apply_sweep(EnvConfig.create(4), "max_coverage", 350)
    assert env.max_coverage == env.gm.radius == 350.0


def test_speed_group_sweep():
    env = apply_sweep(EnvConfig.create(4), "speed_group", "v2")
    assert env.vehicles == 4
    with pytest.raises(ConfigError):
        apply_sweep(env, "speed_group", "v9")


@pytest.mark.parametrize("raw", [
    {"sweep_var": "packet_size", "sweep_values": [3]},
    {"scenario": "x", "sweep_var": "bogus", "sweep_values": [3]},
    {"scenario": "x", "sweep_values": []},
    {"scenario": "x", "replications": 0},
    {"scenario": "x", "algorithms": ["PPO"]},
    {"scenario": "x", "mystery": 1},
    {"scenario": "x", "env": {"slots": 9}},
    {"scenario": "x", "agent": {"discount": 2.0}},
    {"scenario": "x", "env": {"warp": 1}},
])
def test_invalid_configs_raise_before_running(raw):
    with pytest.raises(ConfigError):
        config_from_dict(raw)


def test_unknown_profile():
    with pytest.raises(ConfigError):
        config_from_dict({"scenario": "x"}, "huge")


def test_config_hash_stable_and_sensitive():
    a, b = tiny_config(), tiny_config()
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(dataclasses.replace(a, base_seed=1))


def test_seeds_follow_base():
    assert tiny_config(base_seed=40, replications=3).seeds() == [40, 41, 42]


def test_metrics_round_trip(tmp_path):
    records = [rec("MAX-GM", "3", 0.123456789012345, 1), rec("RND-GM", "3", 0.5, 2)]
    write_metrics(tmp_path / "m.csv", records)
    assert read_metrics(tmp_path / "m.csv") == records


def test_summary_examples():
    s = sweep_summary([rec("MAX-GM", "3", 0.2), rec("MAX-GM", "3", 0.4, 1), rec("RND-GM", "3", 0.7)])
    cell = s.cell("MAX-GM", "3")
    assert cell["norm_aoi_mean"] == pytest.approx(0.3)
    assert cell["norm_aoi_stderr"] == pytest.approx(0.1)
    single = s.cell("RND-GM", "3")
    assert single["norm_aoi_mean"] == 0.7 and single["norm_aoi_stderr"] == 0.0
    same = sweep_summary([rec("OMA-GM", "3", 0.6, i) for i in range(5)]).cell("OMA-GM", "3")
    assert same["norm_aoi_stderr"] == 0.0


def test_summary_gap_report():
    s = sweep_summary([rec("MAX-GM", "3", 0.2)], expected=[("MAX-GM", "3"), ("OMA-GM", "3")])
    assert s.gaps == [("OMA-GM", "3")]


def test_train_once_plan():
    cfg = tiny_config(train_once=True)
    cells = plan_cells(cfg)
    ddpg = [c for c in cells if c.algorithm == "DDPG-GM"]
    assert len(ddpg) == 1 and ddpg[0].labels == ("100", "200")
    assert len(cells) == 1 + 3 * 2


def test_run_experiment_rows_and_determinism(tmp_path):
    cfg = tiny_config()
    records = run_experiment(cfg, tmp_path / "a")
    assert len(records) == 2 * 4 * 2
    assert {(r.algorithm, r.sweep_value) for r in records} == set(expected_cells(cfg))
    run_experiment(cfg, tmp_path / "b")
    for name in ("metrics.csv", "summary.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["config_hash"] == config_hash(cfg) and manifest["base_seed"] == 0
    assert (tmp_path / "a" / "cells" / "curve_000_000.csv").exists()
    assert all(0 <= r.delivery_rate <= 1 and np.isfinite(r.norm_aoi) for r in records)


def test_parallel_workers_match_serial(tmp_path):
    cfg = tiny_config(algorithms=("MAX-GM", "OMA-GM"))
    run_experiment(cfg, tmp_path / "serial")
    run_experiment(cfg, tmp_path / "pool", workers=2)
    assert (tmp_path / "serial" / "metrics.csv").read_bytes() == (tmp_path / "pool" / "metrics.csv").read_bytes()


def test_wallclock_optional(tmp_path):
    cfg = tiny_config(algorithms=("MAX-GM",), replications=1)
    plain = run_experiment(cfg, tmp_path / "p")
    timed = run_experiment(cfg, tmp_path / "t", record_wallclock=True)
    assert plain[0].wallclock_s is None and timed[0].wallclock_s >= 0
    assert plain[0].norm_aoi == timed[0].norm_aoi
