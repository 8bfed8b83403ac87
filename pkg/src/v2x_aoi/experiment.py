"""Scenario configs, sweep orchestration and metrics files.

Replication ``i`` of every cell evaluates on environment seed ``base_seed + i``.
DDPG-GM agents train on seeds ``base_seed + train_seed_offset + e`` so training
and evaluation episodes never coincide.
"""

from __future__ import annotations

import copy
import csv
import dataclasses
import hashlib
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence, Union

import numpy as np
import yaml

from .baselines import BaselineKind, run_baseline_episode
from .channel import ChannelConfig
from .ddpg import AgentConfig, DDPGAgent, RewardCurve, evaluate_policy, train
from .environment import EnvConfig, V2XEnv
from .matching import GmConfig
from .mobility import HighwayConfig

CSV_HEADER = ("scenario", "algorithm", "sweep_var", "sweep_value", "seed", "norm_aoi",
              "delivery_rate", "mean_episode_reward", "wallclock_s")
SUMMARY_HEADER = ("algorithm", "sweep_value", "count", "norm_aoi_mean", "norm_aoi_stderr",
                  "delivery_rate_mean", "delivery_rate_stderr")
SWEEP_VARS = ("packet_size", "max_coverage", "max_power", "speed_group")
ALGORITHMS = ("DDPG-GM", "MAX-GM", "RND-GM", "OMA-GM")
SPEED_GROUPS = {
    "v1": (90.0, 110.0, 130.0, 130.0, 110.0, 90.0),
    "v2": (40.0, 60.0, 80.0, 80.0, 60.0, 40.0),
}
PROFILES = {
    "desk": {"env": {"vehicles": 4}, "agent": {"episodes": 200}},
    "paper": {},
}
from . import __version__ as CODE_VERSION


class ConfigError(ValueError):
    """Invalid experiment configuration, raised before any run starts."""


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    env: EnvConfig = field(default_factory=EnvConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    sweep_var: str = "packet_size"
    sweep_values: tuple = (3.0,)
    replications: int = 10
    base_seed: int = 0
    output: str = "runs"
    algorithms: tuple = ALGORITHMS
    cross_var: Optional[str] = None
    cross_values: tuple = ()
    train_once: bool = False
    train_seed_offset: int = 1_000_000

    def __post_init__(self):
        object.__setattr__(self, "sweep_values", tuple(self.sweep_values))
        object.__setattr__(self, "cross_values", tuple(self.cross_values))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if not self.scenario:
            raise ConfigError("scenario name is required")
        for var in (self.sweep_var, self.cross_var):
            if var is not None and var not in SWEEP_VARS:
                raise ConfigError(f"unknown sweep variable {var!r}; expected one of {SWEEP_VARS}")
        if not self.sweep_values:
            raise ConfigError("sweep_values must not be empty")
        if self.cross_var is not None and not self.cross_values:
            raise ConfigError("cross_values must not be empty when cross_var is set")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown or not self.algorithms:
            raise ConfigError(f"unknown algorithms {sorted(unknown)}")
        self.points()  # surfaces bad sweep values before anything runs

    @property
    def sweep_label(self) -> str:
        return self.sweep_var if self.cross_var is None else f"{self.sweep_var}/{self.cross_var}"

    def points(self) -> list[tuple[str, EnvConfig]]:
        """(label, env config) per sweep point, in file order."""
        out = []
        for v in self.sweep_values:
            env = apply_sweep(self.env, self.sweep_var, v)
            if self.cross_var is None:
                out.append((_label(v), env))
                continue
            for c in self.cross_values:
                out.append((f"{_label(v)}/{_label(c)}", apply_sweep(env, self.cross_var, c)))
        return out

    def seeds(self) -> list[int]:
        return [self.base_seed + i for i in range(self.replications)]


def _label(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (list, tuple)):
        return "-".join(_label(x) for x in v)
    return format(float(v), "g")


def speed_group(value) -> tuple[float, ...]:
    if isinstance(value, str):
        if value not in SPEED_GROUPS:
            raise ConfigError(f"unknown speed group {value!r}")
        return SPEED_GROUPS[value]
    return tuple(float(v) for v in value)


def apply_sweep(env: EnvConfig, var: str, value) -> EnvConfig:
    try:
        if var == "packet_size":
            size = tuple(value) if isinstance(value, (list, tuple)) else float(value)
            return env.replace(packet_size_kb=size)
        if var == "max_coverage":
            return env.replace(max_coverage=float(value), gm=dataclasses.replace(env.gm, radius=float(value)))
        if var == "max_power":
            return env.replace(max_power=float(value))
        if var == "speed_group":
            h = env.highway
            highway = HighwayConfig.from_speed_group(
                speed_group(value), vehicle_count=h.vehicle_count, road_length=h.road_length,
                lane_width=h.lane_width, spacing_factor=h.spacing_factor)
            return env.replace(highway=highway)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"cannot apply {var}={value!r}: {exc}") from exc
    raise ConfigError(f"unknown sweep variable {var!r}")


# ---------------------------------------------------------------- parsing


def _deep_merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in (extra or {}).items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _build(cls, raw: Optional[dict], section: str):
    raw = dict(raw or {})
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"unknown keys in {section}: {sorted(unknown)}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {section}: {exc}") from exc


def env_from_dict(raw: Optional[dict]) -> EnvConfig:
    raw = dict(raw or {})
    vehicles = int(raw.pop("vehicles", 4))
    highway = dict(raw.pop("highway", None) or {})
    speeds = highway.pop("speed_group", None)
    highway.setdefault("vehicle_count", vehicles)
    if highway["vehicle_count"] != vehicles:
        raise ConfigError("env.vehicles and env.highway.vehicle_count disagree")
    if speeds is not None:
        try:
            hw = HighwayConfig.from_speed_group(speed_group(speeds), **highway)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid env.highway: {exc}") from exc
    else:
        hw = _build(HighwayConfig, highway, "env.highway")
    channel = _build(ChannelConfig, raw.pop("channel", None), "env.channel")
    gm_raw = raw.pop("gm", None)
    max_cov = float(raw.get("max_coverage", 200.0))
    gm = _build(GmConfig, _deep_merge({"radius": max_cov}, gm_raw or {}), "env.gm")
    if isinstance(raw.get("packet_size_kb"), list):
        raw["packet_size_kb"] = tuple(raw["packet_size_kb"])
    return _build(EnvConfig, {**raw, "highway": hw, "channel": channel, "gm": gm}, "env")


def env_to_dict(env: EnvConfig) -> dict:
    highway = dataclasses.asdict(env.highway)
    return {
        "vehicles": env.vehicles,
        "slots": env.slots,
        "periods": env.periods,
        "slot_duration": env.slot_duration,
        "period_duration": env.period_duration,
        "max_coverage": env.max_coverage,
        "max_power": env.max_power,
        "packet_size_kb": list(env.packet_size_kb) if isinstance(env.packet_size_kb, tuple) else env.packet_size_kb,
        "highway": {k: list(v) if isinstance(v, tuple) else v for k, v in highway.items()},
        "channel": dataclasses.asdict(env.channel),
        "gm": dataclasses.asdict(env.gm),
    }


def config_from_dict(raw: dict, profile: Optional[str] = None) -> ExperimentConfig:
    raw = dict(raw)
    profiles = raw.pop("profiles", {}) or {}
    if profile is not None:
        if profile not in PROFILES and profile not in profiles:
            raise ConfigError(f"unknown profile {profile!r}")
        raw = _deep_merge(_deep_merge(raw, PROFILES.get(profile, {})), profiles.get(profile, {}))
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    env = env_from_dict(raw.pop("env", None))
    agent_raw = dict(raw.pop("agent", None) or {})
    if "hidden" in agent_raw:
        agent_raw["hidden"] = tuple(agent_raw["hidden"])
    agent = _build(AgentConfig, agent_raw, "agent")
    if "scenario" not in raw:
        raise ConfigError("scenario name is required")
    try:
        return ExperimentConfig(env=env, agent=agent, **raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = {
        "scenario": cfg.scenario,
        "env": env_to_dict(cfg.env),
        "agent": {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(cfg.agent).items()},
        "sweep_var": cfg.sweep_var,
        "sweep_values": [list(v) if isinstance(v, tuple) else v for v in cfg.sweep_values],
        "replications": cfg.replications,
        "base_seed": cfg.base_seed,
        "output": cfg.output,
        "algorithms": list(cfg.algorithms),
        "train_once": cfg.train_once,
        "train_seed_offset": cfg.train_seed_offset,
    }
    if cfg.cross_var is not None:
        out["cross_var"] = cfg.cross_var
        out["cross_values"] = list(cfg.cross_values)
    return out


def load_config(path: Union[str, Path], profile: Optional[str] = None, **overrides) -> ExperimentConfig:
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    cfg = config_from_dict(raw, profile)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(config_to_dict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------- metrics


@dataclass
class MetricsRecord:
    scenario: str
    algorithm: str
    sweep_var: str
    sweep_value: str
    seed: int
    norm_aoi: float
    delivery_rate: float
    mean_episode_reward: float
    wallclock_s: Optional[float] = None

    def row(self) -> list[str]:
        wall = "" if self.wallclock_s is None else f"{self.wallclock_s:.3f}"
        return [self.scenario, self.algorithm, self.sweep_var, self.sweep_value, str(self.seed),
                repr(float(self.norm_aoi)), repr(float(self.delivery_rate)),
                repr(float(self.mean_episode_reward)), wall]


def write_metrics(path: Union[str, Path], records: Sequence[MetricsRecord]):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow(r.row())
    Path(path).write_text(buf.getvalue())


def read_metrics(path: Union[str, Path]) -> list[MetricsRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        out = []
        for row in reader:
            wall = float(row[8]) if row[8] else None
            out.append(MetricsRecord(row[0], row[1], row[2], row[3], int(row[4]), float(row[5]),
                                     float(row[6]), float(row[7]), wall))
    return out


def write_curve(path: Union[str, Path], curve: RewardCurve):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("episode", "episode_reward", "trailing50_mean"))
    for e, r, tm in curve.rows():
        writer.writerow((e, repr(float(r)), "" if tm is None else repr(tm)))
    Path(path).write_text(buf.getvalue())


def write_manifest(out_dir: Union[str, Path], cfg: ExperimentConfig, command: str, extra: Optional[dict] = None):
    manifest = {
        "command": command,
        "scenario": cfg.scenario,
        "config_hash": config_hash(cfg),
        "base_seed": cfg.base_seed,
        "code_version": CODE_VERSION,
        "numpy_version": np.__version__,
        "csv_header": ",".join(CSV_HEADER),
        "config": config_to_dict(cfg),
    }
    manifest.update(extra or {})
    Path(out_dir, "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- running


@dataclass
class Cell:
    """One unit of work: an algorithm over one or more sweep points."""

    algorithm: str
    labels: tuple
    envs: tuple
    index: int


def train_agent(cfg: ExperimentConfig, env_cfg: EnvConfig, callback=None) -> tuple[DDPGAgent, RewardCurve]:
    env = V2XEnv(env_cfg)
    agent = DDPGAgent(env_cfg.state_size, env_cfg.action_size, cfg.agent, seed=cfg.base_seed)
    return train(env, agent, cfg.agent.episodes, seed=cfg.base_seed + cfg.train_seed_offset, callback=callback)


def _episode_ddpg(agent: DDPGAgent, env_cfg: EnvConfig, seed: int):
    stats = evaluate_policy(V2XEnv(env_cfg), agent, [seed])
    return stats["norm_aoi"], stats["delivery_rate"], stats["episode_reward"]


def _run_cell(cfg: ExperimentConfig, cell: Cell, cell_dir: Optional[str], record_wallclock: bool,
              agent_path: Optional[str] = None) -> list[MetricsRecord]:
    records = []
    agent = None
    if cell.algorithm == "DDPG-GM" and agent_path is not None:
        agent = DDPGAgent.load(agent_path, cfg.agent)
    for pos, (label, env_cfg) in enumerate(zip(cell.labels, cell.envs)):
        if cell.algorithm == "DDPG-GM" and agent_path is None and (agent is None or not cfg.train_once):
            agent, curve = train_agent(cfg, env_cfg)
            if cell_dir is not None:
                write_curve(Path(cell_dir, f"curve_{cell.index:03d}_{pos:03d}.csv"), curve)
        for seed in cfg.seeds():
            start = time.perf_counter()
            if cell.algorithm == "DDPG-GM":
                aoi, rate, ret = _episode_ddpg(agent, env_cfg, seed)
            else:
                m = run_baseline_episode(BaselineKind(cell.algorithm), env_cfg, seed)
                aoi, rate, ret = m.norm_aoi, m.delivery_rate, m.episode_reward
            wall = time.perf_counter() - start if record_wallclock else None
            records.append(MetricsRecord(cfg.scenario, cell.algorithm, cfg.sweep_label, label, seed,
                                         aoi, rate, ret, wall))
    if cell_dir is not None:
        write_metrics(Path(cell_dir, f"cell_{cell.index:03d}.csv"), records)
    return records


def plan_cells(cfg: ExperimentConfig) -> list[Cell]:
    points = cfg.points()
    cells = []
    for algo in cfg.algorithms:
        if algo == "DDPG-GM" and cfg.train_once:
            cells.append(Cell(algo, tuple(l for l, _ in points), tuple(e for _, e in points), 0))
            continue
        for label, env in points:
            cells.append(Cell(algo, (label,), (env,), 0))
    for idx, cell in enumerate(cells):
        cell.index = idx
    return cells


def _order_key(cfg: ExperimentConfig):
    labels = [l for l, _ in cfg.points()]
    return lambda r: (labels.index(r.sweep_value), ALGORITHMS.index(r.algorithm), r.seed)


def run_experiment(cfg: ExperimentConfig, out_dir: Optional[Union[str, Path]] = None, workers: int = 1,
                   record_wallclock: bool = False, agent_path: Optional[str] = None,
                   command: str = "sweep") -> list[MetricsRecord]:
    """Run every (sweep point, algorithm, replication) and write ``metrics.csv``.

    With ``agent_path`` the DDPG-GM cells evaluate that checkpoint instead of training.
    """
    out = Path(out_dir if out_dir is not None else cfg.output)
    cell_dir = out / "cells"
    cell_dir.mkdir(parents=True, exist_ok=True)
    cells = plan_cells(cfg)
    if workers <= 1:
        chunks = [_run_cell(cfg, c, str(cell_dir), record_wallclock, agent_path) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_cell, cfg, c, str(cell_dir), record_wallclock, agent_path) for c in cells]
            chunks = [f.result() for f in futures]
    records = sorted((r for chunk in chunks for r in chunk), key=_order_key(cfg))
    write_metrics(out / "metrics.csv", records)
    summary = sweep_summary(records, expected=expected_cells(cfg))
    summary.write(out / "summary.csv")
    write_manifest(out, cfg, command, {"workers": workers, "rows": len(records)})
    return records


def expected_cells(cfg: ExperimentConfig) -> list[tuple[str, str]]:
    return [(a, l) for l, _ in cfg.points() for a in cfg.algorithms]


# ---------------------------------------------------------------- summary


@dataclass
class SweepSummary:
    rows: list[dict]
    gaps: list[tuple[str, str]]

    def cell(self, algorithm: str, value: str) -> dict:
        for r in self.rows:
            if r["algorithm"] == algorithm and r["sweep_value"] == value:
                return r
        raise KeyError((algorithm, value))

    def write(self, path: Union[str, Path]):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(SUMMARY_HEADER)
        for r in self.rows:
            writer.writerow([r["algorithm"], r["sweep_value"], r["count"]] +
                            [repr(r[k]) for k in SUMMARY_HEADER[3:]])
        for algo, value in self.gaps:
            writer.writerow([algo, value, 0, "", "", "", ""])
        Path(path).write_text(buf.getvalue())


def _mean_stderr(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        return float(arr.mean()), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / np.sqrt(arr.size))


def sweep_summary(source, expected: Optional[Sequence[tuple[str, str]]] = None) -> SweepSummary:
    """Mean and standard error per (algorithm, sweep value).

    ``source`` is a list of records or of metrics CSV paths. Cells listed in
    ``expected`` without any record are reported in ``gaps``.
    """
    if isinstance(source, (str, Path)):
        source = [source]
    records: list[MetricsRecord] = []
    for item in source:
        if isinstance(item, MetricsRecord):
            records.append(item)
        else:
            records.extend(read_metrics(item))
    groups: dict[tuple[str, str], list[MetricsRecord]] = {}
    for r in records:
        groups.setdefault((r.algorithm, r.sweep_value), []).append(r)
    rows = []
    for (algo, value), rs in groups.items():
        aoi_m, aoi_se = _mean_stderr([r.norm_aoi for r in rs])
        rate_m, rate_se = _mean_stderr([r.delivery_rate for r in rs])
        rows.append({"algorithm": algo, "sweep_value": value, "count": len(rs),
                     "norm_aoi_mean": aoi_m, "norm_aoi_stderr": aoi_se,
                     "delivery_rate_mean": rate_m, "delivery_rate_stderr": rate_se})
    gaps = [c for c in (expected or []) if c not in groups]
    return SweepSummary(rows, gaps)
