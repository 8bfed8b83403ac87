"""Command-line entry point: train, evaluate, sweep, oracle-check, gradcheck."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import checks
from .experiment import (ConfigError, ExperimentConfig, load_config, run_experiment, train_agent,
                         write_curve, write_manifest)

log = logging.getLogger("v2x_aoi")


def _add_common(p: argparse.ArgumentParser, needs_config: bool = True):
    p.add_argument("--config", required=needs_config, help="scenario YAML file")
    p.add_argument("--seed", type=int, default=None, help="base seed (overrides the config)")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--profile", choices=("desk", "paper"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="v2x-aoi", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a DDPG-GM agent at the first sweep point")
    _add_common(p)
    p.add_argument("--episodes", type=int, default=None)

    p = sub.add_parser("evaluate", help="evaluate algorithms over the sweep without training")
    _add_common(p)
    p.add_argument("--checkpoint", default=None, help="trained agent for the DDPG-GM rows")
    p.add_argument("--wallclock", action="store_true", help="fill the wallclock_s column")

    p = sub.add_parser("sweep", help="train and evaluate every sweep point")
    _add_common(p)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--wallclock", action="store_true", help="fill the wallclock_s column")

    p = sub.add_parser("oracle-check", help="compare fast code paths with brute-force references")
    _add_common(p, needs_config=False)
    p.add_argument("--gm-instances", type=int, default=1000)
    p.add_argument("--phy-instances", type=int, default=500)

    p = sub.add_parser("gradcheck", help="finite-difference check of network gradients")
    _add_common(p, needs_config=False)
    p.add_argument("--networks", type=int, default=50)
    return parser


def _load(args) -> ExperimentConfig:
    return load_config(args.config, args.profile, base_seed=args.seed, output=args.out)


def _write_checks(out: Path, name: str, records: Sequence[checks.CheckRecord]) -> bool:
    out.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("check", "instances", "failures", "worst", "passed"))
    for r in records:
        writer.writerow((r.check, r.instances, r.failures, repr(float(r.worst)), int(r.passed)))
    (out / name).write_text(buf.getvalue())
    for r in records:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.check}: {r.failures}/{r.instances} failures"
              + (f", worst {r.worst:.3g}" if r.worst else ""))
    return all(r.passed for r in records)


def cmd_train(args) -> int:
    cfg = _load(args)
    if args.episodes is not None:
        cfg = dataclasses.replace(cfg, agent=dataclasses.replace(cfg.agent, episodes=args.episodes))
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    label, env_cfg = cfg.points()[0]

    def progress(e, r):
        if e % 10 == 0:
            log.info("episode %d reward %.3f", e, r)

    agent, curve = train_agent(cfg, env_cfg, callback=progress)
    write_curve(out / "training_curve.csv", curve)
    agent.save(out / "agent.npz", meta={"scenario": cfg.scenario, "sweep_value": label})
    write_manifest(out, cfg, "train", {"sweep_value": label, "episodes": cfg.agent.episodes})
    print(f"trained {cfg.agent.episodes} episodes at {cfg.sweep_var}={label}; wrote {out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load(args)
    algorithms = cfg.algorithms
    if args.checkpoint is None:
        algorithms = tuple(a for a in algorithms if a != "DDPG-GM")
    cfg = dataclasses.replace(cfg, algorithms=algorithms)
    records = run_experiment(cfg, cfg.output, record_wallclock=args.wallclock,
                             agent_path=args.checkpoint, command="evaluate")
    print(f"wrote {len(records)} rows to {Path(cfg.output) / 'metrics.csv'}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    records = run_experiment(cfg, cfg.output, workers=args.workers, record_wallclock=args.wallclock)
    print(f"wrote {len(records)} rows to {Path(cfg.output) / 'metrics.csv'}")
    return 0


def _check_config(args) -> tuple[int, Path, Optional[ExperimentConfig]]:
    cfg = _load(args) if args.config else None
    seed = args.seed if args.seed is not None else (cfg.base_seed if cfg else 0)
    out = Path(args.out or (cfg.output if cfg else "runs/checks"))
    return seed, out, cfg


def cmd_oracle_check(args) -> int:
    seed, out, _ = _check_config(args)
    records = checks.oracle_suite(seed, args.gm_instances, args.phy_instances)
    return 0 if _write_checks(out, "oracle_check.csv", records) else 1


def cmd_gradcheck(args) -> int:
    seed, out, _ = _check_config(args)
    records = checks.gradcheck_suite(seed, args.networks)
    return 0 if _write_checks(out, "gradcheck.csv", records) else 1


COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "oracle-check": cmd_oracle_check,
    "gradcheck": cmd_gradcheck,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
