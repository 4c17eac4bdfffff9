"""Command-line entry points: ``semnav train|eval|replay|scenario validate``.

Exit codes: 0 on success, 2 on configuration or usage errors, 3 on runtime
faults (including a replay that does not reproduce its record).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigurationError, SemNavError, UsageError
from .metrics import compute_report, export_plot_data, load_record, load_records, replay, run_evaluation
from .policy import GoalSeekingPolicy
from .ppo import TrainerConfig, load_agent, train
from .rewards import RewardSystem
from .scenario import load_scenarios, validate_scenario
from .zones import ZoneModel

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("semnav")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", help="scenario file or directory (default: random scenarios)")
    p.add_argument("--zone", choices=[z.value for z in ZoneModel], help="zone model (default: static)")
    p.add_argument("--reward", choices=[r.value for r in RewardSystem], help="reward system (default: sz)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="runs", help="output directory")
    p.add_argument("--pedestrians", type=int, default=0, help="pedestrians per random scenario")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semnav", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a policy")
    _common(p)
    p.add_argument("--mode", choices=["random", "staged", "scenario"], default="random")
    p.add_argument("--steps", type=int, help="total environment steps")
    p.add_argument("--config", help="JSON file with trainer settings")
    p.add_argument("--checkpoint", help="where to write the policy (default: <out>/policy.pt)")

    p = sub.add_parser("eval", help="evaluate a policy and write records and a report")
    _common(p)
    p.add_argument("--checkpoint", help="trained policy; omit to run the goal-seeking baseline")
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--stochastic", action="store_true", help="sample actions instead of using the mean")

    p = sub.add_parser("replay", help="re-simulate recorded episodes and check they reproduce exactly")
    p.add_argument("records", help="an episode .json.gz file or an evaluation output directory")

    p = sub.add_parser("scenario", help="scenario utilities")
    ssub = p.add_subparsers(dest="scenario_command", required=True)
    v = ssub.add_parser("validate", help="check start/goal placement and goal reachability")
    v.add_argument("path", help="scenario file or directory")
    return parser


def cmd_train(args) -> int:
    settings = json.loads(Path(args.config).read_text()) if args.config else {}
    settings.update(seed=args.seed, mode=args.mode, n_pedestrians=args.pedestrians)
    if args.steps is not None:
        settings["total_steps"] = args.steps
    try:
        cfg = TrainerConfig(**settings)
    except TypeError as exc:
        raise ConfigurationError(f"bad trainer settings: {exc}") from exc
    scenarios = load_scenarios(args.scenario) if args.scenario else ()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = Path(args.checkpoint) if args.checkpoint else out / "policy.pt"
    result = train(
        cfg,
        zone_model=args.zone or ZoneModel.STATIC,
        reward_system=args.reward or RewardSystem.STATIC_ZONE,
        scenarios=scenarios,
        log_path=out / "train_log.jsonl",
        checkpoint_path=ckpt,
    )
    export_plot_data(result.log, "training_curve", out / "training_curve.csv")
    last = result.log[-1] if result.log else {}
    print(f"trained {last.get('steps', 0)} steps, success rate {last.get('success_rate')}, checkpoint {ckpt}")
    return EXIT_OK


def cmd_eval(args) -> int:
    zone, reward = args.zone, args.reward
    if args.checkpoint:
        policy, ckpt = load_agent(args.checkpoint)
        policy.deterministic = not args.stochastic
        zone = zone or ckpt["zone_model"]
        reward = reward or ckpt["reward_system"]
    else:
        policy = GoalSeekingPolicy()
    scenarios = load_scenarios(args.scenario) if args.scenario else None
    out = Path(args.out)
    records, report = run_evaluation(
        policy,
        scenarios,
        args.episodes,
        zone or ZoneModel.STATIC,
        reward or RewardSystem.STATIC_ZONE,
        seed=args.seed,
        n_pedestrians=args.pedestrians,
        out_dir=out,
    )
    export_plot_data(report, "exceedance_bars", out / "exceedance_bars.csv")
    export_plot_data(records[0], "trajectory", out / "trajectory_00000.csv")
    print(report.to_text())
    return EXIT_OK


def cmd_replay(args) -> int:
    path = Path(args.records)
    records = load_records(path) if path.is_dir() else [load_record(path)]
    bad = 0
    for rec in records:
        same = replay(rec).to_dict() == rec.to_dict()
        bad += not same
        print(f"episode {rec.episode}: {'identical' if same else 'DIVERGED'}")
    if bad:
        print(f"{bad} of {len(records)} episodes did not reproduce", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"all {len(records)} episodes reproduced; report: {json.dumps(compute_report(records).to_dict())}")
    return EXIT_OK


def cmd_scenario(args) -> int:
    scenarios = load_scenarios(args.path)
    failed = 0
    for s in scenarios:
        try:
            validate_scenario(s)
            print(f"{s.name}: ok")
        except ConfigurationError as exc:
            failed += 1
            print(f"{s.name}: {exc}")
    return EXIT_CONFIG if failed else EXIT_OK


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "replay": cmd_replay, "scenario": cmd_scenario}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SemNavError as exc:
        print(f"fault: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
