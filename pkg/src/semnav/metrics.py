"""Evaluation harness: episode records, the metric suite and plot-data export.

Per-class distances (``d_a``, ``d_c``, ``d_e``) use the centre distance from the
robot to the nearest pedestrian of that class, averaged over the steps in which
that pedestrian is within the sensing radius, then averaged over episodes.
Zone times (``t_*``) are per-episode sums of in-zone steps times ``dt``,
averaged over the episodes in which the class appears. Exceedance is the
fraction of steps, pooled over episodes containing the class, in which that
nearest distance is below the threshold. A class that never appears yields
``None`` rather than 0.
"""
from __future__ import annotations

import csv
import gzip
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .env import NavEnv, TaskConstraints, Termination
from .errors import UsageError
from .rewards import RewardSystem
from .scenario import Scenario, sample_random_scenario
from .sensing import SENSING_RADIUS, Observation
from .world import AgentClass
from .zones import ZoneModel

CLASS_KEYS = {AgentClass.ADULT: "a", AgentClass.CHILD: "c", AgentClass.ELDER: "e"}
EXCEED_THRESHOLD = 1.5
PLOT_KINDS = ("exceedance_bars", "trajectory", "training_curve")

Policy = Callable[[Observation], Sequence[float]]


@dataclass
class EpisodeRecord:
    """One evaluated episode.

    Each row holds the state after a step: ``t``, robot pose ``x, y, theta``,
    the executed action ``v, w``, the reward breakdown and a ``peds`` list of
    per-pedestrian ``id, class, x, y, d_ah, in_sz, in_dz``.
    """

    scenario: dict
    rows: list[dict]
    cause: str
    dt: float
    zone_model: str = ZoneModel.STATIC.value
    reward_system: str = RewardSystem.STATIC_ZONE.value
    episode: int = 0
    seed: int = 0
    duration: float = field(init=False)
    path_length: float = field(init=False)

    def __post_init__(self):
        times = [r["t"] for r in self.rows]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("record rows must be strictly time-ordered")
        self.duration = times[-1] if times else 0.0
        self.path_length = float(np.sum(np.hypot(np.diff(self.xs()), np.diff(self.ys()))))

    def xs(self) -> np.ndarray:
        return np.array([self.scenario["robot"]["start"][0]] + [r["x"] for r in self.rows])

    def ys(self) -> np.ndarray:
        return np.array([self.scenario["robot"]["start"][1]] + [r["y"] for r in self.rows])

    @property
    def classes_present(self) -> set[AgentClass]:
        return {AgentClass.parse(p["class"]) for p in self.scenario.get("peds", [])}

    def to_dict(self) -> dict:
        d = asdict(self)
        del d["duration"], d["path_length"]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeRecord":
        return cls(**{k: v for k, v in d.items() if k not in ("duration", "path_length")})


@dataclass(frozen=True)
class MetricsReport:
    episodes: int
    time: float | None  # mean time-to-goal over successful episodes, s
    path_length: float | None  # mean path length over successful episodes, m
    success_rate: float  # %
    collision_rate: float
    timeout_rate: float
    d_a: float | None
    d_c: float | None
    d_e: float | None
    d_avg: float | None
    t_a: float | None
    t_c: float | None
    t_e: float | None
    t_avg: float | None
    exceedance: dict[str, float | None]

    def to_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _nearest_by_class(record: EpisodeRecord, cls: AgentClass) -> np.ndarray:
    """Per-step distance to the nearest pedestrian of ``cls`` (inf when none)."""
    out = np.full(len(record.rows), math.inf)
    for i, row in enumerate(record.rows):
        for p in row["peds"]:
            if p["class"] == int(cls):
                out[i] = min(out[i], p["d_ah"])
    return out


def _mean_or_none(values: Iterable[float]) -> float | None:
    values = list(values)
    return float(np.mean(values)) if values else None


def compute_exceedance(records: Sequence[EpisodeRecord], threshold: float = EXCEED_THRESHOLD) -> dict[str, float | None]:
    if not records:
        raise UsageError("no records to evaluate")
    out = {}
    for cls in AgentClass:
        below = total = 0
        for rec in records:
            if cls not in rec.classes_present:
                continue
            near = _nearest_by_class(rec, cls)
            below += int(np.sum(near < threshold))
            total += len(near)
        out[cls.name.lower()] = below / total if total else None
    return out


def compute_zone_time(records: Sequence[EpisodeRecord], zone_model: ZoneModel | str) -> dict[str, float | None]:
    """Mean per-episode time inside each class's zone, plus their mean ``t_avg``.

    The lidar-only model has no zone of its own; static zones are used to
    measure it.
    """
    if not records:
        raise UsageError("no records to evaluate")
    flag = "in_dz" if ZoneModel(zone_model) is ZoneModel.DYNAMIC else "in_sz"
    out: dict[str, float | None] = {}
    for cls, key in CLASS_KEYS.items():
        per_episode = []
        for rec in records:
            if cls not in rec.classes_present:
                continue
            steps = sum(any(p[flag] for p in row["peds"] if p["class"] == int(cls)) for row in rec.rows)
            per_episode.append(steps * rec.dt)
        out[f"t_{key}"] = _mean_or_none(per_episode)
    out["t_avg"] = _mean_or_none(v for v in out.values() if v is not None)
    return out


def compute_distances(records: Sequence[EpisodeRecord], sensing_radius: float = SENSING_RADIUS) -> dict[str, float | None]:
    out: dict[str, float | None] = {}
    for cls, key in CLASS_KEYS.items():
        per_episode = []
        for rec in records:
            near = _nearest_by_class(rec, cls)
            seen = near[near < sensing_radius]
            if len(seen):
                per_episode.append(float(np.mean(seen)))
        out[f"d_{key}"] = _mean_or_none(per_episode)
    out["d_avg"] = _mean_or_none(v for v in out.values() if v is not None)
    return out


def compute_report(
    records: Sequence[EpisodeRecord],
    zone_model: ZoneModel | str | None = None,
    threshold: float = EXCEED_THRESHOLD,
) -> MetricsReport:
    if not records:
        raise UsageError("no records to evaluate")
    zone_model = ZoneModel(zone_model or records[0].zone_model)
    n = len(records)
    causes = [r.cause for r in records]
    wins = [r for r in records if r.cause == Termination.GOAL.value]
    return MetricsReport(
        episodes=n,
        time=_mean_or_none(r.duration for r in wins),
        path_length=_mean_or_none(r.path_length for r in wins),
        success_rate=100.0 * causes.count(Termination.GOAL.value) / n,
        collision_rate=100.0 * causes.count(Termination.COLLISION.value) / n,
        timeout_rate=100.0 * causes.count(Termination.TIMEOUT.value) / n,
        **compute_distances(records),
        **compute_zone_time(records, zone_model),
        exceedance=compute_exceedance(records, threshold),
    )


def run_episode(env: NavEnv, policy: Policy, scenario: Scenario, episode: int = 0, seed: int = 0) -> EpisodeRecord:
    _, obs = env.reset(scenario)
    rows = []
    while True:
        v, w = (float(a) for a in policy(obs))
        res = env.step((v, w))
        r = env.world.robot
        rows.append(
            {
                "t": env.world.time,
                "x": r.x,
                "y": r.y,
                "theta": r.theta,
                "v": v,
                "w": w,
                "reward": res.reward.to_dict(),
                "peds": env.zone_flags(),
            }
        )
        obs = res.observation
        if res.done:
            break
    return EpisodeRecord(
        scenario.to_dict(),
        rows,
        res.cause.value,
        env.dt,
        env.zone_model.value,
        env.reward_system.value,
        episode,
        seed,
    )


def replay(record: EpisodeRecord, constraints: TaskConstraints = TaskConstraints()) -> EpisodeRecord:
    """Re-simulate a record from its scenario and recorded actions."""
    env = NavEnv(record.zone_model, record.reward_system, constraints, dt=record.dt)
    actions = iter([(row["v"], row["w"]) for row in record.rows])
    return run_episode(env, lambda _obs: next(actions), Scenario.from_dict(record.scenario), record.episode, record.seed)


def run_evaluation(
    policy: Policy,
    scenarios: Sequence[Scenario] | None,
    episodes: int,
    zone_model: ZoneModel | str = ZoneModel.STATIC,
    reward_system: RewardSystem | str = RewardSystem.STATIC_ZONE,
    seed: int = 0,
    n_pedestrians: int = 0,
    out_dir: str | Path | None = None,
    constraints: TaskConstraints = TaskConstraints(),
) -> tuple[list[EpisodeRecord], MetricsReport]:
    """Run ``episodes`` episodes, cycling through ``scenarios``.

    With ``scenarios=None`` each episode draws a random scenario from
    ``seed + episode``. Policies exposing ``reseed(seed)`` are reseeded per
    episode so stochastic policies stay reproducible.
    """
    if scenarios is not None and not scenarios:
        raise UsageError("scenario set is empty")
    if episodes < 1:
        raise UsageError("need at least one episode")
    env = NavEnv(zone_model, reward_system, constraints)
    records = []
    for i in range(episodes):
        ep_seed = seed + i
        scenario = scenarios[i % len(scenarios)] if scenarios else sample_random_scenario(ep_seed, n_pedestrians)
        if hasattr(policy, "reseed"):
            policy.reseed(ep_seed)
        records.append(run_episode(env, policy, scenario, i, ep_seed))
    report = compute_report(records, zone_model)
    if out_dir is not None:
        save_records(records, out_dir, report)
    return records, report


def save_records(records: Sequence[EpisodeRecord], out_dir: str | Path, report: MetricsReport | None = None) -> Path:
    """One gzipped JSON file per episode plus ``index.json`` (and ``report.json``)."""
    out = Path(out_dir)
    (out / "episodes").mkdir(parents=True, exist_ok=True)
    index = []
    for rec in records:
        name = f"episodes/episode_{rec.episode:05d}.json.gz"
        with gzip.open(out / name, "wt") as fh:
            json.dump(rec.to_dict(), fh)
        index.append({"episode": rec.episode, "file": name, "cause": rec.cause, "duration": rec.duration})
    (out / "index.json").write_text(json.dumps({"episodes": index}, indent=1))
    if report is not None:
        (out / "report.json").write_text(report.to_text())
    return out


def load_record(path: str | Path) -> EpisodeRecord:
    with gzip.open(path, "rt") as fh:
        return EpisodeRecord.from_dict(json.load(fh))


def load_records(out_dir: str | Path) -> list[EpisodeRecord]:
    out = Path(out_dir)
    index = json.loads((out / "index.json").read_text())
    return [load_record(out / e["file"]) for e in index["episodes"]]


def export_plot_data(source, kind: str, path: str | Path) -> Path:
    """Write a CSV table for plotting.

    ``exceedance_bars`` takes a MetricsReport (columns ``class, probability``),
    ``trajectory`` an EpisodeRecord (``t, robot_x, robot_y`` then
    ``ped<id>_x, ped<id>_y`` per pedestrian) and ``training_curve`` a list of
    training-log rows or the path of a JSONL log (``steps, mean_reward,
    success_rate``).
    """
    if kind not in PLOT_KINDS:
        raise UsageError(f"unknown plot kind {kind!r}; expected one of {', '.join(PLOT_KINDS)}")
    if kind == "exceedance_bars":
        header = ["class", "probability"]
        rows = [[cls, "" if p is None else p] for cls, p in source.exceedance.items()]
    elif kind == "trajectory":
        if not source.rows:
            raise UsageError("record has no steps")
        ids = [p["id"] for p in source.rows[0]["peds"]]
        header = ["t", "robot_x", "robot_y"] + [f"ped{i}_{c}" for i in ids for c in "xy"]
        rows = [[r["t"], r["x"], r["y"]] + [v for p in r["peds"] for v in (p["x"], p["y"])] for r in source.rows]
    else:
        log = source
        if isinstance(source, (str, Path)):
            log = [json.loads(line) for line in Path(source).read_text().splitlines() if line.strip()]
        if not log:
            raise UsageError("training log is empty")
        header = ["steps", "mean_reward", "success_rate"]
        rows = [[r["steps"], r["mean_reward"], r["success_rate"]] for r in log]
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path
