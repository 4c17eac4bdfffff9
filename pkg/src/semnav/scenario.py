"""Scenario description, YAML file format, validation and generators.

File schema (version 1)::

    version: 1
    name: corridor
    seed: 0
    map:
      size: [20.0, 15.0]           # walled floor [0, w] x [0, h]
      walls: [[x1, y1, x2, y2], ...]
      rects: [[xmin, ymin, xmax, ymax], ...]
    robot:
      start: [x, y, theta]
      goal: [x, y]
    peds:
      - {class: adult, start: [x, y], waypoints: [[x, y], ...]}
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .errors import ScenarioError
from .world import ROBOT_RADIUS, AgentClass, StaticMap, point_segment_distances

SCHEMA_VERSION = 1
MAX_PLACEMENT_ATTEMPTS = 1000


@dataclass(frozen=True)
class PedestrianSpec:
    agent_class: AgentClass
    start: tuple[float, float]
    waypoints: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class Scenario:
    static_map: StaticMap
    start: tuple[float, float, float]
    goal: tuple[float, float]
    peds: tuple[PedestrianSpec, ...] = ()
    seed: int = 0
    name: str = "unnamed"

    def to_dict(self) -> dict:
        m = self.static_map
        return {
            "version": SCHEMA_VERSION,
            "name": self.name,
            "seed": int(self.seed),
            "map": {
                "size": [m.width, m.height],
                "walls": [list(w) for w in m.walls],
                "rects": [list(r) for r in m.rects],
            },
            "robot": {"start": list(self.start), "goal": list(self.goal)},
            "peds": [
                {
                    "class": p.agent_class.name.lower(),
                    "start": list(p.start),
                    "waypoints": [list(w) for w in p.waypoints],
                }
                for p in self.peds
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        if not isinstance(data, dict):
            raise ScenarioError("scenario must be a mapping")
        version = data.get("version")
        if version != SCHEMA_VERSION:
            raise ScenarioError(f"unsupported scenario version {version!r}")
        try:
            m = data.get("map", {})
            size = m.get("size", [20.0, 15.0])
            static_map = StaticMap(
                width=float(size[0]),
                height=float(size[1]),
                walls=tuple(_floats(w, 4) for w in m.get("walls", []) or []),
                rects=tuple(_floats(r, 4) for r in m.get("rects", []) or []),
            )
            robot = data["robot"]
            start = _floats(robot["start"], 3)
            goal = _floats(robot["goal"], 2)
            peds = []
            for p in data.get("peds", []) or []:
                start_p = _floats(p["start"], 2)
                wps = tuple(_floats(w, 2) for w in p.get("waypoints", []) or []) or (start_p,)
                peds.append(PedestrianSpec(AgentClass.parse(p["class"]), start_p, wps))
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ScenarioError(f"malformed scenario: {exc}") from exc
        return cls(static_map, start, goal, tuple(peds), int(data.get("seed", 0)), str(data.get("name", "unnamed")))


def _floats(seq, n: int) -> tuple:
    vals = tuple(float(v) for v in seq)
    if len(vals) != n:
        raise ValueError(f"expected {n} numbers, got {len(vals)}")
    return vals


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    return Scenario.from_dict(data)


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(scenario.to_dict(), sort_keys=False, default_flow_style=None))


def load_scenarios(path: str | Path) -> list[Scenario]:
    """Load a single file or every ``*.yaml``/``*.yml`` file of a directory (sorted)."""
    path = Path(path)
    if path.is_dir():
        files = sorted([*path.glob("*.yaml"), *path.glob("*.yml")])
        if not files:
            raise ScenarioError(f"no scenario files in {path}")
        return [load_scenario(f) for f in files]
    return [load_scenario(path)]


def validate_scenario(s: Scenario, robot_radius: float = ROBOT_RADIUS, grid: float = 0.25) -> None:
    """Raise ScenarioError unless start/goal are free and the goal is reachable."""
    m = s.static_map
    if m.width <= 0 or m.height <= 0:
        raise ScenarioError("map size must be positive")
    sx, sy, _ = s.start
    if not m.contains(sx, sy, robot_radius):
        raise ScenarioError("robot start is blocked or off the map")
    if not m.contains(*s.goal, robot_radius):
        raise ScenarioError("goal is blocked or off the map")
    for i, p in enumerate(s.peds):
        if not m.contains(*p.start, p.agent_class.body_radius):
            raise ScenarioError(f"pedestrian {i} starts inside an obstacle")
        if math.hypot(p.start[0] - sx, p.start[1] - sy) < p.agent_class.body_radius + robot_radius:
            raise ScenarioError(f"pedestrian {i} overlaps the robot")
        for j, q in enumerate(s.peds[:i]):
            if math.dist(p.start, q.start) < p.agent_class.body_radius + q.agent_class.body_radius:
                raise ScenarioError(f"pedestrians {j} and {i} overlap")
    if not _reachable(m, (sx, sy), s.goal, robot_radius, grid):
        raise ScenarioError("goal is not reachable from the start")


def _reachable(m: StaticMap, start, goal, radius: float, grid: float) -> bool:
    segs = m.segments()
    if _segment_clear(segs, start, goal, radius):
        return True
    nx, ny = int(math.ceil(m.width / grid)), int(math.ceil(m.height / grid))
    xs = (np.arange(nx) + 0.5) * grid
    ys = (np.arange(ny) + 0.5) * grid
    cx, cy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([cx.ravel(), cy.ravel()], axis=1)
    free = (point_segment_distances(pts, segs).min(axis=1) >= radius).reshape(nx, ny)
    for x0, y0, x1, y1 in m.rects:
        free &= ~((cx > x0) & (cx < x1) & (cy > y0) & (cy < y1))

    def cell(p):
        return min(max(int(p[0] / grid), 0), nx - 1), min(max(int(p[1] / grid), 0), ny - 1)

    a, b = cell(start), cell(goal)
    free[a] = free[b] = True
    seen = np.zeros_like(free)
    seen[a] = True
    queue = deque([a])
    while queue:
        i, j = queue.popleft()
        if (i, j) == b:
            return True
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            u, v = i + di, j + dj
            if 0 <= u < nx and 0 <= v < ny and free[u, v] and not seen[u, v]:
                seen[u, v] = True
                queue.append((u, v))
    return False


def _segment_clear(segs: np.ndarray, a, b, radius: float) -> bool:
    n = max(2, int(math.dist(a, b) / 0.05) + 1)
    pts = np.linspace(a, b, n)
    return bool(point_segment_distances(pts, segs).min() >= radius)


@dataclass(frozen=True)
class CurriculumStage:
    index: int
    n_pedestrians: int
    class_weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    promotion_threshold: float = 1.0
    demotion_threshold: float = 0.0


def default_stages() -> list[CurriculumStage]:
    return [CurriculumStage(i, n) for i, n in enumerate((1, 2, 3, 5, 7, 9))]


def sample_random_scenario(
    seed: int,
    stage: CurriculumStage | int,
    static_map: StaticMap | None = None,
    robot_radius: float = ROBOT_RADIUS,
    min_goal_distance: float = 3.0,
) -> Scenario:
    """Random start, goal and pedestrian roster placed by rejection sampling.

    ``stage`` may be a stage object or a plain pedestrian count.
    """
    rng = np.random.default_rng(seed)
    static_map = static_map or StaticMap()
    if isinstance(stage, CurriculumStage):
        n_peds, weights = stage.n_pedestrians, np.asarray(stage.class_weights, dtype=float)
    else:
        n_peds, weights = int(stage), np.full(3, 1 / 3)
    weights = weights / weights.sum()
    w, h = static_map.width, static_map.height
    margin = robot_radius + 0.2

    def draw(mgn):
        for _ in range(MAX_PLACEMENT_ATTEMPTS):
            x, y = rng.uniform(mgn, w - mgn), rng.uniform(mgn, h - mgn)
            if static_map.contains(x, y, mgn):
                return (float(x), float(y))
        raise ScenarioError("placement failed after rejection sampling")

    start = goal = None
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        start = draw(margin)
        goal = draw(margin)
        if math.dist(start, goal) >= min_goal_distance and _reachable(static_map, start, goal, robot_radius, 0.25):
            break
    else:
        raise ScenarioError("could not place start and goal")
    theta = float(rng.uniform(-math.pi, math.pi))

    peds: list[PedestrianSpec] = []
    for _ in range(n_peds):
        cls = AgentClass(int(rng.choice(3, p=weights)))
        r = cls.body_radius
        for attempt in range(MAX_PLACEMENT_ATTEMPTS):
            x = rng.uniform(r + 0.1, w - r - 0.1)
            y = rng.uniform(r + 0.1, h - r - 0.1)
            p = (float(x), float(y))
            if not static_map.contains(*p, r + 0.1):
                continue
            if math.dist(p, start) < r + robot_radius + 1.0 or math.dist(p, goal) < r + 0.5:
                continue
            if any(math.dist(p, q.start) < r + q.agent_class.body_radius + 0.2 for q in peds):
                continue
            break
        else:
            raise ScenarioError(f"map too small to place {n_peds} pedestrians")
        dest = draw(r + 0.1)
        peds.append(PedestrianSpec(cls, p, (dest, p)))
    return Scenario(static_map, (*start, theta), goal, tuple(peds), int(seed), f"random-{seed}")


SCENARIO_DIR = Path(__file__).with_name("scenarios")


def scripted_scenarios() -> list[Scenario]:
    """The six bundled side/frontal interference layouts with 3, 6 and 9 pedestrians."""
    return [load_scenario(p) for p in sorted(SCENARIO_DIR.glob("*.yaml")) if not p.stem.startswith("corridor")]


def corridor_scenario() -> Scenario:
    return load_scenario(SCENARIO_DIR / "corridor_adult_elder.yaml")
