"""Episode engine: reset/step with goal, collision and timeout constraints."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .errors import ConfigurationError, ScenarioError, UsageError
from .rewards import DEFAULT_REWARDS, RewardBreakdown, RewardConfig, RewardSystem, reward_total
from .scenario import CurriculumStage, Scenario, default_stages, validate_scenario
from .sensing import LidarScan, Observation, build_observation, raycast
from .world import (
    ROBOT_RADIUS,
    STEP_DT,
    PedestrianState,
    RobotState,
    SocialForceParams,
    World,
    check_collision,
    step_pedestrians,
    step_robot,
)
from .zones import ZoneModel, center_distance, in_dynamic_zone, in_static_zone


@dataclass(frozen=True)
class TaskConstraints:
    d_goal: float = 0.3
    d_r: float = ROBOT_RADIUS
    timeout: float = 60.0

    def __post_init__(self):
        if not (self.d_goal > 0 and self.d_r > 0 and self.timeout > 0):
            raise ConfigurationError("task constraints must be positive")


class Termination(str, Enum):
    RUNNING = "running"
    GOAL = "goal"
    COLLISION = "collision"
    TIMEOUT = "timeout"


@dataclass(frozen=True, eq=False)
class StepResult:
    observation: Observation
    reward: RewardBreakdown
    done: bool
    cause: Termination
    scan: LidarScan | None = field(default=None, repr=False)


def make_world(scenario: Scenario, constraints: TaskConstraints = TaskConstraints(), dt: float = STEP_DT) -> World:
    validate_scenario(scenario, constraints.d_r)
    x, y, theta = scenario.start
    robot = RobotState(x, y, theta, tuple(scenario.goal), radius=constraints.d_r)
    peds = tuple(
        PedestrianState(i, p.agent_class, tuple(p.start), (0.0, 0.0), _initial_heading(p), tuple(p.waypoints))
        for i, p in enumerate(scenario.peds)
    )
    return World(scenario.static_map, robot, peds, 0.0, dt)


def _initial_heading(p) -> float:
    wx, wy = p.waypoints[0]
    dx, dy = wx - p.start[0], wy - p.start[1]
    return math.atan2(dy, dx) if (dx or dy) else 0.0


class NavEnv:
    """One navigation episode at a time; not thread-safe."""

    def __init__(
        self,
        zone_model: ZoneModel | str = ZoneModel.STATIC,
        reward_system: RewardSystem | str = RewardSystem.STATIC_ZONE,
        constraints: TaskConstraints = TaskConstraints(),
        reward_config: RewardConfig = DEFAULT_REWARDS,
        sfm: SocialForceParams = SocialForceParams(),
        dt: float = STEP_DT,
    ):
        self.zone_model = ZoneModel(zone_model)
        self.reward_system = RewardSystem(reward_system)
        self.constraints = constraints
        self.reward_config = reward_config
        self.sfm = sfm
        self.dt = dt
        self.world: World | None = None
        self.scenario: Scenario | None = None
        self.done = True
        self.cause = Termination.RUNNING
        self._d_ag = 0.0
        self._steps = 0

    def reset(self, scenario: Scenario) -> tuple[World, Observation]:
        self.scenario = scenario
        self.world = make_world(scenario, self.constraints, self.dt)
        if check_collision(self.world):
            raise ScenarioError("robot starts in collision")
        self._d_ag = self.world.robot.distance_to_goal
        self._steps = 0
        self.done = False
        self.cause = Termination.RUNNING
        return self.world, self.observe()

    def observe(self, scan: LidarScan | None = None) -> Observation:
        return build_observation(self.world, self.zone_model, scan=scan, timeout=self.constraints.timeout)

    def step(self, action: Sequence[float]) -> StepResult:
        if self.world is None:
            raise UsageError("reset() must be called before step()")
        if self.done:
            raise UsageError("episode already finished; call reset()")
        world = step_pedestrians(self.world, self.dt, self.sfm)
        world = step_robot(world, action, self.dt)
        self._steps += 1
        world = world.replace(time=self._steps * self.dt)
        self.world = world

        scan = raycast(world)
        obs = self.observe(scan)
        reward = reward_total(world, obs, self.reward_system, world.time, self._d_ag, self.reward_config)
        self._d_ag = world.robot.distance_to_goal

        if check_collision(world, scan):
            cause = Termination.COLLISION
        elif world.robot.distance_to_goal < self.constraints.d_goal:
            cause = Termination.GOAL
        elif world.time >= self.constraints.timeout - 1e-9:
            cause = Termination.TIMEOUT
        else:
            cause = Termination.RUNNING
        self.cause = cause
        self.done = cause is not Termination.RUNNING
        return StepResult(obs, reward, self.done, cause, scan)

    def zone_flags(self) -> list[dict]:
        """Per-pedestrian distance and zone membership for the current state."""
        rows = []
        robot = self.world.robot
        for p in self.world.pedestrians:
            rows.append(
                {
                    "id": p.id,
                    "class": int(p.agent_class),
                    "x": p.position[0],
                    "y": p.position[1],
                    "d_ah": center_distance(robot, p),
                    "in_sz": in_static_zone(robot, p),
                    "in_dz": in_dynamic_zone(robot, p)[0],
                }
            )
        return rows


def curriculum_update(stage: CurriculumStage, mean_reward: float, stages: Sequence[CurriculumStage]) -> CurriculumStage:
    """Promote, demote (floored at stage 0, capped at the last) or keep."""
    i = stage.index
    if mean_reward >= stage.promotion_threshold:
        i = min(i + 1, len(stages) - 1)
    elif mean_reward <= stage.demotion_threshold:
        i = max(i - 1, 0)
    return stages[i]


class Curriculum:
    """Rolling-window staging driven only by the stream of episode returns."""

    def __init__(self, stages: Sequence[CurriculumStage] | None = None, window: int = 100, start: int = 0):
        self.stages = list(stages or default_stages())
        counts = [s.n_pedestrians for s in self.stages]
        if counts != sorted(counts):
            raise ConfigurationError("pedestrian counts must be non-decreasing across stages")
        self.window = window
        self.stage = self.stages[start]
        self._returns: deque[float] = deque(maxlen=window)
        self.history: list[int] = [self.stage.index]

    def record(self, episode_return: float) -> CurriculumStage:
        self._returns.append(float(episode_return))
        if len(self._returns) == self.window:
            mean = sum(self._returns) / self.window
            new = curriculum_update(self.stage, mean, self.stages)
            if new.index != self.stage.index:
                self.stage = new
                self._returns.clear()
                self.history.append(new.index)
        return self.stage
