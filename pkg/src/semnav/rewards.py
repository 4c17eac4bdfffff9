"""Base, static-zone and dynamic-zone reward systems."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from .errors import ConfigurationError
from .sensing import LidarScan, Observation
from .world import RobotState, World
from .zones import center_distance, in_dynamic_zone, dynamic_zone_for


class RewardSystem(str, Enum):
    RAW = "raw"
    STATIC_ZONE = "sz"
    DYNAMIC_ZONE = "dz"


@dataclass(frozen=True)
class RewardConfig:
    r_arrival: float = 2.0
    r_collision: float = -4.0
    w_p_scale: float = 0.018
    w_s: float = -0.03
    w_n: float = -0.14
    k_sz: float = -0.08
    dz_contact_penalty: float = 0.15
    d_goal: float = 0.3
    stall_tol: float = 1e-9

    def __post_init__(self):
        if not (self.r_arrival > 0 > self.r_collision):
            raise ConfigurationError("need r_arrival > 0 > r_collision")
        if not self.k_sz < 0:
            raise ConfigurationError("k_sz must be negative")

    def w_p(self, t: float) -> float:
        return self.w_p_scale * math.exp(1.0 - t)


DEFAULT_REWARDS = RewardConfig()


@dataclass(frozen=True)
class RewardBreakdown:
    r_s: float = 0.0
    r_c: float = 0.0
    r_p: float = 0.0
    r_sz: float = 0.0
    r_dz: float = 0.0
    total: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def reward_success(robot: RobotState, d_goal: float, cfg: RewardConfig = DEFAULT_REWARDS) -> float:
    return cfg.r_arrival if robot.distance_to_goal < d_goal else 0.0


def reward_collision(scan: LidarScan | np.ndarray, d_r: float, cfg: RewardConfig = DEFAULT_REWARDS) -> float:
    ranges = scan.ranges if isinstance(scan, LidarScan) else np.asarray(scan)
    return cfg.r_collision if float(ranges.min()) < d_r else 0.0


def reward_progress(d_ag_prev: float, d_ag_now: float, t: float, cfg: RewardConfig = DEFAULT_REWARDS) -> float:
    """``t`` is elapsed episode time in seconds."""
    if t < 0:
        raise ValueError("t must be non-negative")
    delta = d_ag_prev - d_ag_now
    if abs(delta) <= cfg.stall_tol:
        return cfg.w_s
    if delta > 0:
        return cfg.w_p(t)
    return cfg.w_n


def reward_static_zone(d_ah: float, r_sz: float, cfg: RewardConfig = DEFAULT_REWARDS) -> float:
    if not r_sz > 0:
        raise ConfigurationError("static zone radius must be positive")
    if d_ah < r_sz:
        return cfg.k_sz * math.exp(1.0 - d_ah / r_sz)
    return 0.0


def reward_dynamic_zone(
    d_c: float, d_dz: float, body_radius: float, inside: bool, cfg: RewardConfig = DEFAULT_REWARDS
) -> float:
    """Linear penalty: ``-penalty`` at surface contact, 0 at the zone edge."""
    if not inside:
        return 0.0
    span = d_dz - body_radius
    if not span > 0:
        raise ConfigurationError(f"dynamic zone length {d_dz} does not exceed body radius {body_radius}")
    p = cfg.dz_contact_penalty
    return -(d_c * (-p / span) + p)


def static_zone_penalty(world: World, cfg: RewardConfig = DEFAULT_REWARDS) -> float:
    total = 0.0
    for ped in world.pedestrians:
        total += reward_static_zone(center_distance(world.robot, ped), ped.agent_class.static_zone_radius, cfg)
    return total


def dynamic_zone_penalty(world: World, cfg: RewardConfig = DEFAULT_REWARDS) -> float:
    total = 0.0
    for ped in world.pedestrians:
        inside, d_c = in_dynamic_zone(world.robot, ped)
        if inside:
            total += reward_dynamic_zone(d_c, dynamic_zone_for(ped).length, ped.radius, True, cfg)
    return total


def reward_total(
    world: World,
    obs: Observation,
    system: RewardSystem,
    t: float,
    d_ag_prev: float,
    cfg: RewardConfig = DEFAULT_REWARDS,
) -> RewardBreakdown:
    """Per-step reward with every sub-term exposed.

    Collision wins over arrival when both fire in the same step.
    """
    system = RewardSystem(system)
    r_c = reward_collision(obs.lidar, world.robot.radius, cfg)
    r_s = 0.0 if r_c else reward_success(world.robot, cfg.d_goal, cfg)
    r_p = reward_progress(d_ag_prev, world.robot.distance_to_goal, t, cfg)
    r_sz = static_zone_penalty(world, cfg) if system is RewardSystem.STATIC_ZONE else 0.0
    r_dz = dynamic_zone_penalty(world, cfg) if system is RewardSystem.DYNAMIC_ZONE else 0.0
    return RewardBreakdown(r_s, r_c, r_p, r_sz, r_dz, r_s + r_c + r_p + r_sz + r_dz)
