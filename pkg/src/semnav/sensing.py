"""Simulated 360-beam lidar and the semantic observation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .world import World
from .zones import ZoneModel, zone_radius

N_BEAMS = 360
MAX_RANGE = 3.5
SENSING_RADIUS = 4.0
N_MAX_HUMANS = 10


@dataclass(frozen=True, eq=False)
class LidarScan:
    ranges: np.ndarray
    max_range: float = MAX_RANGE

    @property
    def angles(self) -> np.ndarray:
        """Beam angles in the robot frame."""
        return 2.0 * np.pi * np.arange(len(self.ranges)) / len(self.ranges)

    def min(self) -> float:
        return float(self.ranges.min())


@dataclass(frozen=True)
class SemanticHumanState:
    px: float
    py: float
    r_h: float
    d_ah: float
    r_z: float
    clearance: float  # r_a + r_z
    class_id: int
    ped_id: int = -1

    def as_vector(self) -> list[float]:
        return [self.px, self.py, self.r_h, self.d_ah, self.r_z, self.clearance, float(self.class_id)]


@dataclass(frozen=True)
class SemanticRobotState:
    d_ag: float
    px: float
    py: float
    v_linear: float
    v_angular: float
    r_a: float

    def as_vector(self) -> list[float]:
        return [self.d_ag, self.px, self.py, self.v_linear, self.v_angular, self.r_a]


@dataclass(frozen=True, eq=False)
class Observation:
    lidar: LidarScan
    robot: SemanticRobotState
    humans: tuple[SemanticHumanState, ...] = ()
    goal_in_robot_frame: tuple[float, float] = (0.0, 0.0)
    time: float = 0.0  # normalised episode time in [0, 1]
    zone_model: ZoneModel = field(default=ZoneModel.STATIC)


def raycast(world: World, n_beams: int = N_BEAMS, max_range: float = MAX_RANGE) -> LidarScan:
    r = world.robot
    ranges = kernels.cast_rays(
        float(r.x),
        float(r.y),
        float(r.theta),
        int(n_beams),
        float(max_range),
        np.ascontiguousarray(world.segments, dtype=np.float64),
        np.ascontiguousarray(world.pedestrian_circles(), dtype=np.float64),
    )
    return LidarScan(np.asarray(ranges), max_range)


def to_robot_frame(world: World, x: float, y: float) -> tuple[float, float]:
    r = world.robot
    dx, dy = x - r.x, y - r.y
    c, s = math.cos(r.theta), math.sin(r.theta)
    return (c * dx + s * dy, -s * dx + c * dy)


def build_observation(
    world: World,
    zone_model: ZoneModel = ZoneModel.STATIC,
    scan: LidarScan | None = None,
    timeout: float = 60.0,
    sensing_radius: float = SENSING_RADIUS,
    n_max: int = N_MAX_HUMANS,
) -> Observation:
    """Assemble lidar plus semantic state.

    Humans within ``sensing_radius`` (centre distance) are kept, the ``n_max``
    nearest of them, ordered farthest first; ties put the lower class id first.
    ``ZoneModel.NONE`` is the lidar-only baseline and carries no humans.
    """
    if scan is None:
        scan = raycast(world)
    r = world.robot
    humans = []
    if zone_model is not ZoneModel.NONE:
        for p in world.pedestrians:
            px, py = to_robot_frame(world, *p.position)
            d_ah = math.hypot(px, py)
            if d_ah > sensing_radius:
                continue
            r_z = zone_radius(p, zone_model)
            humans.append(
                SemanticHumanState(px, py, p.radius, d_ah, r_z, r.radius + r_z, int(p.agent_class), p.id)
            )
        humans.sort(key=lambda h: (h.d_ah, -h.class_id, h.px, h.py, h.ped_id))
        humans = humans[:n_max][::-1]
    robot = SemanticRobotState(r.distance_to_goal, r.x, r.y, r.v_linear, r.v_angular, r.radius)
    goal = to_robot_frame(world, *r.goal)
    t_norm = min(max(world.time / timeout, 0.0), 1.0)
    return Observation(scan, robot, tuple(humans), goal, t_norm, zone_model)
