"""World state, social-force pedestrians and unicycle robot kinematics."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Sequence

import numpy as np

from .errors import BoundsViolationError, DegenerateConfigurationError

V_LINEAR_MAX = 0.6
V_ANGULAR_MAX = math.pi / 6
ROBOT_RADIUS = 0.3
STEP_DT = 0.1


class AgentClass(IntEnum):
    """Pedestrian behaviour class; the integer value is the semantic type id."""

    ADULT = 0
    CHILD = 1
    ELDER = 2

    @property
    def desired_speed(self) -> float:
        return _CLASS_TABLE[self][0]

    @property
    def body_radius(self) -> float:
        return _CLASS_TABLE[self][1]

    @property
    def static_zone_radius(self) -> float:
        return _CLASS_TABLE[self][2]

    @classmethod
    def parse(cls, value: "str | int | AgentClass") -> "AgentClass":
        if isinstance(value, str):
            key = value.strip().upper()
            if key == "OLDER_ADULT":
                key = "ELDER"
            return cls[key]
        return cls(int(value))


# desired speed [m/s], body radius [m], static zone radius [m]
_CLASS_TABLE = {
    AgentClass.ADULT: (0.6, 0.30, 1.0),
    AgentClass.CHILD: (0.4, 0.25, 1.2),
    AgentClass.ELDER: (0.1, 0.30, 1.5),
}


@dataclass(frozen=True)
class PedestrianState:
    id: int
    agent_class: AgentClass
    position: tuple[float, float]
    velocity: tuple[float, float] = (0.0, 0.0)
    heading: float = 0.0
    waypoints: tuple[tuple[float, float], ...] = ()
    waypoint_index: int = 0

    @property
    def radius(self) -> float:
        return self.agent_class.body_radius

    @property
    def speed(self) -> float:
        return math.hypot(*self.velocity)

    @property
    def current_waypoint(self) -> tuple[float, float]:
        return self.waypoints[self.waypoint_index]


@dataclass(frozen=True)
class RobotState:
    x: float
    y: float
    theta: float
    goal: tuple[float, float]
    v_linear: float = 0.0
    v_angular: float = 0.0
    radius: float = ROBOT_RADIUS

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("robot radius must be positive")

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    @property
    def distance_to_goal(self) -> float:
        return math.hypot(self.x - self.goal[0], self.y - self.goal[1])


@dataclass(frozen=True)
class StaticMap:
    """Open rectangular floor ``[0, width] x [0, height]`` plus interior obstacles.

    The boundary is always walled. ``walls`` are free segments (x1, y1, x2, y2);
    ``rects`` are solid axis-aligned boxes (xmin, ymin, xmax, ymax).
    """

    width: float = 20.0
    height: float = 15.0
    walls: tuple[tuple[float, float, float, float], ...] = ()
    rects: tuple[tuple[float, float, float, float], ...] = ()

    def segments(self) -> np.ndarray:
        w, h = self.width, self.height
        segs = [(0.0, 0.0, w, 0.0), (w, 0.0, w, h), (w, h, 0.0, h), (0.0, h, 0.0, 0.0)]
        segs.extend(tuple(map(float, s)) for s in self.walls)
        for x0, y0, x1, y1 in self.rects:
            segs += [(x0, y0, x1, y0), (x1, y0, x1, y1), (x1, y1, x0, y1), (x0, y1, x0, y0)]
        out = np.array(segs, dtype=np.float64).reshape(-1, 4)
        out.setflags(write=False)
        return out

    def contains(self, x: float, y: float, margin: float = 0.0) -> bool:
        """True if the point is on the floor and at least ``margin`` from every obstacle."""
        if not (margin <= x <= self.width - margin and margin <= y <= self.height - margin):
            return False
        for x0, y0, x1, y1 in self.rects:
            if x0 - margin < x < x1 + margin and y0 - margin < y < y1 + margin:
                return False
        if self.walls and margin > 0:
            walls = np.array(self.walls, dtype=np.float64).reshape(-1, 4)
            d = point_segment_distances(np.array([[x, y]]), walls)
            if d.min() < margin:
                return False
        return True


@dataclass(frozen=True)
class SocialForceParams:
    tau: float = 0.5
    strength: float = 2.0
    falloff: float = 0.35
    waypoint_radius: float = 0.3
    max_speed_factor: float = 1.3
    robot_is_obstacle: bool = True


@dataclass(frozen=True, eq=False)
class World:
    static_map: StaticMap
    robot: RobotState
    pedestrians: tuple[PedestrianState, ...] = ()
    time: float = 0.0
    step_dt: float = STEP_DT
    segments: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self):
        if self.segments is None:
            object.__setattr__(self, "segments", self.static_map.segments())

    def replace(self, **changes) -> "World":
        return dataclasses.replace(self, **changes)

    def pedestrian_circles(self) -> np.ndarray:
        if not self.pedestrians:
            return np.zeros((0, 3))
        return np.array([(p.position[0], p.position[1], p.radius) for p in self.pedestrians])


def point_segment_distances(points: np.ndarray, segments: np.ndarray) -> np.ndarray:
    """Distances of shape (n, m) between n points and m segments."""
    return np.linalg.norm(_point_segment_offsets(points, segments), axis=-1)


def _point_segment_offsets(points: np.ndarray, segments: np.ndarray) -> np.ndarray:
    # vector from the closest point on each segment to each point, shape (n, m, 2)
    a = segments[None, :, 0:2]
    ab = segments[None, :, 2:4] - a
    ap = points[:, None, :] - a
    denom = np.sum(ab * ab, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        u = np.where(denom > 0, np.sum(ap * ab, axis=-1) / denom, 0.0)
    u = np.clip(u, 0.0, 1.0)
    return ap - u[..., None] * ab


def step_pedestrians(
    world: World, dt: float | None = None, params: SocialForceParams = SocialForceParams()
) -> World:
    """Advance every pedestrian by one social-force step.

    Goal attraction relaxes each velocity toward ``desired_speed`` along the
    direction of the current waypoint; other pedestrians, the robot and walls
    push back with ``strength * exp((contact_distance - distance) / falloff)``.
    Velocity is integrated first and the new velocity moves the position.
    """
    dt = world.step_dt if dt is None else dt
    if not dt > 0:
        raise ValueError("dt must be positive")
    peds = world.pedestrians
    if not peds:
        return world
    for p in peds:
        if not p.waypoints:
            raise ValueError(f"pedestrian {p.id} has no waypoints")

    pos = np.array([p.position for p in peds], dtype=np.float64)
    vel = np.array([p.velocity for p in peds], dtype=np.float64)
    rad = np.array([p.radius for p in peds])
    v_des = np.array([p.agent_class.desired_speed for p in peds])

    idx = []
    for i, p in enumerate(peds):
        k = p.waypoint_index
        wx, wy = p.waypoints[k]
        if math.hypot(wx - pos[i, 0], wy - pos[i, 1]) < params.waypoint_radius:
            k = (k + 1) % len(p.waypoints)
        idx.append(k)
    targets = np.array([p.waypoints[k] for p, k in zip(peds, idx)], dtype=np.float64)

    to_goal = targets - pos
    dist_goal = np.linalg.norm(to_goal, axis=1)
    e_goal = np.zeros_like(to_goal)
    moving = dist_goal > 1e-12
    e_goal[moving] = to_goal[moving] / dist_goal[moving, None]
    force = (v_des[:, None] * e_goal - vel) / params.tau

    # agents: other pedestrians plus, optionally, the robot
    others_pos, others_rad = pos, rad
    if params.robot_is_obstacle:
        r = world.robot
        others_pos = np.vstack([pos, [[r.x, r.y]]])
        others_rad = np.append(rad, r.radius)
    diff = pos[:, None, :] - others_pos[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    n = len(peds)
    self_mask = np.zeros_like(dist, dtype=bool)
    self_mask[np.arange(n), np.arange(n)] = True
    if np.any((dist == 0.0) & ~self_mask):
        raise DegenerateConfigurationError("two agents share the same position")
    dist_safe = np.where(self_mask, 1.0, dist)
    mag = params.strength * np.exp((rad[:, None] + others_rad[None, :] - dist_safe) / params.falloff)
    mag[self_mask] = 0.0
    force += np.sum(mag[..., None] * diff / dist_safe[..., None], axis=1)

    if len(world.segments):
        off = _point_segment_offsets(pos, world.segments)
        dw = np.linalg.norm(off, axis=-1)
        if np.any(dw == 0.0):
            raise DegenerateConfigurationError("pedestrian centre lies on a wall")
        mag = params.strength * np.exp((rad[:, None] - dw) / params.falloff)
        force += np.sum(mag[..., None] * off / dw[..., None], axis=1)

    if not np.all(np.isfinite(force)):
        raise DegenerateConfigurationError("non-finite social force")

    vel = vel + force * dt
    speed = np.linalg.norm(vel, axis=1)
    cap = params.max_speed_factor * v_des
    over = speed > cap
    vel[over] *= (cap[over] / speed[over])[:, None]
    pos = pos + vel * dt
    if len(world.segments):
        pos = _push_out_of_walls(pos, rad, world.segments)

    new_peds = []
    for i, p in enumerate(peds):
        vx, vy = float(vel[i, 0]), float(vel[i, 1])
        heading = math.atan2(vy, vx) if math.hypot(vx, vy) > 1e-9 else p.heading
        new_peds.append(
            dataclasses.replace(
                p,
                position=(float(pos[i, 0]), float(pos[i, 1])),
                velocity=(vx, vy),
                heading=heading,
                waypoint_index=idx[i],
            )
        )
    return world.replace(pedestrians=tuple(new_peds))


def _push_out_of_walls(pos: np.ndarray, rad: np.ndarray, segments: np.ndarray) -> np.ndarray:
    # hard contact: a body never overlaps a wall after integration
    for _ in range(2):
        off = _point_segment_offsets(pos, segments)
        d = np.linalg.norm(off, axis=-1)
        pen = rad[:, None] - d
        if not np.any(pen > 0):
            break
        with np.errstate(invalid="ignore", divide="ignore"):
            push = np.where((pen > 0)[..., None], off / d[..., None] * pen[..., None], 0.0)
        pos = pos + np.nan_to_num(push).sum(axis=1)
    return pos


def validate_action(action: Sequence[float]) -> tuple[float, float]:
    v, w = (float(a) for a in action)
    if not (0.0 <= v <= V_LINEAR_MAX):
        raise BoundsViolationError(f"v_linear={v!r} outside [0, {V_LINEAR_MAX}]")
    if not (-V_ANGULAR_MAX <= w <= V_ANGULAR_MAX):
        raise BoundsViolationError(f"v_angular={w!r} outside [-pi/6, pi/6]")
    return v, w


def wrap_angle(a: float) -> float:
    """Wrap to [-pi, pi)."""
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def step_robot(world: World, action: Sequence[float], dt: float | None = None) -> World:
    """Unicycle update: rotate first, then advance along the new heading."""
    dt = world.step_dt if dt is None else dt
    if not dt > 0:
        raise ValueError("dt must be positive")
    v, w = validate_action(action)
    r = world.robot
    theta = wrap_angle(r.theta + w * dt)
    x = r.x + v * math.cos(theta) * dt
    y = r.y + v * math.sin(theta) * dt
    robot = dataclasses.replace(r, x=x, y=y, theta=theta, v_linear=v, v_angular=w)
    return world.replace(robot=robot)


def check_collision(world: World, scan=None) -> bool:
    """True iff the closest lidar return is strictly inside the robot radius."""
    if scan is None:
        from .sensing import raycast

        scan = raycast(world)
    return bool(np.min(scan.ranges) < world.robot.radius)
