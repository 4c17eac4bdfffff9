"""Static and velocity-scaled safety zones around pedestrians."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .world import PedestrianState, RobotState, wrap_angle

K_V = 1.5
A_V = 1.5


class ZoneModel(str, Enum):
    NONE = "none"
    STATIC = "static"
    DYNAMIC = "dynamic"


@dataclass(frozen=True)
class StaticZone:
    radius: float


@dataclass(frozen=True)
class DynamicZone:
    length: float
    angle: float
    orientation: float
    r_static: float
    k_v: float = K_V
    a_v: float = A_V

    def contains_bearing(self, bearing: float) -> bool:
        return abs(wrap_angle(bearing - self.orientation)) <= 0.5 * self.angle


def zone_length(speed: float, r_static: float, k_v: float = K_V) -> float:
    return k_v * speed + r_static


def zone_angle(speed: float, a_v: float = A_V) -> float:
    """Full opening angle of the sector; 2*pi at rest, tending to pi/6."""
    return (11.0 * math.pi / 6.0) * math.exp(-1.4 * a_v * speed) + math.pi / 6.0


def static_zone_for(ped: PedestrianState) -> StaticZone:
    return StaticZone(ped.agent_class.static_zone_radius)


def dynamic_zone_for(ped: PedestrianState) -> DynamicZone:
    speed = ped.speed
    r_static = ped.agent_class.static_zone_radius
    orientation = math.atan2(ped.velocity[1], ped.velocity[0]) if speed > 0 else ped.heading
    return DynamicZone(
        length=zone_length(speed, r_static),
        angle=zone_angle(speed),
        orientation=orientation,
        r_static=r_static,
    )


def zone_radius(ped: PedestrianState, model: ZoneModel) -> float:
    """Radius fed to the semantic observation for the active zone model."""
    if model is ZoneModel.DYNAMIC:
        return dynamic_zone_for(ped).length
    if model is ZoneModel.STATIC:
        return ped.agent_class.static_zone_radius
    return 0.0


def center_distance(robot: RobotState, ped: PedestrianState) -> float:
    return math.hypot(robot.x - ped.position[0], robot.y - ped.position[1])


def in_static_zone(robot: RobotState, ped: PedestrianState) -> bool:
    return center_distance(robot, ped) < ped.agent_class.static_zone_radius


def in_dynamic_zone(robot: RobotState, ped: PedestrianState) -> tuple[bool, float]:
    """Return ``(inside, d_c)`` where d_c is the surface-to-surface clearance.

    The robot is inside when ``d_c < d_dz - R`` and its bearing seen from the
    pedestrian lies within half the sector angle of the walking direction.
    """
    zone = dynamic_zone_for(ped)
    d_ah = center_distance(robot, ped)
    clearance = d_ah - ped.radius - robot.radius
    if not clearance < zone.length - ped.radius:
        return False, clearance
    bearing = math.atan2(robot.y - ped.position[1], robot.x - ped.position[0])
    return zone.contains_bearing(bearing), clearance
