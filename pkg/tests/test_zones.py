import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import distance_to_sector_boundary, in_sector_by_halfplanes
from semnav.world import AgentClass, PedestrianState, RobotState
from semnav.zones import (
    dynamic_zone_for,
    in_dynamic_zone,
    in_static_zone,
    zone_angle,
    zone_length,
)


def ped_at(cls=AgentClass.ADULT, v=(0.0, 0.0), pos=(0.0, 0.0), heading=0.0):
    return PedestrianState(0, cls, pos, v, heading, (pos,))


def robot_at(x, y, radius=0.3):
    return RobotState(x, y, 0.0, (10.0, 10.0), radius=radius)


def test_adult_at_rest_is_full_disc():
    z = dynamic_zone_for(ped_at())
    assert z.length == 1.0
    assert z.angle == 2 * math.pi


def test_adult_walking_length():
    z = dynamic_zone_for(ped_at(v=(0.6, 0.0)))
    assert z.length == pytest.approx(1.5 * 0.6 + 1.0, abs=1e-12)


def test_adult_walking_angle():
    # hand evaluation: 11*pi/6 * exp(-1.26) + pi/6
    expected = 5.759586531581287 * 0.28365402649977 + 0.5235987755982988
    assert zone_angle(0.6) == pytest.approx(expected, abs=1e-9)
    assert zone_angle(0.6) == pytest.approx(2.158, abs=1e-3)


def test_orientation_follows_velocity_or_heading():
    assert dynamic_zone_for(ped_at(v=(0.0, 0.4))).orientation == pytest.approx(math.pi / 2)
    assert dynamic_zone_for(ped_at(heading=1.2)).orientation == 1.2


@pytest.mark.parametrize(
    "cls,dist,expected",
    [(AgentClass.ADULT, 0.9, True), (AgentClass.CHILD, 1.4, False), (AgentClass.ELDER, 1.5, False), (AgentClass.ADULT, 1.0, False)],
)
def test_static_zone_predicate(cls, dist, expected):
    assert in_static_zone(robot_at(dist, 0.0), ped_at(cls)) is expected


def test_dynamic_zone_full_disc_distance_only():
    # adult at rest: d_dz - R = 0.7; clearance 0.2 -> inside
    p = ped_at()
    r = robot_at(0.2 + 0.3 + 0.3, 0.0)
    inside, d_c = in_dynamic_zone(r, p)
    assert d_c == pytest.approx(0.2)
    assert inside


def test_dynamic_zone_behind_fast_adult():
    p = ped_at(v=(0.6, 0.0))
    inside, d_c = in_dynamic_zone(robot_at(-0.7, 0.0), p)
    assert d_c < dynamic_zone_for(p).length - p.radius
    assert not inside


def test_dynamic_zone_strict_boundary():
    p = ped_at()
    # d_c = d_dz - R exactly  <=>  d_ah = d_dz + d_r = 1.25 (dyadic, exact)
    inside, d_c = in_dynamic_zone(robot_at(1.25, 0.0, radius=0.25), p)
    assert d_c == 1.0 - 0.3
    assert not inside


def test_zone_length_affine_and_angle_decreasing():
    v = np.linspace(0, 5, 1000)
    d = np.array([zone_length(x, 1.2) for x in v])
    a = np.array([zone_angle(x) for x in v])
    np.testing.assert_allclose(np.diff(d) / np.diff(v), 1.5, rtol=1e-9)
    assert np.all(np.diff(a) < 0)
    assert np.all(a > math.pi / 6)
    assert zone_angle(50.0) == pytest.approx(math.pi / 6, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(
    speed=st.floats(0.0, 1.0),
    direction=st.floats(-math.pi, math.pi),
    px=st.floats(-4, 4),
    py=st.floats(-4, 4),
)
def test_class_nesting(speed, direction, px, py):
    v = (speed * math.cos(direction), speed * math.sin(direction))
    r = robot_at(px, py)
    flags = [in_dynamic_zone(r, ped_at(cls, v=v))[0] for cls in (AgentClass.ADULT, AgentClass.CHILD, AgentClass.ELDER)]
    # adult zone inside child zone inside elder zone
    assert flags[0] <= flags[1] <= flags[2]
    statics = [in_static_zone(r, ped_at(cls)) for cls in (AgentClass.ADULT, AgentClass.CHILD, AgentClass.ELDER)]
    assert statics[0] <= statics[1] <= statics[2]


def sample_and_compare(rng, p, n, band=1e-6):
    z = dynamic_zone_for(p)
    reach = z.length + 0.3
    disagreements = 0
    pts = rng.uniform(-1.3 * reach, 1.3 * reach, size=(n, 2)) + np.array(p.position)
    for x, y in pts:
        if distance_to_sector_boundary((x, y), p.position, z.orientation, z.angle, reach) < band:
            continue
        got = in_dynamic_zone(robot_at(x, y), p)[0]
        want = in_sector_by_halfplanes((x, y), p.position, z.orientation, z.angle, reach)
        disagreements += got != want
    return disagreements


def test_membership_matches_point_sampling_oracle():
    rng = np.random.default_rng(11)
    for _ in range(5):
        speed = rng.uniform(0, 0.8)
        d = rng.uniform(-math.pi, math.pi)
        p = ped_at(AgentClass(int(rng.integers(3))), v=(speed * math.cos(d), speed * math.sin(d)), pos=tuple(rng.uniform(0, 5, 2)))
        assert sample_and_compare(rng, p, 2000) == 0


def test_full_disc_is_pure_distance_test():
    rng = np.random.default_rng(5)
    p = ped_at(AgentClass.CHILD, heading=0.4)
    for x, y in rng.uniform(-3, 3, size=(2000, 2)):
        d = math.hypot(x, y)
        if abs(d - 1.5) < 1e-6:
            continue
        assert in_dynamic_zone(robot_at(x, y), p)[0] == (d < 1.2 + 0.3)
