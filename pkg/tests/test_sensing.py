import math

import numpy as np
from hypothesis import given, settings, strategies as st

from bnbrl.config import BlinkSchedule, EpisodeConfig, SensorConfig
from bnbrl.sensing import effective_fov, is_visible, observe
from bnbrl.sim import HumanState, RobotState, world_init

ROBOT = RobotState(np.zeros(2), np.zeros(2), np.array([0.0, 9.0]), 1.0, 0.0, 0.3)


def human(x, y):
    return HumanState(0, np.array([x, y], float), np.zeros(2), 0.3, 1.0, np.zeros(2))


def test_visibility_examples():
    s = SensorConfig()
    assert is_visible(ROBOT, human(1, 0), s, 0)
    assert not is_visible(ROBOT, human(-1, 0), s, 0)
    assert not is_visible(ROBOT, human(5.01, 0), s, 0)
    assert is_visible(ROBOT, human(5.0, 0), s, 0)


def test_sector_boundary_is_closed():
    s = SensorConfig(fov=270)
    edge = math.radians(135)
    assert is_visible(ROBOT, human(2 * math.cos(edge), 2 * math.sin(edge)), s, 0)
    assert is_visible(ROBOT, human(2 * math.cos(-edge), 2 * math.sin(-edge)), s, 0)
    past = math.radians(135.01)
    assert not is_visible(ROBOT, human(2 * math.cos(past), 2 * math.sin(past)), s, 0)


def test_behind_matches_direct_angle_oracle():
    rng = np.random.default_rng(0)
    s = SensorConfig(fov=200)
    for _ in range(500):
        p = rng.uniform(-6, 6, 2)
        heading = rng.uniform(-math.pi, math.pi)
        robot = RobotState(np.zeros(2), np.zeros(2), np.zeros(2), 1.0, heading, 0.3)
        diff = math.degrees(math.atan2(p[1], p[0]) - heading) % 360
        bearing = min(diff, 360 - diff)
        expected = np.hypot(*p) <= 5.0 and bearing <= 100.0
        assert is_visible(robot, human(*p), s, 0) == expected


def test_effective_fov_blink():
    plain = SensorConfig()
    blink = SensorConfig(blink=BlinkSchedule(3.0, 0.5))
    assert effective_fov(plain, 3.25) == 270
    assert effective_fov(blink, 2) == 270
    assert effective_fov(blink, 3.25) == 0
    blind = [t for t in range(30) if effective_fov(blink, t) == 0]
    assert blind == [3, 10, 17, 24]


@settings(max_examples=200)
@given(st.floats(0, 1000, allow_nan=False), st.floats(0.5, 5), st.floats(0.1, 3))
def test_blink_is_periodic(t, on, off):
    s = SensorConfig(blink=BlinkSchedule(on, off))
    period = on + off
    # stay away from the phase switch points where float rounding of t + period matters
    phase = math.fmod(t, period)
    if min(abs(phase - on), phase, period - phase) < 1e-6:
        return
    assert effective_fov(s, t) == effective_fov(s, t + period)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 1000), st.floats(0, 360), st.floats(0, 360), st.floats(0.5, 8), st.floats(0.5, 8))
def test_visible_set_is_monotone(seed, f1, f2, r1, r2):
    world = world_init(EpisodeConfig(n_humans=20, seed=seed))
    small = observe(world, SensorConfig(max_range=min(r1, r2), fov=min(f1, f2)))
    big = observe(world, SensorConfig(max_range=max(r1, r2), fov=max(f1, f2)))
    assert np.all(big.mask | ~small.mask)


def test_full_and_zero_fov():
    world = world_init(EpisodeConfig(n_humans=20, seed=2))
    assert observe(world, SensorConfig(max_range=math.inf, fov=360)).mask.all()
    frame = observe(world, SensorConfig(fov=0))
    assert not frame.mask.any() and frame.visible == {}


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_frame_holds_only_visible_humans(seed):
    world = world_init(EpisodeConfig(n_humans=20, seed=seed))
    frame = observe(world, SensorConfig())
    assert set(frame.visible) == set(np.flatnonzero(frame.mask))
    for i, u in frame.visible.items():
        assert np.array_equal(u, world.humans[i].position - world.robot.position)
    assert np.array_equal(frame.robot.position, world.robot.position)
