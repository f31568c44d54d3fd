"""Ground-truth 2D crowd world: holonomic robot, ORCA humans, episode events."""
from __future__ import annotations

import copy
import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .config import ConfigError, EpisodeConfig
from .orca import compute_orca_velocity, preferred_velocity

Vec2 = np.ndarray  # shape (2,), float64, metres or m/s


def vec2(x: float, y: float) -> Vec2:
    return np.array([x, y], dtype=float)


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


@dataclass
class HumanState:
    id: int
    position: Vec2
    velocity: Vec2
    radius: float
    preferred_speed: float
    goal: Vec2


@dataclass
class RobotState:
    position: Vec2
    velocity: Vec2
    goal: Vec2
    v_max: float = 1.0
    heading: float = 0.0
    radius: float = 0.3

    def copy(self) -> "RobotState":
        return replace(self, position=self.position.copy(), velocity=self.velocity.copy(),
                       goal=self.goal.copy())


class EpisodeEvent(enum.Enum):
    RUNNING = "Running"
    REACHED_GOAL = "ReachedGoal"
    COLLISION = "Collision"
    TIMEOUT = "Timeout"

    @property
    def terminal(self) -> bool:
        return self is not EpisodeEvent.RUNNING


@dataclass
class WorldState:
    time_step: int
    sim_time: float
    robot: RobotState
    humans: list[HumanState]
    arena_half_extent: float
    rng: np.random.Generator = field(repr=False)

    def human_positions(self) -> np.ndarray:
        return np.array([h.position for h in self.humans], dtype=float).reshape(-1, 2)

    def human_radii(self) -> np.ndarray:
        return np.array([h.radius for h in self.humans], dtype=float)


def _uniform_point(rng: np.random.Generator, half: float) -> Vec2:
    return rng.uniform(-half, half, size=2)


def world_init(config: EpisodeConfig) -> WorldState:
    """Seeded world: robot at its start/goal pair plus non-overlapping humans."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    half = config.arena_half_extent
    jitter = config.robot_jitter
    start = vec2(*config.robot_start) + vec2(rng.uniform(-jitter, jitter), 0.0)
    goal = vec2(*config.robot_goal) + vec2(rng.uniform(-jitter, jitter), 0.0)
    delta = goal - start
    robot = RobotState(position=start, velocity=np.zeros(2), goal=goal, v_max=config.robot_v_max,
                       heading=math.atan2(delta[1], delta[0]), radius=config.robot_radius)

    humans: list[HumanState] = []
    r_lo, r_hi = config.human_radius_range
    s_lo, s_hi = config.human_speed_range
    for i in range(config.n_humans):
        radius = float(rng.uniform(r_lo, r_hi))
        speed = float(rng.uniform(s_lo, s_hi))
        inner = half - radius
        for _ in range(config.max_placement_attempts):
            pos = _uniform_point(rng, inner)
            if np.hypot(*(pos - start)) <= radius + robot.radius + config.robot_clearance:
                continue
            if all(np.hypot(*(pos - h.position)) > radius + h.radius + config.placement_margin
                   for h in humans):
                break
        else:
            raise ConfigError(
                f"could not place human {i} after {config.max_placement_attempts} attempts; "
                "arena too dense")
        humans.append(HumanState(id=i, position=pos, velocity=np.zeros(2), radius=radius,
                                 preferred_speed=speed, goal=_uniform_point(rng, inner)))
    return WorldState(time_step=0, sim_time=0.0, robot=robot, humans=humans,
                      arena_half_extent=half, rng=rng)


def check_collision(robot: RobotState, humans: list[HumanState]) -> tuple[bool, float]:
    """Overlap flag and minimum surface-to-surface distance (``inf`` with no humans)."""
    if not humans:
        return False, math.inf
    pos = np.array([h.position for h in humans], dtype=float)
    radii = np.array([h.radius for h in humans], dtype=float)
    gaps = np.hypot(*(pos - robot.position).T) - robot.radius - radii
    d_min = float(gaps.min())
    return d_min < 0.0, d_min


def human_velocities(world: WorldState, config: EpisodeConfig,
                     rng: np.random.Generator | None = None) -> np.ndarray:
    """ORCA velocities for every human; the robot is not part of their neighbour set.

    With ``rng`` given, each preferred velocity gets a tiny random nudge of
    ``orca_pref_perturbation`` m/s; perfectly symmetric crowds deadlock otherwise.
    """
    n = len(world.humans)
    nudge = np.zeros((n, 2))
    if rng is not None and config.orca_pref_perturbation > 0 and n:
        angle = rng.uniform(0.0, 2.0 * math.pi, size=n)
        nudge = config.orca_pref_perturbation * np.stack([np.cos(angle), np.sin(angle)], axis=1)
    pos = world.human_positions()
    vel = np.array([h.velocity for h in world.humans], dtype=float).reshape(-1, 2)
    radii = world.human_radii() + config.orca_safety_margin
    out = np.zeros((n, 2))
    for i, h in enumerate(world.humans):
        others = np.arange(n) != i
        pref = preferred_velocity(h.position, h.goal, h.preferred_speed, config.dt) + nudge[i]
        out[i] = compute_orca_velocity(h.position, h.velocity, radii[i], pref, h.preferred_speed,
                                       pos[others], vel[others], radii[others], config.dt,
                                       config.orca_time_horizon, config.orca_neighbor_dist)
    return out


def step_world(world: WorldState, robot_action, config: EpisodeConfig) -> tuple[WorldState, EpisodeEvent]:
    """Advance one step. The input state is left untouched."""
    dt = config.dt
    action = np.asarray(robot_action, dtype=float).reshape(2)
    speed = float(np.hypot(action[0], action[1]))
    v_max = world.robot.v_max
    if speed > v_max:
        action = action * (v_max / speed)

    rng = copy.deepcopy(world.rng)
    new_vels = human_velocities(world, config, rng)

    robot = world.robot.copy()
    robot.position = robot.position + action * dt
    robot.velocity = action.copy()
    if speed > 1e-6:
        robot.heading = math.atan2(action[1], action[0])

    half = world.arena_half_extent
    resample = rng.uniform(size=len(world.humans)) < config.human_goal_resample_prob
    humans = []
    for h, v, new_goal in zip(world.humans, new_vels, resample):
        pos = h.position + v * dt
        goal = h.goal
        outside = bool(np.any(np.abs(pos) > half))
        reached = config.human_regoal_on_arrival and np.hypot(*(goal - pos)) < h.radius
        if new_goal or outside or reached:
            goal = _uniform_point(rng, half - h.radius)
        humans.append(replace(h, position=pos, velocity=v, goal=goal))

    t = world.time_step + 1
    new_world = WorldState(time_step=t, sim_time=t * dt, robot=robot, humans=humans,
                           arena_half_extent=half, rng=rng)
    return new_world, classify_event(new_world, config)


def classify_event(world: WorldState, config: EpisodeConfig) -> EpisodeEvent:
    collided, _ = check_collision(world.robot, world.humans)
    if collided:
        return EpisodeEvent.COLLISION
    if np.hypot(*(world.robot.position - world.robot.goal)) < world.robot.radius:
        return EpisodeEvent.REACHED_GOAL
    if world.sim_time >= config.time_limit:
        return EpisodeEvent.TIMEOUT
    return EpisodeEvent.RUNNING
