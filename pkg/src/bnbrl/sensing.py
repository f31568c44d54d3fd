"""Limited field-of-view range sensor, blink schedule and observation assembly.

Visibility is decided on human centres. The angular sector is closed, so a
human sitting exactly on the sector edge counts as visible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import SensorConfig
from .sim import HumanState, RobotState, WorldState, wrap_angle

# absorbs atan2 round-off for points constructed exactly on the sector edge
ANGLE_TOL = 1e-9


def effective_fov(sensor: SensorConfig, t: float) -> float:
    """Field of view in degrees at (possibly fractional) step ``t``."""
    if sensor.blink is None:
        return sensor.fov
    phase = math.fmod(t, sensor.blink.period)
    if phase < 0:
        phase += sensor.blink.period
    return sensor.fov if phase < sensor.blink.on_duration else 0.0


def in_sector(robot: RobotState, point, fov_deg: float, max_range: float) -> bool:
    dx = float(point[0]) - float(robot.position[0])
    dy = float(point[1]) - float(robot.position[1])
    if math.hypot(dx, dy) > max_range:
        return False
    if fov_deg <= 0.0:
        return False
    if fov_deg >= 360.0:
        return True
    bearing = wrap_angle(math.atan2(dy, dx) - robot.heading)
    return abs(bearing) <= math.radians(fov_deg) / 2.0 + ANGLE_TOL


def is_visible(robot: RobotState, human: HumanState, sensor: SensorConfig, t: float) -> bool:
    return in_sector(robot, human.position, effective_fov(sensor, t), sensor.max_range)


@dataclass
class ObservationFrame:
    """What the robot perceives at one step.

    ``robot`` is the fully known self state. ``visible`` maps human id to the
    position relative to the robot (world axes). ``mask[i]`` is True iff human
    ``i`` is visible.
    """

    t: int
    robot: RobotState
    visible: dict[int, np.ndarray]
    mask: np.ndarray
    fov: float

    @property
    def n_max(self) -> int:
        return len(self.mask)

    def absolute_positions(self) -> dict[int, np.ndarray]:
        return {i: self.robot.position + u for i, u in self.visible.items()}


def observe(world: WorldState, sensor: SensorConfig) -> ObservationFrame:
    t = world.time_step
    fov = effective_fov(sensor, t)
    robot = world.robot.copy()
    mask = np.zeros(len(world.humans), dtype=bool)
    visible = {}
    for h in world.humans:
        if in_sector(robot, h.position, fov, sensor.max_range):
            mask[h.id] = True
            visible[h.id] = h.position - robot.position
    return ObservationFrame(t=t, robot=robot, visible=visible, mask=mask, fov=fov)
