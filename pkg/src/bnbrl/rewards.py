"""Per-step navigation reward.

Case order: goal, collision, danger zone (proxemic Gaussian penalty), else the
sum of the predicted-overlap, belief-overlap and goal-progress terms. Every
component is computed and logged on every step even when the case selection
ignores it.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .belief import BeliefSet
from .config import RewardConfig
from .prediction import PredictionSet
from .sim import EpisodeEvent, RobotState


@dataclass
class RewardBreakdown:
    total: float
    goal: float
    col: float
    disc: float
    pred: float
    bel: float
    pot: float

    def as_dict(self) -> dict:
        return asdict(self)


def tgrf(weight: float, mean: float, sigma: float, d: float) -> float:
    """Gaussian-shaped penalty, ``-weight`` at ``d == mean``."""
    z = d - mean
    return -weight * math.exp(-(z * z) / (2.0 * sigma * sigma))


def r_disc(d_min: float, cfg: RewardConfig) -> float:
    if d_min < cfg.danger_radius:
        return tgrf(cfg.w_disc, 0.0, cfg.sigma_disc, d_min)
    return 0.0


def _overlap_penalty(robot_pos: np.ndarray, robot_radius: float, future: np.ndarray,
                     human_radius: float, r_col: float) -> float:
    """min over k of ``1[overlap at k] * r_col / 2**k``; ``future[k-1]`` is step k."""
    best = 0.0
    for k in range(1, len(future) + 1):
        p = future[k - 1]
        if math.hypot(robot_pos[0] - p[0], robot_pos[1] - p[1]) < robot_radius + human_radius:
            best = min(best, r_col / 2 ** k)
    return best


def r_pred(robot: RobotState, predictions: PredictionSet, human_radii, cfg: RewardConfig) -> float:
    total = 0.0
    for i in np.flatnonzero(predictions.valid):
        term = _overlap_penalty(robot.position, robot.radius, predictions.positions[i],
                                float(human_radii[i]), cfg.r_col)
        total = min(total, term)
    return total


def r_bel(robot: RobotState, beliefs: BeliefSet, human_radii, cfg: RewardConfig) -> float:
    total = 0.0
    for track in beliefs:
        term = _overlap_penalty(robot.position, robot.radius, track.trajectory[1:],
                                float(human_radii[track.human_id]), cfg.r_col)
        total = min(total, term * cfg.gamma_bel ** track.age)
    return total


def r_pot(d_goal_t: float, d_goal_prev: float, coeff: float = 1.5) -> float:
    return coeff * (-d_goal_t + d_goal_prev)


def total_reward(event: EpisodeEvent, d_min: float, disc: float, pred: float, bel: float,
                 pot: float, cfg: RewardConfig) -> RewardBreakdown:
    goal = cfg.r_goal if event is EpisodeEvent.REACHED_GOAL else 0.0
    col = cfg.r_col if event is EpisodeEvent.COLLISION else 0.0
    if event is EpisodeEvent.REACHED_GOAL:
        total = cfg.r_goal
    elif event is EpisodeEvent.COLLISION:
        total = cfg.r_col
    elif d_min < cfg.danger_radius:
        total = disc
    else:
        total = pred + bel + pot
    return RewardBreakdown(total, goal, col, disc, pred, bel, pot)


def step_reward(event: EpisodeEvent, robot: RobotState, d_min: float, d_goal_prev: float,
                predictions: PredictionSet, beliefs: BeliefSet, human_radii,
                cfg: RewardConfig) -> RewardBreakdown:
    """Evaluate every component for the post-step state and select the case."""
    d_goal = float(np.hypot(*(robot.position - robot.goal)))
    return total_reward(
        event, d_min,
        r_disc(d_min, cfg),
        r_pred(robot, predictions, human_radii, cfg),
        r_bel(robot, beliefs, human_radii, cfg),
        r_pot(d_goal, d_goal_prev, cfg.pot_coeff),
        cfg,
    )
