"""Per-step navigation pipeline.

observe -> history -> predict -> belief update -> features, and after the
policy acts: step_world -> the same chain -> reward. The policy only ever sees
the arrays built by :func:`featurize`, which are derived from the observation
frame, predictions and beliefs, never from the world state.
"""
from __future__ import annotations

from dataclasses import replace
from typing import Optional

import numpy as np

from .belief import BeliefSet, belief_features, belief_update
from .config import RunConfig
from .prediction import ConstantVelocityPredictor, PredictionSet, Predictor, TrackHistory, update_history
from .rewards import RewardBreakdown, step_reward
from .sensing import ObservationFrame, effective_fov, in_sector, observe
from .sim import EpisodeEvent, WorldState, check_collision, step_world, world_init


class InvariantViolation(AssertionError):
    pass


def robot_features(frame: ObservationFrame) -> np.ndarray:
    r = frame.robot
    return np.array([r.position[0], r.position[1], r.velocity[0], r.velocity[1],
                     r.goal[0] - r.position[0], r.goal[1] - r.position[1],
                     r.v_max, r.heading, r.radius])


def human_features(frame: ObservationFrame, predictions: PredictionSet) -> tuple[np.ndarray, np.ndarray]:
    """Row i: [u_i, û_i^{t+1..t+K} - p_rob] for visible human i, zeros otherwise."""
    n, k = frame.n_max, predictions.horizon
    feats = np.zeros((n, 2 + 2 * k))
    for i, u in frame.visible.items():
        feats[i, :2] = u
        if predictions.valid[i]:
            feats[i, 2:] = (predictions.positions[i] - frame.robot.position).reshape(-1)
    return feats, frame.mask.copy()


def featurize(frame: ObservationFrame, predictions: PredictionSet, beliefs: BeliefSet) -> dict:
    human, human_mask = human_features(frame, predictions)
    belief, belief_mask = belief_features(beliefs, frame.robot, frame.n_max, predictions.horizon)
    return {"human": human, "human_mask": human_mask, "robot": robot_features(frame),
            "belief": belief, "belief_mask": belief_mask}


class NavEnv:
    """One navigation episode stream; ``reset`` starts a new seeded episode."""

    def __init__(self, cfg: RunConfig, predictor: Optional[Predictor] = None,
                 check_invariants: bool = False):
        self.cfg = cfg
        self.predictor = predictor or ConstantVelocityPredictor(cfg.prediction.horizon, cfg.episode.dt)
        self.check_invariants = check_invariants
        self.world: Optional[WorldState] = None

    @property
    def n_max(self) -> int:
        return self.cfg.episode.n_humans

    def reset(self, seed: int) -> dict:
        ep = replace(self.cfg.episode, seed=int(seed))
        self.world = world_init(ep)
        self.history = TrackHistory.empty(self.n_max, self.cfg.prediction.history_len)
        self.beliefs = BeliefSet()
        self.ever_seen = np.zeros(self.n_max, dtype=bool)
        self._perceive(episode_start=True)
        self.d_goal = float(np.hypot(*(self.world.robot.position - self.world.robot.goal)))
        self.event = EpisodeEvent.RUNNING
        self.d_min = check_collision(self.world.robot, self.world.humans)[1]
        return self.obs

    def _perceive(self, episode_start: bool) -> None:
        self.frame = observe(self.world, self.cfg.sensor)
        self.history = update_history(self.history, self.frame)
        self.predictions = self.predictor.predict(self.history)
        self.beliefs = belief_update(self.beliefs, self.frame, self.predictions, self.history,
                                     self.frame.robot, self.cfg.sensor, self.world.arena_half_extent,
                                     episode_start, self.cfg.belief, self.predictor)
        self.ever_seen |= self.frame.mask
        self.obs = featurize(self.frame, self.predictions, self.beliefs)
        if self.check_invariants:
            self.assert_invariants()

    def step(self, action) -> tuple[dict, RewardBreakdown, EpisodeEvent]:
        if self.event.terminal:
            raise RuntimeError("episode finished; call reset()")
        self.world, self.event = step_world(self.world, action, self.cfg.episode)
        self._perceive(episode_start=False)
        _, d_min = check_collision(self.world.robot, self.world.humans)
        self.d_min = d_min
        reward = step_reward(self.event, self.world.robot, d_min, self.d_goal,
                             self.predictions.restricted(self.frame.mask), self.beliefs,
                             self.world.human_radii(), self.cfg.reward)
        self.d_goal = float(np.hypot(*(self.world.robot.position - self.world.robot.goal)))
        return self.obs, reward, self.event

    def assert_invariants(self) -> None:
        fov = effective_fov(self.cfg.sensor, self.frame.t)
        for track in self.beliefs:
            if self.frame.mask[track.human_id]:
                raise InvariantViolation(f"human {track.human_id} both visible and believed")
            if in_sector(self.frame.robot, track.position, fov, self.cfg.sensor.max_range):
                raise InvariantViolation(f"belief {track.human_id} inside the sensor sector")
            if not self.ever_seen[track.human_id]:
                raise InvariantViolation(f"belief {track.human_id} for a never-seen human")
            if track.age < 1 or not np.all(np.isfinite(track.trajectory)):
                raise InvariantViolation(f"malformed belief {track.human_id}")
        if len(self.beliefs) > int(self.ever_seen.sum()):
            raise InvariantViolation("more beliefs than humans ever observed")
