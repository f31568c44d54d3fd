"""Belief tracks for humans that dropped out of view.

A track is seeded when a human visible on the previous step is missing from the
current frame. It starts from the trajectory that was predicted for the human
while still visible, then keeps moving along predictions made from its own
belief history. Tracks are dropped when their position comes back into the
sensor sector, leaves the arena, drifts too far from the robot, or grows too
old, and also when the real human is observed again.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import BeliefConfig, SensorConfig
from .prediction import ConstantVelocityPredictor, PredictionSet, Predictor, TrackHistory
from .sensing import ObservationFrame, effective_fov, in_sector
from .sim import RobotState


@dataclass
class BeliefTrack:
    human_id: int
    trajectory: np.ndarray  # (K+1, 2): current belief position then K predicted steps
    age: int
    history: TrackHistory  # single-row history of observed + believed positions

    @property
    def position(self) -> np.ndarray:
        return self.trajectory[0]


@dataclass
class BeliefSet:
    tracks: dict[int, BeliefTrack] = field(default_factory=dict)
    prev_mask: Optional[np.ndarray] = None
    prev_predictions: Optional[PredictionSet] = None
    ever_seen: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.tracks)

    def __iter__(self):
        return iter(self.tracks.values())

    def ids(self) -> list[int]:
        return sorted(self.tracks)


def _repredict(track_history: TrackHistory, current: np.ndarray, predictor: Predictor) -> np.ndarray:
    future = predictor.predict(track_history).positions[0]
    return np.vstack([current[None, :], future])


def should_drop(position: np.ndarray, robot: RobotState, sensor: SensorConfig, t: float,
                arena_half_extent: float, cfg: BeliefConfig) -> bool:
    if in_sector(robot, position, effective_fov(sensor, t), sensor.max_range):
        return True
    if np.any(np.abs(position) > arena_half_extent):
        return True
    return bool(np.hypot(*(position - robot.position)) > cfg.range_factor * sensor.max_range)


def belief_update(
    beliefs: BeliefSet,
    frame: ObservationFrame,
    predictions: PredictionSet,
    history: TrackHistory,
    robot: RobotState,
    sensor: SensorConfig,
    arena_half_extent: float,
    episode_start: bool,
    cfg: BeliefConfig | None = None,
    predictor: Predictor | None = None,
) -> BeliefSet:
    """One step of belief maintenance.

    ``predictions`` and ``history`` must already include ``frame``; the set
    keeps them so the next call can seed tracks from the last trajectory
    predicted while a human was still visible.
    """
    cfg = cfg or BeliefConfig()
    predictor = predictor or ConstantVelocityPredictor(predictions.horizon)
    mask = frame.mask.copy()
    if episode_start or beliefs.prev_mask is None:
        return BeliefSet({}, mask, predictions, mask.copy())

    tracks: dict[int, BeliefTrack] = {}
    for hid, track in beliefs.tracks.items():
        if mask[hid]:
            continue
        pos = track.trajectory[1].copy()
        hist = track.history.push({0: pos})
        tracks[hid] = BeliefTrack(hid, _repredict(hist, pos, predictor), track.age + 1, hist)

    lost = np.flatnonzero(beliefs.prev_mask & ~mask)
    for hid in lost:
        pos = beliefs.prev_predictions.positions[hid, 0].copy()
        row = TrackHistory(history.positions[hid:hid + 1].copy(), history.mask[hid:hid + 1].copy())
        row.positions[0, -1] = pos
        row.mask[0, -1] = True
        tracks[int(hid)] = BeliefTrack(int(hid), _repredict(row, pos, predictor), 1, row)

    kept = {}
    for hid, track in tracks.items():
        if track.age > cfg.max_age:
            continue
        if should_drop(track.position, robot, sensor, frame.t, arena_half_extent, cfg):
            continue
        kept[hid] = track
    return BeliefSet(kept, mask, predictions, beliefs.ever_seen | mask)


def belief_features(beliefs: BeliefSet, robot: RobotState, n_max: int,
                    horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-shape belief input: recentred trajectory plus age per row.

    When there are more tracks than rows, the youngest (most recently lost)
    tracks are kept.
    """
    width = 2 * (horizon + 1) + 1
    feats = np.zeros((n_max, width))
    mask = np.zeros(n_max, dtype=bool)
    ordered = sorted(beliefs.tracks.values(), key=lambda tr: (tr.age, tr.human_id))[:n_max]
    for row, track in enumerate(ordered):
        feats[row, :-1] = (track.trajectory - robot.position).reshape(-1)
        feats[row, -1] = track.age
        mask[row] = True
    return feats, mask
