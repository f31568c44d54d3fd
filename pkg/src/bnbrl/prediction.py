"""Observation history and trajectory prediction.

Any object with a ``predict(history) -> PredictionSet`` method can stand in for
the default :class:`ConstantVelocityPredictor`; the rest of the pipeline only
depends on that interface.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .sensing import ObservationFrame


@dataclass
class TrackHistory:
    """Fixed-length per-human position buffer; column ``-1`` is the newest step.

    Positions are absolute world coordinates, zero wherever the mask is False.
    """

    positions: np.ndarray  # (n, L, 2)
    mask: np.ndarray  # (n, L) bool

    @classmethod
    def empty(cls, n_max: int, length: int) -> "TrackHistory":
        return cls(np.zeros((n_max, length, 2)), np.zeros((n_max, length), dtype=bool))

    @property
    def length(self) -> int:
        return self.positions.shape[1]

    def copy(self) -> "TrackHistory":
        return TrackHistory(self.positions.copy(), self.mask.copy())

    def push(self, points: dict[int, np.ndarray]) -> "TrackHistory":
        """New history with one step appended; ids absent from ``points`` are unobserved."""
        pos = np.roll(self.positions, -1, axis=1)
        mask = np.roll(self.mask, -1, axis=1)
        pos[:, -1] = 0.0
        mask[:, -1] = False
        for i, p in points.items():
            pos[i, -1] = p
            mask[i, -1] = True
        return TrackHistory(pos, mask)


def update_history(history: TrackHistory, frame: ObservationFrame) -> TrackHistory:
    return history.push(frame.absolute_positions())


@dataclass
class PredictionSet:
    positions: np.ndarray  # (n, K, 2) world coordinates for steps t+1..t+K
    valid: np.ndarray  # (n,) bool

    @property
    def horizon(self) -> int:
        return self.positions.shape[1]

    def restricted(self, keep: np.ndarray) -> "PredictionSet":
        return PredictionSet(self.positions, self.valid & np.asarray(keep, dtype=bool))


class Predictor(Protocol):
    horizon: int

    def predict(self, history: TrackHistory) -> PredictionSet: ...


@dataclass
class ConstantVelocityPredictor:
    """Extrapolate from the two most recent observations of each human.

    The velocity divides by the actual step gap between those observations, and
    the extrapolation counts from the step of the last observation, so gappy or
    stale tracks stay on the same line.
    """

    horizon: int = 5
    dt: float = 0.25

    def predict(self, history: TrackHistory) -> PredictionSet:
        n, length = history.mask.shape
        out = np.zeros((n, self.horizon, 2))
        valid = history.mask.any(axis=1)
        ks = np.arange(1, self.horizon + 1, dtype=float)
        for i in np.flatnonzero(valid):
            seen = np.flatnonzero(history.mask[i])
            last = seen[-1]
            p_last = history.positions[i, last]
            if len(seen) >= 2:
                prev = seen[-2]
                vel = (p_last - history.positions[i, prev]) / ((last - prev) * self.dt)
            else:
                vel = np.zeros(2)
            staleness = (length - 1) - last
            out[i] = p_last + ((ks + staleness) * self.dt)[:, None] * vel
        return PredictionSet(out, valid)


def predict(history: TrackHistory, horizon: int = 5, dt: float = 0.25) -> PredictionSet:
    return ConstantVelocityPredictor(horizon, dt).predict(history)
