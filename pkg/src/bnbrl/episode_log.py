"""Episode log format (line-delimited JSON, version 1).

Line 1 is the header::

    {"kind": "header", "version": 1, "run_id": str, "episode": int, "seed": int,
     "policy": str, "scenario": {...}, "arena_half_extent": float,
     "sensor": {"fov": float, "max_range": float|null, ...},
     "initial": <state record>}

Every following line is one step::

    {"kind": "step", "t": int, "sim_time": float,
     "robot": [px, py, vx, vy, gx, gy, heading, radius],
     "humans": [[px, py, vx, vy, radius], ...],
     "mask": [0/1, ...], "fov": float,
     "beliefs": [{"id": int, "age": int, "traj": [[x, y], ...]}, ...],
     "action": [ax, ay], "d_min": float|null,
     "reward": {"total":..., "goal":..., "col":..., "disc":..., "pred":..., "bel":..., "pot":...},
     "event": "Running"|"ReachedGoal"|"Collision"|"Timeout"}

``null`` stands for an infinite ``d_min`` / ``max_range``. Floats are written
with ``repr`` precision so metrics recomputed from a log match exactly.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

LOG_VERSION = 1


class LogParseError(ValueError):
    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.line_no = line_no


def _finite_or_none(x: float):
    return None if x is None or math.isinf(x) else float(x)


def robot_record(world) -> list:
    r = world.robot
    return [float(r.position[0]), float(r.position[1]), float(r.velocity[0]), float(r.velocity[1]),
            float(r.goal[0]), float(r.goal[1]), float(r.heading), float(r.radius)]


def humans_record(world) -> list:
    return [[float(h.position[0]), float(h.position[1]), float(h.velocity[0]), float(h.velocity[1]),
             float(h.radius)] for h in world.humans]


def beliefs_record(beliefs) -> list:
    return [{"id": int(tr.human_id), "age": int(tr.age), "traj": tr.trajectory.tolist()}
            for tr in sorted(beliefs, key=lambda tr: tr.human_id)]


@dataclass
class EpisodeLog:
    header: dict
    steps: list = field(default_factory=list)

    @property
    def outcome(self) -> str:
        return self.steps[-1]["event"] if self.steps else "Running"

    def robot_path(self) -> list:
        pts = [self.header["initial"]["robot"][:2]]
        pts += [s["robot"][:2] for s in self.steps]
        return pts

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            fh.write(json.dumps(self.header, allow_nan=False) + "\n")
            for step in self.steps:
                fh.write(json.dumps(step, allow_nan=False) + "\n")
        return path


def read_log(path: str | Path) -> EpisodeLog:
    path = Path(path)
    header = None
    steps = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LogParseError(path, line_no, f"invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict) or "kind" not in rec:
                raise LogParseError(path, line_no, "record without 'kind'")
            if line_no == 1:
                if rec["kind"] != "header":
                    raise LogParseError(path, line_no, "first record must be the header")
                if rec.get("version") != LOG_VERSION:
                    raise LogParseError(path, line_no, f"unsupported log version {rec.get('version')}")
                header = rec
                continue
            if rec["kind"] != "step":
                raise LogParseError(path, line_no, f"unexpected record kind {rec['kind']!r}")
            for key in ("t", "robot", "humans", "mask", "event", "d_min", "reward"):
                if key not in rec:
                    raise LogParseError(path, line_no, f"step record missing {key!r}")
            steps.append(rec)
    if header is None:
        raise LogParseError(path, 1, "empty log")
    return EpisodeLog(header, steps)
