"""Evaluation: metrics, policies under test, episode runner, FoV sweep and blink protocols."""
from __future__ import annotations

import copy
import csv
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from .checkpoint import load_checkpoint
from .config import BlinkSchedule, RunConfig, VARIANTS
from .env import NavEnv
from .episode_log import EpisodeLog, beliefs_record, humans_record, robot_record, _finite_or_none
from .orca import compute_orca_velocity, preferred_velocity
from .policy import PolicyNet
from .ppo import stack_obs
from .prediction import TrackHistory
from .sensing import ObservationFrame

METRIC_FIELDS = ("SR", "NT", "PL", "ITR")
SWEEP_FOVS = (270, 240, 210, 180, 150, 120)
ASSUMED_HUMAN_RADIUS = 0.5


class UsageError(ValueError):
    """Bad user input (unknown policy id and the like); CLI exit code 1."""


@dataclass
class Metrics:
    SR: float
    NT: Optional[float]
    PL: float
    ITR: float
    n_episodes: int = 0

    def as_row(self) -> dict:
        return {"SR": self.SR, "NT": "" if self.NT is None else self.NT, "PL": self.PL, "ITR": self.ITR}


def path_length(log: EpisodeLog) -> float:
    pts = log.robot_path()
    return sum(math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(pts, pts[1:]))


def compute_metrics(logs: list[EpisodeLog], danger_radius: float = 0.5) -> Metrics:
    if not logs:
        raise ValueError("no episodes")
    successes = [log for log in logs if log.outcome == "ReachedGoal"]
    times = [log.steps[-1]["sim_time"] for log in successes]
    steps = [s for log in logs for s in log.steps]
    intrusions = sum(1 for s in steps if s["d_min"] is not None and s["d_min"] < danger_radius)
    return Metrics(
        SR=len(successes) / len(logs),
        NT=sum(times) / len(times) if times else None,
        PL=sum(path_length(log) for log in logs) / len(logs),
        ITR=intrusions / len(steps) if steps else 0.0,
        n_episodes=len(logs),
    )


# -- policies -----------------------------------------------------------------

def estimate_velocities(frame: ObservationFrame, history: TrackHistory, dt: float) -> dict[int, np.ndarray]:
    """Finite-difference velocity of each visible human from its two latest observations."""
    out = {}
    for i in frame.visible:
        seen = np.flatnonzero(history.mask[i])
        if len(seen) >= 2:
            a, b = seen[-2], seen[-1]
            out[i] = (history.positions[i, b] - history.positions[i, a]) / ((b - a) * dt)
        else:
            out[i] = np.zeros(2)
    return out


def baseline_orca_policy(frame: ObservationFrame, history: Optional[TrackHistory] = None,
                         dt: float = 0.25, time_horizon: float = 2.0,
                         human_radius: float = ASSUMED_HUMAN_RADIUS) -> np.ndarray:
    """ORCA for the robot against visible humans only.

    Human velocities come from the observation history (zero without one) and
    radii are assumed, since neither is part of the observation.
    """
    robot = frame.robot
    positions = frame.absolute_positions()
    ids = sorted(positions)
    vels = estimate_velocities(frame, history, dt) if history is not None else {}
    pos = np.array([positions[i] for i in ids]).reshape(-1, 2)
    vel = np.array([vels.get(i, np.zeros(2)) for i in ids]).reshape(-1, 2)
    rad = np.full(len(ids), human_radius)
    pref = preferred_velocity(robot.position, robot.goal, robot.v_max, dt)
    return compute_orca_velocity(robot.position, robot.velocity, robot.radius, pref, robot.v_max,
                                 pos, vel, rad, dt, time_horizon)


class OrcaPolicy:
    name = "orca"

    def reset(self, episode_seed: int) -> None:
        pass

    def act(self, env: NavEnv) -> np.ndarray:
        return baseline_orca_policy(env.frame, env.history, env.cfg.episode.dt,
                                    env.cfg.episode.orca_time_horizon)


class LearnedPolicy:
    """Deterministic (mean) action of a policy network; BNN draws are seeded per episode."""

    def __init__(self, net: PolicyNet, name: str, v_max: float = 1.0):
        self.net = net.eval()
        self.name = name
        self.v_max = v_max
        self.dtype = next(net.parameters()).dtype

    def reset(self, episode_seed: int) -> None:
        self.hidden = self.net.initial_hidden(1)
        self.generator = torch.Generator().manual_seed(int(episode_seed))

    @torch.no_grad()
    def act(self, env: NavEnv) -> np.ndarray:
        out = self.net(stack_obs([env.obs], self.dtype), self.hidden, generator=self.generator)
        self.hidden = out.hidden
        return out.dist(self.v_max).deterministic()[0].double().numpy()


def resolve_policy(identifier: str, cfg: RunConfig, seed: int = 0):
    """``orca``, a variant name (fresh untrained network seeded by ``seed``),
    or a checkpoint path optionally suffixed ``@variant``."""
    if identifier == "orca":
        return OrcaPolicy()
    if identifier in VARIANTS:
        from .train import new_policy
        net_cfg = copy.deepcopy(cfg)
        net_cfg.net.variant = identifier
        return LearnedPolicy(new_policy(net_cfg, seed), identifier, cfg.episode.robot_v_max)
    path, _, variant = identifier.partition("@")
    if path.endswith(".npz") and Path(path).exists():
        if variant and variant not in VARIANTS:
            raise UsageError(f"unknown variant {variant!r}")
        net, _, _ = load_checkpoint(path, variant or None)
        name = f"{Path(path).parent.name or Path(path).stem}:{net.cfg.variant}"
        return LearnedPolicy(net, name, cfg.episode.robot_v_max)
    raise UsageError(f"unknown policy {identifier!r}: expected 'orca', one of {VARIANTS}, "
                     "or an existing checkpoint .npz")


# -- episodes -----------------------------------------------------------------

@dataclass
class ScenarioSpec:
    cfg: RunConfig
    policy: str
    n_episodes: int = 100
    seed_base: int = 0
    label: Optional[str] = None

    def echo(self) -> dict:
        return {"policy": self.policy, "n_episodes": self.n_episodes, "seed_base": self.seed_base,
                "config": self.cfg.to_dict()}

    def run_id(self) -> str:
        return hashlib.sha1(json.dumps(self.echo(), sort_keys=True, default=str).encode()).hexdigest()[:12]


def run_episode(env: NavEnv, policy, seed: int, header: dict) -> EpisodeLog:
    env.reset(seed)
    policy.reset(seed)
    sensor = env.cfg.sensor
    header = dict(header, seed=int(seed), arena_half_extent=env.world.arena_half_extent,
                  sensor={"fov": sensor.fov, "max_range": _finite_or_none(sensor.max_range),
                          "blink": None if sensor.blink is None else vars(sensor.blink)},
                  initial={"robot": robot_record(env.world), "humans": humans_record(env.world),
                           "mask": env.frame.mask.astype(int).tolist(), "fov": env.frame.fov})
    log = EpisodeLog(header)
    while True:
        action = np.asarray(policy.act(env), dtype=float)
        _, reward, event = env.step(action)
        log.steps.append({
            "kind": "step", "t": env.world.time_step, "sim_time": env.world.sim_time,
            "robot": robot_record(env.world), "humans": humans_record(env.world),
            "mask": env.frame.mask.astype(int).tolist(), "fov": env.frame.fov,
            "beliefs": beliefs_record(env.beliefs), "action": action.tolist(),
            "d_min": _finite_or_none(env.d_min), "reward": reward.as_dict(), "event": event.value,
        })
        if event.terminal:
            return log


def run_episodes(spec: ScenarioSpec, log_dir: Optional[str | Path] = None,
                 policy=None) -> tuple[Metrics, list[EpisodeLog]]:
    if spec.n_episodes < 1:
        raise UsageError("n_episodes must be >= 1")
    policy = policy or resolve_policy(spec.policy, spec.cfg, spec.seed_base)
    env = NavEnv(spec.cfg)
    run_id = spec.run_id()
    logs = []
    for k in range(spec.n_episodes):
        header = {"kind": "header", "version": 1, "run_id": run_id, "episode": k,
                  "policy": spec.label or policy.name, "scenario": spec.echo()}
        log = run_episode(env, policy, spec.seed_base + k, header)
        if log_dir is not None:
            log.write(Path(log_dir) / f"{run_id}_ep{k:04d}.jsonl")
        logs.append(log)
    return compute_metrics(logs, spec.cfg.reward.danger_radius), logs


# -- experiment protocols -----------------------------------------------------

def _with_sensor(cfg: RunConfig, fov: Optional[float] = None, blink=False) -> RunConfig:
    cfg = copy.deepcopy(cfg)
    if fov is not None:
        cfg.sensor.fov = float(fov)
    if blink is not False:
        cfg.sensor.blink = blink
    return cfg.validate()


def policy_label(identifier: str, policy) -> str:
    return policy.name if identifier not in ("orca", *VARIANTS) else identifier


def fov_sweep(base_cfg: RunConfig, policies: list[str], n_episodes: int, seed_base: int = 0,
              fovs=SWEEP_FOVS, out_dir: Optional[str | Path] = None) -> list[dict]:
    rows = []
    for ident in policies:
        policy = resolve_policy(ident, base_cfg, seed_base)
        label = policy_label(ident, policy)
        for fov in fovs:
            spec = ScenarioSpec(_with_sensor(base_cfg, fov=fov), ident, n_episodes, seed_base, label)
            metrics, _ = run_episodes(spec, policy=policy)
            rows.append({"policy": label, "fov": fov, **metrics.as_row()})
    if out_dir is not None:
        from .plotting import write_sweep_outputs
        write_sweep_outputs(rows, out_dir)
    return rows


BLINK_COLUMNS = ("SR(Δ) (%)", "NT(Δ) (s)", "PL(Δ) (m)", "ITR(Δ) (%)")


def _delta(a, b):
    if a in ("", None) or b in ("", None):
        return ""
    return a - b


def blink_eval(base_cfg: RunConfig, policies: list[str], n_episodes: int, seed_base: int = 0,
               schedule: Optional[BlinkSchedule] = None, out_dir: Optional[str | Path] = None) -> list[dict]:
    """Each policy with and without the blink schedule on identical seeds; Δ = blink - no-blink."""
    schedule = schedule or BlinkSchedule()
    rows = []
    for ident in policies:
        policy = resolve_policy(ident, base_cfg, seed_base)
        label = policy_label(ident, policy)
        plain, _ = run_episodes(ScenarioSpec(_with_sensor(base_cfg, blink=None), ident, n_episodes,
                                             seed_base, label), policy=policy)
        blink, _ = run_episodes(ScenarioSpec(_with_sensor(base_cfg, blink=schedule), ident, n_episodes,
                                             seed_base, label), policy=policy)
        row = {"policy": label}
        b, p = blink.as_row(), plain.as_row()
        for m in METRIC_FIELDS:
            row[m] = b[m]
            row[f"{m}_delta"] = _delta(b[m], p[m])
            row[f"{m}_noblink"] = p[m]
        rows.append(row)
    if out_dir is not None:
        from .plotting import write_blink_outputs
        write_blink_outputs(rows, out_dir)
    return rows


def format_blink_table(rows: list[dict]) -> list[dict]:
    """Rows in the 'value (delta)' style: SR and ITR in percent, NT in s, PL in m."""
    def cell(v, d, scale, digits):
        if v == "":
            return "n/a"
        dv = "n/a" if d == "" else f"{d * scale:+.{digits}f}"
        return f"{v * scale:.{digits}f} ({dv})"

    out = []
    for r in rows:
        out.append({
            "Navigation Method": r["policy"],
            BLINK_COLUMNS[0]: cell(r["SR"], r["SR_delta"], 100, 0),
            BLINK_COLUMNS[1]: cell(r["NT"], r["NT_delta"], 1, 2),
            BLINK_COLUMNS[2]: cell(r["PL"], r["PL_delta"], 1, 2),
            BLINK_COLUMNS[3]: cell(r["ITR"], r["ITR_delta"], 100, 2),
        })
    return out


def write_metrics_csv(rows: list[dict], path: str | Path, lead=("policy",)) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fields = list(lead) + list(METRIC_FIELDS)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return path


def read_metrics_csv(path: str | Path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            row = {}
            for k, v in r.items():
                if k in METRIC_FIELDS:
                    row[k] = "" if v == "" else float(v)
                elif k == "fov":
                    row[k] = int(float(v)) if float(v).is_integer() else float(v)
                else:
                    row[k] = v
            rows.append(row)
    return rows
