"""Training loop: alternate rollout collection and PPO updates, write curves
and checkpoints, resume from the latest checkpoint on request."""
from __future__ import annotations

import csv
import json
import logging
import time
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import RunConfig
from .policy import PolicyNet
from .ppo import RolloutCollector, ppo_update

log = logging.getLogger(__name__)

CURVE_FIELDS = ["step", "update", "episodes", "mean_return", "success_rate", "policy_loss",
                "value_loss", "entropy", "bnn_kl", "approx_kl", "clip_frac", "wall_time"]


def new_policy(cfg: RunConfig, seed: int) -> PolicyNet:
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        return PolicyNet(cfg.net, cfg.prediction.horizon)


def train_loop(cfg: RunConfig, total_steps: int, out_dir: str | Path, seed: int = 0,
               resume: bool = False, checkpoint_every: int = 10,
               progress: Optional[callable] = None) -> Path:
    """Train until ``total_steps`` environment steps; returns the final checkpoint path.

    Files in ``out_dir``: ``checkpoint.npz`` (latest), ``optimizer.pt``,
    ``curves.csv`` and ``run_config.json``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ckpt_path = out / "checkpoint.npz"
    opt_path = out / "optimizer.pt"
    curve_path = out / "curves.csv"

    step, update = 0, 0
    if resume and ckpt_path.exists():
        policy, _, meta = load_checkpoint(ckpt_path)
        step = int(meta["extra"].get("step", 0))
        update = int(meta["extra"].get("update", 0))
        log.info("resuming from %s at step %d", ckpt_path, step)
    else:
        policy = new_policy(cfg, seed)
        with open(curve_path, "w", newline="") as fh:
            csv.writer(fh).writerow(CURVE_FIELDS)
    (out / "run_config.json").write_text(json.dumps(
        {"config": cfg.to_dict(), "seed": seed, "total_steps": total_steps}, indent=2))

    optimizer = torch.optim.Adam(policy.parameters(), lr=cfg.ppo.lr)
    if resume and opt_path.exists():
        optimizer.load_state_dict(torch.load(opt_path))

    def checkpoint() -> None:
        try:
            save_checkpoint(ckpt_path, policy, cfg, {"step": step, "update": update, "seed": seed})
            torch.save(optimizer.state_dict(), opt_path)
        except OSError as exc:
            raise CheckpointError(f"failed to write checkpoint in {out}: {exc}") from exc

    if step + cfg.ppo.steps_per_update > total_steps:
        checkpoint()
        return ckpt_path

    collector = RolloutCollector(cfg, master_seed=seed * 100003 + update)
    generator = torch.Generator().manual_seed(seed * 7919 + update)
    per_update = cfg.ppo.steps_per_update
    t0 = time.time()
    while step + per_update <= total_steps:  # the budget is a hard cap
        buffer = collector.collect(policy, cfg.ppo.rollout_len)
        stats = ppo_update(policy, optimizer, buffer, cfg.ppo, generator, cfg.episode.robot_v_max)
        step += per_update
        update += 1
        outcomes = buffer.episode_outcomes
        row = {
            "step": step, "update": update, "episodes": len(outcomes),
            "mean_return": float(np.mean(buffer.episode_returns)) if outcomes else float("nan"),
            "success_rate": (outcomes.count("ReachedGoal") / len(outcomes)) if outcomes else float("nan"),
            **stats, "wall_time": time.time() - t0,
        }
        with open(curve_path, "a", newline="") as fh:
            csv.writer(fh).writerow([row[k] for k in CURVE_FIELDS])
        if progress is not None:
            progress(row)
        if update % checkpoint_every == 0:
            checkpoint()
    checkpoint()
    return ckpt_path
