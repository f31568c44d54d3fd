#!/usr/bin/env python3
"""Smoke target for the training loop: BNBRL+ in a room without humans should
reach the goal in at least 90% of evaluation episodes after 2e5 steps.

    python3 scripts/empty_room.py            # train (or reuse the cache) and evaluate
"""
import argparse
import hashlib
import json
import sys
from pathlib import Path

from bnbrl.config import RunConfig
from bnbrl.evaluation import ScenarioSpec, run_episodes
from bnbrl.train import train_loop

ROOT = Path(__file__).resolve().parents[1]
DEFAULT_OUT = ROOT / "tests" / "data" / "empty_room"
EVAL_SEED_BASE = 10_000


def empty_room_config() -> RunConfig:
    cfg = RunConfig()
    cfg.episode.n_humans = 0
    return cfg.validate()


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--steps", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--out", type=Path, default=DEFAULT_OUT)
    p.add_argument("--force", action="store_true")
    args = p.parse_args(argv)

    cfg = empty_room_config()
    key = hashlib.sha1(json.dumps({"config": cfg.to_dict(), "steps": args.steps, "seed": args.seed},
                                  sort_keys=True).encode()).hexdigest()[:16]
    stamp = args.out / "cache_key.txt"
    if args.force or not (stamp.exists() and stamp.read_text().strip() == key):
        train_loop(cfg, args.steps, args.out, seed=args.seed,
                   progress=lambda r: print(f"step {r['step']}  SR(train) {r['success_rate']:.3f}", flush=True)
                   if r["update"] % 10 == 0 else None)
        (args.out / "optimizer.pt").unlink(missing_ok=True)
        stamp.write_text(key + "\n")
    metrics, _ = run_episodes(ScenarioSpec(cfg, str(args.out / "checkpoint.npz"), args.episodes,
                                           EVAL_SEED_BASE, "empty-room"))
    print(f"empty room: SR={metrics.SR:.2f} NT={metrics.NT} PL={metrics.PL:.2f}")
    return 0 if metrics.SR >= 0.9 else 1


if __name__ == "__main__":
    sys.exit(main())
