#!/usr/bin/env python3
"""Desk-scale learning check: train BNBRL+ and the rnn-baseline on the same
budget, then score each (plus the untrained BNBRL+ initialisation) on 100
seeded greedy evaluation episodes.

Training outputs are cached under ``--out``, keyed by a hash of the config,
seed and step budget; a matching cache is reused instead of retraining.

    python3 scripts/desk_scale.py                    # train if needed, then evaluate
    python3 scripts/desk_scale.py --steps 200000     # smaller budget
"""
import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

from bnbrl.checkpoint import save_checkpoint
from bnbrl.config import RunConfig
from bnbrl.evaluation import ScenarioSpec, run_episodes
from bnbrl.train import new_policy, train_loop

ROOT = Path(__file__).resolve().parents[1]
DEFAULT_OUT = ROOT / "tests" / "data" / "desk_scale"
VARIANTS = ("bnbrl+", "rnn-baseline")
EVAL_SEED_BASE = 10_000  # disjoint from the training episode seeds


def desk_config(variant: str = "bnbrl+") -> RunConfig:
    cfg = RunConfig()
    cfg.episode.n_humans = 5
    cfg.sensor.fov = 270.0
    cfg.net.variant = variant
    # at the default 3e-4 the 5e5-step budget ends while success is still climbing
    cfg.ppo.lr = 1e-3
    return cfg.validate()


def cache_key(cfg: RunConfig, steps: int, seed: int) -> str:
    blob = json.dumps({"config": cfg.to_dict(), "steps": steps, "seed": seed}, sort_keys=True)
    return hashlib.sha1(blob.encode()).hexdigest()[:16]


def cached(run_dir: Path, key: str) -> bool:
    stamp = run_dir / "cache_key.txt"
    return (run_dir / "checkpoint.npz").exists() and stamp.exists() and stamp.read_text().strip() == key


def train_variant(variant: str, steps: int, seed: int, out: Path, force: bool = False) -> Path:
    cfg = desk_config(variant)
    run_dir = out / variant
    key = cache_key(cfg, steps, seed)
    if cached(run_dir, key) and not force:
        print(f"{variant}: cached training run ({key})")
        return run_dir / "checkpoint.npz"
    run_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(run_dir / "initial.npz", new_policy(cfg, seed), cfg, {"step": 0, "seed": seed})
    t0 = time.time()

    def progress(row):
        if row["update"] % 10 == 0:
            print(f"{variant}: step {row['step']}  SR(train) {row['success_rate']:.3f}  "
                  f"return {row['mean_return']:.2f}  {time.time() - t0:.0f}s", flush=True)

    path = train_loop(cfg, steps, run_dir, seed=seed, progress=progress)
    (run_dir / "optimizer.pt").unlink(missing_ok=True)  # not needed to evaluate; keeps the cache small
    (run_dir / "cache_key.txt").write_text(key + "\n")
    return path


def evaluate(out: Path, episodes: int = 100, seed_base: int = EVAL_SEED_BASE) -> dict:
    cfg = desk_config()
    entries = {
        "untrained": str(out / "bnbrl+" / "initial.npz"),
        "bnbrl+": str(out / "bnbrl+" / "checkpoint.npz"),
        "rnn-baseline": str(out / "rnn-baseline" / "checkpoint.npz"),
    }
    results = {}
    for name, ident in entries.items():
        metrics, _ = run_episodes(ScenarioSpec(cfg, ident, episodes, seed_base, name))
        results[name] = metrics.as_row()
        print(f"{name:>13s}: SR={metrics.SR:.2f} NT={metrics.NT} PL={metrics.PL:.2f} ITR={metrics.ITR:.4f}")
    return results


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--steps", type=int, default=500_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--out", type=Path, default=DEFAULT_OUT)
    p.add_argument("--force", action="store_true", help="retrain even when a matching cache exists")
    p.add_argument("--only", choices=VARIANTS, help="train a single variant and skip evaluation")
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.WARNING)
    for variant in ([args.only] if args.only else VARIANTS):
        train_variant(variant, args.steps, args.seed, args.out, args.force)
    if args.only:
        return 0
    results = evaluate(args.out, args.episodes)
    summary = {
        "steps": args.steps, "seed": args.seed, "eval_episodes": args.episodes,
        "eval_seed_base": EVAL_SEED_BASE, "results": results,
        "margin_vs_untrained": results["bnbrl+"]["SR"] - results["untrained"]["SR"],
        "margin_vs_rnn_baseline": results["bnbrl+"]["SR"] - results["rnn-baseline"]["SR"],
    }
    (args.out / "results.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps({k: summary[k] for k in ("margin_vs_untrained", "margin_vs_rnn_baseline")}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
