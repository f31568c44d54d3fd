"""Command-line entry point: ``python -m bnbrl <subcommand>``.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np
import torch

from .checkpoint import CheckpointError
from .config import BlinkSchedule, ConfigError, RunConfig, VARIANTS, load_config
from .episode_log import LogParseError

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
DEFAULT_POLICIES = ["orca", "rnn-baseline", "bnbrl+"]

log = logging.getLogger("bnbrl")


class UsageExit(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageExit(f"{self.prog}: error: {message}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file; missing keys keep defaults")
    p.add_argument("--seed", type=int, default=0, help="master seed (episode seed base for evaluation)")
    p.add_argument("--out-dir", default="runs/out", help="directory for all outputs")
    p.add_argument("--humans", type=int, help="override episode.n_humans")


def _eval_args(p: argparse.ArgumentParser, default_policies=None) -> None:
    p.add_argument("--policy", action="append", default=None,
                   help="'orca', a variant name (untrained), or checkpoint.npz[@variant]; repeatable")
    p.add_argument("--episodes", type=int, default=100)
    p.set_defaults(default_policies=default_policies or ["orca"])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bnbrl", description="Belief-aware crowd navigation: train, evaluate, plot.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="PPO training with checkpoints and curves")
    _common(p)
    p.add_argument("--steps", type=int, default=500_000)
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--resume", action="store_true")

    p = sub.add_parser("eval", help="seeded evaluation, metrics CSV and episode logs")
    _common(p)
    _eval_args(p)
    p.add_argument("--fov", type=float)
    p.add_argument("--blink", action="store_true", help="apply the default blink schedule")
    p.add_argument("--no-logs", action="store_true")

    p = sub.add_parser("sweep", help="FoV sweep 270..120 deg: CSV plus one SVG per metric")
    _common(p)
    _eval_args(p, DEFAULT_POLICIES)
    p.add_argument("--fovs", type=float, nargs="+")
    p.add_argument("--no-diagnostic", action="store_true",
                   help="skip the ORCA full-FoV control run")

    p = sub.add_parser("blink", help="blink vs no-blink table with deltas")
    _common(p)
    _eval_args(p, ["orca", "bnbrl+", "bnbrl"])
    p.add_argument("--blink-on", type=float, default=3.0)
    p.add_argument("--blink-off", type=float, default=0.5)

    p = sub.add_parser("replay", help="render an episode log to SVG plus a per-step trace")
    p.add_argument("log")
    p.add_argument("--out-dir")

    p = sub.add_parser("selftest", help="quick internal consistency checks")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _load_cfg(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "humans", None) is not None:
        cfg.episode.n_humans = args.humans
    return cfg.validate()


def write_manifest(out_dir: Path, args, cfg: RunConfig, extra: dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": args.command,
        "argv": getattr(args, "argv", sys.argv[1:]),
        "seed": args.seed,
        "config": cfg.to_dict(),
        "versions": {"python": platform.python_version(), "numpy": np.__version__, "torch": torch.__version__},
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
        **extra,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    return path


def _policies(args) -> list[str]:
    return args.policy or args.default_policies


def cmd_train(args) -> int:
    from .train import train_loop
    cfg = _load_cfg(args)
    if args.variant:
        cfg.net.variant = args.variant
    out = Path(args.out_dir)
    write_manifest(out, args, cfg, {"total_steps": args.steps})

    def progress(row):
        log.info("step %d  episodes %d  return %.2f  SR %.3f", row["step"], row["episodes"],
                 row["mean_return"], row["success_rate"])

    path = train_loop(cfg, args.steps, out, seed=args.seed, resume=args.resume, progress=progress)
    print(path)
    return EXIT_OK


def cmd_eval(args) -> int:
    from .evaluation import ScenarioSpec, _with_sensor, policy_label, resolve_policy, run_episodes, \
        write_metrics_csv
    cfg = _load_cfg(args)
    if args.fov is not None or args.blink:
        cfg = _with_sensor(cfg, fov=args.fov, blink=BlinkSchedule() if args.blink else False)
    out = Path(args.out_dir)
    rows = []
    policies = _policies(args)
    resolved = [resolve_policy(p, cfg, args.seed) for p in policies]
    for ident, policy in zip(policies, resolved):
        label = policy_label(ident, policy)
        spec = ScenarioSpec(cfg, ident, args.episodes, args.seed, label)
        log_dir = None if args.no_logs else out / "logs" / label.replace("/", "_").replace(":", "_")
        metrics, _ = run_episodes(spec, log_dir=log_dir, policy=policy)
        rows.append({"policy": label, **metrics.as_row()})
        print(f"{label}: SR={metrics.SR:.3f} NT={metrics.NT} PL={metrics.PL:.3f} ITR={metrics.ITR:.4f}")
    write_metrics_csv(rows, out / "metrics.csv")
    write_manifest(out, args, cfg, {"policies": policies, "episodes": args.episodes,
                                    "episode_seeds": [args.seed, args.seed + args.episodes - 1]})
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .evaluation import SWEEP_FOVS, ScenarioSpec, _with_sensor, fov_sweep, run_episodes, \
        write_metrics_csv
    cfg = _load_cfg(args)
    fovs = tuple(args.fovs) if args.fovs else SWEEP_FOVS
    out = Path(args.out_dir)
    policies = _policies(args)
    rows = fov_sweep(cfg, policies, args.episodes, args.seed, fovs, out)
    for r in rows:
        print(f"{r['policy']:>24s} fov={r['fov']:>5}: SR={r['SR']:.3f} ITR={r['ITR']:.4f}")
    extra = {"policies": policies, "episodes": args.episodes, "fovs": list(fovs),
             "episode_seeds": [args.seed, args.seed + args.episodes - 1]}
    if not args.no_diagnostic:
        # control run: ORCA with an unrestricted field of view
        m, _ = run_episodes(ScenarioSpec(_with_sensor(cfg, fov=360.0), "orca", args.episodes, args.seed))
        diag = [{"policy": "orca", "fov": 360, **m.as_row()}]
        write_metrics_csv(diag, out / "fov_sweep_diagnostic.csv", lead=("policy", "fov"))
        low = [r for r in rows if r["policy"] == "orca" and r["fov"] == min(fovs)]
        if low:
            extra["diagnostic"] = {"orca_sr_360": m.SR, f"orca_sr_{min(fovs):g}": low[0]["SR"],
                                   "monotone": m.SR >= low[0]["SR"]}
        print(f"diagnostic orca fov=360: SR={m.SR:.3f}")
    write_manifest(out, args, cfg, extra)
    return EXIT_OK


def cmd_blink(args) -> int:
    from .evaluation import blink_eval, format_blink_table
    cfg = _load_cfg(args)
    schedule = BlinkSchedule(args.blink_on, args.blink_off)
    schedule.validate()
    out = Path(args.out_dir)
    policies = _policies(args)
    rows = blink_eval(cfg, policies, args.episodes, args.seed, schedule, out)
    print((out / "blink_table.md").read_text(), end="")
    write_manifest(out, args, cfg, {"policies": policies, "episodes": args.episodes,
                                    "blink": vars(schedule),
                                    "episode_seeds": [args.seed, args.seed + args.episodes - 1]})
    return EXIT_OK


def cmd_replay(args) -> int:
    from .plotting import replay
    svg, trace = replay(args.log, args.out_dir)
    print(svg)
    print(trace)
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest
    return EXIT_OK if run_selftest(args.seed) else EXIT_RUNTIME


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "sweep": cmd_sweep, "blink": cmd_blink,
            "replay": cmd_replay, "selftest": cmd_selftest}


def main(argv=None) -> int:
    from .evaluation import UsageError
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageExit as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    args.argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"bnbrl {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CheckpointError, LogParseError, FloatingPointError, OSError, RuntimeError) as exc:
        print(f"bnbrl {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
