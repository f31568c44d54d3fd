"""Fast consistency checks behind ``bnbrl selftest``; a smoke test for an install, not a test suite."""
from __future__ import annotations

import math
import tempfile
import traceback
from pathlib import Path

import numpy as np
import torch


def _orca_free_space() -> bool:
    from .orca import compute_orca_velocity
    pref = np.array([0.6, -0.3])
    v = compute_orca_velocity((0, 0), (0, 0), 0.3, pref, 1.0, np.zeros((0, 2)), np.zeros((0, 2)),
                              np.zeros(0), 0.25)
    return bool(np.array_equal(v, pref))


def _worked_rewards() -> bool:
    from .config import RewardConfig
    from .rewards import r_pot
    cfg = RewardConfig()
    return (cfg.r_col / 2 ** 1 == -5.0 and math.isclose(cfg.r_col / 2 * cfg.gamma_bel ** 2, -4.05)
            and r_pot(2.5, 3.0, cfg.pot_coeff) == 0.75)


def _seeded_eval(seed: int) -> bool:
    from .config import RunConfig
    from .evaluation import ScenarioSpec, compute_metrics, run_episodes
    cfg = RunConfig()
    cfg.episode.n_humans = 5
    cfg.episode.time_limit = 5.0
    spec = ScenarioSpec(cfg.validate(), "orca", 2, seed)
    m1, logs = run_episodes(spec)
    m2, _ = run_episodes(spec)
    return m1 == m2 == compute_metrics(logs)


def _checkpoint_roundtrip(seed: int) -> bool:
    from .checkpoint import load_checkpoint, save_checkpoint
    from .config import RunConfig
    from .train import new_policy
    cfg = RunConfig()
    cfg.episode.n_humans = 3
    net = new_policy(cfg.validate(), seed)
    with tempfile.TemporaryDirectory() as tmp:
        path = save_checkpoint(Path(tmp) / "c.npz", net, cfg)
        back, _, _ = load_checkpoint(path)
    return all(torch.equal(a, b) for a, b in zip(net.state_dict().values(), back.state_dict().values()))


CHECKS = {
    "orca_free_space": lambda s: _orca_free_space(),
    "worked_rewards": lambda s: _worked_rewards(),
    "seeded_eval_reproducible": _seeded_eval,
    "checkpoint_roundtrip": _checkpoint_roundtrip,
}


def run_selftest(seed: int = 0) -> bool:
    ok = True
    for name, check in CHECKS.items():
        try:
            passed = bool(check(seed))
        except Exception:
            traceback.print_exc()
            passed = False
        print(f"{'PASS' if passed else 'FAIL'} {name}")
        ok &= passed
    return ok
