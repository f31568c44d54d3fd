import csv

import pytest
import torch

from bnbrl.checkpoint import load_checkpoint
from bnbrl.config import EpisodeConfig, NetConfig, RunConfig
from bnbrl.train import CURVE_FIELDS, new_policy, train_loop


def tiny_cfg():
    cfg = RunConfig()
    cfg.episode = EpisodeConfig(n_humans=2, time_limit=3.0)
    cfg.net = NetConfig(d_model=8, n_heads=2, gru_hidden=8, bnn_hidden=8, head_hidden=8)
    cfg.ppo.n_envs, cfg.ppo.rollout_len, cfg.ppo.minibatch_size, cfg.ppo.epochs = 2, 16, 16, 1
    return cfg.validate()


def curves(path):
    with open(path / "curves.csv") as fh:
        return list(csv.DictReader(fh))


def test_zero_steps_writes_initial_checkpoint(tmp_path):
    cfg = tiny_cfg()
    ckpt = train_loop(cfg, 0, tmp_path, seed=3)
    policy, cfg2, meta = load_checkpoint(ckpt)
    assert meta["extra"]["step"] == 0 and curves(tmp_path) == []
    fresh = new_policy(cfg, 3)
    assert all(torch.equal(a, b) for a, b in zip(policy.state_dict().values(), fresh.state_dict().values()))
    assert {p.name for p in tmp_path.iterdir()} == {"checkpoint.npz", "optimizer.pt", "curves.csv",
                                                     "run_config.json"}


def test_fixed_seed_gives_identical_curves(tmp_path):
    cfg = tiny_cfg()
    rows = []
    for name in ("a", "b"):
        train_loop(cfg, 64, tmp_path / name, seed=1)
        rows.append([{k: v for k, v in r.items() if k != "wall_time"} for r in curves(tmp_path / name)])
    assert rows[0] == rows[1] and len(rows[0]) == 2
    assert list(curves(tmp_path / "a")[0]) == CURVE_FIELDS
    a, _, _ = load_checkpoint(tmp_path / "a" / "checkpoint.npz")
    b, _, _ = load_checkpoint(tmp_path / "b" / "checkpoint.npz")
    assert all(torch.equal(x, y) for x, y in zip(a.state_dict().values(), b.state_dict().values()))


def test_resume_continues_step_count(tmp_path):
    cfg = tiny_cfg()
    train_loop(cfg, 64, tmp_path, seed=0)
    train_loop(cfg, 128, tmp_path, seed=0, resume=True)
    rows = curves(tmp_path)
    assert [int(r["step"]) for r in rows] == [32, 64, 96, 128]
    assert [int(r["update"]) for r in rows] == [1, 2, 3, 4]
    _, _, meta = load_checkpoint(tmp_path / "checkpoint.npz")
    assert meta["extra"]["step"] == 128


def test_resume_past_target_is_a_no_op(tmp_path):
    cfg = tiny_cfg()
    train_loop(cfg, 64, tmp_path, seed=0)
    before = (tmp_path / "checkpoint.npz").read_bytes()
    train_loop(cfg, 32, tmp_path, seed=0, resume=True)
    assert len(curves(tmp_path)) == 2
    _, _, meta = load_checkpoint(tmp_path / "checkpoint.npz")
    assert meta["extra"]["step"] == 64 and len(before) > 0


def test_progress_callback_receives_rows(tmp_path):
    seen = []
    train_loop(tiny_cfg(), 32, tmp_path, progress=seen.append)
    assert len(seen) == 1 and set(seen[0]) == set(CURVE_FIELDS)


def test_unwritable_output_raises(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        train_loop(tiny_cfg(), 0, blocker / "sub")


@pytest.mark.slow
def test_empty_room_reaches_goal():
    """Without humans, 2e5 steps of BNBRL+ should reach the goal in >= 90% of episodes.
    Reuses the cached run under tests/data/empty_room when its config hash matches."""
    import importlib.util
    from pathlib import Path
    root = Path(__file__).resolve().parents[1]
    spec = importlib.util.spec_from_file_location("empty_room", root / "scripts" / "empty_room.py")
    script = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(script)
    assert script.main([]) == 0
