"""Checkpoint container.

Layout (a NumPy ``.npz`` zip archive, readable without pickle):

* ``__meta__`` -- 0-d unicode array holding a JSON object with
  ``format`` (``"bnbrl-checkpoint"``), ``version`` (int), ``variant``,
  ``horizon``, ``config`` (full run-config echo), ``param_names`` (ordered)
  and free-form ``extra`` (step counters etc.).
* ``param/<name>`` -- one array per named parameter, stored little-endian
  (``<f4`` or ``<f8``) in the dtype the network held.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from .config import RunConfig
from .policy import PolicyNet

FORMAT = "bnbrl-checkpoint"
VERSION = 1


class CheckpointError(IOError):
    pass


def save_checkpoint(path: str | Path, policy: PolicyNet, cfg: RunConfig,
                    extra: Optional[dict] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    state = policy.state_dict()
    arrays = {}
    for name, tensor in state.items():
        arr = tensor.detach().cpu().numpy()
        arrays[f"param/{name}"] = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
    meta = {"format": FORMAT, "version": VERSION, "variant": policy.cfg.variant,
            "horizon": policy.horizon, "config": cfg.to_dict(),
            "param_names": list(state), "extra": extra or {}}
    arrays["__meta__"] = np.array(json.dumps(meta))
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        np.savez(fh, **arrays)
    tmp.replace(path)
    return path


def read_checkpoint(path: str | Path) -> tuple[dict, dict]:
    """Raw ``(meta, {name: ndarray})``."""
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["__meta__"]))
            params = {name: data[f"param/{name}"] for name in meta["param_names"]}
    except (KeyError, ValueError, OSError) as exc:
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc
    if meta.get("format") != FORMAT:
        raise CheckpointError(f"{path} is not a {FORMAT} file")
    if meta.get("version") != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {meta.get('version')}")
    return meta, params


def load_checkpoint(path: str | Path, variant: Optional[str] = None) -> tuple[PolicyNet, RunConfig, dict]:
    """Rebuild the policy. ``variant`` may switch stages off (e.g. evaluate a
    trained network with its belief branch disabled)."""
    meta, params = read_checkpoint(path)
    cfg = RunConfig.from_dict(meta["config"])
    if variant is not None:
        cfg.net.variant = variant
    policy = PolicyNet(cfg.net, meta["horizon"])
    dtype = torch.float64 if next(iter(params.values())).dtype == np.float64 else torch.float32
    policy.to(dtype)
    policy.load_state_dict({k: torch.from_numpy(np.array(v)) for k, v in params.items()})
    return policy, cfg, meta
