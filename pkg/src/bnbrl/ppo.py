"""Rollout collection over a bank of environments, GAE, and the PPO update.

Environments are stepped one after another in a single process; the policy
forward pass is batched across them. Each buffer entry keeps the GRU state the
policy saw before acting, so the update re-runs a single recurrent step per
sample instead of back-propagating through time.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch

from .config import PpoConfig, RunConfig
from .env import NavEnv
from .policy import PolicyNet, SquashedGaussian
from .sim import EpisodeEvent

log = logging.getLogger(__name__)

OBS_KEYS = ("human", "human_mask", "robot", "belief", "belief_mask")
REWARD_PARTS = ("goal", "col", "disc", "pred", "bel", "pot")
EVENT_CODES = {e: i for i, e in enumerate(EpisodeEvent)}


def stack_obs(obs_list: list[dict], dtype=torch.float32) -> dict:
    out = {}
    for key in OBS_KEYS:
        arr = np.stack([o[key] for o in obs_list])
        out[key] = torch.as_tensor(arr, dtype=torch.bool if key.endswith("mask") else dtype)
    return out


@dataclass
class RolloutBuffer:
    obs: dict  # key -> (T, B, ...)
    hidden: torch.Tensor  # (T, B, H) state before acting
    pre_actions: torch.Tensor  # (T, B, 2) pre-squash samples
    log_probs: torch.Tensor  # (T, B)
    values: torch.Tensor  # (T, B)
    rewards: torch.Tensor  # (T, B)
    dones: torch.Tensor  # (T, B)
    last_value: torch.Tensor  # (B,)
    reward_parts: np.ndarray  # (T, B, 6)
    events: np.ndarray  # (T, B) event codes
    episode_returns: list = field(default_factory=list)
    episode_outcomes: list = field(default_factory=list)

    @property
    def horizon(self) -> int:
        return self.rewards.shape[0]

    @property
    def n_envs(self) -> int:
        return self.rewards.shape[1]


class RolloutCollector:
    """Holds the environment bank and its carried state between collections."""

    def __init__(self, cfg: RunConfig, master_seed: int, n_envs: Optional[int] = None,
                 check_invariants: bool = False):
        self.cfg = cfg
        n_envs = n_envs or cfg.ppo.n_envs
        self.envs = [NavEnv(cfg, check_invariants=check_invariants) for _ in range(n_envs)]
        self.seed_rngs = [np.random.default_rng(np.random.SeedSequence([master_seed, i]))
                          for i in range(n_envs)]
        self.obs = [env.reset(self._next_seed(i)) for i, env in enumerate(self.envs)]
        self.hidden: Optional[torch.Tensor] = None
        self.running_return = np.zeros(n_envs)
        self.generator = torch.Generator().manual_seed(master_seed)

    def _next_seed(self, i: int) -> int:
        return int(self.seed_rngs[i].integers(0, 2**31 - 1))

    @torch.no_grad()
    def collect(self, policy: PolicyNet, horizon: int) -> RolloutBuffer:
        n = len(self.envs)
        if self.hidden is None:
            self.hidden = policy.initial_hidden(n)
        dtype = self.hidden.dtype
        v_max = self.cfg.episode.robot_v_max
        obs_steps, hid, pre, logp, vals, rews, dones = [], [], [], [], [], [], []
        parts = np.zeros((horizon, n, len(REWARD_PARTS)))
        events = np.zeros((horizon, n), dtype=np.int64)
        ep_returns, ep_outcomes = [], []
        policy.train()
        for t in range(horizon):
            batch = stack_obs(self.obs, dtype)
            out = policy(batch, self.hidden, generator=self.generator)
            dist = out.dist(v_max)
            x = dist.sample(self.generator)
            actions = SquashedGaussian.squash(x, v_max).double().numpy()
            obs_steps.append(batch)
            hid.append(self.hidden)
            pre.append(x)
            logp.append(dist.log_prob(x))
            vals.append(out.value)
            step_rew = np.zeros(n)
            step_done = np.zeros(n)
            next_hidden = out.hidden.clone()
            for i, env in enumerate(self.envs):
                obs, reward, event = env.step(actions[i])
                step_rew[i] = reward.total
                parts[t, i] = [getattr(reward, k) for k in REWARD_PARTS]
                events[t, i] = EVENT_CODES[event]
                self.running_return[i] += reward.total
                if event.terminal:
                    step_done[i] = 1.0
                    ep_returns.append(self.running_return[i])
                    ep_outcomes.append(event.value)
                    self.running_return[i] = 0.0
                    obs = env.reset(self._next_seed(i))
                    next_hidden[i] = 0.0
                self.obs[i] = obs
            rews.append(torch.as_tensor(step_rew, dtype=dtype))
            dones.append(torch.as_tensor(step_done, dtype=dtype))
            self.hidden = next_hidden
        last = policy(stack_obs(self.obs, dtype), self.hidden, generator=self.generator).value
        stacked = {k: torch.stack([b[k] for b in obs_steps]) for k in OBS_KEYS}
        return RolloutBuffer(stacked, torch.stack(hid), torch.stack(pre), torch.stack(logp),
                             torch.stack(vals), torch.stack(rews), torch.stack(dones), last,
                             parts, events, ep_returns, ep_outcomes)


def collect_rollouts(collector: RolloutCollector, policy: PolicyNet, horizon: int) -> RolloutBuffer:
    return collector.collect(policy, horizon)


def compute_gae(rewards: torch.Tensor, values: torch.Tensor, dones: torch.Tensor,
                last_value: torch.Tensor, gamma: float, lam: float) -> tuple[torch.Tensor, torch.Tensor]:
    """Generalised advantage estimates; ``dones[t]`` cuts bootstrapping after step t."""
    horizon = rewards.shape[0]
    adv = torch.zeros_like(rewards)
    running = torch.zeros_like(last_value)
    for t in reversed(range(horizon)):
        next_value = last_value if t == horizon - 1 else values[t + 1]
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * live - values[t]
        running = delta + gamma * lam * live * running
        adv[t] = running
    return adv, adv + values


def clipped_surrogate(log_probs: torch.Tensor, old_log_probs: torch.Tensor,
                      advantages: torch.Tensor, clip: float) -> tuple[torch.Tensor, torch.Tensor]:
    ratio = torch.exp(log_probs - old_log_probs)
    unclipped = ratio * advantages
    clipped = torch.clamp(ratio, 1.0 - clip, 1.0 + clip) * advantages
    return -torch.min(unclipped, clipped).mean(), ratio


def ppo_update(policy: PolicyNet, optimizer: torch.optim.Optimizer, buffer: RolloutBuffer,
               cfg: PpoConfig, generator: Optional[torch.Generator] = None,
               v_max: float = 1.0) -> dict:
    adv, returns = compute_gae(buffer.rewards, buffer.values, buffer.dones, buffer.last_value,
                               cfg.gamma, cfg.gae_lambda)
    n = buffer.horizon * buffer.n_envs
    flat = {k: v.reshape(n, *v.shape[2:]) for k, v in buffer.obs.items()}
    hidden = buffer.hidden.reshape(n, -1)
    pre = buffer.pre_actions.reshape(n, 2)
    old_logp = buffer.log_probs.reshape(n)
    adv = adv.reshape(n)
    returns = returns.reshape(n)
    adv = (adv - adv.mean()) / (adv.std() + 1e-8) if n > 1 else adv - adv.mean()
    kl_coef = cfg.effective_kl_coef

    policy.train()
    stats = {"policy_loss": [], "value_loss": [], "entropy": [], "bnn_kl": [],
             "approx_kl": [], "clip_frac": []}
    for _ in range(cfg.epochs):
        order = torch.randperm(n, generator=generator)
        for start in range(0, n, cfg.minibatch_size):
            idx = order[start:start + cfg.minibatch_size]
            obs = {k: v[idx] for k, v in flat.items()}
            out = policy(obs, hidden[idx], generator=generator)
            dist = out.dist(v_max)
            logp = dist.log_prob(pre[idx])
            pg_loss, ratio = clipped_surrogate(logp, old_logp[idx], adv[idx], cfg.clip)
            v_loss = ((out.value - returns[idx]) ** 2).mean()
            entropy = dist.entropy().mean()
            loss = pg_loss + cfg.value_coef * v_loss - cfg.entropy_coef * entropy + kl_coef * out.kl
            if not torch.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite PPO loss: policy={pg_loss.item()} value={v_loss.item()} "
                    f"entropy={entropy.item()} kl={float(out.kl)}")
            optimizer.zero_grad()
            loss.backward()
            if cfg.max_grad_norm:
                torch.nn.utils.clip_grad_norm_(policy.parameters(), cfg.max_grad_norm)
            optimizer.step()
            with torch.no_grad():
                stats["policy_loss"].append(pg_loss.item())
                stats["value_loss"].append(v_loss.item())
                stats["entropy"].append(entropy.item())
                stats["bnn_kl"].append(float(out.kl))
                stats["approx_kl"].append((old_logp[idx] - logp).mean().item())
                stats["clip_frac"].append(((ratio - 1.0).abs() > cfg.clip).float().mean().item())
    return {k: float(np.mean(v)) for k, v in stats.items()}
