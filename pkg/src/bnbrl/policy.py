"""Policy network: attention over humans and beliefs, Bayesian belief encoder,
recurrent temporal stage and actor-critic heads.

Data flow for one step (batched over environments)::

    human rows --embed--> self-attention (HH) --robot cross-attention--> v_RH
    belief rows --BNN--> self-attention (BB) --robot cross-attention--> v_RB
    robot state --embed--> w
    GRU(h, [v_RH, w, v_RB]) -> h -> actor (squashed Gaussian), critic

Masked rows never influence unmasked ones: masked keys get a -1e9 score and
masked query rows are zeroed. Variants switch stages off (see ``VARIANT_FLAGS``).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import torch
import torch.nn.functional as F
from torch import nn

from .config import NetConfig

log = logging.getLogger(__name__)

MASK_SCORE = -1e9
ROBOT_FEATURES = 9

VARIANT_FLAGS = {
    # variant: (use_prediction, use_attention, use_belief, bayesian)
    "bnbrl+": (True, True, True, True),
    "bndnn": (True, True, True, False),
    "bnbrl": (True, True, False, True),
    "rnn-baseline": (False, False, False, False),
}


def masked_mean(rows: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    m = mask.to(rows.dtype).unsqueeze(-1)
    count = m.sum(dim=-2).clamp(min=1.0)
    return (rows * m).sum(dim=-2) / count


class MultiHeadSelfAttention(nn.Module):
    """Scaled dot-product attention with H heads; heads are column blocks of the projections."""

    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        self.d_model = d_model
        self.n_heads = n_heads
        self.d_k = d_model // n_heads
        self.w_q = nn.Linear(d_model, n_heads * self.d_k, bias=False)
        self.w_k = nn.Linear(d_model, n_heads * self.d_k, bias=False)
        self.w_v = nn.Linear(d_model, n_heads * self.d_k, bias=False)
        self.w_o = nn.Linear(n_heads * self.d_k, d_model, bias=False)

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        b, n, _ = x.shape
        return x.view(b, n, self.n_heads, self.d_k).transpose(1, 2)

    def attention_weights(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        q, k = self._split(self.w_q(x)), self._split(self.w_k(x))
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.d_k)
        scores = scores + (~mask)[:, None, None, :].to(scores.dtype) * MASK_SCORE
        return torch.softmax(scores, dim=-1)

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        b, n, _ = x.shape
        attn = self.attention_weights(x, mask)
        heads = attn @ self._split(self.w_v(x))
        out = self.w_o(heads.transpose(1, 2).reshape(b, n, self.n_heads * self.d_k))
        return out * mask.unsqueeze(-1).to(out.dtype)


class RobotCrossAttention(nn.Module):
    """Rows attend to the single robot token; queries and values come from the rows.

    With one key the softmax weight is 1, so each row's output is its own value
    projection; rows are then pooled by masked mean.
    """

    def __init__(self, d_model: int):
        super().__init__()
        self.d_k = d_model
        self.w_q = nn.Linear(d_model, d_model, bias=False)
        self.w_k = nn.Linear(d_model, d_model, bias=False)
        self.w_v = nn.Linear(d_model, d_model, bias=False)

    def rows(self, x: torch.Tensor, robot: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        q = self.w_q(x)
        k = self.w_k(robot).unsqueeze(1)
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.d_k)  # (B, N, 1)
        weights = torch.softmax(scores, dim=-1)
        out = weights * self.w_v(x)
        return out * mask.unsqueeze(-1).to(out.dtype)

    def forward(self, x: torch.Tensor, robot: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        return masked_mean(self.rows(x, robot, mask), mask)


class BayesLinear(nn.Module):
    """Affine layer with a factorised Gaussian posterior over weights and biases."""

    def __init__(self, n_in: int, n_out: int, prior_sigma: float = 0.1, init_rho: float = -5.0):
        super().__init__()
        bound = 1.0 / math.sqrt(n_in)
        self.mu_w = nn.Parameter(torch.empty(n_out, n_in).uniform_(-bound, bound))
        self.mu_b = nn.Parameter(torch.zeros(n_out))
        self.rho_w = nn.Parameter(torch.full((n_out, n_in), init_rho))
        self.rho_b = nn.Parameter(torch.full((n_out,), init_rho))
        self.prior_sigma = prior_sigma

    def forward(self, x: torch.Tensor, eps: Optional[tuple] = None) -> torch.Tensor:
        if eps is None:
            return F.linear(x, self.mu_w, self.mu_b)
        w = self.mu_w + F.softplus(self.rho_w) * eps[0]
        b = self.mu_b + F.softplus(self.rho_b) * eps[1]
        return F.linear(x, w, b)

    def sample_eps(self, generator: Optional[torch.Generator] = None) -> tuple:
        kw = dict(dtype=self.mu_w.dtype, device=self.mu_w.device, generator=generator)
        return torch.randn(self.mu_w.shape, **kw), torch.randn(self.mu_b.shape, **kw)

    def kl(self) -> torch.Tensor:
        """KL(q || N(0, prior_sigma^2)) summed over every weight and bias."""
        total = self.mu_w.new_zeros(())
        for mu, rho in ((self.mu_w, self.rho_w), (self.mu_b, self.rho_b)):
            sigma = F.softplus(rho)
            total = total + (math.log(self.prior_sigma) - torch.log(sigma)
                             + (sigma ** 2 + mu ** 2) / (2.0 * self.prior_sigma ** 2) - 0.5).sum()
        return total


class BeliefBNN(nn.Module):
    """Two Bayesian affine layers with ReLU between."""

    def __init__(self, n_in: int, hidden: int, n_out: int, prior_sigma: float, init_rho: float):
        super().__init__()
        self.l1 = BayesLinear(n_in, hidden, prior_sigma, init_rho)
        self.l2 = BayesLinear(hidden, n_out, prior_sigma, init_rho)

    def forward(self, x: torch.Tensor, n_samples: int = 1, generator: Optional[torch.Generator] = None,
                deterministic: bool = False, activation=F.relu) -> tuple[torch.Tensor, torch.Tensor]:
        if deterministic:
            return self.l2(activation(self.l1(x))), x.new_zeros(())
        if n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        outs = []
        for _ in range(n_samples):
            e1, e2 = self.l1.sample_eps(generator), self.l2.sample_eps(generator)
            outs.append(self.l2(activation(self.l1(x, e1)), e2))
        return torch.stack(outs).mean(dim=0), self.l1.kl() + self.l2.kl()


class SquashedGaussian:
    """Diagonal Gaussian in R^2 pushed through the radial squash
    ``a = v_max * tanh(|x|) * x / |x|``, so every action satisfies ``|a| <= v_max``.

    Log-probabilities are taken on the pre-squash sample ``x`` and include the
    Jacobian ``v_max^2 * sech^2(r) * tanh(r) / r`` of the squash.
    """

    def __init__(self, mean: torch.Tensor, log_std: torch.Tensor, v_max: float):
        self.mean = mean
        self.log_std = log_std.expand_as(mean)
        self.v_max = v_max

    @property
    def std(self) -> torch.Tensor:
        return self.log_std.exp()

    def sample(self, generator: Optional[torch.Generator] = None) -> torch.Tensor:
        eps = torch.randn(self.mean.shape, dtype=self.mean.dtype, generator=generator)
        return self.mean + self.std * eps

    @staticmethod
    def squash(x: torch.Tensor, v_max: float) -> torch.Tensor:
        r = x.norm(dim=-1, keepdim=True)
        return v_max * x * _tanh_over(r)

    def deterministic(self) -> torch.Tensor:
        return self.squash(self.mean, self.v_max)

    def gaussian_log_prob(self, x: torch.Tensor) -> torch.Tensor:
        z = (x - self.mean) / self.std
        return (-0.5 * z ** 2 - self.log_std - 0.5 * math.log(2 * math.pi)).sum(-1)

    def log_abs_det_jacobian(self, x: torch.Tensor) -> torch.Tensor:
        r = x.norm(dim=-1)
        log_sech2 = 2.0 * (math.log(2.0) - r - F.softplus(-2.0 * r))
        return 2.0 * math.log(self.v_max) + log_sech2 + torch.log(_tanh_over(r))

    def log_prob(self, x: torch.Tensor) -> torch.Tensor:
        return self.gaussian_log_prob(x) - self.log_abs_det_jacobian(x)

    def entropy(self) -> torch.Tensor:
        """Entropy of the pre-squash Gaussian (the squashed one has no closed form)."""
        return (0.5 + 0.5 * math.log(2 * math.pi) + self.log_std).sum(-1)


def _tanh_over(r: torch.Tensor) -> torch.Tensor:
    """tanh(r) / r, continuous at 0."""
    small = r < 1e-4
    safe = torch.where(small, torch.ones_like(r), r)
    return torch.where(small, 1.0 - r ** 2 / 3.0, torch.tanh(safe) / safe)


@dataclass
class PolicyOutput:
    mean: torch.Tensor
    log_std: torch.Tensor
    value: torch.Tensor
    hidden: torch.Tensor
    kl: torch.Tensor

    def dist(self, v_max: float) -> SquashedGaussian:
        return SquashedGaussian(self.mean, self.log_std, v_max)


class PolicyNet(nn.Module):
    def __init__(self, cfg: NetConfig, horizon: int = 5):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        self.horizon = horizon
        self.use_prediction, self.use_attention, self.use_belief, self.bayesian = VARIANT_FLAGS[cfg.variant]
        d = cfg.d_model
        self.human_width = 2 + 2 * horizon
        self.belief_width = 2 * (horizon + 1) + 1

        self.human_embed = nn.Linear(self.human_width, d)
        self.robot_embed = nn.Linear(ROBOT_FEATURES, d)
        self.hh_attn = MultiHeadSelfAttention(d, cfg.n_heads)
        self.rh_attn = RobotCrossAttention(d)
        self.bnn = BeliefBNN(self.belief_width, cfg.bnn_hidden, d, cfg.prior_sigma, cfg.init_rho)
        self.bb_attn = MultiHeadSelfAttention(d, cfg.n_heads)
        self.rb_attn = RobotCrossAttention(d)
        self.gru = nn.GRUCell(3 * d, cfg.gru_hidden)
        self.actor = nn.Sequential(nn.Linear(cfg.gru_hidden, cfg.head_hidden), nn.Tanh(),
                                   nn.Linear(cfg.head_hidden, 2))
        self.log_std = nn.Parameter(torch.full((2,), cfg.init_log_std))
        self.critic = nn.Sequential(nn.Linear(cfg.gru_hidden, cfg.head_hidden), nn.Tanh(),
                                    nn.Linear(cfg.head_hidden, 1))
        with torch.no_grad():
            self.actor[-1].weight.mul_(0.01)
            self.actor[-1].bias.zero_()
        log.info("PolicyNet[%s]: %d parameters", cfg.variant, self.n_parameters())

    def n_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def initial_hidden(self, batch: int) -> torch.Tensor:
        p = next(self.parameters())
        return p.new_zeros(batch, self.cfg.gru_hidden)

    # -- stages ---------------------------------------------------------------

    def embed_humans(self, human: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        if not self.use_prediction:
            human = torch.cat([human[..., :2], torch.zeros_like(human[..., 2:])], dim=-1)
        return self.human_embed(human) * mask.unsqueeze(-1).to(human.dtype)

    def human_branch(self, human, mask, w) -> torch.Tensor:
        x = self.embed_humans(human, mask)
        if not self.use_attention:
            return masked_mean(x, mask)
        return self.rh_attn(self.hh_attn(x, mask), w, mask)

    def belief_branch(self, belief, mask, w, n_samples, generator) -> tuple[torch.Tensor, torch.Tensor]:
        feats, kl = self.bnn(belief, n_samples=n_samples, generator=generator,
                             deterministic=not self.bayesian)
        feats = feats * mask.unsqueeze(-1).to(feats.dtype)
        v_rb = self.rb_attn(self.bb_attn(feats, mask), w, mask)
        return v_rb, kl

    def forward(self, obs: dict, hidden: torch.Tensor, n_samples: Optional[int] = None,
                generator: Optional[torch.Generator] = None) -> PolicyOutput:
        if n_samples is None:
            n_samples = self.cfg.n_samples_train if self.training else self.cfg.n_samples_eval
        w = F.relu(self.robot_embed(obs["robot"]))
        v_rh = self.human_branch(obs["human"], obs["human_mask"], w)
        if self.use_belief:
            v_rb, kl = self.belief_branch(obs["belief"], obs["belief_mask"], w, n_samples, generator)
        else:
            v_rb, kl = torch.zeros_like(v_rh), w.new_zeros(())
        h = self.gru(torch.cat([v_rh, w, v_rb], dim=-1), hidden)
        mean = self.actor(h)
        value = self.critic(h).squeeze(-1)
        return PolicyOutput(mean, self.log_std, value, h, kl)


def build_policy(cfg: NetConfig, horizon: int = 5, seed: int = 0) -> PolicyNet:
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        return PolicyNet(cfg, horizon)
