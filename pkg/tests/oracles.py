"""Independent reference implementations used as test oracles.

Each one is written the slow, obvious way and shares no code with the package
beyond plain data containers.
"""
from __future__ import annotations

import math

import numpy as np


# -- ORCA ---------------------------------------------------------------------

def halfplane_violation(line, v) -> float:
    """Positive when ``v`` lies on the forbidden (right) side of ``line``."""
    return line.dx * (line.py - v[1]) - line.dy * (line.px - v[0])


def grid_lp(lines, max_speed: float, pref, n: int = 200):
    """Best feasible velocity on an n x n grid over the speed disc (None if none is feasible)."""
    axis = np.linspace(-max_speed, max_speed, n)
    vx, vy = np.meshgrid(axis, axis)
    ok = vx ** 2 + vy ** 2 <= max_speed ** 2
    for ln in lines:
        ok &= ln.dx * (ln.py - vy) - ln.dy * (ln.px - vx) <= 0.0
    if not ok.any():
        return None
    d = np.hypot(vx - pref[0], vy - pref[1])
    d[~ok] = np.inf
    k = np.unravel_index(np.argmin(d), d.shape)
    return np.array([vx[k], vy[k]]), float(d[k])


# -- rewards ------------------------------------------------------------------

def brute_reward(event: str, robot_pos, robot_radius, d_min, d_goal, d_goal_prev,
                 pred_positions, pred_valid, beliefs, radii, cfg) -> float:
    """Enumerate every (human, step) penalty term, then pick the case.

    ``beliefs`` is a list of ``(human_id, trajectory, age)``; trajectory row 0
    is the current belief position.
    """
    if event == "ReachedGoal":
        return cfg.r_goal
    if event == "Collision":
        return cfg.r_col
    if d_min < cfg.danger_radius:
        return -cfg.w_disc * math.exp(-(d_min * d_min) / (2.0 * cfg.sigma_disc * cfg.sigma_disc))
    pred_terms = [0.0]
    for i in range(len(pred_valid)):
        if not pred_valid[i]:
            continue
        for k in range(1, pred_positions.shape[1] + 1):
            p = pred_positions[i, k - 1]
            if math.dist(robot_pos, p) < robot_radius + radii[i]:
                pred_terms.append(cfg.r_col / 2 ** k)
    bel_terms = [0.0]
    for hid, traj, age in beliefs:
        for k in range(1, len(traj)):
            if math.dist(robot_pos, traj[k]) < robot_radius + radii[hid]:
                bel_terms.append(cfg.r_col / 2 ** k * cfg.gamma_bel ** age)
    pot = cfg.pot_coeff * (d_goal_prev - d_goal)
    return min(pred_terms) + min(bel_terms) + pot


# -- networks -----------------------------------------------------------------

def softmax(x):
    e = np.exp(x - x.max())
    return e / e.sum()


def dense_mha(x, mask, wq, wk, wv, wo, n_heads):
    """Per-head loops over rows; weights in (out, in) layout like ``nn.Linear``."""
    n, d = x.shape
    dk = wq.shape[0] // n_heads
    q, k, v = x @ wq.T, x @ wk.T, x @ wv.T
    heads = np.zeros((n, n_heads * dk))
    keys = [j for j in range(n) if mask[j]]
    for h in range(n_heads):
        cols = slice(h * dk, (h + 1) * dk)
        for i in range(n):
            if not keys:
                continue
            scores = np.array([q[i, cols] @ k[j, cols] / math.sqrt(dk) for j in keys])
            w = softmax(scores)
            heads[i, cols] = sum(w[m] * v[j, cols] for m, j in enumerate(keys))
    out = heads @ wo.T
    out[~np.asarray(mask, dtype=bool)] = 0.0
    return out


def dense_cross(x, robot, mask, wq, wk, wv):
    """Rows query the single robot key; masked mean of the per-row outputs."""
    rows = []
    for i in range(len(x)):
        if not mask[i]:
            continue
        score = (x[i] @ wq.T) @ (robot @ wk.T) / math.sqrt(wq.shape[0])
        rows.append(softmax(np.array([score]))[0] * (x[i] @ wv.T))
    return np.mean(rows, axis=0) if rows else np.zeros(wv.shape[0])


def sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


def gru_scalar(x, h, w_ih, w_hh, b_ih, b_hh):
    """Element-by-element GRU step in the (reset, update, new) gate layout."""
    H = len(h)
    out = np.zeros(H)
    for j in range(H):
        def gate(g):
            row = g * H + j
            gi = sum(w_ih[row, m] * x[m] for m in range(len(x))) + b_ih[row]
            gh = sum(w_hh[row, m] * h[m] for m in range(H)) + b_hh[row]
            return gi, gh
        ri, rh = gate(0)
        zi, zh = gate(1)
        ni, nh = gate(2)
        r = sigmoid(ri + rh)
        z = sigmoid(zi + zh)
        n = math.tanh(ni + r * nh)
        out[j] = (1 - z) * n + z * h[j]
    return out


def finite_diff_grad(f, params, eps=1e-5):
    """Central differences of scalar ``f()`` w.r.t. every entry of every tensor in ``params``."""
    import torch
    grads = []
    with torch.no_grad():
        for p in params:
            g = torch.zeros_like(p)
            flat, gflat = p.view(-1), g.view(-1)
            for idx in range(flat.numel()):
                orig = flat[idx].item()
                flat[idx] = orig + eps
                up = f().item()
                flat[idx] = orig - eps
                down = f().item()
                flat[idx] = orig
                gflat[idx] = (up - down) / (2 * eps)
            grads.append(g)
    return grads


# -- training -----------------------------------------------------------------

def nested_gae(rewards, values, dones, last_value, gamma, lam):
    """A_t = sum_l (gamma*lam)^l delta_{t+l}, truncated at the first episode end."""
    T = len(rewards)
    vals = list(values) + [last_value]
    adv = np.zeros(T)
    for t in range(T):
        total, factor = 0.0, 1.0
        for l in range(t, T):
            nonterminal = 1.0 - dones[l]
            delta = rewards[l] + gamma * vals[l + 1] * nonterminal - vals[l]
            total += factor * delta
            if dones[l]:
                break
            factor *= gamma * lam
        adv[t] = total
    return adv


# -- metrics ------------------------------------------------------------------

def naive_metrics(logs, danger_radius=0.5):
    n = len(logs)
    succ, times, lengths, intr, steps = 0, [], [], 0, 0
    for log in logs:
        path = [log.header["initial"]["robot"][:2]] + [s["robot"][:2] for s in log.steps]
        length = 0.0
        for a, b in zip(path, path[1:]):
            length += math.hypot(b[0] - a[0], b[1] - a[1])
        lengths.append(length)
        if log.steps and log.steps[-1]["event"] == "ReachedGoal":
            succ += 1
            times.append(log.steps[-1]["sim_time"])
        for s in log.steps:
            steps += 1
            if s["d_min"] is not None and s["d_min"] < danger_radius:
                intr += 1
    return {"SR": succ / n, "NT": (sum(times) / len(times)) if times else None,
            "PL": sum(lengths) / n, "ITR": intr / steps if steps else 0.0}
