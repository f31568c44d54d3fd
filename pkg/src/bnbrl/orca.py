"""Optimal reciprocal collision avoidance for disc agents.

Each neighbour contributes one half-plane of permitted velocities; the new
velocity is the point of the intersection (clipped to the speed disc) closest
to the preferred velocity. When the intersection is empty the fallback program
minimises the largest constraint violation.

Internals work on plain floats: these routines run for every human on every
simulator step and small numpy arrays are much slower than tuples here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

EPSILON = 1e-9


@dataclass
class Line:
    """Directed line; permitted velocities lie on its left (``det(dir, p - v) <= 0``)."""

    px: float
    py: float
    dx: float
    dy: float


def _det(ax: float, ay: float, bx: float, by: float) -> float:
    return ax * by - ay * bx


def orca_lines(
    position: Sequence[float],
    velocity: Sequence[float],
    radius: float,
    others_pos: np.ndarray,
    others_vel: np.ndarray,
    others_radius: np.ndarray,
    dt: float,
    time_horizon: float,
    responsibility: float = 0.5,
) -> list[Line]:
    """Build one ORCA half-plane per neighbour."""
    lines = []
    inv_tau = 1.0 / time_horizon
    px, py = float(position[0]), float(position[1])
    vx, vy = float(velocity[0]), float(velocity[1])
    for (ox, oy), (ovx, ovy), orad in zip(others_pos.tolist(), others_vel.tolist(), others_radius.tolist()):
        rpx, rpy = ox - px, oy - py
        rvx, rvy = vx - ovx, vy - ovy
        dist_sq = rpx * rpx + rpy * rpy
        combined = radius + orad
        combined_sq = combined * combined

        if dist_sq > combined_sq:
            wx, wy = rvx - inv_tau * rpx, rvy - inv_tau * rpy
            w_len_sq = wx * wx + wy * wy
            dot1 = wx * rpx + wy * rpy
            if dot1 < 0.0 and dot1 * dot1 > combined_sq * w_len_sq:
                # project on the cut-off circle
                w_len = math.sqrt(w_len_sq)
                ux, uy = wx / w_len, wy / w_len
                dirx, diry = uy, -ux
                scale = combined * inv_tau - w_len
                bx, by = scale * ux, scale * uy
            else:
                leg = math.sqrt(dist_sq - combined_sq)
                if _det(rpx, rpy, wx, wy) > 0.0:
                    dirx = (rpx * leg - rpy * combined) / dist_sq
                    diry = (rpx * combined + rpy * leg) / dist_sq
                else:
                    dirx = -(rpx * leg + rpy * combined) / dist_sq
                    diry = -(-rpx * combined + rpy * leg) / dist_sq
                dot2 = rvx * dirx + rvy * diry
                bx, by = dot2 * dirx - rvx, dot2 * diry - rvy
        else:
            # already overlapping: resolve within one step
            inv_dt = 1.0 / dt
            wx, wy = rvx - inv_dt * rpx, rvy - inv_dt * rpy
            w_len = math.hypot(wx, wy)
            if w_len < EPSILON:
                # coincident centres with equal velocities; pick a fixed escape axis
                ux, uy = 1.0, 0.0
                w_len = 0.0
            else:
                ux, uy = wx / w_len, wy / w_len
            dirx, diry = uy, -ux
            scale = combined * inv_dt - w_len
            bx, by = scale * ux, scale * uy
        lines.append(Line(vx + responsibility * bx, vy + responsibility * by, dirx, diry))
    return lines


def _lp1(lines: list[Line], n: int, radius: float, opt: tuple, direction_opt: bool):
    ln = lines[n]
    dot = ln.px * ln.dx + ln.py * ln.dy
    disc = dot * dot + radius * radius - (ln.px * ln.px + ln.py * ln.py)
    if disc < 0.0:
        return None
    sq = math.sqrt(disc)
    t_left, t_right = -dot - sq, -dot + sq
    for i in range(n):
        li = lines[i]
        denom = _det(ln.dx, ln.dy, li.dx, li.dy)
        numer = _det(li.dx, li.dy, ln.px - li.px, ln.py - li.py)
        if abs(denom) <= EPSILON:
            if numer < 0.0:
                return None
            continue
        t = numer / denom
        if denom >= 0.0:
            t_right = min(t_right, t)
        else:
            t_left = max(t_left, t)
        if t_left > t_right:
            return None
    if direction_opt:
        if opt[0] * ln.dx + opt[1] * ln.dy > 0.0:
            t = t_right
        else:
            t = t_left
    else:
        t = ln.dx * (opt[0] - ln.px) + ln.dy * (opt[1] - ln.py)
        t = min(max(t, t_left), t_right)
    return (ln.px + t * ln.dx, ln.py + t * ln.dy)


def _lp2(lines: list[Line], radius: float, opt: tuple, direction_opt: bool):
    if direction_opt:
        result = (opt[0] * radius, opt[1] * radius)
    elif opt[0] * opt[0] + opt[1] * opt[1] > radius * radius:
        norm = math.hypot(opt[0], opt[1])
        result = (opt[0] / norm * radius, opt[1] / norm * radius)
    else:
        result = (opt[0], opt[1])
    for i, li in enumerate(lines):
        if _det(li.dx, li.dy, li.px - result[0], li.py - result[1]) > 0.0:
            new = _lp1(lines, i, radius, opt, direction_opt)
            if new is None:
                return i, result
            result = new
    return len(lines), result


def _lp3(lines: list[Line], begin: int, radius: float, result: tuple) -> tuple:
    distance = 0.0
    for i in range(begin, len(lines)):
        li = lines[i]
        if _det(li.dx, li.dy, li.px - result[0], li.py - result[1]) > distance:
            proj = []
            for j in range(i):
                lj = lines[j]
                determinant = _det(li.dx, li.dy, lj.dx, lj.dy)
                if abs(determinant) <= EPSILON:
                    if li.dx * lj.dx + li.dy * lj.dy > 0.0:
                        continue
                    ptx, pty = 0.5 * (li.px + lj.px), 0.5 * (li.py + lj.py)
                else:
                    s = _det(lj.dx, lj.dy, li.px - lj.px, li.py - lj.py) / determinant
                    ptx, pty = li.px + s * li.dx, li.py + s * li.dy
                ddx, ddy = lj.dx - li.dx, lj.dy - li.dy
                norm = math.hypot(ddx, ddy)
                proj.append(Line(ptx, pty, ddx / norm, ddy / norm))
            count, candidate = _lp2(proj, radius, (-li.dy, li.dx), True)
            if count >= len(proj):
                result = candidate
            distance = _det(li.dx, li.dy, li.px - result[0], li.py - result[1])
    return result


def solve_orca_lp(lines: list[Line], max_speed: float, pref_velocity: Sequence[float]) -> np.ndarray:
    """Closest velocity to ``pref_velocity`` inside all half-planes and the speed disc."""
    opt = (float(pref_velocity[0]), float(pref_velocity[1]))
    fail, result = _lp2(lines, max_speed, opt, False)
    if fail < len(lines):
        result = _lp3(lines, fail, max_speed, result)
    return np.array(result, dtype=float)


def preferred_velocity(position, goal, preferred_speed: float, dt: float) -> np.ndarray:
    """Head straight for the goal, slowing so the goal is not overshot in one step."""
    delta = np.asarray(goal, dtype=float) - np.asarray(position, dtype=float)
    dist = float(np.hypot(delta[0], delta[1]))
    if dist < 1e-12:
        return np.zeros(2)
    speed = min(preferred_speed, dist / dt)
    return delta / dist * speed


def orca_preferred_velocity(agent, dt: float) -> np.ndarray:
    return preferred_velocity(agent.position, agent.goal, agent.preferred_speed, dt)


def compute_orca_velocity(
    position,
    velocity,
    radius: float,
    pref_velocity,
    max_speed: float,
    others_pos: np.ndarray,
    others_vel: np.ndarray,
    others_radius: np.ndarray,
    dt: float,
    time_horizon: float = 2.0,
    neighbor_dist: float = 10.0,
    responsibility: float = 0.5,
) -> np.ndarray:
    others_pos = np.asarray(others_pos, dtype=float).reshape(-1, 2)
    others_vel = np.asarray(others_vel, dtype=float).reshape(-1, 2)
    others_radius = np.asarray(others_radius, dtype=float).reshape(-1)
    if len(others_pos):
        near = np.hypot(*(others_pos - np.asarray(position, dtype=float)).T) < neighbor_dist
        others_pos, others_vel, others_radius = others_pos[near], others_vel[near], others_radius[near]
    lines = orca_lines(position, velocity, radius, others_pos, others_vel, others_radius,
                       dt, time_horizon, responsibility)
    return solve_orca_lp(lines, max_speed, pref_velocity)


def orca_velocity(agent, neighbors: list, dt: float, time_horizon: float = 2.0,
                  neighbor_dist: float = 10.0) -> np.ndarray:
    """ORCA velocity for a human given neighbouring humans or robots.

    Neighbours only need ``position``, ``velocity`` and ``radius``.
    """
    if neighbors:
        pos = np.array([n.position for n in neighbors], dtype=float)
        vel = np.array([n.velocity for n in neighbors], dtype=float)
        rad = np.array([n.radius for n in neighbors], dtype=float)
    else:
        pos = vel = np.zeros((0, 2))
        rad = np.zeros(0)
    pref = orca_preferred_velocity(agent, dt)
    return compute_orca_velocity(agent.position, agent.velocity, agent.radius, pref,
                                 agent.preferred_speed, pos, vel, rad, dt,
                                 time_horizon, neighbor_dist)
