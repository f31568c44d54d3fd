import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bnbrl.belief import BeliefSet, BeliefTrack
from bnbrl.config import RewardConfig
from bnbrl.prediction import PredictionSet, TrackHistory
from bnbrl.rewards import r_bel, r_disc, r_pot, r_pred, step_reward, total_reward
from bnbrl.sim import EpisodeEvent, RobotState

from oracles import brute_reward

CFG = RewardConfig()
EVENTS = {"Running": EpisodeEvent.RUNNING, "ReachedGoal": EpisodeEvent.REACHED_GOAL,
          "Collision": EpisodeEvent.COLLISION, "Timeout": EpisodeEvent.TIMEOUT}


def robot_at(x, y, goal=(0.0, 4.5)):
    return RobotState(np.array([x, y], float), np.zeros(2), np.array(goal, float), 1.0, 0.0, 0.3)


def preds_with(points_per_human, k=5):
    """Predictions far away except the listed ``{human: {step: point}}`` overrides."""
    n = len(points_per_human)
    pos = np.full((n, k, 2), 100.0)
    for i, steps in enumerate(points_per_human):
        for step, p in steps.items():
            pos[i, step - 1] = p
    return PredictionSet(pos, np.ones(n, dtype=bool))


def belief(hid, age, steps):
    traj = np.full((6, 2), 100.0)
    for step, p in steps.items():
        traj[step] = p
    return BeliefTrack(hid, traj, age, TrackHistory.empty(1, 5))


def test_r_disc_examples():
    assert r_disc(0.0, CFG) == -0.25
    assert r_disc(0.6, CFG) == 0.0
    assert r_disc(0.2, CFG) == pytest.approx(-0.15163, abs=1e-5)
    assert r_disc(0.2, CFG) == -0.25 * math.exp(-0.5)


def test_r_pred_examples():
    radii = [0.3, 0.3]
    assert r_pred(robot_at(0, 0), preds_with([{1: (0.1, 0)}, {}]), radii, CFG) == -5.0
    assert r_pred(robot_at(0, 0), preds_with([{}, {}]), radii, CFG) == 0.0
    both = preds_with([{1: (0.1, 0)}, {3: (0, 0.2)}])
    assert r_pred(robot_at(0, 0), both, radii, CFG) == -5.0
    only3 = preds_with([{}, {3: (0, 0.2)}])
    assert r_pred(robot_at(0, 0), only3, radii, CFG) == -1.25


def test_r_pred_ignores_invalid_entries():
    p = preds_with([{1: (0, 0)}])
    p.valid[:] = False
    assert r_pred(robot_at(0, 0), p, [0.3], CFG) == 0.0


def test_r_bel_examples():
    radii = [0.3]
    assert r_bel(robot_at(0, 0), BeliefSet(), radii, CFG) == 0.0
    two = BeliefSet({0: belief(0, 2, {1: (0.1, 0)})})
    assert r_bel(robot_at(0, 0), two, radii, CFG) == (-10 / 2) * 0.9 ** 2
    assert r_bel(robot_at(0, 0), two, radii, CFG) == pytest.approx(-4.05, abs=1e-12)
    one = BeliefSet({0: belief(0, 1, {1: (0.1, 0)})})
    assert r_bel(robot_at(0, 0), one, radii, CFG) == pytest.approx(-4.5, abs=1e-12)
    # the current belief position (row 0) is not a future step
    assert r_bel(robot_at(0, 0), BeliefSet({0: belief(0, 1, {0: (0, 0)})}), radii, CFG) == 0.0


def test_r_pot_examples():
    assert r_pot(4.5, 5.0) == 0.75
    assert r_pot(3.0, 3.0) == 0.0
    assert r_pot(3.2, 3.0) == pytest.approx(-0.3)


def test_total_reward_cases():
    def tot(event, d_min, pred=-5.0, bel=0.0, pot=0.75):
        return total_reward(event, d_min, r_disc(d_min, CFG), pred, bel, pot, CFG).total
    assert tot(EpisodeEvent.REACHED_GOAL, 0.1) == 10
    assert tot(EpisodeEvent.COLLISION, -0.1) == -10
    assert tot(EpisodeEvent.RUNNING, 1.0) == -4.25
    assert tot(EpisodeEvent.RUNNING, 0.3) == r_disc(0.3, CFG)
    assert tot(EpisodeEvent.TIMEOUT, 1.0, -1.25, -0.5, 0.0) == -1.75


def test_breakdown_keeps_every_component():
    b = total_reward(EpisodeEvent.COLLISION, -0.1, -0.25, -5.0, -1.0, 0.3, CFG)
    assert (b.goal, b.col, b.disc, b.pred, b.bel, b.pot) == (0.0, -10.0, -0.25, -5.0, -1.0, 0.3)


def random_state(rng):
    n = int(rng.integers(0, 5))
    rob = robot_at(*rng.uniform(-1, 1, 2), goal=rng.uniform(-5, 5, 2))
    radii = rng.uniform(0.3, 0.5, max(n, 1))
    pos = rng.normal(0, 0.8, (n, 5, 2))
    valid = rng.uniform(size=n) < 0.8
    tracks = {}
    for hid in range(n):
        if not valid[hid] and rng.uniform() < 0.7:
            traj = rng.normal(0, 0.8, (6, 2))
            tracks[hid] = BeliefTrack(hid, traj, int(rng.integers(1, 21)), TrackHistory.empty(1, 5))
    event = rng.choice(list(EVENTS), p=[0.85, 0.05, 0.05, 0.05])
    d_min = float(rng.uniform(-0.2, 1.5))
    d_prev = float(rng.uniform(0, 9))
    return event, rob, radii, PredictionSet(pos, valid), BeliefSet(tracks), d_min, d_prev


def test_total_reward_matches_brute_force_on_random_states():
    rng = np.random.default_rng(1234)
    fired = 0
    for _ in range(10_000):
        event, rob, radii, preds, beliefs, d_min, d_prev = random_state(rng)
        got = step_reward(EVENTS[event], rob, d_min, d_prev, preds, beliefs, radii, CFG)
        d_goal = float(np.hypot(*(rob.position - rob.goal)))
        want = brute_reward(event, rob.position, rob.radius, d_min, d_goal, d_prev, preds.positions,
                            preds.valid, [(t.human_id, t.trajectory, t.age) for t in beliefs],
                            radii, CFG)
        assert got.total == want
        fired += got.pred < 0 or got.bel < 0
    assert fired > 1000


@settings(max_examples=300)
@given(st.floats(-2, 2), st.floats(-2, 2), st.integers(1, 20), st.floats(0.3, 0.5))
def test_belief_term_never_exceeds_prediction_term(x, y, age, radius):
    traj = np.vstack([[0, 0], np.linspace([x, y], [x + 1, y], 5)])
    rob = robot_at(0, 0)
    pred = r_pred(rob, PredictionSet(traj[None, 1:], np.array([True])), [radius], CFG)
    bel = r_bel(rob, BeliefSet({0: BeliefTrack(0, traj, age, TrackHistory.empty(1, 5))}), [radius], CFG)
    assert pred <= 0 and bel <= 0
    assert abs(bel) <= abs(pred)
