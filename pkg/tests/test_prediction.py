import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from bnbrl.prediction import ConstantVelocityPredictor, TrackHistory, predict


def history_from(track, n=1, length=5):
    """``track`` is a list over steps (oldest first) of a point or None."""
    h = TrackHistory.empty(n, length)
    for p in track:
        h = h.push({} if p is None else {0: np.asarray(p, float)})
    return h


def test_first_observation_lands_in_newest_column():
    h = TrackHistory.empty(5, 4).push({3: np.array([1.0, 2.0])})
    assert h.mask.sum() == 1 and h.mask[3, -1]
    assert np.array_equal(h.positions[3, -1], [1.0, 2.0])


def test_long_invisibility_clears_row():
    h = history_from([(0, 0), (1, 0)] + [None] * 5)
    assert not h.mask.any()
    assert not predict(h).valid[0]


def test_alternating_visibility():
    track = [(0, 0), None, (0.5, 0), None, (1.0, 0)]
    h = history_from(track)
    assert h.mask[0].tolist() == [True, False, True, False, True]
    assert np.array_equal(h.positions[0, 1], [0, 0]) and np.array_equal(h.positions[0, 3], [0, 0])


def test_stationary_history():
    p = predict(history_from([(2, 3)] * 5))
    assert p.valid[0] and np.allclose(p.positions[0], [[2, 3]] * 5)


def test_constant_advance():
    p = predict(history_from([(0.25 * k, 0) for k in range(5)]))
    expected = [(1.0 + 0.25 * k, 0) for k in range(1, 6)]
    assert np.allclose(p.positions[0], expected, atol=1e-12)


def test_single_point_has_zero_velocity():
    p = predict(history_from([None, None, None, None, (1, 1)]))
    assert np.allclose(p.positions[0], [[1, 1]] * 5)


def test_gap_uses_actual_step_gap():
    # 1 m/s along x observed at steps 0 and 3, unobserved since step 3
    track = [(0.0, 0), None, None, (0.75, 0), None]
    p = predict(history_from(track))
    # the newest column is step 4, so step 4 + k is 1 + k steps past the last sighting
    expected = [(0.75 + 0.25 * (k + 1), 0) for k in range(1, 6)]
    assert np.allclose(p.positions[0], expected, atol=1e-12)


@settings(max_examples=100)
@given(arrays(np.float64, (3, 5, 2), elements=st.floats(-10, 10)),
       arrays(np.bool_, (3, 5)),
       st.tuples(st.floats(-5, 5), st.floats(-5, 5)))
def test_translation_equivariance_and_totality(pos, mask, shift):
    pos = np.where(mask[..., None], pos, 0.0)
    h = TrackHistory(pos, mask)
    moved = TrackHistory(np.where(mask[..., None], pos + np.array(shift), 0.0), mask)
    a, b = predict(h), predict(moved)
    assert np.array_equal(a.valid, mask.any(axis=1))
    assert np.all(np.isfinite(a.positions))
    assert np.allclose(b.positions[a.valid], a.positions[a.valid] + np.array(shift), atol=1e-9)


def test_predictor_horizon_and_dt():
    pr = ConstantVelocityPredictor(horizon=3, dt=0.5)
    p = pr.predict(history_from([(0, 0), (0.5, 0)]))
    assert np.allclose(p.positions[0], [(1.0, 0), (1.5, 0), (2.0, 0)])
