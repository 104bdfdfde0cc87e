import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dialshape.env import GoalProgress
from dialshape.shaping import (ShapingConfig, SmallMDP, chain_mdp, greedy_sets, oracle_heuristic_potential,
                               policies_match, policy_invariance_check, potential_bonus, shape,
                               shaped_stream, value_iteration)


def test_shape_formula():
    assert shape(2.0, 5.0, 0.9) == pytest.approx(0.9 * 5.0 - 2.0)
    # terminal potential is forced to zero
    assert shape(2.0, 5.0, 0.9, is_terminal=True) == -2.0
    keep = ShapingConfig(0.9, terminal_potential_zero=False)
    assert shape(2.0, 5.0, 0.9, True, keep) == pytest.approx(2.5)


def test_shape_rejects_nan():
    with pytest.raises(ValueError):
        shape(math.nan, 0.0, 1.0)


def test_config_validates_gamma():
    with pytest.raises(ValueError):
        ShapingConfig(gamma=0.0)
    assert ShapingConfig(source="rnn").source.value == "rnn"


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=30), st.sampled_from([0.9, 0.99, 1.0]))
def test_telescoping(potentials, gamma):
    rewards = [-1.0] * len(potentials)
    stream = shaped_stream(potentials, rewards, gamma)
    total = sum(gamma ** t * tr.shaping for t, tr in enumerate(stream))
    # terminal potential zero, initial potential zero
    assert abs(total) < 1e-9
    assert all(tr.composite == tr.env_reward + tr.shaping for tr in stream)


def test_telescoping_with_nonzero_ends():
    cfg = ShapingConfig(0.9, terminal_potential_zero=False)
    phis = [3.0, -1.0, 4.0]
    stream = shaped_stream(phis, [0, 0, 0], 0.9, cfg, phi0=2.0)
    total = sum(0.9 ** t * tr.shaping for t, tr in enumerate(stream))
    assert total == pytest.approx(0.9 ** 3 * 4.0 - 2.0)


def test_stream_length_check():
    with pytest.raises(ValueError):
        shaped_stream([1.0], [1.0, 2.0], 1.0)


def test_oracle_potential():
    assert oracle_heuristic_potential(GoalProgress(2, 3, 0, 2)) == pytest.approx(6.667, abs=1e-3)
    assert oracle_heuristic_potential(GoalProgress(3, 3, 2, 2)) == 20.0
    with pytest.raises(PermissionError):
        oracle_heuristic_potential(None)


def test_value_iteration_on_two_state_mdp():
    # one live state: action 0 ends with +1, action 1 loops with +0.5
    P = np.zeros((2, 2, 2))
    P[0, 0, 1] = P[0, 1, 0] = 1.0
    P[1, :, 1] = 1.0
    R = np.zeros((2, 2, 2))
    R[0, 0, 1], R[0, 1, 0] = 1.0, 0.5
    mdp = SmallMDP(P, R, np.array([False, True]))
    Q = value_iteration(mdp, 0.9)
    # looping forever is worth 0.5 / 0.1 = 5
    assert Q[0].tolist() == pytest.approx([1.0, 5.0])
    assert greedy_sets(Q, mdp.terminal) == [frozenset({1}), frozenset()]


def test_chain_mdp_prefers_right():
    mdp = chain_mdp()
    Q = value_iteration(mdp, 0.95)
    sets = greedy_sets(Q, mdp.terminal)
    assert all(sets[s] == {1} for s in range(4))


def test_policy_invariance_random_potentials():
    mdp = chain_mdp()
    rng = np.random.default_rng(0)
    for gamma in (0.9, 1.0):
        for _ in range(30):
            assert policy_invariance_check(mdp, rng.normal(size=mdp.n_states) * 20, gamma)


def test_non_potential_bonus_can_change_policy():
    mdp = chain_mdp()
    bonus = np.zeros_like(mdp.R)
    bonus[:4, 0, :] = 50.0  # pay for moving left
    assert not policies_match(mdp, bonus, 0.95)


def test_potential_bonus_zeroes_terminal():
    mdp = chain_mdp(3)
    F = potential_bonus(mdp, np.array([1.0, 2.0, 5.0, 7.0]), 1.0)
    assert F[1, 1, 2] == pytest.approx(-2.0)
    assert F[0, 1, 1] == pytest.approx(1.0)


def test_small_mdp_validation():
    with pytest.raises(ValueError):
        SmallMDP(np.ones((2, 1, 2)), np.zeros((2, 1, 2)), np.array([False, True]))
    with pytest.raises(ValueError):
        chain_mdp(60)
