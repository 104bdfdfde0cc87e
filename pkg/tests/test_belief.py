import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dialshape.acts import USER_ACT_TYPES, DialogueAct, SystemAct
from dialshape.belief import METHODS, init_belief, update
from dialshape.user import Observation


def obs(act_type, slot=None, value=None, c=0.8):
    return Observation(DialogueAct(act_type, slot, value), c)


def test_initial_belief_is_uniform(onto):
    b = init_belief(onto)
    assert np.allclose(b.goal["food"], 1 / 11)
    assert np.allclose(b.goal["pricerange"], 1 / 4)
    assert b.method.tolist() == [1.0, 0.0, 0.0, 0.0]
    assert np.allclose(b.discourse, 1 / 9)
    assert b.top("food", onto) == (None, pytest.approx(1 / 11))


def test_inform_moves_mass_to_value(onto):
    b = update(init_belief(onto), obs("inform", "food", "thai"), None, onto)
    i = onto.values("food").index("thai")
    # 0.8 + 0.2 / 11
    assert b.goal["food"][i] == pytest.approx(0.8182, abs=1e-4)
    assert b.top("food", onto) == ("thai", pytest.approx(0.8182, abs=1e-4))
    assert np.allclose(b.goal["area"], 1 / 6)


def test_update_is_pure(onto):
    b0 = init_belief(onto)
    before = {k: v.copy() for k, v in b0.goal.items()}
    update(b0, obs("inform", "food", "thai"), None, onto)
    assert all(np.array_equal(before[k], b0.goal[k]) for k in before)
    with pytest.raises(ValueError):
        b0.goal["food"][0] = 1.0


def test_dontcare_carries_no_goal_evidence(onto):
    b0 = init_belief(onto)
    b = update(b0, obs("inform", "area", "dontcare"), None, onto)
    assert np.array_equal(b.goal["area"], b0.goal["area"])
    assert b.method[METHODS.index("byconstraints")] == pytest.approx(0.8)


def test_affirm_and_negate_resolve_against_confirm(onto):
    b = update(init_belief(onto), obs("inform", "area", "north", c=0.6), None, onto)
    confirm = SystemAct(4, "confirm", "area", "north")
    i = onto.values("area").index("north")
    yes = update(b, obs("affirm", c=0.5), confirm, onto)
    no = update(b, obs("negate", c=0.5), confirm, onto)
    assert yes.goal["area"][i] > b.goal["area"][i] > no.goal["area"][i]
    assert no.goal["area"][i] == pytest.approx(b.goal["area"][i] / 2)
    # the others grow in proportion
    ratio = no.goal["area"] / b.goal["area"]
    assert np.allclose(np.delete(ratio, i), ratio[0 if i else 1])
    # without a preceding confirm affirm/negate leave the goal alone
    alone = update(b, obs("negate"), None, onto)
    assert np.array_equal(alone.goal["area"], b.goal["area"])


def test_discourse_and_method(onto):
    b = update(init_belief(onto), obs("bye", c=0.9), None, onto)
    assert b.discourse[USER_ACT_TYPES.index("bye")] == pytest.approx(0.9 + 0.1 / 9)
    assert b.method[METHODS.index("finished")] == pytest.approx(0.9)
    b = update(b, obs("reqalts", c=1.0), None, onto)
    assert b.method[METHODS.index("byalternatives")] == pytest.approx(1.0)


def test_dimension_mismatch_raises(onto, tiny_onto):
    with pytest.raises(ValueError, match="slots"):
        update(init_belief(tiny_onto), obs("null"), None, onto)


def test_confidence_range_checked(onto):
    class Bad:
        observed_act = DialogueAct("null")
        confidence = 1.5
    with pytest.raises(ValueError):
        update(init_belief(onto), Bad(), None, onto)


ACTS = st.one_of(
    st.builds(lambda s, v: DialogueAct("inform", s, v), st.sampled_from(["food", "area", "pricerange"]),
              st.sampled_from(["thai", "north", "cheap", "dontcare", "british", "east"])),
    st.sampled_from([DialogueAct(t) for t in ("hello", "affirm", "negate", "reqalts", "bye", "null")]),
    st.builds(lambda s: DialogueAct("request", s), st.sampled_from(["phone", "address"])),
)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(ACTS, st.floats(0, 1)), max_size=15))
def test_distributions_stay_normalized(onto, steps):
    b = init_belief(onto)
    confirm = SystemAct(3, "confirm", "food", "thai")
    for act, c in steps:
        b = update(b, Observation(act, c), confirm, onto)
    for vec in list(b.goal.values()) + [b.method, b.discourse]:
        assert np.all(vec >= 0) and vec.sum() == pytest.approx(1.0)
