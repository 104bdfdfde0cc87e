import json

import numpy as np
import pytest

from dialshape.acts import DialogueAct
from dialshape.belief import init_belief, update
from dialshape.features import extract, feature_dim, feature_schema, initial_features, write_schema
from dialshape.ontology import Ontology
from dialshape.user import Observation


def test_default_dim(onto):
    assert feature_dim(onto) == 64
    names = [n for n, _, _ in feature_schema(onto)]
    assert names == ["goal.food", "goal.area", "goal.pricerange", "method", "discourse",
                     "user_act", "system_action", "turn"]


def test_dim_follows_ontology(onto):
    extra = Ontology(onto.constraint_slots + (("stars", tuple("123456789")),), onto.request_slots,
                     tuple(dict(v, stars="1") for v in onto.venues))
    # ten goal entries plus request, confirm and select actions for the new slot
    assert feature_dim(extra) == 77


def test_schema_contiguous(onto, tmp_path):
    schema = feature_schema(onto)
    for (_, o1, w1), (_, o2, _) in zip(schema, schema[1:]):
        assert o2 == o1 + w1
    path = tmp_path / "s.json"
    write_schema(onto, path)
    assert json.loads(path.read_text())["dim"] == 64


def test_extract_layout(onto):
    b = update(init_belief(onto), Observation(DialogueAct("inform", "food", "thai"), 0.8), None, onto)
    f = extract(b, Observation(DialogueAct("inform", "food", "thai"), 0.8), 9, 3, 30, onto)
    seg = {n: f[o:o + w] for n, o, w in feature_schema(onto)}
    assert f.shape == (64,)
    assert np.array_equal(seg["goal.food"], b.goal["food"])
    assert seg["user_act"].tolist() == [0, 1, 0, 0, 0, 0, 0, 0, 0]
    assert np.flatnonzero(seg["system_action"]).tolist() == [9]
    assert seg["turn"][0] == pytest.approx(0.1)


def test_initial_features(onto):
    f = initial_features(init_belief(onto), onto)
    seg = {n: f[o:o + w] for n, o, w in feature_schema(onto)}
    assert seg["turn"][0] == 0.0
    assert seg["user_act"][-1] == 1.0
    assert np.flatnonzero(seg["system_action"]).tolist() == [19]


def test_extract_rejects_bad_input(onto, tiny_onto):
    b = init_belief(onto)
    o = Observation(DialogueAct("null"), 1.0)
    with pytest.raises(ValueError):
        extract(b, o, 0, 31, 30, onto)
    with pytest.raises(ValueError):
        extract(b, o, 20, 1, 30, onto)
    with pytest.raises(ValueError):
        extract(init_belief(tiny_onto), o, 0, 1, 30, onto)
