"""Per-turn feature vectors.

Layout: ``[goal distributions | method | discourse | user act one-hot |
system action one-hot | turn fraction]``. The user act one-hot uses the
single observed (top) act type.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .acts import USER_ACT_INDEX, USER_ACT_TYPES, DialogueAct, num_actions, summary_actions
from .belief import METHODS, BeliefState
from .ontology import Ontology
from .user import Observation


def feature_schema(ontology: Ontology) -> list[tuple[str, int, int]]:
    """``(segment name, offset, width)`` for every segment, in order."""
    widths = [(f"goal.{slot}", len(values) + 1) for slot, values in ontology.constraint_slots]
    widths += [
        ("method", len(METHODS)),
        ("discourse", len(USER_ACT_TYPES)),
        ("user_act", len(USER_ACT_TYPES)),
        ("system_action", num_actions(ontology)),
        ("turn", 1),
    ]
    schema, offset = [], 0
    for name, width in widths:
        schema.append((name, offset, width))
        offset += width
    return schema


def feature_dim(ontology: Ontology) -> int:
    _, offset, width = feature_schema(ontology)[-1]
    return offset + width


def write_schema(ontology: Ontology, path) -> None:
    rows = [{"segment": n, "offset": o, "width": w} for n, o, w in feature_schema(ontology)]
    Path(path).write_text(json.dumps({"dim": feature_dim(ontology), "segments": rows}, indent=1) + "\n")


def extract(
    belief: BeliefState,
    observation,
    system_action: int,
    turn_index: int,
    max_turns: int,
    ontology: Ontology,
) -> np.ndarray:
    if not 0 <= turn_index <= max_turns:
        raise ValueError(f"turn index {turn_index} outside [0, {max_turns}]")
    n_sys = num_actions(ontology)
    if not 0 <= system_action < n_sys:
        raise ValueError(f"system action {system_action} outside [0, {n_sys})")
    parts = []
    for slot, values in ontology.constraint_slots:
        p = belief.goal.get(slot)
        if p is None or p.shape != (len(values) + 1,):
            raise ValueError(f"belief for slot {slot!r} does not match the ontology")
        parts.append(p)
    if belief.method.shape != (len(METHODS),) or belief.discourse.shape != (len(USER_ACT_TYPES),):
        raise ValueError("belief method/discourse dimensions do not match")
    parts += [belief.method, belief.discourse]
    user = np.zeros(len(USER_ACT_TYPES))
    user[USER_ACT_INDEX[observation.observed_act.act_type]] = 1.0
    sys = np.zeros(n_sys)
    sys[system_action] = 1.0
    parts += [user, sys, [turn_index / max_turns]]
    return np.concatenate(parts)


def initial_features(belief: BeliefState, ontology: Ontology) -> np.ndarray:
    """Decision features before the first turn: null user act, hello, turn 0."""
    hello = next(a.index for a in summary_actions(ontology) if a.kind == "hello")
    return extract(belief, Observation(DialogueAct("null"), 1.0), hello, 0, ontology.max_turns, ontology)
