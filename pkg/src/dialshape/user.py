"""Agenda-style simulated user and the semantic-error channel."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .acts import DONTCARE, USER_ACT_TYPES, DialogueAct, SystemAct
from .ontology import Ontology

# probability that a corrupted act keeps its type and swaps the value
VALUE_SUBSTITUTION_P = 0.7
CORRECT_CONFIDENCE = (6.0, 2.0)
CORRUPT_CONFIDENCE = (2.0, 4.0)


@dataclass(frozen=True)
class UserGoal:
    constraints: dict
    requests: tuple

    def __post_init__(self):
        if not self.constraints or not self.requests:
            raise ValueError("a goal needs at least one constraint and one request")

    def satisfied_by(self, venue: dict) -> bool:
        return all(venue[s] == v for s, v in self.constraints.items())

    def to_dict(self) -> dict:
        return {"constraints": dict(self.constraints), "requests": list(self.requests)}

    @classmethod
    def from_dict(cls, d: dict) -> "UserGoal":
        return cls(dict(d["constraints"]), tuple(d["requests"]))


def sample_goal(ontology: Ontology, rng=None, slot_probs: Optional[dict] = None) -> UserGoal:
    """Draw a goal. Each constraint slot is included with ``slot_probs[slot]``
    (default 1.0) and gets a uniform value; requests are a uniform non-empty
    subset of the request slots."""
    rng = np.random.default_rng(rng)
    probs = slot_probs or {}
    constraints = {}
    for slot, values in ontology.constraint_slots:
        if rng.random() < probs.get(slot, 1.0):
            constraints[slot] = values[rng.integers(len(values))]
    if not constraints:
        slot, values = ontology.constraint_slots[rng.integers(len(ontology.constraint_slots))]
        constraints[slot] = values[rng.integers(len(values))]
    # uniform over the 2^n - 1 non-empty subsets
    n = len(ontology.request_slots)
    mask = int(rng.integers(1, 2 ** n))
    requests = tuple(s for i, s in enumerate(ontology.request_slots) if mask >> i & 1)
    return UserGoal(constraints, requests)


@dataclass
class UserAgenda:
    """Pending user acts (top of stack is the end of ``items``) plus what the
    user has been told so far."""

    items: list = field(default_factory=list)
    offered: Optional[int] = None
    informed: set = field(default_factory=set)
    last_act: Optional[DialogueAct] = None
    initialized: bool = False

    @classmethod
    def from_goal(cls, goal: UserGoal, rng=None) -> "UserAgenda":
        rng = np.random.default_rng(rng)
        agenda = cls(initialized=True)
        agenda.push_constraints(goal, rng)
        return agenda

    def push_constraints(self, goal: UserGoal, rng) -> None:
        slots = list(goal.constraints)
        order = rng.permutation(len(slots))
        self.items = [DialogueAct("inform", slots[i], goal.constraints[slots[i]]) for i in order]

    def drop_inform(self, slot: str) -> None:
        self.items = [a for a in self.items if a.slot != slot]


def _next_request(goal: UserGoal, agenda: UserAgenda) -> DialogueAct:
    for slot in goal.requests:
        if slot not in agenda.informed:
            return DialogueAct("request", slot)
    return DialogueAct("bye")


def _pop(goal: UserGoal, agenda: UserAgenda) -> DialogueAct:
    if agenda.items:
        return agenda.items.pop()
    if agenda.offered is not None:
        return _next_request(goal, agenda)
    return DialogueAct("null")


def _react_to_offer(goal, agenda, ontology, sys_act: SystemAct) -> DialogueAct:
    if sys_act.venue is None:
        return _pop(goal, agenda)
    if sys_act.venue < 0:
        query = dict(sys_act.query or ())
        wrong = [s for s, v in goal.constraints.items() if query.get(s) != v]
        if not wrong and not ontology.matching_venues(goal.constraints):
            return DialogueAct("bye")
        if wrong:
            agenda.drop_inform(wrong[0])
            return DialogueAct("inform", wrong[0], goal.constraints[wrong[0]])
        return _pop(goal, agenda)
    venue = ontology.venues[sys_act.venue]
    if not goal.satisfied_by(venue):
        agenda.offered = None
        agenda.informed = set()
        # re-queue the violated constraints beneath the reqalts
        violated = [s for s, v in goal.constraints.items() if venue[s] != v]
        for s in violated:
            agenda.drop_inform(s)
            agenda.items.append(DialogueAct("inform", s, goal.constraints[s]))
        return DialogueAct("reqalts")
    if agenda.offered != sys_act.venue:
        agenda.offered = sys_act.venue
        agenda.informed = set()
    return _next_request(goal, agenda)


def user_respond(
    goal: UserGoal,
    agenda: UserAgenda,
    sys_act: SystemAct,
    ontology: Ontology,
    rng=None,
) -> DialogueAct:
    """Next true user act given the grounded system act. Mutates ``agenda``."""
    if agenda is None or not agenda.initialized:
        raise RuntimeError("user agenda is not initialized")
    rng = np.random.default_rng(rng)
    kind = sys_act.kind

    if kind == "request" or kind == "select":
        slot = sys_act.slot
        agenda.drop_inform(slot)
        act = DialogueAct("inform", slot, goal.constraints.get(slot, DONTCARE))
    elif kind == "confirm":
        want = goal.constraints.get(sys_act.slot)
        if want is None or want == sys_act.value:
            act = DialogueAct("affirm")
        else:
            act = DialogueAct("negate")
    elif kind in ("inform_offer", "inform_byname", "inform_alternative"):
        act = _react_to_offer(goal, agenda, ontology, sys_act)
    elif kind == "inform_requested":
        if agenda.offered is not None and sys_act.venue == agenda.offered:
            agenda.informed.add(sys_act.slot)
            act = _next_request(goal, agenda)
        else:
            act = _pop(goal, agenda)
    elif kind == "reqmore":
        act = _next_request(goal, agenda) if agenda.offered is not None else _pop(goal, agenda)
    elif kind == "repeat":
        act = agenda.last_act if agenda.last_act is not None else _pop(goal, agenda)
    elif kind == "restart":
        agenda.offered = None
        agenda.informed = set()
        agenda.push_constraints(goal, rng)
        act = _pop(goal, agenda)
    elif kind == "bye":
        act = DialogueAct("bye")
    elif kind == "hello":
        act = _pop(goal, agenda)
    else:
        raise ValueError(f"unknown system act kind {kind!r}")
    agenda.last_act = act
    return act


@dataclass(frozen=True)
class Observation:
    observed_act: DialogueAct
    confidence: float
    # hidden from the learner, kept for analysis
    is_corrupted: bool = False

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


def _swap_type(act: DialogueAct, ontology: Ontology, rng) -> DialogueAct:
    choices = [t for t in USER_ACT_TYPES if t != act.act_type]
    kind = choices[rng.integers(len(choices))]
    if kind in ("inform", "confirm"):
        slot, values = ontology.constraint_slots[rng.integers(len(ontology.constraint_slots))]
        return DialogueAct(kind, slot, values[rng.integers(len(values))])
    if kind == "request":
        return DialogueAct(kind, ontology.request_slots[rng.integers(len(ontology.request_slots))])
    return DialogueAct(kind)


def _swap_value(act: DialogueAct, ontology: Ontology, rng) -> Optional[DialogueAct]:
    if act.value is None or act.slot not in dict(ontology.constraint_slots):
        return None
    others = [v for v in ontology.values(act.slot) if v != act.value]
    if not others:
        return None
    return DialogueAct(act.act_type, act.slot, others[rng.integers(len(others))])


def corrupt(true_act: DialogueAct, ser: float, ontology: Ontology, rng=None) -> Observation:
    """Pass ``true_act`` through the semantic-error channel at rate ``ser``."""
    if not 0.0 <= ser <= 1.0:
        raise ValueError(f"semantic error rate {ser} outside [0, 1]")
    rng = np.random.default_rng(rng)
    if rng.random() < ser:
        observed = None
        if rng.random() < VALUE_SUBSTITUTION_P:
            observed = _swap_value(true_act, ontology, rng)
        if observed is None:
            observed = _swap_type(true_act, ontology, rng)
        return Observation(observed, float(rng.beta(*CORRUPT_CONFIDENCE)), True)
    return Observation(true_act, float(rng.beta(*CORRECT_CONFIDENCE)), False)
