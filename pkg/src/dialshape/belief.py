"""Simplified Bayesian belief tracker over goal, method and discourse act.

Each turn the tracker blends a confidence-weighted point mass with the prior
(``c * onehot + (1 - c) * prior``) rather than running full factor-graph
inference. Distributions are immutable numpy arrays; ``update`` is pure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .acts import USER_ACT_INDEX, USER_ACT_TYPES, DialogueAct, SystemAct
from .ontology import Ontology

METHODS = ("none", "byconstraints", "byalternatives", "finished")
_METHOD_INDEX = {m: i for i, m in enumerate(METHODS)}


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BeliefState:
    """Goal distributions (values then ``none`` last), method and discourse vectors."""

    goal: dict
    method: np.ndarray
    discourse: np.ndarray

    def top(self, slot: str, ontology: Ontology) -> tuple[Optional[str], float]:
        """Most likely value of ``slot`` and its probability; value is None for "none"."""
        p = self.goal[slot]
        i = int(np.argmax(p))
        # a value only counts when it beats "none" (the last entry) strictly
        if p[i] <= p[-1]:
            return None, float(p[-1])
        return ontology.values(slot)[i], float(p[i])

    def __eq__(self, other):
        if not isinstance(other, BeliefState):
            return NotImplemented
        return (
            self.goal.keys() == other.goal.keys()
            and all(np.array_equal(self.goal[k], other.goal[k]) for k in self.goal)
            and np.array_equal(self.method, other.method)
            and np.array_equal(self.discourse, other.discourse)
        )

    __hash__ = None


def init_belief(ontology: Ontology) -> BeliefState:
    goal = {}
    for slot, values in ontology.constraint_slots:
        n = len(values) + 1
        goal[slot] = _frozen(np.full(n, 1.0 / n))
    method = np.zeros(len(METHODS))
    method[0] = 1.0
    discourse = np.full(len(USER_ACT_TYPES), 1.0 / len(USER_ACT_TYPES))
    return BeliefState(goal, _frozen(method), _frozen(discourse))


def _blend(prior: np.ndarray, index: int, c: float) -> np.ndarray:
    post = (1.0 - c) * prior
    post[index] += c
    return post / post.sum()


def _check_dims(belief: BeliefState, ontology: Ontology) -> None:
    if list(belief.goal) != ontology.slot_names:
        raise ValueError("belief slots do not match the ontology")
    for slot, values in ontology.constraint_slots:
        if belief.goal[slot].shape != (len(values) + 1,):
            raise ValueError(
                f"belief for {slot!r} has {belief.goal[slot].shape[0]} entries, "
                f"ontology implies {len(values) + 1}")
    if belief.method.shape != (len(METHODS),) or belief.discourse.shape != (len(USER_ACT_TYPES),):
        raise ValueError("method/discourse dimensions do not match")


def update(
    belief: BeliefState,
    observation,
    last_system_act: Optional[SystemAct],
    ontology: Ontology,
) -> BeliefState:
    """Fold one observed user act (with its confidence) into ``belief``.

    ``observation`` needs ``observed_act`` and ``confidence`` attributes.
    ``last_system_act`` resolves affirm/negate against a preceding confirm.
    """
    _check_dims(belief, ontology)
    act: DialogueAct = observation.observed_act
    c = float(observation.confidence)
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"confidence {c} outside [0, 1]")

    goal = dict(belief.goal)

    def inform(slot, value):
        if slot not in goal:
            return
        values = ontology.values(slot)
        if value not in values:
            # dontcare and unknown values carry no goal evidence
            return
        goal[slot] = _frozen(_blend(goal[slot].copy(), values.index(value), c))

    kind = act.act_type
    if kind in ("inform", "confirm") and act.value is not None:
        inform(act.slot, act.value)
    elif kind in ("affirm", "negate") and last_system_act is not None \
            and last_system_act.kind == "confirm" and last_system_act.value is not None:
        slot, value = last_system_act.slot, last_system_act.value
        if kind == "affirm":
            inform(slot, value)
        else:
            values = ontology.values(slot)
            if value in values:
                i = values.index(value)
                p = goal[slot].copy()
                moved = c * p[i]
                p[i] -= moved
                rest = p.sum() - p[i]
                if rest > 0:
                    mask = np.ones_like(p, dtype=bool)
                    mask[i] = False
                    p[mask] += moved * p[mask] / rest
                else:
                    p[i] += moved
                goal[slot] = _frozen(p / p.sum())

    discourse = np.full(len(USER_ACT_TYPES), (1.0 - c) / len(USER_ACT_TYPES))
    discourse[USER_ACT_INDEX[kind]] += c
    discourse /= discourse.sum()

    target = {"inform": "byconstraints", "reqalts": "byalternatives", "bye": "finished"}.get(kind)
    if target is not None:
        method = _blend(belief.method.copy(), _METHOD_INDEX[target], c)
    else:
        method = belief.method

    return BeliefState(goal, _frozen(method) if method is not belief.method else method,
                       _frozen(discourse))
