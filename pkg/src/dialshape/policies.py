"""Scripted behaviour policies used for corpus generation and sanity checks."""

from __future__ import annotations

import numpy as np

from .env import DialogueEnv


class HandcraftedPolicy:
    """Request each constraint until its top value is confident, offer, then
    answer requests. After a rejected offer every slot is confirmed once.
    """

    def __init__(self, threshold: float = 0.7):
        self.threshold = threshold
        self.reset()

    def reset(self):
        self._to_confirm: list = []
        self._informed: set = set()
        self._index = None

    def _lookup(self, env: DialogueEnv):
        if self._index is None or self._index[0] is not env.actions:
            self._index = (env.actions, {(a.kind, a.slot): a.index for a in env.actions})
        return self._index[1]

    def __call__(self, env: DialogueEnv) -> int:
        idx = self._lookup(env)
        onto = env.ontology
        obs = env.last_observation
        last = env.last_system_act
        heard = obs.observed_act if obs is not None else None

        if heard is not None and heard.act_type == "reqalts":
            self._to_confirm = list(onto.slot_names)
        if heard is not None and heard.act_type == "negate" and last is not None \
                and last.kind == "confirm":
            return idx[("request", last.slot)]

        for slot in onto.slot_names:
            _, p = env.belief.top(slot, onto)
            if p < self.threshold:
                return idx[("request", slot)]
        if self._to_confirm:
            return idx[("confirm", self._to_confirm.pop(0))]

        if env.offered is None or (heard is not None and heard.act_type == "reqalts"):
            self._informed = set()
            return idx[("inform_offer", None)]
        if env.offered < 0:
            return idx[("bye", None)]
        if heard is not None and heard.act_type == "request" \
                and heard.slot in onto.request_slots:
            self._informed.add(heard.slot)
            return idx[("inform_requested", heard.slot)]
        for slot in onto.request_slots:
            if slot not in self._informed:
                self._informed.add(slot)
                return idx[("inform_requested", slot)]
        return idx[("bye", None)]


def random_executable(env: DialogueEnv, rng) -> int:
    choices = np.flatnonzero(env.executable())
    return int(choices[rng.integers(len(choices))])


class RandomPolicy:
    """Uniform over executable actions (or over all actions with ``masked=False``)."""

    def __init__(self, rng=None, masked: bool = True):
        self.rng = np.random.default_rng(rng)
        self.masked = masked

    def __call__(self, env: DialogueEnv) -> int:
        if self.masked:
            return random_executable(env, self.rng)
        return int(self.rng.integers(len(env.actions)))


class MixedPolicy:
    """Handcrafted action with probability ``1 - epsilon``, uniform otherwise."""

    def __init__(self, epsilon: float = 0.3, rng=None):
        self.epsilon = epsilon
        self.rng = np.random.default_rng(rng)
        self.sensible = HandcraftedPolicy()

    def reset(self):
        self.sensible.reset()

    def __call__(self, env: DialogueEnv) -> int:
        if self.rng.random() < self.epsilon:
            return random_executable(env, self.rng)
        return self.sensible(env)
