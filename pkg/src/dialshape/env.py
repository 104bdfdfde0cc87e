"""Simulated slot-filling dialogue environment.

A turn is one system summary action followed by one (possibly corrupted)
user response. Every turn costs -1; the terminal turn additionally earns 20
when the dialogue is an objective success, so a dialogue's return is
``20 * success - T``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import belief as belief_mod
from .acts import SystemAct, summary_actions
from .belief import BeliefState
from .features import extract, initial_features
from .ontology import Ontology
from .user import Observation, UserAgenda, UserGoal, corrupt, sample_goal, user_respond

TURN_REWARD = -1.0
SUCCESS_REWARD = 20.0


@dataclass
class Turn:
    system_act: SystemAct
    observation: Observation
    belief: BeliefState
    features: np.ndarray
    reward: float


@dataclass
class Episode:
    goal: UserGoal
    ser: float
    turns: list = field(default_factory=list)
    success: bool = False
    id: int = 0

    @property
    def return_label(self) -> float:
        return float(sum(t.reward for t in self.turns))

    @property
    def feature_seq(self) -> np.ndarray:
        return np.stack([t.features for t in self.turns])

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "ser": self.ser,
            "success": self.success,
            "return": self.return_label,
            "goal": self.goal.to_dict(),
            "turns": [
                {
                    "sys_act": t.system_act.to_dict(),
                    "obs_act": t.observation.observed_act.to_dict(),
                    "confidence": t.observation.confidence,
                    "corrupted": t.observation.is_corrupted,
                    "reward": t.reward,
                    "features": t.features.tolist(),
                }
                for t in self.turns
            ],
        }


def objective_success(episode: Episode, goal: UserGoal, ontology: Ontology) -> bool:
    """Replay the system acts: the last offered venue must satisfy every goal
    constraint and every requested slot of it must have been informed. A
    "none" assertion counts when no venue satisfies the goal and the query
    agreed with the goal."""
    venue: Optional[int] = None
    informed: set = set()
    asserted_none = False
    for turn in episode.turns:
        act = turn.system_act
        if act.kind in ("inform_offer", "inform_byname", "inform_alternative") and act.venue is not None:
            if act.venue < 0:
                query = dict(act.query or ())
                if all(query.get(s) == v for s, v in goal.constraints.items()):
                    asserted_none = True
            elif act.venue != venue:
                venue, informed = act.venue, set()
        elif act.kind == "inform_requested" and act.venue is not None and act.venue == venue:
            informed.add(act.slot)
        elif act.kind == "restart":
            venue, informed = None, set()
    if not ontology.matching_venues(goal.constraints):
        return asserted_none
    if venue is None or venue < 0:
        return False
    return goal.satisfied_by(ontology.venues[venue]) and set(goal.requests) <= informed


@dataclass
class GoalProgress:
    """How much of the true goal the system has achieved (simulation only)."""

    constraints_grounded: int
    constraints_total: int
    requests_informed: int
    requests_total: int


class DialogueEnv:
    """One simulated dialogue at a time; owns the user, channel and tracker."""

    def __init__(self, ontology: Ontology, ser: float = 0.15, rng=None,
                 slot_probs: Optional[dict] = None):
        if not 0.0 <= ser <= 1.0:
            raise ValueError(f"semantic error rate {ser} outside [0, 1]")
        self.ontology = ontology
        self.ser = ser
        self.rng = np.random.default_rng(rng)
        self.slot_probs = slot_probs
        self.actions = summary_actions(ontology)
        self.done = True
        self.episode: Optional[Episode] = None

    def reset(self, goal: Optional[UserGoal] = None) -> np.ndarray:
        """Start a dialogue; returns the decision features for the first turn."""
        self.goal = goal if goal is not None else sample_goal(self.ontology, self.rng, self.slot_probs)
        self.agenda = UserAgenda.from_goal(self.goal, self.rng)
        self.belief = belief_mod.init_belief(self.ontology)
        self.offered: Optional[int] = None
        self.informed: set = set()
        self.turn = 0
        self.last_system_act: Optional[SystemAct] = None
        self.last_observation: Optional[Observation] = None
        self.done = False
        self.episode = Episode(self.goal, self.ser)
        self.features = initial_features(self.belief, self.ontology)
        return self.features

    def _ground(self, index: int) -> SystemAct:
        """Map a summary action onto a concrete act using the current belief."""
        action = self.actions[index]
        kind, slot = action.kind, action.slot
        onto = self.ontology
        if kind == "request":
            return SystemAct(index, kind, slot)
        if kind == "confirm":
            p = self.belief.goal[slot][:-1]
            return SystemAct(index, kind, slot, onto.values(slot)[int(np.argmax(p))])
        if kind == "select":
            p = self.belief.goal[slot][:-1]
            top = np.argsort(-p, kind="stable")[:2]
            return SystemAct(index, kind, slot, "|".join(onto.values(slot)[i] for i in top))
        if kind in ("inform_offer", "inform_byname", "inform_alternative"):
            query = []
            for s in onto.slot_names:
                value, _ = self.belief.top(s, onto)
                if value is not None:
                    query.append((s, value))
            query = tuple(query)
            if kind == "inform_byname" and self.offered is not None and self.offered >= 0:
                return SystemAct(index, kind, venue=self.offered, query=query)
            matches = onto.matching_venues(dict(query))
            if kind == "inform_alternative":
                matches = [m for m in matches if m != self.offered]
            return SystemAct(index, kind, venue=matches[0] if matches else -1, query=query)
        if kind == "inform_requested":
            if self.offered is not None and self.offered >= 0:
                return SystemAct(index, kind, slot, onto.venues[self.offered][slot], venue=self.offered)
            return SystemAct(index, kind, slot)
        return SystemAct(index, kind)

    def step(self, action: int) -> tuple[Observation, float, bool]:
        if self.done:
            raise RuntimeError("step() called on a finished dialogue; call reset()")
        if not 0 <= action < len(self.actions):
            raise ValueError(f"action {action} outside [0, {len(self.actions)})")
        sys_act = self._ground(action)
        if sys_act.kind in ("inform_offer", "inform_byname", "inform_alternative"):
            if sys_act.venue is not None and sys_act.venue != self.offered:
                self.informed = set()
            self.offered = sys_act.venue
        elif sys_act.kind == "inform_requested" and sys_act.venue is not None:
            self.informed.add(sys_act.slot)
        elif sys_act.kind == "restart":
            self.offered, self.informed = None, set()
            self.belief = belief_mod.init_belief(self.ontology)

        true_act = user_respond(self.goal, self.agenda, sys_act, self.ontology, self.rng)
        obs = corrupt(true_act, self.ser, self.ontology, self.rng)
        self.belief = belief_mod.update(self.belief, obs, sys_act, self.ontology)
        self.turn += 1
        self.features = extract(self.belief, obs, action, self.turn, self.ontology.max_turns, self.ontology)

        self.done = (
            true_act.act_type == "bye"
            or sys_act.kind == "bye"
            or self.turn >= self.ontology.max_turns
        )
        reward = TURN_REWARD
        self.episode.turns.append(Turn(sys_act, obs, self.belief, self.features, reward))
        if self.done:
            self.episode.success = objective_success(self.episode, self.goal, self.ontology)
            if self.episode.success:
                reward += SUCCESS_REWARD
                self.episode.turns[-1].reward = reward
        self.last_system_act = sys_act
        self.last_observation = obs
        return obs, reward, self.done

    def executable(self) -> np.ndarray:
        """Boolean mask of summary actions that make sense in the current state.

        Uses system-side knowledge only: offer-dependent actions need an
        offered venue, confirm/select need a non-"none" top value, and bye
        needs the user to look finished.
        """
        mask = np.ones(len(self.actions), dtype=bool)
        offered = self.offered is not None and self.offered >= 0
        finished = self.belief.method[-1] > 0.5
        for a in self.actions:
            if a.kind in ("inform_requested", "inform_byname", "inform_alternative"):
                mask[a.index] = offered
            elif a.kind in ("confirm", "select"):
                mask[a.index] = self.belief.top(a.slot, self.ontology)[0] is not None
            elif a.kind == "bye":
                mask[a.index] = finished
        return mask

    def progress(self) -> GoalProgress:
        grounded = 0
        for slot, value in self.goal.constraints.items():
            top, _ = self.belief.top(slot, self.ontology)
            grounded += top == value
        informed = 0
        if self.offered is not None and self.offered >= 0 \
                and self.goal.satisfied_by(self.ontology.venues[self.offered]):
            informed = sum(s in self.informed for s in self.goal.requests)
        return GoalProgress(grounded, len(self.goal.constraints), informed, len(self.goal.requests))


Policy = Callable[[DialogueEnv], int]


def run_episode(env: DialogueEnv, policy: Policy, goal: Optional[UserGoal] = None) -> Episode:
    """Roll out one dialogue with ``policy`` (called with the env before each turn)."""
    env.reset(goal)
    if hasattr(policy, "reset"):
        policy.reset()
    while not env.done:
        env.step(policy(env))
    return env.episode


def write_episodes(episodes, path) -> None:
    with open(path, "w") as fh:
        for ep in episodes:
            fh.write(json.dumps(ep.to_record(), separators=(",", ":")) + "\n")


def read_records(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def load_corpus(path, input_dim: Optional[int] = None) -> list[tuple[np.ndarray, float]]:
    """Read (feature sequence, return) pairs, schema-checking ``input_dim``."""
    data = []
    for rec in read_records(path):
        seq = np.array([t["features"] for t in rec["turns"]], dtype=float)
        if input_dim is not None and seq.shape[1] != input_dim:
            raise ValueError(
                f"{path}: dialogue {rec['id']} has {seq.shape[1]}-dim features, model expects {input_dim}")
        data.append((seq, float(rec["return"])))
    return data
