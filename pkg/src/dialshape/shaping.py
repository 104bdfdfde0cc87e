"""Potential-based reward shaping.

The shaping reward for a transition is ``F = gamma * phi_next - phi``. The
potential before the first turn is 0 and, by default, the potential of the
terminal state is forced to 0, so over a whole episode the discounted sum of
``F`` telescopes to ``gamma**T * phi_T - phi_0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .env import GoalProgress


class ShapingSource(str, Enum):
    NONE = "none"
    RNN = "rnn"
    ORACLE = "oracle"


@dataclass(frozen=True)
class ShapingConfig:
    gamma: float = 1.0
    source: ShapingSource = ShapingSource.NONE
    terminal_potential_zero: bool = True

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        object.__setattr__(self, "source", ShapingSource(self.source))


class ShapedTransition(NamedTuple):
    env_reward: float
    shaping: float
    composite: float


def shape(phi: float, phi_next: float, gamma: float, is_terminal: bool = False,
          cfg: Optional[ShapingConfig] = None) -> float:
    if not (math.isfinite(phi) and math.isfinite(phi_next)):
        raise ValueError(f"non-finite potential ({phi}, {phi_next})")
    zero_terminal = cfg.terminal_potential_zero if cfg is not None else True
    if is_terminal and zero_terminal:
        phi_next = 0.0
    return gamma * phi_next - phi


def shaped_stream(potentials: Sequence[float], env_rewards: Sequence[float], gamma: float,
                  cfg: Optional[ShapingConfig] = None, phi0: float = 0.0) -> list[ShapedTransition]:
    """Composite rewards for one episode.

    ``potentials[t]`` is the potential after turn ``t + 1`` and ``phi0`` the
    potential before the first turn; the last transition is terminal.
    """
    if len(potentials) != len(env_rewards):
        raise ValueError(f"{len(potentials)} potentials for {len(env_rewards)} rewards")
    out = []
    prev = phi0
    last = len(env_rewards) - 1
    for t, (phi, r) in enumerate(zip(potentials, env_rewards)):
        f = shape(prev, phi, gamma, t == last, cfg)
        out.append(ShapedTransition(float(r), f, float(r) + f))
        prev = phi
    return out


def oracle_heuristic_potential(progress: Optional[GoalProgress], scale: float = 20.0) -> float:
    """Goal-aware progress potential: ``scale`` times the mean of the grounded
    constraint fraction and the informed request fraction.

    Needs the true user goal, so it exists only in simulation.
    """
    if progress is None:
        raise PermissionError("oracle potential needs access to the true user goal")
    c = progress.constraints_grounded / progress.constraints_total if progress.constraints_total else 0.0
    r = progress.requests_informed / progress.requests_total if progress.requests_total else 0.0
    return scale * (c + r) / 2.0


# Exact checks on small enumerable MDPs -----------------------------------------


@dataclass
class SmallMDP:
    """``P[s, a, s']`` transition probabilities, ``R[s, a, s']`` rewards and a
    terminal mask; terminal states are absorbing with zero value."""

    P: np.ndarray
    R: np.ndarray
    terminal: np.ndarray

    def __post_init__(self):
        S, A, S2 = self.P.shape
        if S != S2 or self.R.shape != self.P.shape or self.terminal.shape != (S,):
            raise ValueError("inconsistent MDP array shapes")
        if S > 50:
            raise ValueError("SmallMDP is limited to 50 states")
        if not np.allclose(self.P.sum(axis=2), 1.0):
            raise ValueError("transition rows must sum to 1")

    @property
    def n_states(self) -> int:
        return self.P.shape[0]

    @property
    def n_actions(self) -> int:
        return self.P.shape[1]


class ConvergenceError(RuntimeError):
    pass


def value_iteration(mdp: SmallMDP, gamma: float, bonus: Optional[np.ndarray] = None,
                    tol: float = 1e-12, max_iter: int = 100_000) -> np.ndarray:
    """Optimal ``Q[s, a]`` for rewards ``R + bonus``."""
    R = mdp.R if bonus is None else mdp.R + bonus
    expected = np.einsum("sat,sat->sa", mdp.P, R)
    live = ~mdp.terminal
    Q = np.zeros((mdp.n_states, mdp.n_actions))
    for _ in range(max_iter):
        V = np.where(live, Q.max(axis=1), 0.0)
        Q_new = expected + gamma * mdp.P @ V
        Q_new[~live] = 0.0
        if np.max(np.abs(Q_new - Q)) < tol:
            return Q_new
        Q = Q_new
    raise ConvergenceError(f"value iteration did not converge in {max_iter} sweeps")


def greedy_sets(Q: np.ndarray, terminal: np.ndarray, atol: float = 1e-8) -> list[frozenset]:
    sets = []
    for s, q in enumerate(Q):
        if terminal[s]:
            sets.append(frozenset())
        else:
            sets.append(frozenset(np.flatnonzero(q >= q.max() - atol).tolist()))
    return sets


def potential_bonus(mdp: SmallMDP, phi: np.ndarray, gamma: float) -> np.ndarray:
    """``F[s, a, s'] = gamma * phi[s'] - phi[s]`` with terminal potentials zeroed."""
    phi = np.where(mdp.terminal, 0.0, np.asarray(phi, dtype=float))
    F = gamma * phi[None, None, :] - phi[:, None, None]
    return np.broadcast_to(F, mdp.P.shape).copy()


def policies_match(mdp: SmallMDP, bonus: np.ndarray, gamma: float, atol: float = 1e-8) -> bool:
    """Whether adding ``bonus`` leaves every state's optimal action set unchanged."""
    base = greedy_sets(value_iteration(mdp, gamma), mdp.terminal, atol)
    shaped = greedy_sets(value_iteration(mdp, gamma, bonus), mdp.terminal, atol)
    return base == shaped


def policy_invariance_check(mdp: SmallMDP, potential_table: np.ndarray, gamma: float) -> bool:
    return policies_match(mdp, potential_bonus(mdp, potential_table, gamma), gamma)


def chain_mdp(n: int = 5, slip: float = 0.1, step_reward: float = -1.0,
              goal_reward: float = 10.0, exit_reward: float = 0.0) -> SmallMDP:
    """A corridor of ``n`` states; the last is terminal.

    Action 1 moves right (staying put with probability ``slip``), action 0
    moves left. Reaching the end pays ``goal_reward``; moving left from state
    0 ends the episode with ``exit_reward``. Every other move pays
    ``step_reward``.
    """
    S = n + 1  # extra absorbing exit state
    P = np.zeros((S, 2, S))
    R = np.full((S, 2, S), step_reward)
    terminal = np.zeros(S, dtype=bool)
    terminal[n - 1] = terminal[n] = True
    for s in range(n - 1):
        P[s, 1, s + 1] += 1.0 - slip
        P[s, 1, s] += slip
        if s == 0:
            P[s, 0, n] = 1.0
            R[s, 0, n] = exit_reward
        else:
            P[s, 0, s - 1] = 1.0
    R[:, :, n - 1] = goal_reward
    for s in (n - 1, n):
        P[s, :, s] = 1.0
        R[s] = 0.0
    return SmallMDP(P, R, terminal)
