"""Sparse online GP-SARSA.

The Q-function has a zero-mean GP prior with kernel
``k((b, a), (b', a')) = [a == a'] * <b, b'>``. Episodes are folded in one
transition at a time with the recursive sparse Monte-Carlo GP temporal
difference update (Engel et al.): rewards are modelled as
``r_t = Q(x_t) - gamma * Q(x_{t+1}) + noise`` with noise covariance
``sigma2 * H H^T``, and a new state-action point joins the dictionary only
when its approximate-linear-dependence residual exceeds ``nu``.

Because the kernel is zero across different actions, the dictionary Gram
matrix is block diagonal and its inverse is kept as one block per action.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import blas

from . import tensorio

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GpConfig:
    n_actions: int
    dim: int
    sigma2: float = 25.0
    nu: float = 0.01
    max_dict: int = 1000
    # multiplies the posterior std when sampling for exploration
    explore_scale: float = 1.0
    # "sample" (posterior sampling) or "epsilon" (epsilon-greedy on the mean)
    exploration: str = "sample"
    epsilon: float = 0.1

    def __post_init__(self):
        if self.exploration not in ("sample", "epsilon"):
            raise ValueError(f"unknown exploration {self.exploration!r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must be in [0, 1]")
        if self.sigma2 <= 0 or self.nu <= 0:
            raise ValueError("sigma2 and nu must be positive")
        if self.max_dict < 1:
            raise ValueError("dictionary cap must be >= 1")


class EpisodeStateError(RuntimeError):
    pass


class GpSarsa:
    def __init__(self, cfg: GpConfig):
        self.cfg = cfg
        cap = cfg.max_dict
        self.X = np.zeros((cap, cfg.dim))
        self.A = np.zeros(cap, dtype=int)
        self.m = 0
        self.alpha = np.zeros(cap)
        # Fortran order so the rank-one update can run in place
        self.C = np.zeros((cap, cap), order="F")
        self._buf = np.zeros(cap)
        self.members = [[] for _ in range(cfg.n_actions)]
        self.kinv = [np.zeros((0, 0)) for _ in range(cfg.n_actions)]
        self.clamps = 0
        self.queries = 0
        self.rejected = 0
        self._reset_episode()
        self.in_episode = False
        self.awaiting_end = False

    # kernel helpers ---------------------------------------------------------

    def _kvec(self, x: np.ndarray, a: int) -> np.ndarray:
        """Kernel between (x, a) and the whole dictionary (length m)."""
        k = np.zeros(self.m)
        idx = self.members[a]
        if idx:
            k[idx] = self.X[idx] @ x
        return k

    def _project(self, x, a, k):
        """ALD coefficients (length m) and residual of (x, a) on the dictionary."""
        coef = np.zeros(self.m)
        idx = self.members[a]
        kxx = float(x @ x)
        if not idx:
            return coef, kxx
        ka = k[idx]
        ca = self.kinv[a] @ ka
        coef[idx] = ca
        return coef, kxx - float(ka @ ca)

    def _add(self, x, a, coef_a, delta) -> None:
        """Append (x, a) to the dictionary, extending that action's inverse block."""
        j = self.m
        self.X[j] = x
        self.A[j] = a
        n = len(self.members[a])
        old = self.kinv[a]
        new = np.empty((n + 1, n + 1))
        new[:n, :n] = old + np.outer(coef_a, coef_a) / delta
        new[:n, n] = new[n, :n] = -coef_a / delta
        new[n, n] = 1.0 / delta
        self.kinv[a] = new
        self.members[a].append(j)
        self.m += 1
        self.alpha[j] = 0.0
        self.C[j, :j + 1] = 0.0
        self.C[:j + 1, j] = 0.0

    def _full(self) -> bool:
        return self.m >= self.cfg.max_dict

    # prediction -------------------------------------------------------------

    def q_posterior(self, x, action: int) -> tuple[float, float]:
        x = self._check(x)
        k = self._kvec(x, action)
        m = self.m
        mean = float(k @ self.alpha[:m])
        var = float(x @ x) - float(k @ (self.C[:m, :m] @ k))
        return mean, self._clamp(var)

    def q_all(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Posterior means and variances of every action at ``x``."""
        x = self._check(x)
        n = self.cfg.n_actions
        means = np.zeros(n)
        vars_ = np.full(n, float(x @ x))
        v = self.X[:self.m] @ x
        for a in range(n):
            idx = self.members[a]
            if idx:
                va = v[idx]
                means[a] = va @ self.alpha[idx]
                vars_[a] -= va @ self.C[np.ix_(idx, idx)] @ va
        for a in range(n):
            vars_[a] = self._clamp(vars_[a])
        return means, vars_

    def _clamp(self, var: float) -> float:
        self.queries += 1
        if var < 0.0:
            if var < -1e-9:
                self.clamps += 1
                log.debug("clamped predictive variance %.3g", var)
            return 0.0
        return var

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.cfg.dim,):
            raise ValueError(f"features have shape {x.shape}, expected ({self.cfg.dim},)")
        return x

    def select_action(self, x, mode: str = "greedy", rng=None, mask=None) -> int:
        """Greedy (lowest index wins ties), one posterior sample per action, or
        epsilon-greedy. ``mode="explore"`` uses the configured exploration.

        ``mask`` optionally restricts the choice to executable actions.
        """
        if mode == "explore":
            mode = self.cfg.exploration
        means, vars_ = self.q_all(x)
        if mode == "greedy":
            scores = means
        elif mode == "sample":
            rng = np.random.default_rng(rng)
            scores = means + self.cfg.explore_scale * np.sqrt(vars_) * rng.standard_normal(len(means))
        elif mode == "epsilon":
            rng = np.random.default_rng(rng)
            if rng.random() < self.cfg.epsilon:
                allowed = np.arange(len(means)) if mask is None else np.flatnonzero(mask)
                return int(allowed[rng.integers(len(allowed))])
            scores = means
        else:
            raise ValueError(f"unknown selection mode {mode!r}")
        if mask is not None:
            scores = np.where(mask, scores, -np.inf)
        return int(np.argmax(scores))

    def mean_weights(self) -> np.ndarray:
        """Per-action weight vectors ``W`` with ``Q_mean(x, a) = W[a] @ x``.

        Valid for the linear state kernel; used to freeze a greedy policy.
        """
        W = np.zeros((self.cfg.n_actions, self.cfg.dim))
        np.add.at(W, self.A[:self.m], self.alpha[:self.m, None] * self.X[:self.m])
        return W

    # learning ---------------------------------------------------------------

    def _reset_episode(self):
        self._prev_k = None
        self._prev_coef = None
        self._c = np.zeros(0)
        self._d = 0.0
        self._sinv = 0.0
        self._prev_noise = 0.0

    def _start(self, x, a) -> None:
        k = self._kvec(x, a)
        coef, delta = self._project(x, a, k)
        if delta > self.cfg.nu and not self._full():
            self._add(x, a, coef[self.members[a]], delta)
            k = self._kvec(x, a)
            coef = np.zeros(self.m)
            coef[self.m - 1] = 1.0
        elif self._full() and delta > self.cfg.nu:
            self.rejected += 1
        self._prev_k = k
        self._prev_coef = coef
        self._c = np.zeros(self.m)
        self._d = 0.0
        self._sinv = 0.0
        self._prev_noise = self.cfg.sigma2
        self.in_episode = True

    def _pad(self, v):
        if len(v) < self.m:
            return np.concatenate([v, np.zeros(self.m - len(v))])
        return v

    def observe(self, x, action: int, reward: float, x_next=None, next_action: Optional[int] = None,
                is_terminal: bool = False, gamma: float = 1.0) -> None:
        """Fold in the SARSA transition ``(x, action) -> reward -> (x_next, next_action)``.

        The first call of an episode registers ``(x, action)`` as its start
        point; later calls must continue from the previous ``(x_next,
        next_action)``. A terminal transition bootstraps from a zero value.
        """
        if self.awaiting_end:
            raise EpisodeStateError("terminal transition already observed; call end_episode()")
        x = self._check(x)
        if not self.in_episode:
            self._start(x, action)
        sigma2 = self.cfg.sigma2
        m0 = self.m
        prev_k = self._pad(self._prev_k)
        prev_coef = self._pad(self._prev_coef)
        c_prev = self._pad(self._c)

        if is_terminal:
            k = np.zeros(m0)
            coef = np.zeros(m0)
            delta = 0.0
            kxx = 0.0
            noise = 0.0
        else:
            x_next = self._check(x_next)
            k = self._kvec(x_next, next_action)
            coef, delta = self._project(x_next, next_action, k)
            kxx = float(x_next @ x_next)
            noise = sigma2

        dk = prev_k - gamma * k
        g = gamma * self._prev_noise * self._sinv
        buf = self._buf
        buf[:m0] = dk
        buf[m0:] = 0.0
        Cdk = blas.dsymv(1.0, self.C, buf)[:m0]
        d = g * self._d + reward - float(dk @ self.alpha[:m0])

        grow = not is_terminal and delta > self.cfg.nu
        if grow and self._full():
            self.rejected += 1
            grow = False
        if grow:
            dktt = float(prev_coef @ (prev_k - 2.0 * gamma * k)) + gamma * gamma * kxx
            s = (self._prev_noise + gamma * gamma * noise - gamma * g * self._prev_noise
                 + dktt - float(dk @ Cdk) + 2.0 * g * float(c_prev @ dk))
            h = np.append(prev_coef, -gamma)
            c = np.append(g * c_prev - Cdk, 0.0) + h
            self._add(x_next, next_action, coef[self.members[next_action]], delta)
            k = np.append(k, kxx)
            coef = np.zeros(self.m)
            coef[-1] = 1.0
        else:
            h = prev_coef - gamma * coef
            c = g * c_prev + h - Cdk
            s = (self._prev_noise + gamma * gamma * noise - gamma * g * self._prev_noise
                 + float(dk @ (c + g * c_prev)))

        if not np.isfinite(s) or s <= 0.0:
            log.warning("rejected GP update with non-positive innovation variance %.3g", s)
            self.rejected += 1
        else:
            m = self.m
            self.alpha[:m] += c * (d / s)
            buf = self._buf
            buf[:m] = c
            buf[m:] = 0.0
            blas.dger(1.0 / s, buf, buf, a=self.C, overwrite_a=1)
            self._c = c
            self._d = d
            self._sinv = 1.0 / s
        self._prev_k = k
        self._prev_coef = coef
        self._prev_noise = noise
        if is_terminal:
            self.awaiting_end = True

    def end_episode(self) -> None:
        if not self.awaiting_end:
            raise EpisodeStateError("end_episode() without a preceding terminal transition")
        self.awaiting_end = False
        self.in_episode = False
        self._reset_episode()

    # persistence ------------------------------------------------------------

    def save(self, path) -> None:
        m = self.m
        header = {"kind": "gpsarsa", "n_actions": self.cfg.n_actions, "dim": self.cfg.dim,
                  "sigma2": self.cfg.sigma2, "nu": self.cfg.nu, "max_dict": self.cfg.max_dict,
                  "explore_scale": self.cfg.explore_scale, "exploration": self.cfg.exploration,
                  "epsilon": self.cfg.epsilon}
        tensorio.save(path, header, {
            "points": self.X[:m], "actions": self.A[:m].astype(float),
            "alpha": self.alpha[:m], "C": self.C[:m, :m],
        })

    @classmethod
    def load(cls, path) -> "GpSarsa":
        header, t = tensorio.load(path)
        if header.pop("kind", None) != "gpsarsa":
            raise ValueError(f"{path} is not a GP-SARSA snapshot")
        gp = cls(GpConfig(**header))
        m = len(t["alpha"])
        gp.m = 0
        for j in range(m):
            a = int(t["actions"][j])
            x = t["points"][j]
            k = gp._kvec(x, a)
            coef, delta = gp._project(x, a, k)
            gp._add(x, a, coef[gp.members[a]], delta)
        gp.alpha[:m] = t["alpha"]
        gp.C[:m, :m] = t["C"]
        return gp
