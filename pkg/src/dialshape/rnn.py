"""Recurrent return decomposition: basic, LSTM and GRU cells in numpy.

The network emits one scalar ``r_t`` per turn and is trained so that the
outputs of a dialogue sum to its return ``R``; the per-dialogue loss is
``(R - sum_t r_t) ** 2``. Gradients are exact backpropagation through time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional

import numpy as np

from . import tensorio

log = logging.getLogger(__name__)


class CellKind(str, Enum):
    BASIC = "basic"
    LSTM = "lstm"
    GRU = "gru"


GATES = {CellKind.BASIC: 1, CellKind.LSTM: 4, CellKind.GRU: 3}
RECURRENT = ("W_hh",)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class RnnState(NamedTuple):
    h: np.ndarray
    c: Optional[np.ndarray] = None
    t: int = 0


class RnnModel:
    """Parameters ``W_ih`` (G*H x D), ``W_hh`` (G*H x H), ``b_h`` (G*H),
    ``w_out`` (H) and ``b_out`` (scalar), with G the gate count of the cell.

    Gate order: LSTM ``[input, forget, output, candidate]``; GRU
    ``[update, reset, candidate]``.
    """

    def __init__(self, cell, input_dim: int, hidden_dim: int = 100, params: Optional[dict] = None):
        self.cell = CellKind(cell)
        self.input_dim = int(input_dim)
        self.hidden_dim = int(hidden_dim)
        if params is None:
            params = {k: np.zeros(s) for k, s in self.shapes().items()}
        self.params = {k: np.array(v, dtype=float) for k, v in params.items()}
        self._check()

    def shapes(self) -> dict:
        g, h, d = GATES[self.cell], self.hidden_dim, self.input_dim
        return {"W_ih": (g * h, d), "W_hh": (g * h, h), "b_h": (g * h,), "w_out": (h,), "b_out": ()}

    def _check(self) -> None:
        shapes = self.shapes()
        if set(self.params) != set(shapes):
            raise ValueError(f"parameter names {sorted(self.params)} != {sorted(shapes)}")
        for k, s in shapes.items():
            if self.params[k].shape != s:
                raise ValueError(f"{k} has shape {self.params[k].shape}, expected {s}")
            if not np.all(np.isfinite(self.params[k])):
                raise ValueError(f"{k} contains non-finite values")

    @classmethod
    def init(cls, cell, input_dim: int, hidden_dim: int = 100, rng=None,
             scale: float = 0.1, orthogonal: bool = False) -> "RnnModel":
        rng = np.random.default_rng(rng)
        model = cls(cell, input_dim, hidden_dim)
        for k, s in model.shapes().items():
            if k == "b_out":
                continue
            model.params[k] = rng.uniform(-scale, scale, size=s)
        model.params["b_h"][:] = 0.0
        h = hidden_dim
        if orthogonal:
            for g in range(GATES[model.cell]):
                q, _ = np.linalg.qr(rng.standard_normal((h, h)))
                model.params["W_hh"][g * h:(g + 1) * h] = q
        if model.cell is CellKind.LSTM:
            model.params["b_h"][h:2 * h] = 1.0
        return model

    def copy(self) -> "RnnModel":
        return RnnModel(self.cell, self.input_dim, self.hidden_dim,
                        {k: v.copy() for k, v in self.params.items()})

    def initial_state(self) -> RnnState:
        h = np.zeros(self.hidden_dim)
        return RnnState(h, np.zeros(self.hidden_dim) if self.cell is CellKind.LSTM else None, 0)

    # forward ---------------------------------------------------------------

    def step(self, state: RnnState, f: np.ndarray) -> tuple[RnnState, float]:
        """Advance one turn; returns the new state and the scalar output."""
        f = np.asarray(f, dtype=float)
        if f.shape != (self.input_dim,):
            raise ValueError(f"feature vector has shape {f.shape}, model expects ({self.input_dim},)")
        if state.h.shape != (self.hidden_dim,):
            raise ValueError("state does not belong to this model")
        p = self.params
        x = p["W_ih"] @ f + p["b_h"]
        h, c = _cell_forward(self.cell, x, state.h, state.c, p["W_hh"], self.hidden_dim)[:2]
        r = float(p["w_out"] @ h + p["b_out"])
        if not np.isfinite(r):
            raise FloatingPointError("non-finite network output")
        return RnnState(h, c, state.t + 1), r

    def outputs(self, seq: np.ndarray) -> np.ndarray:
        """Per-turn outputs ``r_1..r_T`` for one dialogue from a fresh state."""
        return self._forward(seq)[0]

    def _forward(self, seq):
        seq = np.asarray(seq, dtype=float)
        if seq.ndim != 2 or seq.shape[0] == 0:
            raise ValueError("feature sequence must be a non-empty (T, D) array")
        if seq.shape[1] != self.input_dim:
            raise ValueError(f"features are {seq.shape[1]}-dim, model expects {self.input_dim}")
        p, H = self.params, self.hidden_dim
        xs = seq @ p["W_ih"].T + p["b_h"]
        state = self.initial_state()
        h, c = state.h, state.c
        cache = []
        hs = np.empty((len(seq), H))
        for t in range(len(seq)):
            h_prev, c_prev = h, c
            h, c, extra = _cell_forward(self.cell, xs[t], h_prev, c_prev, p["W_hh"], H)
            hs[t] = h
            cache.append((h_prev, c_prev, extra))
        r = hs @ p["w_out"] + p["b_out"]
        return r, hs, cache

    def loss(self, seq, R: float) -> float:
        return dialogue_loss(self, seq, R)

    # persistence -----------------------------------------------------------

    def save(self, path) -> None:
        header = {"kind": "rnn", "cell": self.cell.value,
                  "input_dim": self.input_dim, "hidden_dim": self.hidden_dim}
        tensorio.save(path, header, self.params)

    @classmethod
    def load(cls, path) -> "RnnModel":
        header, tensors = tensorio.load(path)
        if header.get("kind") != "rnn":
            raise ValueError(f"{path} is not an RNN model file")
        return cls(header["cell"], header["input_dim"], header["hidden_dim"], tensors)


def _cell_forward(cell, x, h_prev, c_prev, W_hh, H):
    """One cell update given the input projection ``x = W_ih f + b_h``."""
    if cell is CellKind.BASIC:
        h = sigmoid(x + W_hh @ h_prev)
        return h, None, None
    if cell is CellKind.LSTM:
        z = x + W_hh @ h_prev
        i, f, o = sigmoid(z[:H]), sigmoid(z[H:2 * H]), sigmoid(z[2 * H:3 * H])
        g = np.tanh(z[3 * H:])
        c = f * c_prev + i * g
        tc = np.tanh(c)
        return o * tc, c, (i, f, o, g, tc)
    zr = sigmoid(x[:2 * H] + W_hh[:2 * H] @ h_prev)
    z, r = zr[:H], zr[H:]
    rh = r * h_prev
    n = np.tanh(x[2 * H:] + W_hh[2 * H:] @ rh)
    h = (1.0 - z) * h_prev + z * n
    return h, None, (z, r, n, rh)


def dialogue_loss(model: RnnModel, seq, R: float) -> float:
    """``(R - sum_t r_t) ** 2`` for one dialogue."""
    return float((R - model.outputs(seq).sum()) ** 2)


def gradient(model: RnnModel, seq, R: float) -> tuple[float, dict]:
    """Loss and its exact gradient with respect to every parameter (BPTT)."""
    seq = np.asarray(seq, dtype=float)
    r, hs, cache = model._forward(seq)
    p, H, cell = model.params, model.hidden_dim, model.cell
    err = R - r.sum()
    g = -2.0 * err  # dL/dr_t, identical for every turn
    grads = {k: np.zeros_like(v) for k, v in p.items()}
    grads["w_out"] = g * hs.sum(axis=0)
    grads["b_out"] = np.array(g * len(seq))
    W_hh = p["W_hh"]
    dxs = np.empty((len(seq), W_hh.shape[0]))
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    for t in range(len(seq) - 1, -1, -1):
        h_prev, c_prev, extra = cache[t]
        dh = g * p["w_out"] + dh_next
        if cell is CellKind.BASIC:
            h = hs[t]
            da = dh * h * (1.0 - h)
            grads["W_hh"] += np.outer(da, h_prev)
            dh_next = W_hh.T @ da
        elif cell is CellKind.LSTM:
            i, f, o, gg, tc = extra
            do = dh * tc
            dc = dh * o * (1.0 - tc * tc) + dc_next
            da = np.concatenate([
                dc * gg * i * (1.0 - i),
                dc * c_prev * f * (1.0 - f),
                do * o * (1.0 - o),
                dc * i * (1.0 - gg * gg),
            ])
            dc_next = dc * f
            grads["W_hh"] += np.outer(da, h_prev)
            dh_next = W_hh.T @ da
        else:
            z, rr, n, rh = extra
            dn = dh * z
            da_n = dn * (1.0 - n * n)
            d_rh = W_hh[2 * H:].T @ da_n
            da_zr = np.concatenate([dh * (n - h_prev) * z * (1.0 - z), d_rh * h_prev * rr * (1.0 - rr)])
            da = np.concatenate([da_zr, da_n])
            grads["W_hh"][:2 * H] += np.outer(da_zr, h_prev)
            grads["W_hh"][2 * H:] += np.outer(da_n, rh)
            dh_next = dh * (1.0 - z) + d_rh * rr + W_hh[:2 * H].T @ da_zr
        dxs[t] = da
    grads["W_ih"] = dxs.T @ seq
    grads["b_h"] = dxs.sum(axis=0)
    for k, v in grads.items():
        if not np.all(np.isfinite(v)):
            raise FloatingPointError(f"non-finite gradient for {k}")
    return float(err * err), grads


def rmse(model: RnnModel, corpus) -> float:
    """Root mean squared error of ``sum_t r_t`` against the return over ``corpus``."""
    if len(corpus) == 0:
        raise ValueError("empty corpus")
    sq = [(R - model.outputs(seq).sum()) ** 2 for seq, R in corpus]
    return float(np.sqrt(np.mean(sq)))


def potential(model: RnnModel, state: RnnState, f) -> tuple[RnnState, float]:
    """Online shaping potential: the same computation as ``RnnModel.step``."""
    return model.step(state, f)


@dataclass
class TrainConfig:
    cell: str = "gru"
    hidden_dim: int = 100
    lr: float = 0.01
    epochs: int = 100
    clip: Optional[float] = 5.0
    seed: int = 0
    lr_patience: int = 3
    # stop after this many epochs without validation improvement (None: run all)
    stop_patience: Optional[int] = None
    init_scale: float = 0.1
    orthogonal: bool = False
    # train on R / target_scale; the returned model predicts in return units
    target_scale: float = 1.0


@dataclass
class TrainHistory:
    rows: list = field(default_factory=list)
    best_epoch: int = 0
    best_rmse: float = float("inf")


class DivergenceError(RuntimeError):
    pass


def sgd_step(model: RnnModel, seq, R: float, lr: float, clip: Optional[float]) -> float:
    loss, grads = gradient(model, seq, R)
    if clip is not None:
        norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
        if norm > clip:
            scale = clip / norm
            for g in grads.values():
                g *= scale
    for k, g in grads.items():
        model.params[k] -= lr * g
    return loss


def train(corpus, validation, cfg: TrainConfig = None, model: Optional[RnnModel] = None,
          progress=None) -> tuple[RnnModel, TrainHistory]:
    """Per-dialogue SGD with validation-based early-stopping snapshot.

    ``corpus`` and ``validation`` are sequences of ``(features (T, D), R)``.
    The learning rate halves after ``lr_patience`` epochs without improvement.
    """
    cfg = cfg or TrainConfig()
    if len(corpus) == 0 or len(validation) == 0:
        raise ValueError("training and validation corpora must be non-empty")
    if cfg.target_scale <= 0:
        raise ValueError("target_scale must be positive")
    rng = np.random.default_rng(cfg.seed)
    dim = corpus[0][0].shape[1]
    if model is None:
        model = RnnModel.init(cfg.cell, dim, cfg.hidden_dim, rng,
                              scale=cfg.init_scale, orthogonal=cfg.orthogonal)
    else:
        model = model.copy()
    k = cfg.target_scale
    if k != 1.0:
        corpus = [(seq, R / k) for seq, R in corpus]
        validation = [(seq, R / k) for seq, R in validation]
        _rescale_output(model, 1.0 / k)
    best = model.copy()
    history = TrainHistory()
    lr, stale, since_decay = cfg.lr, 0, 0
    for epoch in range(1, cfg.epochs + 1):
        total = 0.0
        for i in rng.permutation(len(corpus)):
            seq, R = corpus[i]
            total += sgd_step(model, seq, R, lr, cfg.clip)
        val = rmse(model, validation) * k
        if not np.isfinite(val):
            raise DivergenceError(f"validation RMSE became {val} at epoch {epoch} (lr={lr})")
        history.rows.append({"epoch": epoch, "train_rmse": float(np.sqrt(total / len(corpus))) * k,
                             "val_rmse": val, "lr": lr})
        if progress is not None:
            progress(history.rows[-1])
        if val < history.best_rmse:
            history.best_rmse, history.best_epoch = val, epoch
            best = model.copy()
            stale = since_decay = 0
        else:
            stale += 1
            since_decay += 1
            if since_decay >= cfg.lr_patience:
                lr *= 0.5
                since_decay = 0
            if cfg.stop_patience is not None and stale >= cfg.stop_patience:
                break
    if k != 1.0:
        _rescale_output(best, k)
    return best, history


def _rescale_output(model: RnnModel, factor: float) -> None:
    # the output layer is linear, so scaling it scales every r_t exactly
    model.params["w_out"] *= factor
    model.params["b_out"] *= factor
