"""Independent reference computations shared by the tests."""

import numpy as np
from scipy.linalg import block_diag

from dialshape.rnn import CellKind, dialogue_loss


def numeric_gradient(model, seq, R, eps=1e-5):
    """Central finite differences of the dialogue loss for every parameter."""
    grads = {}
    for name, p in model.params.items():
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + eps
            up = dialogue_loss(model, seq, R)
            flat[i] = old - eps
            down = dialogue_loss(model, seq, R)
            flat[i] = old
            gflat[i] = (up - down) / (2 * eps)
        grads[name] = g
    return grads


def max_relative_error(analytic, numeric, floor=1e-4):
    # the floor keeps round-off on near-zero entries from dominating
    worst = 0.0
    for k in analytic:
        a, n = np.asarray(analytic[k]), np.asarray(numeric[k])
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom, initial=0.0)))
    return worst


def scalar_cell_outputs(cell, params, xs):
    """Hidden size 1, input size 1: the cell equations written out by hand."""
    s = lambda v: 1 / (1 + np.exp(-v))
    W, U, b = params["W_ih"][:, 0], params["W_hh"][:, 0], params["b_h"]
    h, c, out = 0.0, 0.0, []
    for x in xs:
        a = W * x + b
        if cell is CellKind.BASIC:
            h = s(a[0] + U[0] * h)
        elif cell is CellKind.LSTM:
            i, f, o = s(a[0] + U[0] * h), s(a[1] + U[1] * h), s(a[2] + U[2] * h)
            g = np.tanh(a[3] + U[3] * h)
            c = f * c + i * g
            h = o * np.tanh(c)
        else:
            z, r = s(a[0] + U[0] * h), s(a[1] + U[1] * h)
            n = np.tanh(a[2] + U[2] * (r * h))
            h = (1 - z) * h + z * n
        out.append(params["w_out"][0] * h + float(params["b_out"]))
    return np.array(out)


def dense_gptd(episodes, sigma2, gamma, query):
    """Exact (non-sparse) GPTD posterior mean and variance at ``query = (x, a)``.

    ``episodes`` holds ``(xs, actions, rewards)`` triples. The model is
    ``r = H q + noise`` with noise covariance ``sigma2 * H H^T`` and a
    zero-value terminal.
    """
    pts, blocks, r = [], [], []
    for xs, acts, rs in episodes:
        T = len(xs)
        H = np.eye(T) - gamma * np.eye(T, k=1)
        blocks.append(H)
        pts += list(zip(xs, acts))
        r += list(rs)
    H = block_diag(*blocks)
    r = np.array(r)

    def k(p, q):
        return float(p[1] == q[1]) * float(p[0] @ q[0])

    K = np.array([[k(p, q) for q in pts] for p in pts])
    G = H @ K @ H.T + sigma2 * H @ H.T
    kx = np.array([k(query, p) for p in pts])
    mean = kx @ H.T @ np.linalg.solve(G, r)
    var = k(query, query) - kx @ H.T @ np.linalg.solve(G, H @ kx)
    return float(mean), float(var)
