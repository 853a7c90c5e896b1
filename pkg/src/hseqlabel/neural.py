"""Dense, LSTM, bidirectional LSTM, line pooling and dropout layers with
hand-written backward passes, Adam, and a finite-difference checker.

All arrays are float64. Weight matrices are stored ``(out, in)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np


class NumericError(ArithmeticError):
    """Non-finite values appeared during training."""


class ModelParams(dict):
    """Named parameter tensors. Keys are dotted paths like ``token_rnn.fw.W``."""

    version = 1

    def copy(self) -> "ModelParams":
        return ModelParams({k: v.copy() for k, v in self.items()})

    def subtree(self, prefix: str) -> dict[str, np.ndarray]:
        n = len(prefix) + 1
        return {k[n:]: v for k, v in self.items() if k.startswith(prefix + ".")}


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


# ---------------------------------------------------------------------------
# Dense


def dense_forward(W: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    if x.shape[-1] != W.shape[1] or b.shape != (W.shape[0],):
        raise ValueError(f"dense shapes disagree: W{W.shape} b{b.shape} x{x.shape}")
    return x @ W.T + b


def dense_backward(W: np.ndarray, x: np.ndarray, dy: np.ndarray):
    """Gradients ``(dW, db, dx)`` of a dense layer given upstream ``dy``."""
    if x.ndim == 1:
        return np.outer(dy, x), dy.copy(), W.T @ dy
    return dy.T @ x, dy.sum(axis=0), dy @ W


# ---------------------------------------------------------------------------
# LSTM


def lstm_cell(p: Mapping[str, np.ndarray], x, h_prev, c_prev):
    """One LSTM step. Gate order in the stacked weights is input, forget,
    candidate, output.

    Returns ``(h, c, cache)``.
    """
    d = h_prev.shape[0]
    if p["W"].shape != (4 * d, x.shape[0]) or p["U"].shape != (4 * d, d) or c_prev.shape != (d,):
        raise ValueError("lstm cell shapes disagree")
    z = p["W"] @ x + p["U"] @ h_prev + p["b"]
    i, f, o = sigmoid(z[:d]), sigmoid(z[d:2 * d]), sigmoid(z[3 * d:])
    g = np.tanh(z[2 * d:3 * d])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return h, c, (x, h_prev, c_prev, i, f, g, o, tc)


def lstm_cell_backward(p: Mapping[str, np.ndarray], cache, dh, dc):
    """Backward of :func:`lstm_cell`; returns ``(grads, dx, dh_prev, dc_prev)``."""
    x, h_prev, c_prev, i, f, g, o, tc = cache
    dc = dc + dh * o * (1.0 - tc * tc)
    dz = np.concatenate([
        dc * g * i * (1.0 - i),
        dc * c_prev * f * (1.0 - f),
        dc * i * (1.0 - g * g),
        dh * tc * o * (1.0 - o),
    ])
    grads = {"W": np.outer(dz, x), "U": np.outer(dz, h_prev), "b": dz}
    return grads, p["W"].T @ dz, p["U"].T @ dz, dc * f


def lstm_sequence(p, X: np.ndarray, reverse: bool = False) -> np.ndarray:
    """Run one LSTM direction cell by cell; reference path for the fused BiRNN."""
    d = p["U"].shape[1]
    h, c = np.zeros(d), np.zeros(d)
    out = np.zeros((len(X), d))
    order = range(len(X) - 1, -1, -1) if reverse else range(len(X))
    for t in order:
        h, c, _ = lstm_cell(p, X[t], h, c)
        out[t] = h
    return out


@dataclass
class BiRnnCache:
    X: np.ndarray
    U_blk: np.ndarray
    gates: np.ndarray  # (N, 2, 4, d) activated gates, step-major
    cells: np.ndarray  # (N + 1, 2, d), row 0 is the zero initial state
    hiddens: np.ndarray  # (N + 1, 2, d)
    tanh_c: np.ndarray  # (N, 2, d)


def _block_recurrent(fw, bw) -> np.ndarray:
    d = fw["U"].shape[1]
    U = np.zeros((2, 4 * d, 2, d))
    U[0, :, 0] = fw["U"]
    U[1, :, 1] = bw["U"]
    return U.reshape(8 * d, 2 * d)


def birnn_forward(params: Mapping[str, Mapping[str, np.ndarray]], X: np.ndarray):
    """Bidirectional LSTM over ``X`` of shape (N, in).

    Returns ``(H, cache)`` with ``H[i] = forward_i ⊕ backward_i`` of width 2d.
    Both directions advance in the same loop: step ``t`` reads position ``t``
    for the forward direction and ``N - 1 - t`` for the backward one.
    """
    N = len(X)
    if N == 0:
        raise ValueError("birnn needs a non-empty sequence")
    fw, bw = params["fw"], params["bw"]
    d = fw["U"].shape[1]
    xin = np.empty((N, 2, 4 * d))
    xin[:, 0] = X @ fw["W"].T + fw["b"]
    xin[:, 1] = (X @ bw["W"].T + bw["b"])[::-1]
    xin = xin.reshape(N, 8 * d)
    U_blk = _block_recurrent(fw, bw)

    gates = np.empty((N, 2, 4, d))
    cells = np.zeros((N + 1, 2, d))
    hiddens = np.zeros((N + 1, 2, d))
    tanh_c = np.empty((N, 2, d))
    for t in range(N):
        z = (xin[t] + U_blk @ hiddens[t].reshape(-1)).reshape(2, 4, d)
        a = gates[t]
        np.negative(z, out=a)
        np.exp(a, out=a)
        a += 1.0
        np.reciprocal(a, out=a)
        np.tanh(z[:, 2], out=a[:, 2])
        c = cells[t + 1]
        np.multiply(a[:, 1], cells[t], out=c)
        c += a[:, 0] * a[:, 2]
        tc = np.tanh(c, out=tanh_c[t])
        np.multiply(a[:, 3], tc, out=hiddens[t + 1])
    H = np.empty((N, 2 * d))
    H[:, :d] = hiddens[1:, 0]
    H[:, d:] = hiddens[1:, 1][::-1]
    return H, BiRnnCache(X, U_blk, gates, cells, hiddens, tanh_c)


def birnn_backward(params, cache: BiRnnCache, dH: np.ndarray):
    """Gradients ``({"fw": {...}, "bw": {...}}, dX)`` given ``dH`` of shape (N, 2d)."""
    fw, bw = params["fw"], params["bw"]
    d = fw["U"].shape[1]
    N = len(cache.X)
    dh_step = np.empty((N, 2, d))
    dh_step[:, 0] = dH[:, :d]
    dh_step[:, 1] = dH[:, d:][::-1]
    dz_all = np.empty((N, 2, 4, d))
    U_T = cache.U_blk.T
    dh_next = np.zeros(2 * d)
    dc = np.zeros((2, d))
    for t in range(N - 1, -1, -1):
        a = cache.gates[t]
        i, f, g, o = a[:, 0], a[:, 1], a[:, 2], a[:, 3]
        tc = cache.tanh_c[t]
        dh = dh_step[t] + dh_next.reshape(2, d)
        dc += dh * o * (1.0 - tc * tc)
        dz = dz_all[t]
        np.multiply(dc * g, i * (1.0 - i), out=dz[:, 0])
        np.multiply(dc * cache.cells[t], f * (1.0 - f), out=dz[:, 1])
        np.multiply(dc * i, 1.0 - g * g, out=dz[:, 2])
        np.multiply(dh * tc, o * (1.0 - o), out=dz[:, 3])
        dc *= f
        dh_next = U_T @ dz.reshape(-1)

    hprev = cache.hiddens[:-1]  # (N, 2, d)
    dz_f = dz_all[:, 0].reshape(N, 4 * d)
    dz_b = dz_all[:, 1].reshape(N, 4 * d)[::-1]  # back in position order
    X = cache.X
    grads = {
        "fw": {"W": dz_f.T @ X, "U": dz_f.T @ hprev[:, 0], "b": dz_f.sum(axis=0)},
        "bw": {"W": dz_b.T @ X, "U": dz_all[:, 1].reshape(N, 4 * d).T @ hprev[:, 1], "b": dz_b.sum(axis=0)},
    }
    dX = dz_f @ fw["W"] + dz_b @ bw["W"]
    return grads, dX


# ---------------------------------------------------------------------------
# Line pooling


def line_pool(H: np.ndarray, starts: np.ndarray, ends: np.ndarray, directional: bool = True) -> np.ndarray:
    """Line vectors from token states.

    With ``directional`` the forward half of the line's last token is joined
    with the backward half of its first token (width stays 2d). Otherwise,
    for inputs without directional halves, the full vectors of the last and
    first tokens are joined (width doubles).
    """
    _check_tiling(starts, ends, len(H))
    if directional:
        d = H.shape[1] // 2
        return np.concatenate([H[ends, :d], H[starts, d:]], axis=1)
    return np.concatenate([H[ends], H[starts]], axis=1)


def line_pool_backward(dR: np.ndarray, starts, ends, n_tokens: int, directional: bool = True) -> np.ndarray:
    w = dR.shape[1] // 2
    width = dR.shape[1] if directional else w
    dH = np.zeros((n_tokens, width))
    # starts and ends are each unique because lines tile the tokens
    if directional:
        dH[ends, :w] += dR[:, :w]
        dH[starts, w:] += dR[:, w:]
    else:
        dH[ends] += dR[:, :w]
        dH[starts] += dR[:, w:]
    return dH


def _check_tiling(starts, ends, n: int) -> None:
    if len(starts) == 0:
        if n:
            raise ValueError("no lines for a non-empty token sequence")
        return
    if starts[0] != 0 or ends[-1] != n - 1 or np.any(ends < starts) or np.any(starts[1:] != ends[:-1] + 1):
        raise ValueError("line token ranges do not tile the token sequence")


# ---------------------------------------------------------------------------
# Dropout


def dropout(x: np.ndarray, rate: float, rng: np.random.Generator | None, train: bool):
    """Inverted dropout. Returns ``(y, mask)``; ``mask`` is None when inactive."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x, None
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


# ---------------------------------------------------------------------------
# Initialization and optimization


def xavier_uniform(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    limit = np.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-limit, limit, size=shape)


def init_lstm(rng: np.random.Generator, n_in: int, d: int) -> dict[str, np.ndarray]:
    """Xavier weights per gate block, zero biases except forget bias 1.0."""
    W = np.concatenate([xavier_uniform(rng, (d, n_in)) for _ in range(4)])
    U = np.concatenate([xavier_uniform(rng, (d, d)) for _ in range(4)])
    b = np.zeros(4 * d)
    b[d:2 * d] = 1.0
    return {"W": W, "U": U, "b": b}


@dataclass
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float | None = 5.0


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.vdot(g, g)) for g in grads.values())))


def adam_step(params: dict, grads: Mapping[str, np.ndarray], state: AdamState, hyper: AdamConfig = AdamConfig()) -> float:
    """Clip by global norm, then apply one bias-corrected Adam update in place.

    Returns the gradient norm before clipping.
    """
    norm = global_norm(grads)
    if not np.isfinite(norm):
        bad = [k for k, g in grads.items() if not np.all(np.isfinite(g))]
        raise NumericError(f"non-finite gradients in {bad}")
    scale = 1.0
    if hyper.clip_norm is not None and norm > hyper.clip_norm:
        scale = hyper.clip_norm / norm
    state.step += 1
    b1, b2 = hyper.beta1, hyper.beta2
    corr1 = 1.0 - b1 ** state.step
    corr2 = 1.0 - b2 ** state.step
    for name, g in grads.items():
        if scale != 1.0:
            g = g * scale
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        params[name] -= hyper.lr * (m / corr1) / (np.sqrt(v / corr2) + hyper.eps)
    return norm


# ---------------------------------------------------------------------------
# Gradient checking


def numeric_gradient(f: Callable[[], float], x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central finite differences of ``f()`` with respect to ``x``, perturbed in place."""
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + eps
        up = f()
        flat[k] = orig - eps
        down = f()
        flat[k] = orig
        gflat[k] = (up - down) / (2.0 * eps)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Largest entry-wise deviation scaled by the largest gradient magnitude."""
    scale = max(np.max(np.abs(analytic), initial=0.0), np.max(np.abs(numeric), initial=0.0))
    if scale < 1e-12:
        return 0.0
    return float(np.max(np.abs(analytic - numeric)) / scale)
