"""Linear-chain CRF in log space, plus the softmax head used as its ablation.

Emissions are an (N, K) score matrix. ``transitions[k, k2]`` scores label
``k`` followed by ``k2``; ``start`` and ``end`` score the first and last label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .doc_model import TransitionMask


class CrfError(ValueError):
    pass


@dataclass
class CrfParams:
    transitions: np.ndarray
    start: np.ndarray
    end: np.ndarray

    @classmethod
    def zeros(cls, K: int) -> "CrfParams":
        return cls(np.zeros((K, K)), np.zeros(K), np.zeros(K))

    @property
    def num_labels(self) -> int:
        return len(self.start)


@dataclass
class CrfGrads:
    emissions: np.ndarray
    transitions: np.ndarray
    start: np.ndarray
    end: np.ndarray


def _check(E: np.ndarray, p: CrfParams) -> None:
    if E.ndim != 2 or E.shape[0] == 0:
        raise CrfError(f"emissions must be a non-empty (N, K) matrix, got shape {E.shape}")
    if E.shape[1] != p.num_labels:
        raise CrfError(f"emissions have {E.shape[1]} labels, CRF has {p.num_labels}")


def _masked(p: CrfParams, mask: TransitionMask | None):
    if mask is None:
        return p.transitions, p.start, p.end
    neg = -np.inf
    return (np.where(mask.allowed, p.transitions, neg),
            np.where(mask.start, p.start, neg),
            np.where(mask.end, p.end, neg))


def _lse(v: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(v, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return np.squeeze(m, axis) + np.log(np.sum(np.exp(v - m), axis=axis))


def score_path(E: np.ndarray, p: CrfParams, path) -> float:
    _check(E, p)
    path = np.asarray(path, dtype=np.int64)
    if path.shape != (E.shape[0],) or path.min() < 0 or path.max() >= p.num_labels:
        raise CrfError("path length or labels out of range")
    score = p.start[path[0]] + E[np.arange(len(path)), path].sum() + p.end[path[-1]]
    score += p.transitions[path[:-1], path[1:]].sum()
    return float(score)


def forward_scores(E: np.ndarray, A: np.ndarray, s: np.ndarray, e: np.ndarray):
    """Forward log-scores ``alpha`` (N, K) and the log-partition."""
    N = E.shape[0]
    alpha = np.empty_like(E)
    alpha[0] = s + E[0]
    for t in range(1, N):
        alpha[t] = _lse(alpha[t - 1][:, None] + A, axis=0) + E[t]
    return alpha, float(_lse(alpha[-1] + e, axis=0))


def backward_scores(E: np.ndarray, A: np.ndarray, e: np.ndarray) -> np.ndarray:
    """Backward log-scores; ``beta[t]`` excludes the emission at ``t``."""
    N = E.shape[0]
    beta = np.empty_like(E)
    beta[-1] = e
    for t in range(N - 2, -1, -1):
        beta[t] = _lse(A + (E[t + 1] + beta[t + 1])[None, :], axis=1)
    return beta


def log_partition(E: np.ndarray, p: CrfParams, mask: TransitionMask | None = None) -> float:
    _check(E, p)
    _, logz = forward_scores(E, *_masked(p, mask))
    if not np.isfinite(logz):
        raise CrfError("no label path is valid under the transition mask")
    return logz


def marginals(E: np.ndarray, p: CrfParams, mask: TransitionMask | None = None):
    """Unary marginals (N, K), pairwise marginals summed over positions (K, K), and log Z."""
    _check(E, p)
    A, s, e = _masked(p, mask)
    alpha, logz = forward_scores(E, A, s, e)
    if not np.isfinite(logz):
        raise CrfError("no label path is valid under the transition mask")
    beta = backward_scores(E, A, e)
    unary = np.exp(alpha + beta - logz)
    if E.shape[0] > 1:
        right = (E[1:] + beta[1:])[:, None, :]
        pair = np.exp(alpha[:-1, :, None] + A[None] + right - logz).sum(axis=0)
    else:
        pair = np.zeros_like(A)
    return unary, pair, logz


def nll_and_gradient(E: np.ndarray, p: CrfParams, gold, mask: TransitionMask | None = None):
    """Negative log-likelihood of ``gold`` and its gradients."""
    gold = np.asarray(gold, dtype=np.int64)
    gold_score = score_path(E, p, gold)
    if mask is not None:
        ok = mask.start[gold[0]] and mask.end[gold[-1]] and bool(np.all(mask.allowed[gold[:-1], gold[1:]]))
        if not ok:
            raise CrfError("gold path violates the transition mask")
    unary, pair, logz = marginals(E, p, mask)
    N, K = E.shape
    dE = unary.copy()
    dE[np.arange(N), gold] -= 1.0
    dA = pair
    np.subtract.at(dA, (gold[:-1], gold[1:]), 1.0)
    ds = unary[0].copy()
    ds[gold[0]] -= 1.0
    de = unary[-1].copy()
    de[gold[-1]] -= 1.0
    return logz - gold_score, CrfGrads(dE, dA, ds, de)


def viterbi_decode(E: np.ndarray, p: CrfParams, mask: TransitionMask | None = None):
    """Best label path and its score. Ties go to the lowest label index at each
    backtracking step."""
    _check(E, p)
    A, s, e = _masked(p, mask)
    N, K = E.shape
    back = np.zeros((N, K), dtype=np.int64)
    delta = s + E[0]
    for t in range(1, N):
        cand = delta[:, None] + A
        back[t] = np.argmax(cand, axis=0)
        delta = cand[back[t], np.arange(K)] + E[t]
    final = delta + e
    if not np.isfinite(final.max()):
        raise CrfError("no label path is valid under the transition mask")
    path = np.empty(N, dtype=np.int64)
    path[-1] = int(np.argmax(final))
    for t in range(N - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path, score_path(E, p, path)


# ---------------------------------------------------------------------------
# Softmax head


def softmax_head(E: np.ndarray):
    """Per-position label distribution and argmax path; transitions play no role."""
    if E.ndim != 2 or E.shape[0] == 0:
        raise CrfError(f"emissions must be a non-empty (N, K) matrix, got shape {E.shape}")
    z = E - E.max(axis=1, keepdims=True)
    probs = np.exp(z)
    probs /= probs.sum(axis=1, keepdims=True)
    return probs, np.argmax(E, axis=1)


def softmax_loss_and_gradient(E: np.ndarray, gold):
    """Mean per-position cross-entropy and its gradient with respect to ``E``."""
    gold = np.asarray(gold, dtype=np.int64)
    probs, _ = softmax_head(E)
    N = E.shape[0]
    rows = np.arange(N)
    z = E - E.max(axis=1, keepdims=True)
    logp = z[rows, gold] - np.log(np.exp(z).sum(axis=1))
    dE = probs.copy()
    dE[rows, gold] -= 1.0
    return float(-logp.mean()), dE / N
