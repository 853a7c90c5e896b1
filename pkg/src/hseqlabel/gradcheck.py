"""Finite-difference checks of every analytic gradient in the package.

Each check builds a small random instance, reduces the component's output to
a scalar with a fixed random projection where needed, and compares the
analytic gradient of every input and parameter tensor with central
differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import crf as crf_mod
from .doc_model import LineLabelScheme, TokenLabelScheme, transition_validity_mask
from .ingest import make_document
from .model import ModelConfig, TrainedModel, init_params, loss_and_gradients
from .neural import (
    birnn_backward,
    birnn_forward,
    dense_backward,
    dense_forward,
    init_lstm,
    line_pool,
    line_pool_backward,
    lstm_cell,
    lstm_cell_backward,
    numeric_gradient,
    relative_error,
)

TOLERANCE = 1e-4
EPS = 1e-5


@dataclass(frozen=True)
class CheckResult:
    suite: str
    tensor: str
    error: float

    @property
    def ok(self) -> bool:
        return self.error < TOLERANCE


def _compare(suite: str, f: Callable[[], float], tensors: dict, analytic: dict) -> list[CheckResult]:
    return [CheckResult(suite, name, relative_error(analytic[name], numeric_gradient(f, x, EPS)))
            for name, x in tensors.items()]


def check_dense(rng: np.random.Generator) -> list[CheckResult]:
    W, b, x = rng.normal(size=(4, 3)), rng.normal(size=4), rng.normal(size=(5, 3))
    G = rng.normal(size=(5, 4))
    f = lambda: float(np.sum(G * dense_forward(W, b, x)))
    dW, db, dx = dense_backward(W, x, G)
    return _compare("dense", f, {"W": W, "b": b, "x": x}, {"W": dW, "b": db, "x": dx})


def check_lstm_cell(rng: np.random.Generator) -> list[CheckResult]:
    p = init_lstm(rng, 3, 2)
    p["b"] = rng.normal(size=p["b"].shape)
    x, h, c = rng.normal(size=3), rng.normal(size=2), rng.normal(size=2)
    Gh, Gc = rng.normal(size=2), rng.normal(size=2)

    def f():
        h2, c2, _ = lstm_cell(p, x, h, c)
        return float(Gh @ h2 + Gc @ c2)

    _, _, cache = lstm_cell(p, x, h, c)
    grads, dx, dh, dc = lstm_cell_backward(p, cache, Gh, Gc)
    analytic = {**grads, "x": dx, "h_prev": dh, "c_prev": dc}
    return _compare("lstm_cell", f, {**p, "x": x, "h_prev": h, "c_prev": c}, analytic)


def check_birnn(rng: np.random.Generator, lengths=(1, 2, 3)) -> list[CheckResult]:
    out = []
    for T in lengths:
        params = {"fw": init_lstm(rng, 3, 2), "bw": init_lstm(rng, 3, 2)}
        X = rng.normal(size=(T, 3))
        G = rng.normal(size=(T, 4))
        f = lambda: float(np.sum(G * birnn_forward(params, X)[0]))
        _, cache = birnn_forward(params, X)
        g, dX = birnn_backward(params, cache, G)
        tensors = {f"{d}.{k}": params[d][k] for d in ("fw", "bw") for k in "WUb"}
        analytic = {f"{d}.{k}": g[d][k] for d in ("fw", "bw") for k in "WUb"}
        tensors["X"], analytic["X"] = X, dX
        out += _compare(f"birnn[T={T}]", f, tensors, analytic)
    return out


def check_line_pool(rng: np.random.Generator) -> list[CheckResult]:
    out = []
    starts, ends = np.array([0, 2, 3]), np.array([1, 2, 5])
    for directional in (True, False):
        H = rng.normal(size=(6, 4))
        G = rng.normal(size=(3, 4 if directional else 8))
        f = lambda: float(np.sum(G * line_pool(H, starts, ends, directional)))
        dH = line_pool_backward(G, starts, ends, 6, directional)
        out += _compare(f"line_pool[directional={directional}]", f, {"H": H}, {"H": dH})
    return out


def check_crf(rng: np.random.Generator) -> list[CheckResult]:
    out = []
    scheme = TokenLabelScheme(("name", "city"), "bio")
    mask = transition_validity_mask(scheme)
    for masked in (False, True):
        K = scheme.size
        E = rng.normal(size=(4, K))
        p = crf_mod.CrfParams(rng.normal(size=(K, K)), rng.normal(size=K), rng.normal(size=K))
        gold = np.array([1, 2, 0, 3])
        m = mask if masked else None
        f = lambda: crf_mod.nll_and_gradient(E, p, gold, m)[0]
        _, g = crf_mod.nll_and_gradient(E, p, gold, m)
        tensors = {"emissions": E, "transitions": p.transitions, "start": p.start, "end": p.end}
        analytic = {"emissions": g.emissions, "transitions": g.transitions, "start": g.start, "end": g.end}
        if masked:
            # entries at disallowed positions never enter the masked score
            analytic["transitions"] = np.where(mask.allowed, g.transitions, 0.0)
        out += _compare(f"crf_nll[masked={masked}]", f, tensors, analytic)
    return out


def check_softmax(rng: np.random.Generator) -> list[CheckResult]:
    E = rng.normal(size=(5, 4))
    gold = rng.integers(0, 4, size=5)
    f = lambda: crf_mod.softmax_loss_and_gradient(E, gold)[0]
    _, dE = crf_mod.softmax_loss_and_gradient(E, gold)
    return _compare("softmax", f, {"emissions": E}, {"emissions": dE})


MODEL_VARIANTS = {
    "multi": {},
    "multi_softmax": {"head": "softmax"},
    "multi_no_birnn": {"use_token_birnn": False, "use_line_birnn": False},
    "multi_weighted": {"lambda_line": 0.5, "lambda_token": 2.0},
    "tokens_only": {"task": "tokens_only"},
    "lines_only": {"task": "lines_only"},
}


def check_model(rng: np.random.Generator, variants=tuple(MODEL_VARIANTS)) -> list[CheckResult]:
    """The full pipeline on a 2-line, 4-token document with hidden width 3."""
    doc = make_document("gradcheck", "Jane Doe\nBoston MA\n")
    entity_types = ("name", "city", "state")
    gold_tokens = np.array([1, 2, 3, 5])
    scheme = LineLabelScheme()
    gold_lines = np.array([scheme.index["I-contact"]] * 2)
    out = []
    for name in variants:
        cfg = ModelConfig(hidden=3, dropout=0.0, entity_types=entity_types, **MODEL_VARIANTS[name])
        n_feat = 3
        ts = TokenLabelScheme(entity_types, "bio")
        params = init_params(cfg, n_feat, ts.size, seed=int(rng.integers(1 << 31)))
        for v in params.values():
            v += 0.1 * rng.normal(size=v.shape)
        model = TrainedModel(cfg, params, n_feat, token_scheme=ts)
        X = rng.normal(size=(doc.num_tokens, n_feat))
        f = lambda: loss_and_gradients(model, doc, X, gold_lines, gold_tokens)[0]
        _, grads = loss_and_gradients(model, doc, X, gold_lines, gold_tokens)
        out += _compare(f"model[{name}]", f, dict(params), grads)
    return out


SUITES = {
    "dense": check_dense,
    "lstm_cell": check_lstm_cell,
    "birnn": check_birnn,
    "line_pool": check_line_pool,
    "crf": check_crf,
    "softmax": check_softmax,
    "model": check_model,
}


def run_all(seed: int = 0, suites=tuple(SUITES)) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    results = []
    for name in suites:
        results += SUITES[name](rng)
    return results


def format_results(results: list[CheckResult]) -> str:
    rows = [f"{'PASS' if r.ok else 'FAIL'}  {r.suite:<28} {r.tensor:<24} {r.error:.3e}" for r in results]
    return "\n".join(rows)
