"""The hierarchical labeler: token BiLSTM, line pooling, line BiLSTM and a
CRF (or softmax) head per level.

Three task variants share one code path:

* ``lines_only``: line labels from pooled token states;
* ``tokens_only``: token labels from token states;
* ``multi``: both, where the token head reads the token state joined with
  the state of the line containing the token.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import crf as crf_mod
from .doc_model import (
    ENTITY_TYPES,
    AnnotationSet,
    Document,
    LineLabelScheme,
    ParseResult,
    TokenLabelScheme,
    TransitionMask,
    decode_line_labels,
    decode_token_labels,
    transition_validity_mask,
)
from .features import EmbeddingTable, FeatureConfig, FeatureError, HandcraftedFeatureSpec, initial_features
from .neural import (
    AdamConfig,
    ModelParams,
    birnn_backward,
    birnn_forward,
    dense_backward,
    dense_forward,
    dropout,
    init_lstm,
    line_pool,
    line_pool_backward,
    xavier_uniform,
)

TASKS = ("lines_only", "tokens_only", "multi")
TASK_ALIASES = {"lines": "lines_only", "tokens": "tokens_only", "multi": "multi"}
HEADS = ("crf", "softmax")


class ConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    task: str = "multi"
    feature_source: str = "embedding"
    head: str = "crf"
    use_token_birnn: bool = True
    use_line_birnn: bool = True
    hidden: int = 128
    line_hidden: int | None = None
    dropout: float = 0.1
    token_scheme: str = "bio"
    entity_types: tuple[str, ...] = ENTITY_TYPES
    lambda_line: float = 1.0
    lambda_token: float = 1.0
    adam: AdamConfig = field(default_factory=AdamConfig)
    epochs: int = 20
    seed: int = 0
    language_mode: str = "default"
    mask_in_training: bool = False

    def __post_init__(self):
        self.task = TASK_ALIASES.get(self.task, self.task)
        self.entity_types = tuple(self.entity_types)
        if isinstance(self.adam, dict):
            self.adam = AdamConfig(**self.adam)
        self.validate()

    def validate(self) -> None:
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        if self.head not in HEADS:
            raise ConfigError(f"unknown head {self.head!r}")
        if self.feature_source not in ("embedding", "external"):
            raise ConfigError(f"unknown feature source {self.feature_source!r}")
        if self.hidden < 1 or (self.line_hidden is not None and self.line_hidden < 1):
            raise ConfigError("hidden widths must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.lambda_line < 0 or self.lambda_token < 0:
            raise ConfigError("loss weights must be non-negative")
        unknown = set(self.entity_types) - set(ENTITY_TYPES)
        if unknown:
            raise ConfigError(f"unknown entity types {sorted(unknown)}")

    @property
    def has_lines(self) -> bool:
        return self.task in ("lines_only", "multi")

    @property
    def has_tokens(self) -> bool:
        return self.task in ("tokens_only", "multi")

    @property
    def line_width(self) -> int:
        return self.line_hidden if self.line_hidden is not None else self.hidden

    def to_json(self) -> dict:
        out = dataclasses.asdict(self)
        out["entity_types"] = list(self.entity_types)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "ModelConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - names
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**obj)


# ---------------------------------------------------------------------------
# Trained model container


@dataclass
class TrainedModel:
    config: ModelConfig
    params: ModelParams
    feature_dim: int
    line_scheme: LineLabelScheme = field(default_factory=LineLabelScheme)
    token_scheme: TokenLabelScheme | None = None
    feature_spec: HandcraftedFeatureSpec | None = None
    embedding_digest: str | None = None
    features: FeatureConfig | None = None

    def __post_init__(self):
        if self.token_scheme is None:
            self.token_scheme = TokenLabelScheme(self.config.entity_types, self.config.token_scheme)

    @property
    def line_mask(self) -> TransitionMask:
        return transition_validity_mask(self.line_scheme)

    @property
    def token_mask(self) -> TransitionMask:
        return transition_validity_mask(self.token_scheme)

    def attach_features(self, table: EmbeddingTable | None = None, external=None) -> FeatureConfig:
        """Bind runtime feature sources, checking them against what training used."""
        cfg = self.config
        if cfg.feature_source == "embedding":
            digest = table.digest() if table is not None else None
            if digest != self.embedding_digest:
                raise FeatureError(f"embedding table digest {digest} does not match the model's {self.embedding_digest}")
            fc = FeatureConfig("embedding", table=table, spec=self.feature_spec)
        else:
            if external is None:
                raise FeatureError("model was trained on external features; none supplied")
            fc = FeatureConfig("external", external=external, external_dim=self.feature_dim)
        if fc.dim != self.feature_dim:
            raise FeatureError(f"features have width {fc.dim}, model expects {self.feature_dim}")
        self.features = fc
        return fc

    def featurize(self, doc: Document) -> np.ndarray:
        if self.features is None:
            raise FeatureError("no feature source attached to the model")
        return initial_features(doc, self.features)


# ---------------------------------------------------------------------------
# Parameters


def param_shapes(config: ModelConfig, feature_dim: int, n_token_labels: int, n_line_labels: int = 18) -> dict[str, tuple]:
    """Every parameter name and shape implied by ``config``."""
    d, dl = config.hidden, config.line_width
    shapes: dict[str, tuple] = {}

    def lstm(prefix, n_in, width):
        for direction in ("fw", "bw"):
            shapes[f"{prefix}.{direction}.W"] = (4 * width, n_in)
            shapes[f"{prefix}.{direction}.U"] = (4 * width, width)
            shapes[f"{prefix}.{direction}.b"] = (4 * width,)

    def head(prefix, K, n_in):
        shapes[f"{prefix}_out.W"] = (K, n_in)
        shapes[f"{prefix}_out.b"] = (K,)
        if config.head == "crf":
            shapes[f"{prefix}_crf.transitions"] = (K, K)
            shapes[f"{prefix}_crf.start"] = (K,)
            shapes[f"{prefix}_crf.end"] = (K,)

    if config.use_token_birnn:
        lstm("token_rnn", feature_dim, d)
        tok_w = 2 * d
    else:
        tok_w = feature_dim
    seg_w = 0
    if config.has_lines:
        pooled_w = 2 * d if config.use_token_birnn else 2 * feature_dim
        if config.use_line_birnn:
            lstm("line_rnn", pooled_w, dl)
            seg_w = 2 * dl
        else:
            seg_w = pooled_w
        head("line", n_line_labels, seg_w)
    if config.has_tokens:
        head("token", n_token_labels, tok_w + (seg_w if config.task == "multi" else 0))
    return shapes


def init_params(config: ModelConfig, feature_dim: int, n_token_labels: int, seed: int | None = None,
                n_line_labels: int = 18) -> ModelParams:
    """Xavier-uniform weights, zero biases (LSTM forget bias 1.0), fully seeded."""
    rng = np.random.default_rng(config.seed if seed is None else seed)
    shapes = param_shapes(config, feature_dim, n_token_labels, n_line_labels)
    params = ModelParams()
    for name, shape in shapes.items():
        prefix, leaf = name.rsplit(".", 1)
        if prefix.endswith((".fw", ".bw")):
            if leaf == "W":
                width = shape[0] // 4
                lstm = init_lstm(rng, shape[1], width)
                params[prefix + ".W"], params[prefix + ".U"], params[prefix + ".b"] = lstm["W"], lstm["U"], lstm["b"]
            continue
        if leaf in ("W", "transitions"):
            params[name] = xavier_uniform(rng, shape)
        else:
            params[name] = np.zeros(shape)
    return ModelParams({k: params[k] for k in shapes})


def _rnn(params: ModelParams, prefix: str) -> dict:
    return {
        "fw": {k: params[f"{prefix}.fw.{k}"] for k in "WUb"},
        "bw": {k: params[f"{prefix}.bw.{k}"] for k in "WUb"},
    }


def _crf(params: ModelParams, prefix: str) -> crf_mod.CrfParams:
    return crf_mod.CrfParams(params[f"{prefix}_crf.transitions"], params[f"{prefix}_crf.start"], params[f"{prefix}_crf.end"])


# ---------------------------------------------------------------------------
# Forward / backward


@dataclass
class Forward:
    line_emissions: np.ndarray | None
    token_emissions: np.ndarray | None
    cache: dict[str, Any]


def forward(model: TrainedModel, doc: Document, X: np.ndarray, train: bool = False,
            rng: np.random.Generator | None = None) -> Forward:
    """Emission scores for both levels (``None`` for a level the task lacks)."""
    cfg, p = model.config, model.params
    if X.shape != (doc.num_tokens, model.feature_dim):
        raise FeatureError(f"document {doc.id!r}: features {X.shape}, expected ({doc.num_tokens}, {model.feature_dim})")
    cache: dict[str, Any] = {}
    Xd, cache["mask_x"] = dropout(X, cfg.dropout, rng, train)
    if cfg.use_token_birnn:
        H, cache["token_rnn"] = birnn_forward(_rnn(p, "token_rnn"), Xd)
    else:
        H = Xd
    Hd, cache["mask_h"] = dropout(H, cfg.dropout, rng, train)
    cache["Hd"] = Hd
    line_em = token_em = None
    S = None
    if cfg.has_lines:
        starts, ends = doc.line_starts, doc.line_ends
        R = line_pool(Hd, starts, ends, directional=cfg.use_token_birnn)
        if cfg.use_line_birnn:
            S, cache["line_rnn"] = birnn_forward(_rnn(p, "line_rnn"), R)
        else:
            S = R
        cache["S"] = S
        line_em = dense_forward(p["line_out.W"], p["line_out.b"], S)
    if cfg.has_tokens:
        if cfg.task == "multi":
            Z = np.concatenate([Hd, S[doc.token_line_index]], axis=1)
        else:
            Z = Hd
        cache["Z"] = Z
        token_em = dense_forward(p["token_out.W"], p["token_out.b"], Z)
    return Forward(line_em, token_em, cache)


def backward(model: TrainedModel, doc: Document, fwd: Forward, d_line_em, d_token_em) -> dict[str, np.ndarray]:
    """Parameter gradients given gradients of the emission matrices."""
    cfg, p = model.config, model.params
    c = fwd.cache
    grads: dict[str, np.ndarray] = {}
    T = doc.num_tokens
    Hd = c["Hd"]
    dHd = np.zeros_like(Hd)
    dS = None
    if cfg.has_tokens:
        dW, db, dZ = dense_backward(p["token_out.W"], c["Z"], d_token_em)
        grads["token_out.W"], grads["token_out.b"] = dW, db
        w = Hd.shape[1]
        dHd += dZ[:, :w]
        if cfg.task == "multi":
            # tokens of a line are contiguous, so a segmented sum scatters back to lines
            dS = np.add.reduceat(dZ[:, w:], doc.line_starts, axis=0)
    if cfg.has_lines:
        dW, db, dS_line = dense_backward(p["line_out.W"], c["S"], d_line_em)
        grads["line_out.W"], grads["line_out.b"] = dW, db
        dS = dS_line if dS is None else dS + dS_line
        if cfg.use_line_birnn:
            g, dR = birnn_backward(_rnn(p, "line_rnn"), c["line_rnn"], dS)
            _put_rnn(grads, "line_rnn", g)
        else:
            dR = dS
        dHd += line_pool_backward(dR, doc.line_starts, doc.line_ends, T, directional=cfg.use_token_birnn)
    dH = dHd * c["mask_h"] if c["mask_h"] is not None else dHd
    if cfg.use_token_birnn:
        g, _ = birnn_backward(_rnn(p, "token_rnn"), c["token_rnn"], dH)
        _put_rnn(grads, "token_rnn", g)
    return grads


def _put_rnn(grads: dict, prefix: str, g: dict) -> None:
    for direction in ("fw", "bw"):
        for k, v in g[direction].items():
            grads[f"{prefix}.{direction}.{k}"] = v


def _head_loss(model: TrainedModel, level: str, E: np.ndarray, gold: np.ndarray, weight: float, grads: dict):
    """Weighted head loss and emission gradient; CRF parameter grads go into ``grads``."""
    cfg = model.config
    if cfg.head == "softmax":
        loss, dE = crf_mod.softmax_loss_and_gradient(E, gold)
        return weight * loss, weight * dE
    mask = None
    if cfg.mask_in_training:
        mask = model.line_mask if level == "line" else model.token_mask
    loss, g = crf_mod.nll_and_gradient(E, _crf(model.params, level), gold, mask)
    grads[f"{level}_crf.transitions"] = weight * g.transitions
    grads[f"{level}_crf.start"] = weight * g.start
    grads[f"{level}_crf.end"] = weight * g.end
    return weight * loss, weight * g.emissions


def loss_and_gradients(model: TrainedModel, doc: Document, X: np.ndarray, gold_lines, gold_tokens,
                       train: bool = False, rng: np.random.Generator | None = None):
    """Weighted sum of the per-level losses and gradients for every parameter.

    A level whose weight is zero contributes neither loss nor gradient.
    """
    cfg = model.config
    if doc.num_tokens == 0:
        return 0.0, {k: np.zeros_like(v) for k, v in model.params.items()}
    fwd = forward(model, doc, X, train, rng)
    grads: dict[str, np.ndarray] = {}
    total = 0.0
    d_line = d_tok = None
    lam_line = cfg.lambda_line if cfg.task == "multi" else 1.0
    lam_tok = cfg.lambda_token if cfg.task == "multi" else 1.0
    if cfg.has_lines:
        d_line = np.zeros_like(fwd.line_emissions)
        if lam_line > 0:
            loss, d_line = _head_loss(model, "line", fwd.line_emissions, np.asarray(gold_lines), lam_line, grads)
            total += loss
    if cfg.has_tokens:
        d_tok = np.zeros_like(fwd.token_emissions)
        if lam_tok > 0:
            loss, d_tok = _head_loss(model, "token", fwd.token_emissions, np.asarray(gold_tokens), lam_tok, grads)
            total += loss
    grads.update(backward(model, doc, fwd, d_line, d_tok))
    for k, v in model.params.items():
        grads.setdefault(k, np.zeros_like(v))
    return float(total), grads


# ---------------------------------------------------------------------------
# Prediction


def decode_levels(model: TrainedModel, fwd: Forward) -> tuple[np.ndarray | None, np.ndarray | None]:
    cfg = model.config
    out = []
    for level, E in (("line", fwd.line_emissions), ("token", fwd.token_emissions)):
        if E is None:
            out.append(None)
        elif cfg.head == "softmax":
            out.append(crf_mod.softmax_head(E)[1])
        else:
            mask = model.line_mask if level == "line" else model.token_mask
            out.append(crf_mod.viterbi_decode(E, _crf(model.params, level), mask)[0])
    return out[0], out[1]


def predict(model: TrainedModel, doc: Document, X: np.ndarray | None = None) -> ParseResult:
    """Decode line and token labels and the spans they describe."""
    cfg = model.config
    if X is None:
        X = model.featurize(doc)
    if doc.num_tokens == 0:
        empty = () if cfg.has_lines else None
        return ParseResult(doc.id, empty, () if cfg.has_tokens else None, AnnotationSet())
    lines, tokens = decode_levels(model, forward(model, doc, X))
    sections = groups = entities = ()
    if lines is not None:
        ann = decode_line_labels(lines, model.line_scheme)
        sections, groups = ann.sections, ann.groups
    if tokens is not None:
        entities = tuple(decode_token_labels(tokens, doc, model.token_scheme))
    return ParseResult(
        doc.id,
        tuple(int(k) for k in lines) if lines is not None else None,
        tuple(int(k) for k in tokens) if tokens is not None else None,
        AnnotationSet(tuple(sections), tuple(groups), entities),
    )


def require_task(model: TrainedModel, level: str) -> None:
    """Raise :class:`ConfigError` when the model cannot label ``level``."""
    ok = model.config.has_tokens if level == "tokens" else model.config.has_lines
    if not ok:
        raise ConfigError(f"a {model.config.task} model does not predict {level}")
