"""Training loops: the unified model and section-specific token models."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .doc_model import SECTION_ENTITIES, AnnotationSet, EntitySpan, LineLabelScheme, TokenLabelScheme
from .evaluation import evaluate
from .features import FeatureConfig, initial_features
from .ingest import CorpusRecord, LabeledDocument, build_document, shuffled, split_lines
from .model import ModelConfig, TrainedModel, init_params, loss_and_gradients
from .neural import AdamState, ModelParams, NumericError, adam_step

logger = logging.getLogger(__name__)


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    seconds: float
    eval: dict | None = None

    def to_json(self) -> dict:
        out = {"epoch": self.epoch, "mean_loss": self.mean_loss, "seconds": self.seconds}
        if self.eval is not None:
            out["eval"] = self.eval
        return out


@dataclass
class TrainResult:
    model: TrainedModel
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int | None = None

    @property
    def losses(self) -> list[float]:
        return [h.mean_loss for h in self.history]


def selection_score(report: dict, config: ModelConfig) -> float:
    """Held-out score used to pick the best epoch: mean micro F1 of the trained levels."""
    vals = []
    if config.has_lines:
        vals.append(report["lines"]["micro_f1"])
    if config.has_tokens:
        vals.append(report["tokens"]["micro_f1"])
    return float(np.mean(vals))


def build_documents(records: Sequence[CorpusRecord], config: ModelConfig) -> list[LabeledDocument]:
    scheme = TokenLabelScheme(config.entity_types, config.token_scheme)
    return [build_document(r, scheme, LineLabelScheme(), config.language_mode) for r in records]


def new_model(config: ModelConfig, features: FeatureConfig) -> TrainedModel:
    scheme = TokenLabelScheme(config.entity_types, config.token_scheme)
    params = init_params(config, features.dim, scheme.size)
    return TrainedModel(
        config=config,
        params=params,
        feature_dim=features.dim,
        token_scheme=scheme,
        feature_spec=features.spec if features.source == "embedding" else None,
        embedding_digest=features.table.digest() if features.source == "embedding" and features.table is not None else None,
        features=features,
    )


def as_float32(params: ModelParams) -> ModelParams:
    """Round parameters to float32 values, the precision checkpoints store."""
    return ModelParams({k: v.astype(np.float32).astype(np.float64) for k, v in params.items()})


def train(
    config: ModelConfig,
    train_docs: Sequence[LabeledDocument],
    features: FeatureConfig,
    eval_docs: Sequence[LabeledDocument] | None = None,
    progress: Callable[[EpochRecord], None] | None = None,
) -> TrainResult:
    """Train with one Adam step per document, visiting documents in a seeded
    shuffled order each epoch.

    With ``eval_docs`` the parameters of the epoch with the best held-out score
    are kept, otherwise those of the last epoch. Final parameters are rounded
    to float32 so a saved checkpoint reproduces the in-memory model exactly.
    """
    if not train_docs:
        raise ValueError("training corpus is empty")
    model = new_model(config, features)
    rng = np.random.default_rng(config.seed)
    state = AdamState()
    train_X = [initial_features(ld.doc, features) for ld in train_docs]
    eval_X = None
    if eval_docs is not None:
        eval_X = {ld.doc.id: initial_features(ld.doc, features) for ld in eval_docs}
    result = TrainResult(model)
    best_score, best_params = -1.0, None
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        total = 0.0
        order = shuffled(range(len(train_docs)), config.seed * 1_000_003 + epoch)
        for i in order:
            ld = train_docs[i]
            loss, grads = loss_and_gradients(model, ld.doc, train_X[i], ld.line_labels, ld.token_labels, True, rng)
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss on document {ld.doc.id!r} in epoch {epoch}")
            try:
                adam_step(model.params, grads, state, config.adam)
            except NumericError as exc:
                raise NumericError(f"document {ld.doc.id!r}, epoch {epoch}: {exc}") from None
            total += loss
        rec = EpochRecord(epoch, total / len(train_docs), 0.0)
        if eval_docs is not None:
            report = evaluate(model, eval_docs, eval_X)
            rec.eval = {k: v for k, v in report.items() if k != "per_label"}
            score = selection_score(report, config)
            if score > best_score:
                best_score, best_params, result.best_epoch = score, model.params.copy(), epoch
        rec.seconds = time.perf_counter() - t0
        result.history.append(rec)
        logger.info("epoch %d loss %.4f (%.1fs)", epoch, rec.mean_loss, rec.seconds)
        if progress is not None:
            progress(rec)
    if best_params is not None:
        model.params = best_params
    model.params = as_float32(model.params)
    return result


# ---------------------------------------------------------------------------
# Section-specific models


def section_subrecords(records: Sequence[CorpusRecord], section_type: str) -> list[CorpusRecord]:
    """One sub-record per gold section of ``section_type`` with re-based entities.

    Only entities of that section's entity subset that lie fully inside the
    section text are kept.
    """
    if section_type not in SECTION_ENTITIES:
        raise ValueError(f"no entity subset for section {section_type!r}")
    keep = set(SECTION_ENTITIES[section_type])
    out = []
    for rec in records:
        if rec.annotations is None:
            continue
        lines = split_lines(rec.text)
        k = 0
        for sec in rec.annotations.sections:
            if sec.type != section_type:
                continue
            cs, ce = lines[sec.start_line][0], lines[sec.end_line][1]
            ents = [EntitySpan(e.type, e.char_start - cs, e.char_end - cs)
                    for e in rec.annotations.entities
                    if e.type in keep and cs <= e.char_start and e.char_end <= ce]
            out.append(CorpusRecord(f"{rec.id}#{section_type}{k}", rec.text[cs:ce], AnnotationSet.of(entities=ents)))
            k += 1
    return out


def section_config(config: ModelConfig, section_type: str) -> ModelConfig:
    """A tokens-only copy of ``config`` restricted to one section's entities."""
    obj = config.to_json()
    obj.update(task="tokens_only", entity_types=list(SECTION_ENTITIES[section_type]))
    return ModelConfig.from_json(obj)


def train_section_specific(
    config: ModelConfig,
    records: Sequence[CorpusRecord],
    section_type: str,
    features: FeatureConfig,
    eval_records: Sequence[CorpusRecord] | None = None,
) -> TrainResult:
    subs = section_subrecords(records, section_type)
    if not subs:
        raise ValueError(f"no gold {section_type!r} sections in the corpus")
    cfg = section_config(config, section_type)
    eval_docs = None
    if eval_records is not None:
        eval_docs = build_documents(section_subrecords(eval_records, section_type), cfg)
    return train(cfg, build_documents(subs, cfg), features, eval_docs)
