"""Label-level micro F1 over positive labels, exact-span F1, per-section
entity aggregation and multi-seed summaries."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .doc_model import SECTION_ENTITIES, EntitySpan, SectionSpan, TokenLabelScheme


@dataclass
class ConfusionCounts:
    """Per-label TP/FP/FN tallies; label 0 is the outside label and never counted."""

    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray

    @classmethod
    def zeros(cls, K: int) -> "ConfusionCounts":
        return cls(np.zeros(K, dtype=np.int64), np.zeros(K, dtype=np.int64), np.zeros(K, dtype=np.int64))

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    def add(self, pred: Sequence[int], gold: Sequence[int]) -> "ConfusionCounts":
        pred, gold = np.asarray(pred, dtype=np.int64), np.asarray(gold, dtype=np.int64)
        if pred.shape != gold.shape:
            raise ValueError(f"prediction length {len(pred)} differs from gold length {len(gold)}")
        K = len(self.tp)
        hit = pred == gold
        self.tp += np.bincount(gold[hit], minlength=K)
        self.fp += np.bincount(pred[~hit], minlength=K)
        self.fn += np.bincount(gold[~hit], minlength=K)
        return self

    def totals(self, labels: Iterable[int] | None = None) -> tuple[int, int, int]:
        idx = np.arange(1, len(self.tp)) if labels is None else np.asarray(list(labels), dtype=np.int64)
        idx = idx[idx != 0]
        return int(self.tp[idx].sum()), int(self.fp[idx].sum()), int(self.fn[idx].sum())

    def micro_f1(self, labels: Iterable[int] | None = None) -> float:
        return f1_from_counts(*self.totals(labels))[2]


def f1_from_counts(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """(precision, recall, F1); F1 is 0 when precision + recall is 0."""
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def micro_f1_positive(pred: Sequence[int], gold: Sequence[int], scheme) -> float:
    return ConfusionCounts.zeros(scheme.size).add(pred, gold).micro_f1()


def span_counts(pred: Iterable, gold: Iterable) -> tuple[int, int, int]:
    """Exact-match TP/FP/FN with one-to-one matching (multiset intersection)."""
    p, g = Counter(pred), Counter(gold)
    tp = sum((p & g).values())
    return tp, sum(p.values()) - tp, sum(g.values()) - tp


def span_f1(pred: Iterable, gold: Iterable) -> tuple[float, float, float]:
    return f1_from_counts(*span_counts(pred, gold))


def section_label_indices(scheme: TokenLabelScheme) -> dict[str, list[int]]:
    """Token label ids belonging to each section's entity subset."""
    out = {}
    for section, types in SECTION_ENTITIES.items():
        idx = [k for k in range(1, scheme.size) if scheme.entity_of(k) in types]
        out[section] = idx
    return out


def per_section_entity_f1(counts: ConfusionCounts, scheme: TokenLabelScheme) -> dict[str, float]:
    return {sec: counts.micro_f1(idx) for sec, idx in section_label_indices(scheme).items()}


def replication_report(runs: Sequence[Mapping[str, float]]) -> dict[str, dict[str, float]]:
    """Mean, min and max of every metric across runs (one map per seed)."""
    if not runs:
        raise ValueError("need at least one run")
    keys = set(runs[0])
    for r in runs[1:]:
        if set(r) != keys:
            raise ValueError(f"inconsistent metric keys across runs: {sorted(keys ^ set(r))}")
    out = {}
    for k in sorted(keys):
        vals = [float(r[k]) for r in runs]
        out[k] = {"mean": sum(vals) / len(vals), "min": min(vals), "max": max(vals)}
    return out


def flatten_metrics(report: Mapping, prefix: str = "") -> dict[str, float]:
    """Dotted-key view of the numeric leaves of a nested report."""
    out = {}
    for k, v in report.items():
        key = f"{prefix}{k}"
        if isinstance(v, Mapping):
            out.update(flatten_metrics(v, key + "."))
        elif isinstance(v, (int, float)) and not isinstance(v, bool):
            out[key] = float(v)
    return out


# ---------------------------------------------------------------------------
# Corpus evaluation


@dataclass
class CorpusCounts:
    line: ConfusionCounts | None = None
    token: ConfusionCounts | None = None
    line_spans: list = field(default_factory=lambda: [0, 0, 0])
    entity_spans: list = field(default_factory=lambda: [0, 0, 0])


def evaluate(model, labeled_docs, features=None) -> dict:
    """Evaluate a trained model over labeled documents.

    ``features`` optionally maps document ids to precomputed feature matrices.
    Returns the JSON report ``{level: {metric: value}, "per_label": ...}``.
    """
    from .model import predict

    cfg = model.config
    counts = CorpusCounts(
        ConfusionCounts.zeros(model.line_scheme.size) if cfg.has_lines else None,
        ConfusionCounts.zeros(model.token_scheme.size) if cfg.has_tokens else None,
    )
    for ld in labeled_docs:
        X = features[ld.doc.id] if features is not None else None
        res = predict(model, ld.doc, X)
        if counts.line is not None:
            counts.line.add(res.line_labels, ld.line_labels)
            pred = [("s",) + _t(s) for s in res.annotations.sections] + [("g",) + _t(g) for g in res.annotations.groups]
            gold = [("s",) + _t(s) for s in ld.annotations.sections] + [("g",) + _t(g) for g in ld.annotations.groups]
            _accumulate(counts.line_spans, span_counts(pred, gold))
        if counts.token is not None:
            counts.token.add(res.token_labels, ld.token_labels)
            known = set(model.token_scheme.entity_types)
            gold_ents = [e for e in ld.annotations.entities if e.type in known]
            _accumulate(counts.entity_spans, span_counts(res.annotations.entities, _token_aligned(gold_ents, ld)))
    return build_report(counts, model)


def _t(span: SectionSpan) -> tuple:
    return (span.type, span.start_line, span.end_line)


def _accumulate(acc: list, c: tuple[int, int, int]) -> None:
    for i in range(3):
        acc[i] += c[i]


def _token_aligned(entities: Sequence[EntitySpan], ld) -> list[EntitySpan]:
    """Gold spans snapped to the token boundaries they overlap (the best any tagger can do)."""
    out = []
    for e in entities:
        idx = ld.doc.tokens_overlapping(e.char_start, e.char_end)
        if idx:
            out.append(EntitySpan(e.type, ld.doc.tokens[idx[0]].char_start, ld.doc.tokens[idx[-1]].char_end))
    return out


def _per_label(counts: ConfusionCounts, labels: Sequence[str]) -> dict:
    out = {}
    for k in range(1, len(labels)):
        p, r, f = f1_from_counts(int(counts.tp[k]), int(counts.fp[k]), int(counts.fn[k]))
        out[labels[k]] = {"tp": int(counts.tp[k]), "fp": int(counts.fp[k]), "fn": int(counts.fn[k]), "f1": f}
    return out


def build_report(counts: CorpusCounts, model) -> dict:
    report: dict = {}
    per_label: dict = {}
    if counts.line is not None:
        p, r, f = f1_from_counts(*counts.line.totals())
        sp, sr, sf = f1_from_counts(*counts.line_spans)
        report["lines"] = {"micro_f1": f, "precision": p, "recall": r,
                           "span_precision": sp, "span_recall": sr, "span_f1": sf}
        per_label["lines"] = _per_label(counts.line, model.line_scheme.labels)
    if counts.token is not None:
        p, r, f = f1_from_counts(*counts.token.totals())
        sp, sr, sf = f1_from_counts(*counts.entity_spans)
        report["tokens"] = {"micro_f1": f, "precision": p, "recall": r,
                            "span_precision": sp, "span_recall": sr, "span_f1": sf}
        report["sections"] = per_section_entity_f1(counts.token, model.token_scheme)
        per_label["tokens"] = _per_label(counts.token, model.token_scheme.labels)
    report["per_label"] = per_label
    return report


def format_report(report: Mapping) -> str:
    """Plain-text table of the headline metrics, in percent with two decimals."""
    rows = []
    for level in ("lines", "tokens", "sections"):
        if level in report:
            for metric, value in report[level].items():
                rows.append(f"{level:<9} {metric:<16} {100 * value:6.2f}")
    return "\n".join(rows)


def dumps_report(report: Mapping) -> str:
    return json.dumps(report, indent=2, sort_keys=True)
