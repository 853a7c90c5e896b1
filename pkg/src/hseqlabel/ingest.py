"""Line splitting, tokenization, JSONL corpus I/O and train/test splits."""

from __future__ import annotations

import json
import logging
import math
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .doc_model import (
    AnnotationError,
    AnnotationSet,
    Document,
    EntitySpan,
    GROUPED_SECTIONS,
    Line,
    LineLabelScheme,
    SECTION_TYPES,
    SectionSpan,
    Token,
    TokenLabelScheme,
    ENTITY_TYPES,
    encode_line_labels,
    encode_token_labels,
    resolve_entity_overlaps,
)

logger = logging.getLogger(__name__)

LANGUAGE_MODES = ("default", "cjk")


class CorpusError(ValueError):
    """One or more corpus records failed validation."""

    def __init__(self, errors: Sequence["RecordError"]):
        self.errors = list(errors)
        head = "; ".join(str(e) for e in self.errors[:5])
        more = f" (+{len(self.errors) - 5} more)" if len(self.errors) > 5 else ""
        super().__init__(f"{len(self.errors)} invalid corpus record(s): {head}{more}")


@dataclass(frozen=True)
class RecordError:
    line_number: int
    record_id: str | None
    message: str

    def __str__(self) -> str:
        rid = f" id={self.record_id!r}" if self.record_id is not None else ""
        return f"line {self.line_number}{rid}: {self.message}"


@dataclass(frozen=True)
class CorpusRecord:
    id: str
    text: str
    annotations: AnnotationSet | None = None


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")


@dataclass(frozen=True)
class LabeledDocument:
    doc: Document
    annotations: AnnotationSet | None
    line_labels: np.ndarray | None
    token_labels: np.ndarray | None


# ---------------------------------------------------------------------------
# Text splitting


def split_lines(text: str) -> list[tuple[int, int]]:
    """Character ranges of the lines of ``text``.

    Lines are separated by LF; a CR right before the LF is not part of the
    line. A final LF does not open an extra empty line.
    """
    ranges = []
    start = 0
    n = len(text)
    while start < n:
        nl = text.find("\n", start)
        stop = n if nl < 0 else nl
        end = stop - 1 if stop > start and text[stop - 1] == "\r" else stop
        ranges.append((start, end))
        if nl < 0:
            break
        start = nl + 1
    return ranges


def _is_han(ch: str) -> bool:
    cp = ord(ch)
    return (
        0x4E00 <= cp <= 0x9FFF
        or 0x3400 <= cp <= 0x4DBF
        or 0x20000 <= cp <= 0x2EBEF
        or 0xF900 <= cp <= 0xFAFF
        or 0x30000 <= cp <= 0x3134F
    )


def _is_word_char(ch: str) -> bool:
    if ch.isalnum():
        return True
    # combining marks stay attached to the word they follow
    return unicodedata.category(ch).startswith("M")


def tokenize(line_text: str, language_mode: str = "default") -> list[tuple[int, int]]:
    """Token ranges within one line.

    Runs of letters or digits form tokens, every other non-space codepoint is a
    token of its own. In ``cjk`` mode each Han character is also split off.
    """
    if language_mode not in LANGUAGE_MODES:
        raise ValueError(f"unknown language mode {language_mode!r}")
    cjk = language_mode == "cjk"
    out = []
    i, n = 0, len(line_text)
    while i < n:
        ch = line_text[i]
        if ch.isspace():
            i += 1
        elif cjk and _is_han(ch):
            out.append((i, i + 1))
            i += 1
        elif _is_word_char(ch) and not unicodedata.category(ch).startswith("M"):
            j = i + 1
            while j < n and _is_word_char(line_text[j]) and not (cjk and _is_han(line_text[j])):
                j += 1
            out.append((i, j))
            i = j
        else:
            out.append((i, i + 1))
            i += 1
    return out


def make_document(doc_id: str, text: str, language_mode: str = "default") -> Document:
    """Split ``text`` into lines and tokens; empty lines get one empty marker token."""
    lines, tokens = [], []
    for j, (ls, le) in enumerate(split_lines(text)):
        first = len(tokens)
        for ts, te in tokenize(text[ls:le], language_mode):
            tokens.append(Token(text[ls + ts:ls + te], ls + ts, ls + te, j))
        if len(tokens) == first:
            tokens.append(Token("", ls, ls, j))
        lines.append(Line(j, ls, le, first, len(tokens) - 1))
    return Document(doc_id, text, tuple(lines), tuple(tokens))


# ---------------------------------------------------------------------------
# Corpus files


def _parse_line_spans(items, kind: str, allowed: Sequence[str]) -> list[SectionSpan]:
    if not isinstance(items, list):
        raise ValueError(f"'{kind}' must be a list")
    out = []
    for it in items:
        if not isinstance(it, dict):
            raise ValueError(f"'{kind}' entries must be objects")
        try:
            typ, s, e = it["type"], it["start_line"], it["end_line"]
        except KeyError as exc:
            raise ValueError(f"'{kind}' entry missing field {exc.args[0]!r}") from None
        if typ not in allowed:
            raise ValueError(f"unknown {kind[:-1]} type {typ!r}")
        if not (isinstance(s, int) and isinstance(e, int)) or isinstance(s, bool) or isinstance(e, bool):
            raise ValueError(f"'{kind}' line bounds must be integers")
        out.append(SectionSpan(typ, s, e))
    return out


def parse_annotations(obj) -> AnnotationSet | None:
    if obj is None:
        return None
    if not isinstance(obj, dict):
        raise ValueError("'annotations' must be an object or null")
    for key in ("sections", "groups", "entities"):
        if key not in obj:
            raise ValueError(f"annotations missing field {key!r}")
    sections = _parse_line_spans(obj["sections"], "sections", SECTION_TYPES)
    groups = _parse_line_spans(obj["groups"], "groups", GROUPED_SECTIONS)
    if not isinstance(obj["entities"], list):
        raise ValueError("'entities' must be a list")
    entities = []
    for it in obj["entities"]:
        if not isinstance(it, dict):
            raise ValueError("'entities' entries must be objects")
        try:
            typ, s, e = it["type"], it["char_start"], it["char_end"]
        except KeyError as exc:
            raise ValueError(f"entity missing field {exc.args[0]!r}") from None
        if typ not in ENTITY_TYPES:
            raise ValueError(f"unknown entity type {typ!r}")
        if not (isinstance(s, int) and isinstance(e, int)) or isinstance(s, bool) or isinstance(e, bool):
            raise ValueError("entity offsets must be integers")
        entities.append(EntitySpan(typ, s, e))
    return AnnotationSet.of(sections, groups, entities)


def validate_annotations(record: CorpusRecord) -> AnnotationSet | None:
    """Check bounds and structure; return the repaired annotation set.

    Bounds violations and overlapping sections or groups raise
    :class:`AnnotationError`. Groups outside a section of their own type are
    dropped and overlapping entities are resolved longest-first.
    """
    ann = record.annotations
    if ann is None:
        return None
    n_lines = len(split_lines(record.text))
    n_chars = len(record.text)
    for span in ann.sections + ann.groups:
        if not (0 <= span.start_line <= span.end_line < n_lines):
            raise AnnotationError(record.id, f"line range outside 0..{n_lines - 1}", span)
    for ent in ann.entities:
        if not (0 <= ent.char_start < ent.char_end <= n_chars):
            raise AnnotationError(record.id, f"entity span outside 0..{n_chars}", ent)
    for spans, what in ((ann.sections, "sections"), (ann.groups, "groups")):
        for a, b in zip(spans, spans[1:]):
            if b.start_line <= a.end_line:
                raise AnnotationError(record.id, f"overlapping {what}", (a, b))
    groups = []
    for g in ann.groups:
        if any(s.type == g.type and s.start_line <= g.start_line and g.end_line <= s.end_line for s in ann.sections):
            groups.append(g)
        else:
            logger.warning("record %r: dropping group %s outside a %s section", record.id, g, g.type)
    entities = resolve_entity_overlaps(ann.entities, record.id)
    return AnnotationSet.of(ann.sections, groups, entities)


def record_from_json(obj) -> CorpusRecord:
    if not isinstance(obj, dict):
        raise ValueError("record must be a JSON object")
    for key in ("id", "text"):
        if key not in obj:
            raise ValueError(f"missing required field {key!r}")
    if not isinstance(obj["id"], str) or not isinstance(obj["text"], str):
        raise ValueError("'id' and 'text' must be strings")
    rec = CorpusRecord(obj["id"], obj["text"], parse_annotations(obj.get("annotations")))
    return CorpusRecord(rec.id, rec.text, validate_annotations(rec))


def record_to_json(rec: CorpusRecord) -> dict:
    ann = None
    if rec.annotations is not None:
        a = rec.annotations
        ann = {
            "sections": [{"type": s.type, "start_line": s.start_line, "end_line": s.end_line} for s in a.sections],
            "groups": [{"type": s.type, "start_line": s.start_line, "end_line": s.end_line} for s in a.groups],
            "entities": [{"type": e.type, "char_start": e.char_start, "char_end": e.char_end} for e in a.entities],
        }
    return {"id": rec.id, "text": rec.text, "annotations": ann}


def read_corpus(path: str | Path) -> tuple[list[CorpusRecord], list[RecordError]]:
    """Parse a JSONL corpus, keeping valid records and collecting per-record errors."""
    records: list[CorpusRecord] = []
    errors: list[RecordError] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            rid = None
            try:
                obj = json.loads(raw)
                if isinstance(obj, dict) and isinstance(obj.get("id"), str):
                    rid = obj["id"]
                rec = record_from_json(obj)
            except (ValueError, AnnotationError) as exc:
                errors.append(RecordError(lineno, rid, str(exc)))
                continue
            if rec.id in seen:
                errors.append(RecordError(lineno, rec.id, "duplicate record id"))
                continue
            seen.add(rec.id)
            records.append(rec)
    return records, errors


def load_corpus(path: str | Path) -> list[CorpusRecord]:
    records, errors = read_corpus(path)
    if errors:
        raise CorpusError(errors)
    return records


def write_corpus(records: Iterable[CorpusRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_json(rec), ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# Splitting


MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 generator; tiny and identical across platforms."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection sampling."""
        bound = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next()
            if x < bound:
                return x % n


def shuffled(items: Sequence, seed: int) -> list:
    """Fisher-Yates shuffle driven by SplitMix64."""
    out = list(items)
    rng = SplitMix64(seed)
    for i in range(len(out) - 1, 0, -1):
        j = rng.below(i + 1)
        out[i], out[j] = out[j], out[i]
    return out


def split_corpus(records: Sequence[CorpusRecord], spec: SplitSpec = SplitSpec()) -> tuple[list, list]:
    n = len(records)
    if n < 2:
        raise ValueError(f"need at least 2 records to split, got {n}")
    n_train = math.ceil(round(n * spec.train_fraction, 9))
    order = shuffled(records, spec.seed)
    return order[:n_train], order[n_train:]


# ---------------------------------------------------------------------------


def build_document(
    record: CorpusRecord,
    token_scheme: TokenLabelScheme | None = None,
    line_scheme: LineLabelScheme | None = None,
    language_mode: str = "default",
) -> LabeledDocument:
    """Tokenize a record and align its annotations to line and token labels."""
    doc = make_document(record.id, record.text, language_mode)
    if record.annotations is None:
        return LabeledDocument(doc, None, None, None)
    token_scheme = token_scheme or TokenLabelScheme()
    lines = encode_line_labels(doc, record.annotations, line_scheme)
    tokens = encode_token_labels(doc, record.annotations, token_scheme)
    return LabeledDocument(doc, record.annotations, lines, tokens)
