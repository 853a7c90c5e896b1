"""Documents, label schemes and the codecs between span annotations and
per-line / per-token label sequences.

A document is viewed twice: as a sequence of lines (section and group labels)
and as one flat sequence of tokens (entity labels). Offsets are Unicode
codepoint offsets into ``Document.text``.
"""

from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

OUTSIDE = "O"

#: Sections labeled in IO format only.
PLAIN_SECTIONS = (
    "contact",
    "skills",
    "languages",
    "summary",
    "objective",
    "achievements",
    "references",
    "letter",
)
#: Sections whose lines may additionally be split into IOB groups.
GROUPED_SECTIONS = ("work", "education", "internship")
SECTION_TYPES = PLAIN_SECTIONS + GROUPED_SECTIONS

ENTITY_TYPES = (
    "name",
    "phone",
    "email",
    "street_address",
    "zipcode",
    "city",
    "state",
    "company",
    "job_title",
    "period",
    "school_name",
    "degree_title",
    "degree_period",
    "major",
    "gpa",
    "language_name",
)

#: Entity subsets used for section-specific models and per-section metrics.
SECTION_ENTITIES = {
    "contact": ("name", "phone", "email", "street_address", "zipcode", "city", "state"),
    "work": ("company", "job_title", "period"),
    "education": ("school_name", "degree_title", "degree_period", "major", "gpa"),
}


class AnnotationError(ValueError):
    """An annotation does not fit the document it is attached to."""

    def __init__(self, doc_id: str, message: str, span=None):
        self.doc_id = doc_id
        self.span = span
        detail = f" (span {span})" if span is not None else ""
        super().__init__(f"document {doc_id!r}: {message}{detail}")


# ---------------------------------------------------------------------------
# Documents


@dataclass(frozen=True)
class Token:
    text: str
    char_start: int
    char_end: int
    line_index: int

    @property
    def is_empty_marker(self) -> bool:
        """True for the synthetic token standing in for an empty line."""
        return self.char_start == self.char_end


@dataclass(frozen=True)
class Line:
    index: int
    char_start: int
    char_end: int
    token_start: int
    token_end: int  # inclusive


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    lines: tuple[Line, ...]
    tokens: tuple[Token, ...]

    def __post_init__(self):
        expected = 0
        for line in self.lines:
            if line.token_start != expected or line.token_end < line.token_start:
                raise ValueError(f"document {self.id!r}: line {line.index} does not tile tokens")
            expected = line.token_end + 1
        if expected != len(self.tokens):
            raise ValueError(f"document {self.id!r}: line ranges cover {expected} of {len(self.tokens)} tokens")

    @property
    def num_lines(self) -> int:
        return len(self.lines)

    @property
    def num_tokens(self) -> int:
        return len(self.tokens)

    @cached_property
    def line_starts(self) -> np.ndarray:
        """Index of the first token of every line (``a_j``)."""
        return np.array([ln.token_start for ln in self.lines], dtype=np.int64)

    @cached_property
    def line_ends(self) -> np.ndarray:
        """Index of the last token of every line (``b_j``)."""
        return np.array([ln.token_end for ln in self.lines], dtype=np.int64)

    @cached_property
    def token_line_index(self) -> np.ndarray:
        return np.array([t.line_index for t in self.tokens], dtype=np.int64)

    @cached_property
    def _token_starts(self) -> list[int]:
        return [t.char_start for t in self.tokens]

    def line_text(self, j: int) -> str:
        ln = self.lines[j]
        return self.text[ln.char_start:ln.char_end]

    def tokens_overlapping(self, char_start: int, char_end: int) -> list[int]:
        """Indices of non-empty tokens whose character range overlaps [start, end)."""
        # tokens are sorted by char_start; the leftmost candidate ends after char_start
        hi = bisect.bisect_left(self._token_starts, char_end)
        out = []
        for i in range(hi - 1, -1, -1):
            tok = self.tokens[i]
            if tok.char_end <= char_start:
                if not tok.is_empty_marker:
                    break
                continue
            if not tok.is_empty_marker:
                out.append(i)
        out.reverse()
        return out


# ---------------------------------------------------------------------------
# Annotations


@dataclass(frozen=True, order=True)
class SectionSpan:
    type: str
    start_line: int
    end_line: int  # inclusive


@dataclass(frozen=True, order=True)
class EntitySpan:
    type: str
    char_start: int
    char_end: int

    @property
    def length(self) -> int:
        return self.char_end - self.char_start


@dataclass(frozen=True)
class AnnotationSet:
    sections: tuple[SectionSpan, ...] = ()
    groups: tuple[SectionSpan, ...] = ()
    entities: tuple[EntitySpan, ...] = ()

    @classmethod
    def of(cls, sections: Iterable = (), groups: Iterable = (), entities: Iterable = ()) -> "AnnotationSet":
        """Build a canonical (sorted) annotation set from plain tuples or spans."""
        secs = [s if isinstance(s, SectionSpan) else SectionSpan(*s) for s in sections]
        grps = [g if isinstance(g, SectionSpan) else SectionSpan(*g) for g in groups]
        ents = [e if isinstance(e, EntitySpan) else EntitySpan(*e) for e in entities]
        key = lambda s: (s.start_line, s.end_line, s.type)
        return cls(tuple(sorted(secs, key=key)), tuple(sorted(grps, key=key)),
                   tuple(sorted(ents, key=lambda e: (e.char_start, e.char_end, e.type))))

    def canonical(self) -> "AnnotationSet":
        return AnnotationSet.of(self.sections, self.groups, self.entities)


# ---------------------------------------------------------------------------
# Label schemes


@dataclass(frozen=True)
class LineLabelScheme:
    """The 18 line labels: O, IO labels for plain sections, and
    ``I-<sec>``, ``B-<sec>_group``, ``I-<sec>_group`` for grouped sections."""

    plain_sections: tuple[str, ...] = PLAIN_SECTIONS
    grouped_sections: tuple[str, ...] = GROUPED_SECTIONS

    @cached_property
    def labels(self) -> tuple[str, ...]:
        out = [OUTSIDE] + [f"I-{s}" for s in self.plain_sections]
        for s in self.grouped_sections:
            out += [f"I-{s}", f"B-{s}_group", f"I-{s}_group"]
        return tuple(out)

    @cached_property
    def index(self) -> dict[str, int]:
        return {lab: k for k, lab in enumerate(self.labels)}

    @cached_property
    def _parsed(self) -> tuple[tuple[str | None, str | None], ...]:
        # (section, role) with role in {None, "B", "I"} for the group part
        out = []
        for lab in self.labels:
            if lab == OUTSIDE:
                out.append((None, None))
            elif lab.endswith("_group"):
                out.append((lab[2:-6], lab[0]))
            else:
                out.append((lab[2:], None))
        return tuple(out)

    @property
    def size(self) -> int:
        return len(self.labels)

    def section_of(self, k: int) -> str | None:
        return self._parsed[k][0]

    def group_role(self, k: int) -> str | None:
        return self._parsed[k][1]

    def allows(self, prev: int, nxt: int) -> bool:
        sec, role = self._parsed[nxt]
        if role != "I":
            return True
        psec, prole = self._parsed[prev]
        return psec == sec and prole is not None

    def can_start(self, k: int) -> bool:
        return self._parsed[k][1] != "I"

    def to_json(self) -> dict:
        return {"plain_sections": list(self.plain_sections), "grouped_sections": list(self.grouped_sections)}


@dataclass(frozen=True)
class TokenLabelScheme:
    entity_types: tuple[str, ...] = ENTITY_TYPES
    kind: str = "bio"

    def __post_init__(self):
        if self.kind not in ("bio", "io"):
            raise ValueError(f"unknown token scheme kind {self.kind!r}")

    @cached_property
    def labels(self) -> tuple[str, ...]:
        out = [OUTSIDE]
        for e in self.entity_types:
            out += [f"B-{e}", f"I-{e}"] if self.kind == "bio" else [f"I-{e}"]
        return tuple(out)

    @cached_property
    def index(self) -> dict[str, int]:
        return {lab: k for k, lab in enumerate(self.labels)}

    @property
    def size(self) -> int:
        return len(self.labels)

    def entity_of(self, k: int) -> str | None:
        return None if k == 0 else self.labels[k][2:]

    def is_begin(self, k: int) -> bool:
        return self.labels[k].startswith("B-")

    def begin(self, entity: str) -> int:
        return self.index[("B-" if self.kind == "bio" else "I-") + entity]

    def inside(self, entity: str) -> int:
        return self.index["I-" + entity]

    def allows(self, prev: int, nxt: int) -> bool:
        if self.kind == "io" or not self.labels[nxt].startswith("I-"):
            return True
        return prev != 0 and self.entity_of(prev) == self.entity_of(nxt)

    def can_start(self, k: int) -> bool:
        return self.kind == "io" or not self.labels[k].startswith("I-")

    def to_json(self) -> dict:
        return {"entity_types": list(self.entity_types), "kind": self.kind}


@dataclass(frozen=True)
class TransitionMask:
    allowed: np.ndarray  # (K, K) bool, allowed[k, k2]: k2 may follow k
    start: np.ndarray  # (K,) bool
    end: np.ndarray  # (K,) bool


def transition_validity_mask(scheme: LineLabelScheme | TokenLabelScheme) -> TransitionMask:
    K = scheme.size
    allowed = np.array([[scheme.allows(a, b) for b in range(K)] for a in range(K)], dtype=bool)
    start = np.array([scheme.can_start(k) for k in range(K)], dtype=bool)
    return TransitionMask(allowed, start, np.ones(K, dtype=bool))


# ---------------------------------------------------------------------------
# Line codec


def encode_line_labels(doc: Document, ann: AnnotationSet, scheme: LineLabelScheme | None = None) -> np.ndarray:
    """Per-line label ids for the section and group spans of ``ann``.

    Lines in a grouped section but outside every group get ``I-<sec>``; the
    first line of a group gets ``B-<sec>_group`` and the rest ``I-<sec>_group``.
    """
    scheme = scheme or LineLabelScheme()
    L = doc.num_lines
    labels = np.zeros(L, dtype=np.int64)
    for span in ann.sections:
        _check_line_span(doc, span, scheme.plain_sections + scheme.grouped_sections)
        labels[span.start_line:span.end_line + 1] = scheme.index[f"I-{span.type}"]
    for span in ann.groups:
        _check_line_span(doc, span, scheme.grouped_sections)
        labels[span.start_line] = scheme.index[f"B-{span.type}_group"]
        labels[span.start_line + 1:span.end_line + 1] = scheme.index[f"I-{span.type}_group"]
    return labels


def _check_line_span(doc: Document, span: SectionSpan, allowed_types: Sequence[str]) -> None:
    if span.type not in allowed_types:
        raise AnnotationError(doc.id, f"unknown line span type {span.type!r}", span)
    if not (0 <= span.start_line <= span.end_line < doc.num_lines):
        raise AnnotationError(doc.id, f"line range outside 0..{doc.num_lines - 1}", span)


def decode_line_labels(labels: Sequence[int], scheme: LineLabelScheme | None = None) -> AnnotationSet:
    """Sections and groups from a per-line label sequence.

    Consecutive lines of the same section type merge into one section. An
    ``I-<sec>_group`` that does not continue a group of the same section opens
    a new group, as if it were ``B-<sec>_group``.
    """
    scheme = scheme or LineLabelScheme()
    sections: list[SectionSpan] = []
    groups: list[SectionSpan] = []
    sec_type, sec_start = None, 0
    grp_type, grp_start = None, 0
    n = len(labels)
    for j in range(n + 1):
        if j < n:
            k = int(labels[j])
            sec, role = scheme.section_of(k), scheme.group_role(k)
        else:
            sec, role = None, None
        if grp_type is not None and not (role == "I" and sec == grp_type):
            groups.append(SectionSpan(grp_type, grp_start, j - 1))
            grp_type = None
        if sec != sec_type:
            if sec_type is not None:
                sections.append(SectionSpan(sec_type, sec_start, j - 1))
            sec_type, sec_start = sec, j
        if role is not None and grp_type is None:
            grp_type, grp_start = sec, j
    return AnnotationSet(tuple(sections), tuple(groups), ())


# ---------------------------------------------------------------------------
# Token codec


def resolve_entity_overlaps(entities: Iterable[EntitySpan], doc_id: str = "") -> list[EntitySpan]:
    """Drop overlapping entity spans: longest span wins, then earliest start."""
    kept: list[EntitySpan] = []
    for ent in sorted(entities, key=lambda e: (-e.length, e.char_start, e.type)):
        if any(ent.char_start < k.char_end and k.char_start < ent.char_end for k in kept):
            logger.warning("document %r: dropping entity %s overlapping a longer span", doc_id, ent)
            continue
        kept.append(ent)
    return sorted(kept, key=lambda e: e.char_start)


def encode_token_labels(doc: Document, ann: AnnotationSet, scheme: TokenLabelScheme) -> np.ndarray:
    """Per-token label ids; a token is covered by a span when their ranges overlap."""
    labels = np.zeros(doc.num_tokens, dtype=np.int64)
    taken = np.zeros(doc.num_tokens, dtype=bool)
    known = set(scheme.entity_types)
    spans = [e for e in ann.entities if e.type in known]
    for ent in resolve_entity_overlaps(spans, doc.id):
        if not (0 <= ent.char_start < ent.char_end <= len(doc.text)):
            raise AnnotationError(doc.id, "entity span outside document text", ent)
        first = True
        for i in doc.tokens_overlapping(ent.char_start, ent.char_end):
            if taken[i]:
                continue
            labels[i] = scheme.begin(ent.type) if first else scheme.inside(ent.type)
            taken[i] = True
            first = False
    return labels


def decode_token_labels(labels: Sequence[int], doc: Document, scheme: TokenLabelScheme) -> list[EntitySpan]:
    """Entity spans from per-token labels.

    Empty-line marker tokens never carry an entity and close any open span.
    """
    spans: list[EntitySpan] = []
    cur_type, cur_start, cur_end = None, 0, 0
    for i, tok in enumerate(doc.tokens):
        k = int(labels[i])
        ent = scheme.entity_of(k) if not tok.is_empty_marker else None
        continues = ent is not None and ent == cur_type and not scheme.is_begin(k)
        if cur_type is not None and not continues:
            spans.append(EntitySpan(cur_type, cur_start, cur_end))
            cur_type = None
        if ent is None:
            continue
        if continues:
            cur_end = tok.char_end
        else:
            cur_type, cur_start, cur_end = ent, tok.char_start, tok.char_end
    if cur_type is not None:
        spans.append(EntitySpan(cur_type, cur_start, cur_end))
    return spans


@dataclass(frozen=True)
class ParseResult:
    doc_id: str
    line_labels: tuple[int, ...] | None
    token_labels: tuple[int, ...] | None
    annotations: AnnotationSet = field(default_factory=AnnotationSet)

    def to_json(self, doc: Document | None = None, line_scheme=None, token_scheme=None) -> dict:
        out: dict = {"id": self.doc_id}
        out["sections"] = [{"type": s.type, "start_line": s.start_line, "end_line": s.end_line}
                           for s in self.annotations.sections]
        out["groups"] = [{"type": s.type, "start_line": s.start_line, "end_line": s.end_line}
                         for s in self.annotations.groups]
        ents = []
        for e in self.annotations.entities:
            item = {"type": e.type, "char_start": e.char_start, "char_end": e.char_end}
            if doc is not None:
                item["text"] = doc.text[e.char_start:e.char_end]
            ents.append(item)
        out["entities"] = ents
        if self.line_labels is not None:
            out["line_labels"] = [line_scheme.labels[k] for k in self.line_labels] if line_scheme else list(self.line_labels)
        if self.token_labels is not None:
            out["token_labels"] = [token_scheme.labels[k] for k in self.token_labels] if token_scheme else list(self.token_labels)
        return out
