"""Initial per-token features.

Two sources are supported: word embeddings concatenated with handcrafted
features, or precomputed per-line contextual features read from a JSONL file.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .doc_model import Document

logger = logging.getLogger(__name__)


class FeatureError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Embeddings


@dataclass(frozen=True)
class EmbeddingTable:
    vocab: Mapping[str, int]
    vectors: np.ndarray  # (V, dim)
    oov: str = "zero"

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def digest(self) -> str:
        h = hashlib.sha256()
        for word in sorted(self.vocab, key=self.vocab.__getitem__):
            h.update(word.encode("utf-8") + b"\0")
        h.update(np.ascontiguousarray(self.vectors, dtype="<f8").tobytes())
        return h.hexdigest()[:16]


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Read a text embedding file with a ``<count> <dim>`` header line."""
    vocab: dict[str, int] = {}
    rows: list[list[float]] = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if not header:
            raise FeatureError(f"{path}: missing header")
        try:
            _count, dim = int(header[0]), int(header[1])
        except (ValueError, IndexError):
            raise FeatureError(f"{path}: malformed header {' '.join(header)!r}") from None
        for rowno, raw in enumerate(fh, start=2):
            parts = raw.rstrip("\n").split()
            if not parts:
                continue
            word, values = parts[0], parts[1:]
            if len(values) != dim:
                raise FeatureError(f"{path}: row {rowno} has {len(values)} values, expected {dim}")
            if word in vocab:
                logger.warning("%s: duplicate token %r at row %d ignored", path, word, rowno)
                continue
            vocab[word] = len(rows)
            rows.append([float(v) for v in values])
    vectors = np.array(rows, dtype=np.float64).reshape(len(rows), dim)
    return EmbeddingTable(vocab, vectors)


def write_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(table.vocab)} {table.dim}\n")
        for word, idx in sorted(table.vocab.items(), key=lambda kv: kv[1]):
            fh.write(word + " " + " ".join(f"{v:.6f}" for v in table.vectors[idx]) + "\n")


def embed_token(table: EmbeddingTable, token_text: str) -> np.ndarray:
    idx = table.vocab.get(token_text.lower())
    if idx is None:
        return np.zeros(table.dim)
    return table.vectors[idx]


# ---------------------------------------------------------------------------
# Handcrafted features


def _read_terms(name: str) -> frozenset[str]:
    text = (resources.files("hseqlabel") / "data" / "dicts" / f"{name}.txt").read_text(encoding="utf-8")
    return frozenset(t.strip().lower() for t in text.splitlines() if t.strip())


def load_dictionary(path: str | Path) -> frozenset[str]:
    with open(path, encoding="utf-8") as fh:
        return frozenset(t.strip().lower() for t in fh if t.strip())


DEFAULT_DICTIONARIES = ("months", "degrees", "job_titles")

_LENGTH_BUCKETS = ((1, 1), (2, 3), (4, 6), (7, 10), (11, None))

EMAIL_RE = re.compile(r"[\w.+-]+@[\w-]+(?:\.[\w-]+)+")
PHONE_RE = re.compile(r"\+?\(?\d[\d ().-]{5,}\d")
URL_RE = re.compile(r"(?:https?://|www\.)\S+|\b[\w-]+\.(?:com|org|net|io)/\S*")
YEAR_RE = re.compile(r"(?:19|20)\d\d")
DATE_RE = re.compile(r"\b\d{1,2}[/.-]\d{1,2}[/.-]\d{2,4}\b|\b\d{1,2}/\d{4}\b|\b\d{4}-\d{2}(?:-\d{2})?\b")

BASE_FEATURES = (
    "is_title_case", "is_all_caps", "is_all_lower", "contains_digit", "is_all_digits", "is_punctuation",
    "len_1", "len_2_3", "len_4_6", "len_7_10", "len_gt_10",
    "pos_in_line", "line_pos_in_doc",
    "re_email", "re_phone", "re_url", "re_year", "re_date",
)


@dataclass(frozen=True)
class HandcraftedFeatureSpec:
    """Ordered handcrafted feature layout with named term dictionaries."""

    dictionaries: tuple[tuple[str, frozenset[str]], ...] = field(default=())

    @classmethod
    def default(cls) -> "HandcraftedFeatureSpec":
        return cls(tuple((name, _read_terms(name)) for name in DEFAULT_DICTIONARIES))

    @property
    def names(self) -> tuple[str, ...]:
        return BASE_FEATURES + tuple(f"dict_{name}" for name, _ in self.dictionaries)

    @property
    def dim(self) -> int:
        return len(BASE_FEATURES) + len(self.dictionaries)

    def to_json(self) -> dict:
        # a list keeps the feature order stable under key-sorted serialization
        return {"dictionaries": [[name, sorted(terms)] for name, terms in self.dictionaries]}

    @classmethod
    def from_json(cls, obj: dict) -> "HandcraftedFeatureSpec":
        return cls(tuple((name, frozenset(terms)) for name, terms in obj["dictionaries"]))

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_json(), sort_keys=True).encode()).hexdigest()[:16]


def _shape_flags(text: str) -> list[float]:
    letters = [c for c in text if c.isalpha()]
    title = bool(letters) and text[0].isupper() and not any(c.isupper() for c in text[1:])
    caps = bool(letters) and all(c.isupper() for c in letters)
    lower = bool(letters) and all(c.islower() for c in letters)
    digit = any(c.isdigit() for c in text)
    all_digits = bool(text) and text.isdigit()
    punct = bool(text) and all(unicodedata.category(c)[0] in "PS" for c in text)
    return [float(title), float(caps), float(lower), float(digit), float(all_digits), float(punct)]


def _length_bucket(n: int) -> list[float]:
    return [float(lo <= n and (hi is None or n <= hi)) for lo, hi in _LENGTH_BUCKETS]


def _regex_coverage(doc: Document, j: int, pattern: re.Pattern) -> list[tuple[int, int]]:
    line = doc.lines[j]
    return [(line.char_start + m.start(), line.char_start + m.end()) for m in pattern.finditer(doc.line_text(j))]


def handcrafted_matrix(doc: Document, spec: HandcraftedFeatureSpec) -> np.ndarray:
    """Handcrafted features for every token of ``doc``, shape (T, spec.dim).

    Email, phone, URL and date flags are set on tokens overlapping a regex
    match over the whole line, since the tokenizer splits those strings apart.
    """
    T, L = doc.num_tokens, doc.num_lines
    out = np.zeros((T, spec.dim))
    line_patterns = (EMAIL_RE, PHONE_RE, URL_RE, None, DATE_RE)
    for j, line in enumerate(doc.lines):
        matches = [_regex_coverage(doc, j, p) if p is not None else [] for p in line_patterns]
        n_in_line = line.token_end - line.token_start + 1
        for i in range(line.token_start, line.token_end + 1):
            tok = doc.tokens[i]
            if tok.is_empty_marker:
                row = [0.0] * 11
            else:
                row = _shape_flags(tok.text) + _length_bucket(len(tok.text))
            row.append((i - line.token_start) / (n_in_line - 1) if n_in_line > 1 else 0.0)
            row.append(j / (L - 1) if L > 1 else 0.0)
            for p, spans in zip(line_patterns, matches):
                if p is None:
                    row.append(float(bool(YEAR_RE.fullmatch(tok.text))))
                else:
                    row.append(float(any(s < tok.char_end and tok.char_start < e for s, e in spans)))
            low = tok.text.lower()
            row.extend(float(low in terms) for _, terms in spec.dictionaries)
            out[i] = row
    return out


def handcrafted_features(doc: Document, token_index: int, spec: HandcraftedFeatureSpec) -> np.ndarray:
    if not 0 <= token_index < doc.num_tokens:
        raise IndexError(f"token index {token_index} outside document of {doc.num_tokens} tokens")
    return handcrafted_matrix(doc, spec)[token_index]


# ---------------------------------------------------------------------------
# External per-line features


@dataclass(frozen=True)
class ExternalFeatureFile:
    doc_id: str
    lines: tuple[np.ndarray, ...]  # one (n_tokens_in_line, dim) matrix per line

    @property
    def dim(self) -> int:
        return self.lines[0].shape[1] if self.lines else 0


def read_external_features(path: str | Path) -> dict[str, list]:
    """Raw ``{id: lines}`` mapping from an external feature JSONL file."""
    out: dict[str, list] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            obj = json.loads(raw)
            if not isinstance(obj, dict) or "id" not in obj or "lines" not in obj:
                raise FeatureError(f"{path}: line {lineno}: expected an object with 'id' and 'lines'")
            out[obj["id"]] = obj["lines"]
    return out


def validate_external_features(raw_lines: Sequence, doc: Document) -> ExternalFeatureFile:
    """Check per-line matrices against the tokenization of ``doc``.

    An empty line may carry zero rows or a single row for its marker token.
    """
    if len(raw_lines) != doc.num_lines:
        raise FeatureError(f"document {doc.id!r}: {len(raw_lines)} feature lines for {doc.num_lines} text lines")
    dim = None
    mats = []
    for j, (rows, line) in enumerate(zip(raw_lines, doc.lines)):
        n_tok = line.token_end - line.token_start + 1
        empty = doc.tokens[line.token_start].is_empty_marker
        mat = np.asarray(rows, dtype=np.float64)
        if mat.size == 0 and empty:
            mats.append(None)
            continue
        if mat.ndim != 2:
            raise FeatureError(f"document {doc.id!r}: line {j} features are not a matrix")
        if mat.shape[0] != n_tok:
            raise FeatureError(f"document {doc.id!r}: line {j} has {mat.shape[0]} feature rows for {n_tok} tokens")
        if dim is None:
            dim = mat.shape[1]
        elif mat.shape[1] != dim:
            raise FeatureError(f"document {doc.id!r}: line {j} feature width {mat.shape[1]} differs from {dim}")
        if not np.all(np.isfinite(mat)):
            raise FeatureError(f"document {doc.id!r}: line {j} has non-finite features")
        mats.append(mat)
    dim = dim or 0
    filled = tuple(m if m is not None else np.zeros((1, dim)) for m in mats)
    return ExternalFeatureFile(doc.id, filled)


def load_external_line_features(path: str | Path, doc: Document) -> ExternalFeatureFile:
    raw = read_external_features(path)
    if doc.id not in raw:
        raise FeatureError(f"{path}: no features for document {doc.id!r}")
    return validate_external_features(raw[doc.id], doc)


# ---------------------------------------------------------------------------


@dataclass
class FeatureConfig:
    """Where initial features come from.

    ``source`` is ``"embedding"`` (embedding table plus handcrafted features)
    or ``"external"`` (``external`` maps document ids to raw per-line rows).
    """

    source: str = "embedding"
    table: EmbeddingTable | None = None
    spec: HandcraftedFeatureSpec | None = None
    external: Mapping[str, Sequence] | None = None
    external_dim: int | None = None

    @property
    def dim(self) -> int:
        if self.source == "embedding":
            return (self.table.dim if self.table is not None else 0) + self.spec.dim
        if self.external_dim is None:
            raise FeatureError("external feature width unknown")
        return self.external_dim


def initial_features(doc: Document, config: FeatureConfig) -> np.ndarray:
    """Feature matrix of shape (T, config.dim) for ``doc``."""
    if config.source == "embedding":
        hand = handcrafted_matrix(doc, config.spec)
        if config.table is None:
            return hand
        emb = np.zeros((doc.num_tokens, config.table.dim))
        for i, tok in enumerate(doc.tokens):
            idx = config.table.vocab.get(tok.text.lower())
            if idx is not None:
                emb[i] = config.table.vectors[idx]
        return np.concatenate([emb, hand], axis=1)
    if config.source == "external":
        if config.external is None or doc.id not in config.external:
            raise FeatureError(f"no external features for document {doc.id!r}")
        ext = validate_external_features(config.external[doc.id], doc)
        if doc.num_lines == 0:
            return np.zeros((0, config.dim))
        if ext.dim != config.dim:
            raise FeatureError(f"document {doc.id!r}: feature width {ext.dim}, expected {config.dim}")
        return np.concatenate(ext.lines, axis=0)
    raise FeatureError(f"unknown feature source {config.source!r}")
