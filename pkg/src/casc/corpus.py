"""Corpus and dataset loading plus the shared text-normalization rules.

Every downstream stage (indexing, claim comparison, token budgets, answer
scoring) counts tokens and compares values through the two functions defined
here, so they stay small, deterministic, and dependency-free.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import DuplicateId, EmptyText, MalformedLine, MissingAnswers

SOURCE_KINDS = ("abstract", "report", "blog", "other")

# Unicode letter/digit runs; underscore and all punctuation separate.
_TOKEN_RE = re.compile(r"[^\W_]+")
_NUMBER_RE = re.compile(r"^[+-]?\d+(?:\.\d+)?$")
_TRAILING_PUNCT_RE = re.compile(r"[.,;:\s]+$")


@dataclass
class Document:
    """One retrievable source text."""

    id: str
    title: str
    text: str
    source_kind: str = "other"
    timestamp: datetime | None = None
    metadata: dict[str, str] = field(default_factory=dict)


@dataclass
class QuestionRecord:
    """A question, its gold answers, and the document ids it was built from."""

    id: str
    question: str
    gold_answers: list[str]
    doc_ids: list[str]
    conflict_keys: list[str] = field(default_factory=list)


@dataclass
class Corpus:
    """Validated id -> Document map preserving file order."""

    docs: dict[str, Document]

    def __len__(self) -> int:
        return len(self.docs)

    def __iter__(self):
        return iter(self.docs.values())

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.docs

    def __getitem__(self, doc_id: str) -> Document:
        return self.docs[doc_id]


def tokenize(text: str) -> list[str]:
    """Split into lowercase Unicode letter/digit runs.

    Everything that is not a letter or digit (including underscore) acts as
    a separator, so the result never contains empty tokens.
    """
    return _TOKEN_RE.findall(text.lower())


def normalize_value(text: str) -> str:
    """Canonical form used for claim values and claim keys.

    Lowercases, trims, collapses internal whitespace, strips trailing
    sentence punctuation, and re-renders purely numeric whitespace-delimited
    tokens in canonical decimal form so that "45", "45.0" and " 45.00. "
    all compare equal.
    """
    s = " ".join(text.lower().split())
    s = _TRAILING_PUNCT_RE.sub("", s)
    if not s:
        return ""
    return " ".join(_canonical_number(tok) for tok in s.split(" "))


def _canonical_number(token: str) -> str:
    if not _NUMBER_RE.match(token):
        return token
    negative = token.startswith("-")
    digits = token.lstrip("+-")
    int_part, _, frac_part = digits.partition(".")
    int_part = int_part.lstrip("0") or "0"
    frac_part = frac_part.rstrip("0")
    out = f"{int_part}.{frac_part}" if frac_part else int_part
    if out == "0":
        return "0"
    return f"-{out}" if negative else out


def parse_timestamp(raw: str) -> datetime:
    """Parse an ISO-8601 timestamp; naive values are taken as UTC."""
    ts = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


_DOC_KEYS = {"id", "title", "text", "source_kind", "timestamp", "metadata"}
_QUESTION_KEYS = {"id", "question", "answers", "doc_ids", "conflict_keys"}


def _parse_document(raw: object, line_no: int) -> Document:
    if not isinstance(raw, dict):
        raise MalformedLine(line_no, "expected a JSON object")
    unknown = set(raw) - _DOC_KEYS
    if unknown:
        raise MalformedLine(line_no, f"unknown document field(s): {sorted(unknown)}")
    doc_id = raw.get("id")
    title = raw.get("title")
    text = raw.get("text")
    if not isinstance(doc_id, str) or not doc_id:
        raise MalformedLine(line_no, "missing or empty 'id'")
    if not isinstance(title, str):
        raise MalformedLine(line_no, "missing 'title'")
    if not isinstance(text, str):
        raise MalformedLine(line_no, "missing 'text'")
    if not text.strip():
        raise EmptyText(doc_id)
    kind = raw.get("source_kind", "other")
    if kind not in SOURCE_KINDS:
        raise MalformedLine(line_no, f"source_kind must be one of {SOURCE_KINDS}, got {kind!r}")
    timestamp = None
    if "timestamp" in raw and raw["timestamp"] is not None:
        if not isinstance(raw["timestamp"], str):
            raise MalformedLine(line_no, "'timestamp' must be an ISO-8601 string")
        try:
            timestamp = parse_timestamp(raw["timestamp"])
        except ValueError as exc:
            raise MalformedLine(line_no, f"bad timestamp: {exc}") from exc
    metadata = raw.get("metadata", {})
    if not isinstance(metadata, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in metadata.items()
    ):
        raise MalformedLine(line_no, "'metadata' must be a string-to-string map")
    return Document(id=doc_id, title=title, text=text, source_kind=kind,
                    timestamp=timestamp, metadata=dict(metadata))


def _parse_question(raw: object, line_no: int) -> QuestionRecord:
    if not isinstance(raw, dict):
        raise MalformedLine(line_no, "expected a JSON object")
    unknown = set(raw) - _QUESTION_KEYS
    if unknown:
        raise MalformedLine(line_no, f"unknown question field(s): {sorted(unknown)}")
    qid = raw.get("id")
    question = raw.get("question")
    if not isinstance(qid, str) or not qid:
        raise MalformedLine(line_no, "missing or empty 'id'")
    if not isinstance(question, str) or not question.strip():
        raise MalformedLine(line_no, "missing or empty 'question'")
    answers = raw.get("answers")
    if not isinstance(answers, list) or not all(isinstance(a, str) for a in answers):
        raise MalformedLine(line_no, "'answers' must be a list of strings")
    if not answers:
        raise MissingAnswers(qid)
    doc_ids = raw.get("doc_ids")
    if not isinstance(doc_ids, list) or not all(isinstance(d, str) for d in doc_ids):
        raise MalformedLine(line_no, "'doc_ids' must be a list of strings")
    conflict_keys = raw.get("conflict_keys", [])
    if not isinstance(conflict_keys, list) or not all(isinstance(c, str) for c in conflict_keys):
        raise MalformedLine(line_no, "'conflict_keys' must be a list of strings")
    return QuestionRecord(id=qid, question=question, gold_answers=list(answers),
                          doc_ids=list(doc_ids), conflict_keys=list(conflict_keys))


def _iter_jsonl(path: Path):
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield line_no, json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLine(line_no, f"invalid JSON ({exc.msg})") from exc


def load_corpus(path: str | Path) -> Corpus:
    """Load and validate a JSONL corpus; insertion order is preserved."""
    docs: dict[str, Document] = {}
    for line_no, raw in _iter_jsonl(Path(path)):
        doc = _parse_document(raw, line_no)
        if doc.id in docs:
            raise DuplicateId(doc.id)
        docs[doc.id] = doc
    return Corpus(docs)


def load_dataset(path: str | Path) -> list[QuestionRecord]:
    """Load and validate a JSONL question dataset in file order."""
    return [_parse_question(raw, line_no) for line_no, raw in _iter_jsonl(Path(path))]
