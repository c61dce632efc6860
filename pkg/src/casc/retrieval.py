"""BM25 inverted index: build, score, rank, and persist.

Okapi BM25 with k1=1.2, b=0.75 and the non-negative idf variant
ln(1 + (N - df + 0.5) / (df + 0.5)). Zero-score documents are never
returned, and ties break on ascending doc id so ranking is deterministic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from .corpus import Corpus, QuestionRecord, tokenize
from .errors import EmptyCorpus, UnknownDoc

INDEX_FORMAT_VERSION = 1

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75


@dataclass
class Index:
    """Inverted index over a corpus; immutable once built."""

    postings: dict[str, list[tuple[str, int]]]
    doc_lengths: dict[str, int]
    doc_count: int
    avg_doc_length: float


@dataclass(frozen=True)
class RankedDoc:
    doc_id: str
    score: float


@dataclass
class RetrievedSet:
    """Top-k result list, sorted by (score desc, doc_id asc)."""

    query_id: str
    docs: list[RankedDoc]
    k_requested: int

    def doc_ids(self) -> list[str]:
        return [d.doc_id for d in self.docs]


class Retriever(Protocol):
    """Seam for alternative retrievers (e.g. dense embedding models)."""

    def retrieve(self, question: QuestionRecord, k: int) -> RetrievedSet: ...


def build_index(corpus: Corpus) -> Index:
    """Index document text (titles are not indexed)."""
    if len(corpus) == 0:
        raise EmptyCorpus()
    postings: dict[str, dict[str, int]] = {}
    doc_lengths: dict[str, int] = {}
    for doc in corpus:
        tokens = tokenize(doc.text)
        doc_lengths[doc.id] = len(tokens)
        for tok in tokens:
            per_term = postings.setdefault(tok, {})
            per_term[doc.id] = per_term.get(doc.id, 0) + 1
    sorted_postings = {
        term: sorted(counts.items()) for term, counts in sorted(postings.items())
    }
    n = len(doc_lengths)
    return Index(
        postings=sorted_postings,
        doc_lengths=doc_lengths,
        doc_count=n,
        avg_doc_length=sum(doc_lengths.values()) / n,
    )


def _idf(index: Index, term: str) -> float:
    df = len(index.postings.get(term, ()))
    return math.log(1.0 + (index.doc_count - df + 0.5) / (df + 0.5))


def _term_frequency(index: Index, term: str, doc_id: str) -> int:
    for posting_doc, tf in index.postings.get(term, ()):
        if posting_doc == doc_id:
            return tf
    return 0


def bm25_score(
    index: Index,
    query_tokens: list[str],
    doc_id: str,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> float:
    """Okapi BM25 score of one document for a token list.

    Query tokens contribute with multiplicity: repeating a term in the
    query repeats its summand.
    """
    if doc_id not in index.doc_lengths:
        raise UnknownDoc(doc_id)
    length_norm = 1.0 - b + b * index.doc_lengths[doc_id] / index.avg_doc_length
    score = 0.0
    for term in query_tokens:
        tf = _term_frequency(index, term, doc_id)
        if tf == 0:
            continue
        score += _idf(index, term) * tf * (k1 + 1.0) / (tf + k1 * length_norm)
    return score


def search(
    index: Index,
    query_tokens: list[str],
    k: int,
    query_id: str = "",
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> RetrievedSet:
    """Rank all matching documents and keep the k best positive scores.

    Accumulation runs per query token in query order, exactly mirroring
    bm25_score, so both paths produce bit-identical floats.
    """
    if index.doc_count == 0:
        raise EmptyCorpus("index contains no documents")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    scores: dict[str, float] = {}
    for term in query_tokens:
        posting = index.postings.get(term)
        if not posting:
            continue
        idf = _idf(index, term)
        for doc_id, tf in posting:
            length_norm = 1.0 - b + b * index.doc_lengths[doc_id] / index.avg_doc_length
            summand = idf * tf * (k1 + 1.0) / (tf + k1 * length_norm)
            scores[doc_id] = scores.get(doc_id, 0.0) + summand
    ranked = sorted(
        (RankedDoc(doc_id, score) for doc_id, score in scores.items() if score > 0.0),
        key=lambda r: (-r.score, r.doc_id),
    )
    return RetrievedSet(query_id=query_id, docs=ranked[:k], k_requested=k)


def retrieve_top_k(
    index: Index,
    question: QuestionRecord,
    k: int,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> RetrievedSet:
    """Top-k documents for a question by BM25 over its tokenized text."""
    return search(index, tokenize(question.question), k, query_id=question.id, k1=k1, b=b)


def save_index(index: Index, path: str | Path) -> None:
    """Persist as versioned JSON; byte-identical for equal indexes."""
    payload = {
        "format_version": INDEX_FORMAT_VERSION,
        "postings": {t: [[d, tf] for d, tf in plist] for t, plist in index.postings.items()},
        "doc_lengths": index.doc_lengths,
        "doc_count": index.doc_count,
        "avg_doc_length": index.avg_doc_length,
    }
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":")) + "\n",
        encoding="utf-8",
    )


def load_index(path: str | Path) -> Index:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    version = payload.get("format_version")
    if version != INDEX_FORMAT_VERSION:
        raise ValueError(f"unsupported index format_version: {version!r}")
    return Index(
        postings={t: [(d, tf) for d, tf in plist] for t, plist in payload["postings"].items()},
        doc_lengths=payload["doc_lengths"],
        doc_count=payload["doc_count"],
        avg_doc_length=payload["avg_doc_length"],
    )
