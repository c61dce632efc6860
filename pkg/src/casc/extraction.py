"""Turn retrieved documents into query-relevant (key, value) claims.

Two interchangeable backends: a deterministic rule-based extractor built on
three copular sentence patterns, and an LLM backend whose JSON output is
parsed and quote-grounded before anything is accepted as a claim.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources

from .corpus import Corpus, Document, QuestionRecord, normalize_value, tokenize
from .errors import BackendFailure, GatewayError, UnparseableOutput
from . import gateway

RULE_BASED = "rule_based"
LLM = "llm"


@dataclass(frozen=True)
class Claim:
    """A grounded (key, value) assertion extracted from one document.

    key is "entity|attribute" in normalized form, value is normalized, and
    raw_span points at the character range of the source sentence (or the
    grounding quote for the LLM backend).
    """

    claim_id: str
    doc_id: str
    key: str
    value: str
    raw_span: tuple[int, int]
    query_relevance: float


@dataclass
class ExtractorBackend:
    """Which extractor runs, plus its backend-specific configuration."""

    kind: str = RULE_BASED
    gateway_config: "gateway.BackendConfig | None" = None
    max_tokens: int = 512


@dataclass
class ExtractionCounters:
    """Bookkeeping for LLM items rejected by the grounding rules."""

    dropped_unquoted: int = 0
    dropped_ungrounded: int = 0


def _load_stopwords() -> frozenset[str]:
    text = resources.files("casc").joinpath("data/stopwords.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


STOPWORDS = _load_stopwords()

# Sentence boundary: run of terminal punctuation followed by whitespace or
# end of text, so decimals like "45.0" never split.
_SENTENCE_END_RE = re.compile(r"[.!?]+(?=\s|$)")

# P1 copular: "the <attribute> of <entity> is <value>"
_P1 = re.compile(r"\bthe\s+(?P<attr>.+?)\s+of\s+(?P<ent>.+?)\s+(?:is|was)\s+(?P<val>.+)$",
                 re.IGNORECASE)
# P2 possessive copular: "<entity>'s <attribute> is <value>"
_P2 = re.compile(r"^(?P<ent>.+?)'s\s+(?P<attr>.+?)\s+(?:is|was)\s+(?P<val>.+)$",
                 re.IGNORECASE)
# P3 reported: "<entity> <attribute> measured/reported at <value>"; the
# entity is a single token so the entity/attribute split is unambiguous.
_P3 = re.compile(r"^(?P<ent>\S+)\s+(?P<attr>.+?)\s+(?:measured|reported)\s+at\s+(?P<val>.+)$",
                 re.IGNORECASE)

_PATTERNS = (_P1, _P2, _P3)


def iter_sentences(text: str):
    """Yield (start, end) spans of sentences, punctuation included."""
    start = 0
    for match in _SENTENCE_END_RE.finditer(text):
        end = match.end()
        yield _trimmed_span(text, start, end)
        start = end
    if text[start:].strip():
        yield _trimmed_span(text, start, len(text))


def _trimmed_span(text: str, start: int, end: int) -> tuple[int, int]:
    while start < end and text[start].isspace():
        start += 1
    while end > start and text[end - 1].isspace():
        end -= 1
    return start, end


def claim_key(entity: str, attribute: str) -> str:
    return f"{normalize_value(entity)}|{normalize_value(attribute)}"


def query_relevance(question_tokens: list[str], key: str) -> float:
    """Jaccard overlap between question tokens and key tokens."""
    q = set(question_tokens)
    k = set(tokenize(key))
    if not q or not k:
        return 0.0
    return len(q & k) / len(q | k)


def _shares_content_token(question_tokens: list[str], key: str) -> bool:
    shared = set(question_tokens) & set(tokenize(key))
    return bool(shared - STOPWORDS)


def is_grounded(value: str, span_text: str) -> bool:
    """True when the value's tokens occur contiguously in the span.

    Both sides go through normalize_value first so numeric surface forms
    ("45.0" vs "45") cannot break grounding.
    """
    needle = tokenize(value)
    hay = tokenize(normalize_value(span_text))
    if not needle:
        return False
    return any(hay[i:i + len(needle)] == needle for i in range(len(hay) - len(needle) + 1))


def _rule_candidates(doc: Document):
    for start, end in iter_sentences(doc.text):
        sentence = doc.text[start:end]
        for pattern in _PATTERNS:
            match = pattern.search(sentence)
            if match:
                key = claim_key(match.group("ent"), match.group("attr"))
                value = normalize_value(match.group("val"))
                if value and "|" in key and all(key.split("|")):
                    yield key, value, (start, end)
                break


def _finalize(candidates, question: QuestionRecord, doc: Document) -> list[Claim]:
    """Apply the relevance filter, order by span start, assign claim ids."""
    q_tokens = tokenize(question.question)
    kept = [
        (key, value, span)
        for key, value, span in candidates
        if _shares_content_token(q_tokens, key)
    ]
    kept.sort(key=lambda item: item[2])
    return [
        Claim(
            claim_id=f"{doc.id}#{i}",
            doc_id=doc.id,
            key=key,
            value=value,
            raw_span=span,
            query_relevance=query_relevance(q_tokens, key),
        )
        for i, (key, value, span) in enumerate(kept)
    ]


def parse_llm_claims(
    raw: str,
    doc: Document,
    counters: ExtractionCounters | None = None,
) -> list[Claim]:
    """Parse the LLM extraction response into grounded claims.

    Expects a JSON array of {key, value, quote} objects somewhere in the
    response. Items whose quote is absent from the document, or whose value
    is not grounded in the quote, are dropped and counted; they never become
    claims. Claim ids here are provisional ("doc#n"); extract() reassigns
    them after filtering.
    """
    counters = counters if counters is not None else ExtractionCounters()
    start = raw.find("[")
    end = raw.rfind("]")
    if start == -1 or end <= start:
        raise UnparseableOutput()
    try:
        items = json.loads(raw[start:end + 1])
    except json.JSONDecodeError as exc:
        raise UnparseableOutput(f"JSON array does not parse: {exc.msg}") from exc
    if not isinstance(items, list):
        raise UnparseableOutput("top-level JSON value is not an array")
    claims = []
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            counters.dropped_unquoted += 1
            continue
        key = item.get("key")
        value = item.get("value")
        quote = item.get("quote")
        if not all(isinstance(x, str) and x for x in (key, value, quote)):
            counters.dropped_unquoted += 1
            continue
        pos = doc.text.find(quote)
        if pos == -1:
            counters.dropped_unquoted += 1
            continue
        norm_value = normalize_value(value)
        if not norm_value or not is_grounded(norm_value, quote):
            counters.dropped_ungrounded += 1
            continue
        norm_key = "|".join(normalize_value(p) for p in key.split("|", 1))
        claims.append(
            Claim(
                claim_id=f"{doc.id}#{i}",
                doc_id=doc.id,
                key=norm_key,
                value=norm_value,
                raw_span=(pos, pos + len(quote)),
                query_relevance=0.0,
            )
        )
    return claims


def extract(
    question: QuestionRecord,
    doc: Document,
    backend: ExtractorBackend,
    counters: ExtractionCounters | None = None,
) -> list[Claim]:
    """Extract query-relevant claims from one document."""
    if backend.kind == RULE_BASED:
        return _finalize(_rule_candidates(doc), question, doc)
    if backend.kind != LLM:
        raise ValueError(f"unknown extractor backend kind: {backend.kind!r}")
    if backend.gateway_config is None:
        raise BackendFailure("llm backend requires a gateway config", doc_id=doc.id)
    request = gateway.build_extract_prompt(question, doc, max_tokens=backend.max_tokens)
    try:
        raw = gateway.complete(request, backend.gateway_config)
        parsed = parse_llm_claims(raw, doc, counters)
    except (GatewayError, UnparseableOutput) as exc:
        raise BackendFailure(str(exc), doc_id=doc.id) from exc
    return _finalize(
        ((c.key, c.value, c.raw_span) for c in parsed), question, doc
    )


def extract_all(
    question: QuestionRecord,
    retrieved,
    corpus: Corpus,
    backend: ExtractorBackend,
    counters: ExtractionCounters | None = None,
) -> list[Claim]:
    """Concatenate per-document extractions in retrieval-rank order."""
    claims: list[Claim] = []
    for ranked in retrieved.docs:
        claims.extend(extract(question, corpus[ranked.doc_id], backend, counters))
    return claims
