"""Produce the final answer from a question and a synthesized context.

Two readers share the Answer type: an LLM reader going through the gateway,
and an offline extractive reader that can only ever answer with a value
already present in the context, which makes it hallucination-free by
construction and lets the whole pipeline run without any model.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import gateway
from .corpus import QuestionRecord, tokenize
from .errors import CascError
from .synthesis import SynthesizedContext

INSUFFICIENT = "insufficient information"

LLM_READER = "llm"
EXTRACTIVE_READER = "extractive"


@dataclass
class Answer:
    question_id: str
    text: str
    reader_kind: str
    context_token_count: int


def answer_llm(
    question: QuestionRecord,
    context: SynthesizedContext,
    gateway_config: gateway.BackendConfig,
    max_tokens: int = 256,
) -> Answer:
    """Ask the configured chat backend; gateway errors carry the question id."""
    request = gateway.build_reader_prompt(question, context, max_tokens=max_tokens)
    try:
        text = gateway.complete(request, gateway_config)
    except CascError as exc:
        exc.question_id = question.id
        raise
    return Answer(
        question_id=question.id,
        text=text.strip(),
        reader_kind=LLM_READER,
        context_token_count=context.token_count,
    )


def answer_extractive(question: QuestionRecord, context: SynthesizedContext) -> Answer:
    """Pick the context line whose key best overlaps the question.

    Candidates are the fact lines plus resolved conflict lines; unresolved
    conflicts are never answered from. Ties fall through overlap, support,
    key, then value, so the choice is canonical regardless of line order.
    When nothing is answerable the reader admits it.
    """
    q_tokens = set(tokenize(question.question))
    candidates = []
    for line in context.fact_lines:
        candidates.append((line.key, line.value, line.support))
    for line in context.conflict_lines:
        if line.resolution is not None:
            candidates.append(
                (line.key, line.resolution.chosen_value, len(line.resolution.winning_doc_ids))
            )
    if not candidates:
        return Answer(question.id, INSUFFICIENT, EXTRACTIVE_READER, context.token_count)
    key, value, _ = min(
        candidates,
        key=lambda c: (-len(q_tokens & set(tokenize(c[0]))), -c[2], c[0], c[1]),
    )
    return Answer(question.id, value, EXTRACTIVE_READER, context.token_count)
