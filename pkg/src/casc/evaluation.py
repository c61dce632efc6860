"""Answer metrics, hallucination proxy, and the variant evaluation runner.

Answer normalization follows the usual QA convention (case, punctuation,
articles, whitespace). The hallucination proxy flags an answer when its
normalized tokens do not occur contiguously in any retrieved document; it
is a mechanical stand-in for human fact-support judgments and is documented
as such in the README.
"""

from __future__ import annotations

import json
import string
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

from .config import PipelineConfig
from .consistency import FLAG_ONLY, check_resolve
from .corpus import Corpus, Document, QuestionRecord
from .errors import CascError, ConfigError, CorpusError
from .extraction import LLM, ExtractorBackend, extract_all
from .reader import Answer, INSUFFICIENT, answer_extractive, answer_llm
from .retrieval import RetrievedSet, build_index, retrieve_top_k
from .synthesis import (
    SynthesizedContext,
    render_claim_lines,
    render_passthrough,
    render_report,
    synthesize,
)

VARIANTS = ("top1", "top5", "cas_extract_only", "cas_extract_consistency", "cas_full")

# Seam for externally registered context processors (e.g. third-party
# compression baselines): variant name -> builder over the retrieved set.
ContextBuilder = Callable[[QuestionRecord, RetrievedSet, Corpus, PipelineConfig], SynthesizedContext]
EXTRA_VARIANTS: dict[str, ContextBuilder] = {}

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)
_ARTICLES = {"a", "an", "the"}


def normalize_answer(s: str) -> str:
    """Lowercase, drop punctuation, drop articles, collapse whitespace."""
    s = s.lower().translate(_PUNCT_TABLE)
    return " ".join(tok for tok in s.split() if tok not in _ARTICLES)


def exact_match(pred: str, golds: list[str]) -> int:
    """1 iff the normalized prediction equals any normalized gold answer."""
    if not golds:
        raise ValueError("golds must be non-empty")
    norm = normalize_answer(pred)
    return int(any(norm == normalize_answer(g) for g in golds))


def _f1_single(pred_tokens: list[str], gold_tokens: list[str]) -> float:
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    common = Counter(pred_tokens) & Counter(gold_tokens)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def f1_score(pred: str, golds: list[str]) -> float:
    """Best token-level F1 (multiset overlap) over the gold answers."""
    if not golds:
        raise ValueError("golds must be non-empty")
    pred_tokens = normalize_answer(pred).split()
    return max(_f1_single(pred_tokens, normalize_answer(g).split()) for g in golds)


def _contiguous_in(needle: list[str], hay: list[str]) -> bool:
    if not needle:
        return True
    return any(hay[i:i + len(needle)] == needle for i in range(len(hay) - len(needle) + 1))


def hallucination_flag(answer: Answer, retrieved_docs: list[Document]) -> bool:
    """True when no retrieved document supports the answer.

    An explicit refusal is never a hallucination. Support means the
    normalized answer tokens occur contiguously in a document's normalized
    text.
    """
    norm = normalize_answer(answer.text)
    if norm == normalize_answer(INSUFFICIENT):
        return False
    needle = norm.split()
    if not needle:
        return False
    return not any(
        _contiguous_in(needle, normalize_answer(doc.text).split()) for doc in retrieved_docs
    )


@dataclass
class EvalRecord:
    question_id: str
    em: int
    f1: float
    context_tokens: int
    hallucinated: bool
    variant: str


@dataclass
class EvalReport:
    variant: str
    per_question: list[EvalRecord]
    mean_em: float
    mean_f1: float
    mean_context_tokens: float
    hallucination_rate: float


def _aggregate(variant: str, records: list[EvalRecord]) -> EvalReport:
    n = len(records)
    if n == 0:
        return EvalReport(variant, [], 0.0, 0.0, 0.0, 0.0)
    return EvalReport(
        variant=variant,
        per_question=records,
        mean_em=sum(r.em for r in records) / n,
        mean_f1=sum(r.f1 for r in records) / n,
        mean_context_tokens=sum(r.context_tokens for r in records) / n,
        hallucination_rate=sum(r.hallucinated for r in records) / n,
    )


def _extractor_backend(config: PipelineConfig) -> ExtractorBackend:
    if config.cas.backend == LLM:
        return ExtractorBackend(kind=LLM, gateway_config=config.backend)
    return ExtractorBackend()


def _read(question: QuestionRecord, context: SynthesizedContext, config: PipelineConfig) -> Answer:
    if config.reader.kind == "llm":
        return answer_llm(question, context, config.backend)
    return answer_extractive(question, context)


def _evaluate_question(
    variant: str,
    question: QuestionRecord,
    index,
    corpus: Corpus,
    config: PipelineConfig,
    backend: ExtractorBackend,
) -> EvalRecord:
    if variant == "top1":
        k = 1
    elif variant == "top5":
        k = 5
    else:
        k = config.retriever.k
    retrieved = retrieve_top_k(index, question, k, k1=config.retriever.k1, b=config.retriever.b)
    docs = [corpus[r.doc_id] for r in retrieved.docs]

    if variant in ("top1", "top5"):
        context = render_passthrough(retrieved, corpus)
        if config.reader.kind == "llm":
            answer = answer_llm(question, context, config.backend)
        else:
            # The extractive reader cannot consume raw prose: claims are
            # pulled at answer time, ungrouped and unfiltered, so the raw
            # baseline genuinely sees conflicting values. Context-token
            # accounting still reflects the raw passthrough.
            claims = extract_all(question, retrieved, corpus, backend)
            picked = answer_extractive(question, render_claim_lines(claims))
            answer = Answer(question.id, picked.text, picked.reader_kind, context.token_count)
    elif variant == "cas_extract_only":
        claims = extract_all(question, retrieved, corpus, backend)
        context = render_claim_lines(claims)
        answer = _read(question, context, config)
    elif variant == "cas_extract_consistency":
        claims = extract_all(question, retrieved, corpus, backend)
        report = check_resolve(claims, FLAG_ONLY, corpus)
        context = render_report(question, report)
        answer = _read(question, context, config)
    elif variant == "cas_full":
        claims = extract_all(question, retrieved, corpus, backend)
        report = check_resolve(claims, config.cas.policy, corpus)
        context = synthesize(question, report, config.cas.token_budget)
        answer = _read(question, context, config)
    else:
        builder = EXTRA_VARIANTS[variant]
        context = builder(question, retrieved, corpus, config)
        answer = _read(question, context, config)

    return EvalRecord(
        question_id=question.id,
        em=exact_match(answer.text, question.gold_answers),
        f1=f1_score(answer.text, question.gold_answers),
        context_tokens=context.token_count,
        hallucinated=hallucination_flag(answer, docs),
        variant=variant,
    )


def run_variant(
    variant: str,
    config: PipelineConfig,
    dataset: list[QuestionRecord],
    corpus: Corpus,
    jobs: int = 1,
) -> EvalReport:
    """Evaluate one pipeline variant over a dataset.

    Per-question work may run in parallel; records are assembled in
    question-id order so the report bytes never depend on scheduling.
    """
    if variant not in VARIANTS and variant not in EXTRA_VARIANTS:
        raise ConfigError(f"unknown variant: {variant!r}")
    if not dataset:
        return _aggregate(variant, [])
    for question in dataset:
        for doc_id in question.doc_ids:
            if doc_id not in corpus:
                raise CorpusError(
                    f"question {question.id!r} references unknown doc {doc_id!r}"
                )
    index = build_index(corpus)
    backend = _extractor_backend(config)

    def one(question: QuestionRecord) -> EvalRecord:
        try:
            return _evaluate_question(variant, question, index, corpus, config, backend)
        except CascError as exc:
            exc.question_id = question.id
            raise

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(one, dataset))
    else:
        records = [one(q) for q in dataset]
    records.sort(key=lambda r: r.question_id)
    return _aggregate(variant, records)


def run_all_variants(
    config: PipelineConfig,
    dataset: list[QuestionRecord],
    corpus: Corpus,
    jobs: int = 1,
) -> list[EvalReport]:
    return [run_variant(v, config, dataset, corpus, jobs=jobs) for v in VARIANTS]


# --- serialization -----------------------------------------------------------

def report_to_dict(report: EvalReport) -> dict:
    return {
        "variant": report.variant,
        "aggregates": {
            "mean_em": report.mean_em,
            "mean_f1": report.mean_f1,
            "mean_context_tokens": report.mean_context_tokens,
            "hallucination_rate": report.hallucination_rate,
        },
        "records": [
            {
                "question_id": r.question_id,
                "em": r.em,
                "f1": r.f1,
                "context_tokens": r.context_tokens,
                "hallucinated": r.hallucinated,
                "variant": r.variant,
            }
            for r in report.per_question
        ],
    }


def report_to_json(report: EvalReport) -> str:
    return json.dumps(report_to_dict(report), sort_keys=True, ensure_ascii=False, indent=2) + "\n"


CSV_HEADER = "variant,mean_em,mean_f1,mean_context_tokens,hallucination_rate"


def reports_to_csv(reports: list[EvalReport]) -> str:
    lines = [CSV_HEADER]
    for report in reports:
        lines.append(
            f"{report.variant},{report.mean_em:.6f},{report.mean_f1:.6f},"
            f"{report.mean_context_tokens:.6f},{report.hallucination_rate:.6f}"
        )
    return "\n".join(lines) + "\n"
