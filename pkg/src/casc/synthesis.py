"""Render a consistency report into a budgeted, structured context.

Output grammar is fixed: a "VERIFIED FACTS:" section of key-value lines with
provenance and support, then a "CONFLICTS:" section spelling out who says
what, with the resolution or an explicit UNRESOLVED marker. A fixed grammar
keeps faithfulness and the token budget mechanically checkable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .corpus import Corpus, QuestionRecord, tokenize
from .consistency import ClaimGroup, ConsistencyReport, Resolution
from .errors import BudgetTooSmall
from .extraction import Claim
from .retrieval import RetrievedSet

FACTS_HEADER = "VERIFIED FACTS:"
CONFLICTS_HEADER = "CONFLICTS:"


@dataclass
class FactLine:
    key: str
    value: str
    source_doc_ids: list[str]
    support: int

    def render(self) -> str:
        ids = ",".join(self.source_doc_ids)
        return f"- {self.key}: {self.value} [sources: {ids}] (support={self.support})"


@dataclass
class ConflictLine:
    key: str
    per_source: list[tuple[str, str]]  # (doc_id, value), canonical order
    resolution: Resolution | None = None

    def resolution_text(self) -> str:
        if self.resolution is None:
            return "UNRESOLVED"
        return f"resolved to {self.resolution.chosen_value} by {self.resolution.policy}"

    def render(self) -> str:
        accounts = "; ".join(f"{doc} says {value}" for doc, value in self.per_source)
        return f"- {self.key}: {accounts} — {self.resolution_text()}"


@dataclass
class SynthesizedContext:
    """Structured context plus its rendering and exact token count."""

    fact_lines: list[FactLine] = field(default_factory=list)
    conflict_lines: list[ConflictLine] = field(default_factory=list)
    rendered_text: str = ""
    token_count: int = 0
    dropped_fact_count: int = 0
    dropped_conflict_count: int = 0


def _render_sections(facts: list[FactLine], conflicts: list[ConflictLine]) -> str:
    sections: list[str] = []
    if facts:
        sections.append("\n".join([FACTS_HEADER] + [line.render() for line in facts]))
    if conflicts:
        sections.append("\n".join([CONFLICTS_HEADER] + [line.render() for line in conflicts]))
    return "\n\n".join(sections)


def _finish(facts, conflicts, dropped_facts=0, dropped_conflicts=0) -> SynthesizedContext:
    rendered = _render_sections(facts, conflicts)
    return SynthesizedContext(
        fact_lines=facts,
        conflict_lines=conflicts,
        rendered_text=rendered,
        token_count=len(tokenize(rendered)),
        dropped_fact_count=dropped_facts,
        dropped_conflict_count=dropped_conflicts,
    )


def _fact_lines(report: ConsistencyReport) -> list[FactLine]:
    """Consistent groups ordered by (support desc, relevance desc, key asc)."""
    groups = sorted(
        report.consistent_groups,
        key=lambda g: (-g.support, -g.max_relevance(), g.key),
    )
    return [
        FactLine(g.key, g.distinct_values[0], g.doc_ids(), g.support) for g in groups
    ]


def _conflict_lines(report: ConsistencyReport) -> list[ConflictLine]:
    lines = []
    for group in report.conflict_groups:
        per_source = sorted({(c.doc_id, c.value) for c in group.claims})
        lines.append(ConflictLine(group.key, per_source, group.resolution))
    return lines


def synthesize(question: QuestionRecord, report: ConsistencyReport, budget: int) -> SynthesizedContext:
    """Budgeted render: drop lowest-priority fact lines first, conflicts last.

    Conflicts are never dropped while a fact line is still droppable. Raises
    BudgetTooSmall when even the best line plus its header cannot fit.
    """
    if budget < 16:
        raise ValueError(f"token budget must be >= 16, got {budget}")
    facts = _fact_lines(report)
    conflicts = _conflict_lines(report)
    dropped_facts = 0
    dropped_conflicts = 0
    while True:
        context = _finish(facts, conflicts, dropped_facts, dropped_conflicts)
        if context.token_count <= budget:
            return context
        if len(facts) + len(conflicts) <= 1:
            raise BudgetTooSmall(budget, context.token_count)
        if facts:
            facts = facts[:-1]
            dropped_facts += 1
        else:
            conflicts = conflicts[:-1]
            dropped_conflicts += 1


def render_report(question: QuestionRecord, report: ConsistencyReport) -> SynthesizedContext:
    """Unbudgeted grouped render: all fact lines, conflicts appended last."""
    return _finish(_fact_lines(report), _conflict_lines(report))


def render_claim_lines(claims: list[Claim]) -> SynthesizedContext:
    """One fact line per claim, no grouping, no budget.

    Conflicting and redundant values therefore appear as ordinary facts;
    this is the context the extractive reader sees for plain top-k runs.
    """
    facts = [FactLine(c.key, c.value, [c.doc_id], 1) for c in claims]
    return _finish(facts, [])


def render_passthrough(retrieved: RetrievedSet, corpus: Corpus) -> SynthesizedContext:
    """Raw concatenation of retrieved documents, title then text, unbudgeted."""
    parts = []
    for ranked in retrieved.docs:
        doc = corpus[ranked.doc_id]
        parts.append(f"{doc.title}\n{doc.text}")
    rendered = "\n\n".join(parts)
    return SynthesizedContext(
        rendered_text=rendered,
        token_count=len(tokenize(rendered)),
    )


# --- JSON round-trip for the CLI --------------------------------------------

def context_to_dict(context: SynthesizedContext) -> dict:
    return {
        "fact_lines": [
            {"key": f.key, "value": f.value, "sources": f.source_doc_ids, "support": f.support}
            for f in context.fact_lines
        ],
        "conflict_lines": [
            {
                "key": c.key,
                "per_source": [[doc, value] for doc, value in c.per_source],
                "resolution": (
                    None
                    if c.resolution is None
                    else {
                        "chosen_value": c.resolution.chosen_value,
                        "policy": c.resolution.policy,
                        "winning_doc_ids": c.resolution.winning_doc_ids,
                    }
                ),
            }
            for c in context.conflict_lines
        ],
        "rendered_text": context.rendered_text,
        "token_count": context.token_count,
        "dropped_fact_count": context.dropped_fact_count,
        "dropped_conflict_count": context.dropped_conflict_count,
    }


def context_from_dict(raw: dict) -> SynthesizedContext:
    return SynthesizedContext(
        fact_lines=[
            FactLine(f["key"], f["value"], list(f["sources"]), f["support"])
            for f in raw["fact_lines"]
        ],
        conflict_lines=[
            ConflictLine(
                c["key"],
                [(doc, value) for doc, value in c["per_source"]],
                None
                if c["resolution"] is None
                else Resolution(
                    c["resolution"]["chosen_value"],
                    c["resolution"]["policy"],
                    list(c["resolution"]["winning_doc_ids"]),
                ),
            )
            for c in raw["conflict_lines"]
        ],
        rendered_text=raw["rendered_text"],
        token_count=raw["token_count"],
        dropped_fact_count=raw["dropped_fact_count"],
        dropped_conflict_count=raw["dropped_conflict_count"],
    )
