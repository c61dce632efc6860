"""Group claims by key, classify consistent vs conflicting, resolve by policy.

Claims inside a group are held in canonical order (doc_id, value, claim_id)
so the report is invariant under permutation of its input. Exact duplicates
of (doc_id, key, value) are dropped and counted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .corpus import Corpus
from .extraction import Claim

FLAG_ONLY = "flag_only"
MAJORITY = "majority"
RECENCY = "recency"
POLICIES = (FLAG_ONLY, MAJORITY, RECENCY)

CONSISTENT = "Consistent"
CONFLICTING = "Conflicting"


@dataclass
class Resolution:
    chosen_value: str
    policy: str
    winning_doc_ids: list[str]


@dataclass
class ClaimGroup:
    """All deduplicated claims sharing one normalized key."""

    key: str
    claims: list[Claim]
    distinct_values: list[str]
    status: str
    support: int
    resolution: Resolution | None = None
    note: str | None = None

    def doc_ids(self) -> list[str]:
        seen: list[str] = []
        for claim in self.claims:
            if claim.doc_id not in seen:
                seen.append(claim.doc_id)
        return seen

    def max_relevance(self) -> float:
        return max(claim.query_relevance for claim in self.claims)


@dataclass
class ConsistencyReport:
    consistent_groups: list[ClaimGroup] = field(default_factory=list)
    conflict_groups: list[ClaimGroup] = field(default_factory=list)
    dropped_duplicates: int = 0

    def all_groups(self) -> list[ClaimGroup]:
        return sorted(self.consistent_groups + self.conflict_groups, key=lambda g: g.key)


def _distinct_doc_votes(claims: list[Claim]) -> dict[str, set[str]]:
    """value -> set of doc ids asserting it."""
    votes: dict[str, set[str]] = {}
    for claim in claims:
        votes.setdefault(claim.value, set()).add(claim.doc_id)
    return votes


def _resolve_majority(votes: dict[str, set[str]]) -> Resolution | None:
    best = max(len(docs) for docs in votes.values())
    leaders = [value for value, docs in votes.items() if len(docs) == best]
    if len(leaders) != 1:
        return None
    value = leaders[0]
    return Resolution(value, MAJORITY, sorted(votes[value]))


def _resolve_recency(claims: list[Claim], votes: dict[str, set[str]], corpus: Corpus):
    """Returns (resolution, note); falls back to flagging when a timestamp is missing."""
    timestamps = {}
    for claim in claims:
        ts = corpus[claim.doc_id].timestamp if claim.doc_id in corpus else None
        if ts is None:
            return None, "recency unavailable: missing timestamp; flagged only"
        timestamps[claim.doc_id] = ts
    newest = max(timestamps.values())
    newest_values = {c.value for c in claims if timestamps[c.doc_id] == newest}
    if len(newest_values) != 1:
        return None, None
    value = next(iter(newest_values))
    return Resolution(value, RECENCY, sorted(votes[value])), None


def check_resolve(claims: list[Claim], policy: str, corpus: Corpus) -> ConsistencyReport:
    """Partition claims into consistent and conflicting key groups.

    Majority resolves to the value backed by the most distinct documents,
    recency to the value of the most recent document; any tie stays flagged.
    Groups come back sorted by key ascending.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy: {policy!r}")
    report = ConsistencyReport()
    deduped: dict[tuple[str, str, str], Claim] = {}
    for claim in claims:
        ident = (claim.doc_id, claim.key, claim.value)
        if ident in deduped:
            report.dropped_duplicates += 1
        else:
            deduped[ident] = claim

    by_key: dict[str, list[Claim]] = {}
    for claim in deduped.values():
        by_key.setdefault(claim.key, []).append(claim)

    for key in sorted(by_key):
        group_claims = sorted(by_key[key], key=lambda c: (c.doc_id, c.value, c.claim_id))
        votes = _distinct_doc_votes(group_claims)
        distinct_values: list[str] = []
        for claim in group_claims:
            if claim.value not in distinct_values:
                distinct_values.append(claim.value)
        support = max(len(docs) for docs in votes.values())
        status = CONFLICTING if len(distinct_values) >= 2 else CONSISTENT
        group = ClaimGroup(
            key=key,
            claims=group_claims,
            distinct_values=distinct_values,
            status=status,
            support=support,
        )
        if status == CONFLICTING:
            if policy == MAJORITY:
                group.resolution = _resolve_majority(votes)
            elif policy == RECENCY:
                group.resolution, group.note = _resolve_recency(group_claims, votes, corpus)
            report.conflict_groups.append(group)
        else:
            report.consistent_groups.append(group)
    return report


def conflict_summary(report: ConsistencyReport) -> list[tuple[str, list[str], list[str]]]:
    """(key, distinct values, involved doc ids) per conflicting group."""
    return [
        (group.key, list(group.distinct_values), group.doc_ids())
        for group in report.conflict_groups
    ]


# --- JSON round-trip for the CLI and audit logs -----------------------------

def claim_to_dict(claim: Claim) -> dict:
    return {
        "claim_id": claim.claim_id,
        "doc_id": claim.doc_id,
        "key": claim.key,
        "value": claim.value,
        "span": [claim.raw_span[0], claim.raw_span[1]],
        "relevance": claim.query_relevance,
    }


def claim_from_dict(raw: dict) -> Claim:
    return Claim(
        claim_id=raw["claim_id"],
        doc_id=raw["doc_id"],
        key=raw["key"],
        value=raw["value"],
        raw_span=(raw["span"][0], raw["span"][1]),
        query_relevance=raw["relevance"],
    )


def _group_to_dict(group: ClaimGroup) -> dict:
    out = {
        "key": group.key,
        "status": group.status,
        "support": group.support,
        "distinct_values": group.distinct_values,
        "claims": [claim_to_dict(c) for c in group.claims],
    }
    if group.resolution is not None:
        out["resolution"] = {
            "chosen_value": group.resolution.chosen_value,
            "policy": group.resolution.policy,
            "winning_doc_ids": group.resolution.winning_doc_ids,
        }
    if group.note is not None:
        out["note"] = group.note
    return out


def _group_from_dict(raw: dict) -> ClaimGroup:
    resolution = None
    if "resolution" in raw:
        resolution = Resolution(
            chosen_value=raw["resolution"]["chosen_value"],
            policy=raw["resolution"]["policy"],
            winning_doc_ids=list(raw["resolution"]["winning_doc_ids"]),
        )
    return ClaimGroup(
        key=raw["key"],
        claims=[claim_from_dict(c) for c in raw["claims"]],
        distinct_values=list(raw["distinct_values"]),
        status=raw["status"],
        support=raw["support"],
        resolution=resolution,
        note=raw.get("note"),
    )


def report_to_dict(report: ConsistencyReport) -> dict:
    return {
        "consistent_groups": [_group_to_dict(g) for g in report.consistent_groups],
        "conflict_groups": [_group_to_dict(g) for g in report.conflict_groups],
        "dropped_duplicates": report.dropped_duplicates,
    }


def report_from_dict(raw: dict) -> ConsistencyReport:
    return ConsistencyReport(
        consistent_groups=[_group_from_dict(g) for g in raw["consistent_groups"]],
        conflict_groups=[_group_from_dict(g) for g in raw["conflict_groups"]],
        dropped_duplicates=raw["dropped_duplicates"],
    )
