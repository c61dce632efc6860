"""Synthetic corpus/dataset generator with a known answer key.

Plants one attribute-value fact per question across its documents: a base
document states the true value, an optional redundant document repeats it
through a different sentence template, and an optional distractor document
asserts a wrong value for the same key. Wrong values are drawn from a lower
numeric range so they sort ahead of true values and reliably win the
canonical tie-break of readers that see conflicting values as plain facts.
Generation is fully seeded and byte-stable.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .corpus import SOURCE_KINDS
from .extraction import claim_key

ENTITY_ROOTS = (
    "zircon", "cadmi", "ferro", "tungst", "boro", "sili", "gall", "hafni",
    "niob", "tantal", "vanad", "molyb", "chrom", "osmi", "iridi", "platin",
    "rheni", "scand", "yttri", "lanthan",
)
ENTITY_SUFFIXES = ("ite", "ine", "ium", "ate", "ol", "ene", "ide", "one")

ATTRIBUTES = (
    "melting point", "boiling point", "density", "tensile strength",
    "band gap", "refractive index", "critical temperature", "decay constant",
    "thermal conductivity", "hardness rating",
)

# None of these may match the extraction sentence patterns.
FILLER_SENTENCES = (
    "Samples were prepared under an inert argon atmosphere.",
    "Calibration followed standard laboratory practice throughout.",
    "Three independent runs produced closely matching readings.",
    "Instrument drift stayed within acceptable tolerances.",
    "Further replication across laboratories remains desirable.",
    "All glassware was cleaned and dried before each trial.",
    "Environmental conditions were logged during every session.",
    "Uncertainty estimates accompany the archived raw data.",
    "Preparation details appear in the supplementary notes.",
    "Earlier surveys motivated a closer look into this material.",
    "Data handling scripts are archived alongside the readings.",
    "Review comments prompted an expanded methods description.",
)

TITLE_PATTERNS = (
    "Notes on {entity}",
    "Technical report: {entity}",
    "{entity} measurement summary",
    "Survey of {entity} experiments",
)


@dataclass
class FixtureSpec:
    """Knobs for the generator; docs_per_question is an inclusive range."""

    n_questions: int
    docs_per_question: tuple[int, int] = (3, 5)
    redundancy_rate: float = 0.5
    conflict_rate: float = 0.5
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.docs_per_question
        if not (3 <= lo <= hi <= 5):
            raise ValueError("docs_per_question must lie within 3..5")
        for name in ("redundancy_rate", "conflict_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.n_questions < 0:
            raise ValueError("n_questions must be >= 0")

    @classmethod
    def from_dict(cls, raw: dict) -> "FixtureSpec":
        dpq = raw.get("docs_per_question", [3, 5])
        if isinstance(dpq, int):
            dpq = (dpq, dpq)
        else:
            dpq = (dpq[0], dpq[1])
        return cls(
            n_questions=raw["n_questions"],
            docs_per_question=dpq,
            redundancy_rate=raw.get("redundancy_rate", 0.5),
            conflict_rate=raw.get("conflict_rate", 0.5),
            seed=raw.get("seed", 0),
        )


@dataclass
class FixtureBundle:
    corpus_jsonl: str
    dataset_jsonl: str
    answer_key: dict


def _fact_sentence(rng: random.Random, entity: str, attribute: str, value: str) -> str:
    template = rng.randrange(3)
    if template == 0:
        return f"The {attribute} of {entity} is {value}."
    if template == 1:
        return f"{entity.capitalize()}'s {attribute} is {value}."
    return f"{entity.capitalize()} {attribute} measured at {value}."


class _NameMill:
    """Seeded unique single-token entity names."""

    def __init__(self, rng: random.Random):
        self._rng = rng
        self._used: set[str] = set()

    def next(self) -> str:
        while True:
            name = self._rng.choice(ENTITY_ROOTS) + self._rng.choice(ENTITY_SUFFIXES)
            if name in self._used:
                name = f"{name}{self._rng.randrange(2, 100)}"
            if name not in self._used:
                self._used.add(name)
                return name


def _filler_fact(rng: random.Random, names: _NameMill, exclude_attr: str) -> str:
    attrs = [a for a in ATTRIBUTES if a != exclude_attr]
    return _fact_sentence(rng, names.next(), rng.choice(attrs),
                          str(rng.randrange(500, 1000)))


def _doc_text(rng, names, fact: str, exclude_attr: str, n_fillers: int) -> str:
    sentences = [fact]
    for _ in range(n_fillers):
        if rng.random() < 0.3:
            sentences.append(_filler_fact(rng, names, exclude_attr))
        else:
            sentences.append(rng.choice(FILLER_SENTENCES))
    return " ".join(sentences)


def generate_fixture(spec: FixtureSpec) -> FixtureBundle:
    """Deterministically generate corpus, dataset, and answer key."""
    rng = random.Random(spec.seed)
    names = _NameMill(rng)
    corpus_lines: list[str] = []
    dataset_lines: list[str] = []
    key_questions: dict[str, dict] = {}
    doc_counter = 0
    day = 0

    def emit_doc(entity: str, attribute: str, fact: str, n_fillers: int) -> str:
        nonlocal doc_counter, day
        doc_counter += 1
        day += 1
        doc_id = f"d{doc_counter:05d}"
        doc = {
            "id": doc_id,
            "title": rng.choice(TITLE_PATTERNS).format(entity=entity),
            "text": _doc_text(rng, names, fact, attribute, n_fillers),
            "source_kind": rng.choice(SOURCE_KINDS),
            "timestamp": _iso_day(day),
        }
        corpus_lines.append(json.dumps(doc, sort_keys=True, ensure_ascii=False,
                                       separators=(",", ":")))
        return doc_id

    for i in range(spec.n_questions):
        qid = f"q{i:04d}"
        entity = names.next()
        attribute = rng.choice(ATTRIBUTES)
        true_value = str(rng.randrange(500, 1000))
        key = claim_key(entity, attribute)
        n_docs = rng.randint(*spec.docs_per_question)
        plant_redundant = rng.random() < spec.redundancy_rate
        plant_conflict = rng.random() < spec.conflict_rate

        doc_ids = [emit_doc(entity, attribute,
                            _fact_sentence(rng, entity, attribute, true_value),
                            n_fillers=rng.randint(4, 6))]
        entry: dict = {
            "entity": entity,
            "attribute": attribute,
            "key": key,
            "true_value": true_value,
            "base_doc": doc_ids[0],
            "padding_docs": [],
        }
        if plant_redundant:
            doc_ids.append(emit_doc(entity, attribute,
                                    _fact_sentence(rng, entity, attribute, true_value),
                                    n_fillers=rng.randint(2, 4)))
            entry["redundant_doc"] = doc_ids[-1]
        if plant_conflict:
            wrong_value = str(rng.randrange(100, 450))
            doc_ids.append(emit_doc(entity, attribute,
                                    _fact_sentence(rng, entity, attribute, wrong_value),
                                    n_fillers=rng.randint(1, 2)))
            entry["conflict_doc"] = doc_ids[-1]
            entry["wrong_value"] = wrong_value
        while len(doc_ids) < n_docs:
            pad_entity = names.next()
            pad_attrs = [a for a in ATTRIBUTES if a != attribute]
            pad_attr = rng.choice(pad_attrs)
            pad_value = str(rng.randrange(500, 1000))
            doc_ids.append(emit_doc(pad_entity, pad_attr,
                                    _fact_sentence(rng, pad_entity, pad_attr, pad_value),
                                    n_fillers=rng.randint(3, 5)))
            entry["padding_docs"].append(doc_ids[-1])

        record = {
            "id": qid,
            "question": f"What is the {attribute} of {entity}?",
            "answers": [true_value],
            "doc_ids": doc_ids,
            "conflict_keys": [key] if plant_conflict else [],
        }
        dataset_lines.append(json.dumps(record, sort_keys=True, ensure_ascii=False,
                                        separators=(",", ":")))
        key_questions[qid] = entry

    answer_key = {
        "spec": {
            "n_questions": spec.n_questions,
            "docs_per_question": list(spec.docs_per_question),
            "redundancy_rate": spec.redundancy_rate,
            "conflict_rate": spec.conflict_rate,
            "seed": spec.seed,
        },
        "questions": key_questions,
    }
    return FixtureBundle(
        corpus_jsonl="\n".join(corpus_lines) + ("\n" if corpus_lines else ""),
        dataset_jsonl="\n".join(dataset_lines) + ("\n" if dataset_lines else ""),
        answer_key=answer_key,
    )


def _iso_day(day: int) -> str:
    """Sequential UTC dates starting 2021-01-01; keeps timestamps distinct."""
    from datetime import datetime, timedelta, timezone

    ts = datetime(2021, 1, 1, tzinfo=timezone.utc) + timedelta(days=day)
    return ts.isoformat()


def write_fixture(bundle: FixtureBundle, outdir: str | Path) -> dict[str, Path]:
    """Write corpus.jsonl, dataset.jsonl, and answer_key.json into outdir."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {
        "corpus": outdir / "corpus.jsonl",
        "dataset": outdir / "dataset.jsonl",
        "answer_key": outdir / "answer_key.json",
    }
    paths["corpus"].write_text(bundle.corpus_jsonl, encoding="utf-8")
    paths["dataset"].write_text(bundle.dataset_jsonl, encoding="utf-8")
    paths["answer_key"].write_text(
        json.dumps(bundle.answer_key, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )
    return paths
