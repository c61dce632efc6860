"""Pipeline configuration: strict JSON schema with typo-safe key checking.

Unknown keys are rejected outright; a silently absorbed "reteiver" section
would invalidate an experiment with no visible symptom.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .consistency import POLICIES
from .errors import ConfigInvalid, ConfigParse
from .extraction import LLM, RULE_BASED
from .gateway import HTTP, MOCK, BackendConfig

DEFAULT_K = 5
DEFAULT_BUDGET = 405


@dataclass
class RetrieverConfig:
    k: int = DEFAULT_K
    k1: float = 1.2
    b: float = 0.75


@dataclass
class CasConfig:
    backend: str = RULE_BASED
    policy: str = "flag_only"
    token_budget: int = DEFAULT_BUDGET


@dataclass
class ReaderConfig:
    kind: str = "extractive"


@dataclass
class PathsConfig:
    corpus: str = ""
    index: str = ""
    dataset: str = ""
    output: str = ""


@dataclass
class PipelineConfig:
    retriever: RetrieverConfig = field(default_factory=RetrieverConfig)
    cas: CasConfig = field(default_factory=CasConfig)
    reader: ReaderConfig = field(default_factory=ReaderConfig)
    backend: BackendConfig = field(default_factory=BackendConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)


_SCHEMA = {
    "retriever": {"k", "k1", "b"},
    "cas": {"backend", "policy", "token_budget"},
    "reader": {"kind"},
    "backend": {"kind", "base_url", "model", "timeout", "max_retries",
                "max_concurrency", "mock_script"},
    "paths": {"corpus", "index", "dataset", "output"},
}


def _check_keys(section: str, raw: dict, allowed: set[str]) -> None:
    unknown = set(raw) - allowed
    if unknown:
        where = f"{section}." if section else ""
        raise ConfigParse(f"unknown config key: {where}{sorted(unknown)[0]}")


def _expect(raw: dict, section: str, key: str, types, default):
    value = raw.get(key, default)
    if not isinstance(value, types) or isinstance(value, bool):
        raise ConfigInvalid(f"{section}.{key}", f"expected {types}, got {type(value).__name__}")
    return value


def config_from_dict(raw: dict) -> PipelineConfig:
    if not isinstance(raw, dict):
        raise ConfigParse("config root must be a JSON object")
    _check_keys("", raw, set(_SCHEMA))
    for section, keys in _SCHEMA.items():
        sub = raw.get(section, {})
        if not isinstance(sub, dict):
            raise ConfigInvalid(section, "must be an object")
        _check_keys(section, sub, keys)

    ret_raw = raw.get("retriever", {})
    retriever = RetrieverConfig(
        k=_expect(ret_raw, "retriever", "k", int, DEFAULT_K),
        k1=float(_expect(ret_raw, "retriever", "k1", (int, float), 1.2)),
        b=float(_expect(ret_raw, "retriever", "b", (int, float), 0.75)),
    )
    if retriever.k < 1:
        raise ConfigInvalid("retriever.k", "must be >= 1")
    if retriever.k1 <= 0:
        raise ConfigInvalid("retriever.k1", "must be > 0")
    if not 0.0 <= retriever.b <= 1.0:
        raise ConfigInvalid("retriever.b", "must be in [0, 1]")

    cas_raw = raw.get("cas", {})
    cas = CasConfig(
        backend=_expect(cas_raw, "cas", "backend", str, RULE_BASED),
        policy=_expect(cas_raw, "cas", "policy", str, "flag_only"),
        token_budget=_expect(cas_raw, "cas", "token_budget", int, DEFAULT_BUDGET),
    )
    if cas.backend not in (RULE_BASED, LLM):
        raise ConfigInvalid("cas.backend", f"must be '{RULE_BASED}' or '{LLM}'")
    if cas.policy not in POLICIES:
        raise ConfigInvalid("cas.policy", f"must be one of {POLICIES}")
    if cas.token_budget < 16:
        raise ConfigInvalid("cas.token_budget", "must be >= 16")

    reader_raw = raw.get("reader", {})
    reader = ReaderConfig(kind=_expect(reader_raw, "reader", "kind", str, "extractive"))
    if reader.kind not in ("llm", "extractive"):
        raise ConfigInvalid("reader.kind", "must be 'llm' or 'extractive'")

    be_raw = raw.get("backend", {})
    mock_script = be_raw.get("mock_script")
    if mock_script is not None and not isinstance(mock_script, str):
        raise ConfigInvalid("backend.mock_script", "must be a string path")
    try:
        backend = BackendConfig(
            kind=_expect(be_raw, "backend", "kind", str, MOCK),
            base_url=_expect(be_raw, "backend", "base_url", str, ""),
            model=_expect(be_raw, "backend", "model", str, ""),
            timeout=float(_expect(be_raw, "backend", "timeout", (int, float), 30.0)),
            max_retries=_expect(be_raw, "backend", "max_retries", int, 2),
            max_concurrency=_expect(be_raw, "backend", "max_concurrency", int, 4),
            mock_script=mock_script,
        )
    except ValueError as exc:
        raise ConfigInvalid("backend", str(exc)) from exc
    if backend.kind == HTTP and not backend.base_url:
        raise ConfigInvalid("backend.base_url", "required for the http backend")

    paths_raw = raw.get("paths", {})
    paths = PathsConfig(
        corpus=_expect(paths_raw, "paths", "corpus", str, ""),
        index=_expect(paths_raw, "paths", "index", str, ""),
        dataset=_expect(paths_raw, "paths", "dataset", str, ""),
        output=_expect(paths_raw, "paths", "output", str, ""),
    )
    return PipelineConfig(retriever=retriever, cas=cas, reader=reader,
                          backend=backend, paths=paths)


def parse_config(path: str | Path) -> PipelineConfig:
    """Load, validate, and default-fill a JSON config file."""
    path = Path(path)
    if not path.exists():
        raise ConfigParse(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigParse(f"{path}: invalid JSON ({exc.msg})") from exc
    return config_from_dict(raw)
