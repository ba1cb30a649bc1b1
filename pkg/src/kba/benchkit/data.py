"""Test-set files and agent-pool assembly."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from ..agent import AgentCard, KnowledgeAgent
from ..knowledge_base import KbConfig, KnowledgeBase, load_corpus
from ..semantic_cache import CacheConfig
from ..vectors import EmbedderSpec


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # not a pytest class

    question: str
    expected_agent: str


def load_testset(path: str | Path) -> list[TestCase]:
    """Read JSONL rows ``{"question", "expected_agent"}``."""
    cases = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            row = json.loads(line)
            try:
                cases.append(TestCase(row["question"], row["expected_agent"]))
            except KeyError as exc:
                raise ValueError(f"{path}:{lineno}: missing field {exc.args[0]!r}") from None
    return cases


def dump_testset(cases: Iterable[TestCase]) -> str:
    return "".join(
        json.dumps({"question": c.question, "expected_agent": c.expected_agent}, sort_keys=True) + "\n"
        for c in cases
    )


def validate_testset(cases: Sequence[TestCase], agent_ids: Iterable[str]) -> None:
    known = set(agent_ids)
    offenders = sorted({c.expected_agent for c in cases} - known)
    if offenders:
        raise ValueError(f"test set references unknown agents: {', '.join(offenders)}")


def load_descriptions(path: str | Path) -> dict[str, dict[str, str]]:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def default_description(agent_id: str) -> str:
    return agent_id.replace("_", " ")


def build_pool(
    corpus: Mapping[str, Sequence[tuple[str, str]]],
    descriptions: Optional[Mapping[str, Mapping[str, str]]] = None,
    variant: Optional[str] = None,
    kb_config: KbConfig = KbConfig(),
    spec: EmbedderSpec = EmbedderSpec(),
    cache_config: CacheConfig = CacheConfig(),
) -> list[KnowledgeAgent]:
    """One ``KnowledgeAgent`` per corpus agent, in corpus order."""
    pool = []
    for agent_id, docs in corpus.items():
        text = None
        if descriptions is not None and agent_id in descriptions:
            options = descriptions[agent_id]
            if variant is None:
                raise ValueError("a description variant is required when descriptions are given")
            if variant not in options:
                raise ValueError(f"agent {agent_id!r} has no {variant!r} description")
            text = options[variant]
        card = AgentCard(
            agent_id,
            text if text is not None else default_description(agent_id),
            variant if text is not None else None,
        )
        agent = KnowledgeAgent(card, KnowledgeBase(spec, kb_config), cache_config=cache_config)
        agent.ingest(docs)
        pool.append(agent)
    return pool


def load_pool(
    corpus_path: str | Path,
    descriptions_path: Optional[str | Path] = None,
    variant: Optional[str] = None,
    **kwargs,
) -> list[KnowledgeAgent]:
    """Load a corpus file; descriptions default to ``descriptions.json`` next to it."""
    corpus_path = Path(corpus_path)
    if descriptions_path is None:
        sibling = corpus_path.with_name("descriptions.json")
        descriptions_path = sibling if sibling.exists() else None
    descriptions = load_descriptions(descriptions_path) if descriptions_path else None
    if descriptions is not None and variant is None:
        variant = "basic_generic"
    return build_pool(load_corpus(corpus_path), descriptions, variant, **kwargs)
