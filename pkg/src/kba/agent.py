"""Agent runtime answering knowledge probes, plus hierarchical composition."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional, Protocol, Sequence

from .knowledge_base import KbConfig, KnowledgeBase, Verdict, ack_decision
from .semantic_cache import CacheConfig, SemanticCache
from .vectors import embed

LENGTHS = ("basic", "balanced", "detailed")
SOURCES = ("generic", "fine_tuned")
VARIANTS = tuple(f"{length}_{source}" for length, source in itertools.product(LENGTHS, SOURCES))

DEFAULT_DEADLINE_MS = 1000


@dataclass(frozen=True)
class AgentCard:
    agent_id: str
    description: str
    variant: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.agent_id:
            raise ValueError("agent_id must be non-empty")
        if not self.description.strip():
            raise ValueError(f"description of {self.agent_id!r} must be non-empty")
        if self.variant is not None and self.variant not in VARIANTS:
            raise ValueError(f"unknown description variant {self.variant!r}")


@dataclass(frozen=True)
class ProbeRequest:
    query: str
    requestor_id: str
    deadline_ms: int = DEFAULT_DEADLINE_MS

    def __post_init__(self) -> None:
        if self.deadline_ms <= 0:
            raise ValueError("deadline_ms must be positive")


@dataclass(frozen=True)
class ProbeResponse:
    verdict: Verdict
    agent_id: str
    confidence: Optional[float] = None

    def __post_init__(self) -> None:
        if self.verdict is Verdict.NOT_AUTHORIZED and self.confidence is not None:
            raise ValueError("NOT_AUTHORIZED responses carry no confidence")
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must lie in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class AclPolicy:
    allowed: frozenset[str] = frozenset()
    allow_all: bool = True

    @classmethod
    def only(cls, requestors: Iterable[str]) -> "AclPolicy":
        return cls(frozenset(requestors), allow_all=False)

    def is_authorized(self, requestor_id: str) -> bool:
        return self.allow_all or requestor_id in self.allowed


class Probeable(Protocol):
    agent_id: str

    def handle_probe(self, req: ProbeRequest, now: float = 0.0) -> ProbeResponse: ...

    def reset_cache(self) -> None: ...


class KnowledgeAgent:
    """Leaf agent: ACL check, verdict cache, KB search, threshold band.

    Only the verdict, a scalar confidence and the agent id ever leave the
    agent; document text never does.
    """

    def __init__(
        self,
        card: AgentCard,
        kb: Optional[KnowledgeBase] = None,
        acl: AclPolicy = AclPolicy(),
        cache_config: CacheConfig = CacheConfig(),
    ):
        self.card = card
        self.kb = kb if kb is not None else KnowledgeBase()
        self.acl = acl
        self.cache = SemanticCache(cache_config)

    @property
    def agent_id(self) -> str:
        return self.card.agent_id

    @property
    def kb_config(self) -> KbConfig:
        return self.kb.config

    def ingest(self, docs: Iterable[tuple[str, str]]) -> int:
        count = self.kb.ingest(docs)
        # cached verdicts may be stale once the KB changes
        self.cache.clear()
        return count

    def reset_cache(self) -> None:
        self.cache.clear()

    def handle_probe(self, req: ProbeRequest, now: float = 0.0) -> ProbeResponse:
        if not self.acl.is_authorized(req.requestor_id):
            return ProbeResponse(Verdict.NOT_AUTHORIZED, self.agent_id)
        key = embed(req.query, self.kb.spec)
        hit = self.cache.find_similar(key, now)
        if hit is not None:
            return ProbeResponse(Verdict(hit.payload), self.agent_id)
        result = self.kb.search(req.query)
        verdict = Verdict.KO if not result.hits else ack_decision(result, self.kb.config)
        self.cache.store(key, verdict.value, now)
        confidence = None if not result.hits else min(1.0, max(0.0, result.s_star))
        return ProbeResponse(verdict, self.agent_id, confidence)


def aggregate(agent_id: str, responses: Sequence[Optional[ProbeResponse]]) -> ProbeResponse:
    """Merge child answers: any OK wins, then any PARTIAL, else KO.

    ``None`` marks a child that timed out. NOT_AUTHORIZED counts as KO. The
    confidence is the max over the children whose verdict matches the merged
    one.
    """
    answered = [
        (r, Verdict.KO if r.verdict is Verdict.NOT_AUTHORIZED else r.verdict)
        for r in responses
        if r is not None
    ]
    if not answered:
        return ProbeResponse(Verdict.KO, agent_id)
    merged = max((v for _, v in answered), key=lambda v: v.rank)
    scores = [r.confidence for r, v in answered if v is merged and r.confidence is not None]
    return ProbeResponse(merged, agent_id, max(scores) if scores else None)


def composite_probe(
    req: ProbeRequest,
    children: Sequence[Probeable],
    network=None,
    now: float = 0.0,
    agent_id: str = "composite",
) -> ProbeResponse:
    """Fan ``req`` out to ``children`` with the same deadline and aggregate."""
    from .transport import NetworkModel, parallel_probe

    if not children:
        raise ValueError("composite_probe needs at least one child")
    outcome = parallel_probe(
        req.query,
        children,
        req.deadline_ms,
        network if network is not None else NetworkModel(),
        requestor_id=req.requestor_id,
        now=now,
    )
    return aggregate(agent_id, [r if isinstance(r, ProbeResponse) else None for r in outcome.responses.values()])


class CompositeAgent:
    """Parent node that answers probes on behalf of its sub-agents."""

    def __init__(
        self,
        card: AgentCard,
        children: Sequence[Probeable],
        network=None,
        acl: AclPolicy = AclPolicy(),
    ):
        if not children:
            raise ValueError("a composite agent needs at least one child")
        self.card = card
        self.children = list(children)
        self.network = network
        self.acl = acl

    @property
    def agent_id(self) -> str:
        return self.card.agent_id

    def handle_probe(self, req: ProbeRequest, now: float = 0.0) -> ProbeResponse:
        if not self.acl.is_authorized(req.requestor_id):
            return ProbeResponse(Verdict.NOT_AUTHORIZED, self.agent_id)
        return composite_probe(req, self.children, self.network, now, self.agent_id)

    def reset_cache(self) -> None:
        for child in self.children:
            child.reset_cache()
