"""Knowledge base-aware orchestration for multi-agent routing."""

from .agent import (
    AclPolicy,
    AgentCard,
    CompositeAgent,
    KnowledgeAgent,
    ProbeRequest,
    ProbeResponse,
    composite_probe,
)
from .knowledge_base import KbConfig, KnowledgeBase, RetrievalResult, Verdict, ack_decision
from .orchestrator import (
    FAIL_LABEL,
    AmbiguityPolicy,
    KBAOrchestrator,
    LexicalClassifier,
    ManualClock,
    Path,
    RouterConfig,
    RoutingDecision,
    classify,
    resolve_ambiguity,
)
from .semantic_cache import (
    CacheConfig,
    InvalidationRequest,
    SemanticCache,
    ThresholdPolicy,
    adapt_threshold,
    invalidation_radius,
)
from .transport import NetworkModel, ProbeTimeout, WireError, decode, encode, parallel_probe
from .vectors import EmbedderSpec, HashingEmbedder, cosine_similarity, embed

__version__ = "0.1.0"

__all__ = [
    "AclPolicy",
    "AgentCard",
    "AmbiguityPolicy",
    "CacheConfig",
    "CompositeAgent",
    "EmbedderSpec",
    "FAIL_LABEL",
    "HashingEmbedder",
    "InvalidationRequest",
    "KBAOrchestrator",
    "KbConfig",
    "KnowledgeAgent",
    "KnowledgeBase",
    "LexicalClassifier",
    "ManualClock",
    "NetworkModel",
    "Path",
    "ProbeRequest",
    "ProbeResponse",
    "ProbeTimeout",
    "RetrievalResult",
    "RouterConfig",
    "RoutingDecision",
    "SemanticCache",
    "ThresholdPolicy",
    "Verdict",
    "WireError",
    "ack_decision",
    "adapt_threshold",
    "classify",
    "composite_probe",
    "cosine_similarity",
    "decode",
    "embed",
    "encode",
    "invalidation_radius",
    "parallel_probe",
    "resolve_ambiguity",
]
