"""Knowledge base-aware router: cache lookup, description scoring, probing.

``KBAOrchestrator`` follows the scikit-learn estimator protocol: ``fit`` takes
the agent pool, ``predict`` maps queries to agent ids (``FAIL_LABEL`` when no
agent is capable) and ``route_request`` exposes the full decision record.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Protocol, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .agent import DEFAULT_DEADLINE_MS, AgentCard, Probeable
from .knowledge_base import Verdict
from .semantic_cache import CacheConfig, InvalidationRequest, SemanticCache
from .transport import NetworkModel, parallel_probe
from .vectors import DEFAULT_DIMENSION, EmbedderSpec, embed, tokenize

FAIL_LABEL = "__fail__"
NO_CAPABLE_AGENT = "No capable agent found."


class AmbiguityPolicy(str, enum.Enum):
    HIGHEST_CONFIDENCE = "highest_confidence"
    INTERACTIVE = "interactive"
    FIRST_LISTED = "first_listed"


class Path(str, enum.Enum):
    CACHE_HIT = "cache_hit"
    DIRECT = "direct"
    PROBED_UNIQUE = "probed_unique"
    PROBED_RESOLVED = "probed_resolved"
    FAILED = "failed"


@dataclass(frozen=True)
class RouterConfig:
    tau: float = 0.7
    cache: CacheConfig = CacheConfig()
    resolver: AmbiguityPolicy = AmbiguityPolicy.HIGHEST_CONFIDENCE

    def __post_init__(self) -> None:
        # tau = 0 is admitted as the "never probe" boundary used by sweeps
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")

    @classmethod
    def from_dict(cls, data: dict) -> "RouterConfig":
        unknown = set(data) - {"tau", "theta_cache", "theta_inv", "resolver"}
        if unknown:
            raise ValueError(f"unknown RouterConfig fields: {sorted(unknown)}")
        defaults = cls()
        return cls(
            tau=float(data.get("tau", defaults.tau)),
            cache=CacheConfig(
                lookup_threshold=float(data.get("theta_cache", defaults.cache.lookup_threshold)),
                invalidation_threshold=float(
                    data.get("theta_inv", defaults.cache.invalidation_threshold)
                ),
            ),
            resolver=AmbiguityPolicy(data.get("resolver", defaults.resolver.value)),
        )

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "theta_cache": self.cache.lookup_threshold,
            "theta_inv": self.cache.invalidation_threshold,
            "resolver": self.resolver.value,
        }


@dataclass
class CostCounters:
    classifier_calls: int = 0
    probes_sent: int = 0
    cache_hits: int = 0
    simulated_input_tokens: int = 0
    simulated_output_tokens: int = 0
    wall_time_ms: float = 0.0

    def __iadd__(self, other: "CostCounters") -> "CostCounters":
        for name, value in asdict(other).items():
            setattr(self, name, getattr(self, name) + value)
        return self

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CostModel:
    """Stand-in prices for the LLM steps; these are simulation constants."""

    classify_latency_ms: float = 250.0
    classify_output_tokens: int = 20
    probe_output_tokens: int = 2


@dataclass(frozen=True)
class ConfidenceReport:
    scores: dict[str, float]
    best: str
    use_probing: bool


@dataclass
class RoutingDecision:
    query: str
    agent_id: Optional[str]
    path: Path
    capable: tuple[str, ...] = ()
    cost: CostCounters = field(default_factory=CostCounters)
    message: Optional[str] = None
    partial_only: bool = False
    resolver_fallback: bool = False
    report: Optional[ConfidenceReport] = None

    @property
    def failed(self) -> bool:
        return self.path is Path.FAILED

    @property
    def label(self) -> str:
        return FAIL_LABEL if self.agent_id is None else self.agent_id

    def to_dict(self) -> dict:
        return {
            "query": self.query,
            "agent_id": self.agent_id,
            "path": self.path.value,
            "capable": list(self.capable),
            "message": self.message,
            "partial_only": self.partial_only,
            "resolver_fallback": self.resolver_fallback,
            "cost": self.cost.to_dict(),
        }


class Classifier(Protocol):
    def confidence_scores(self, query: str, cards: Sequence[AgentCard]) -> dict[str, float]: ...


def _idf(cards: Sequence[AgentCard]) -> tuple[dict[str, float], float]:
    n = len(cards)
    df: dict[str, int] = {}
    for card in cards:
        for tok in set(tokenize(card.description)):
            df[tok] = df.get(tok, 0) + 1
    idf = {tok: math.log((n + 1) / (count + 1)) + 1.0 for tok, count in df.items()}
    return idf, math.log(n + 1) + 1.0


class LexicalClassifier(ClassifierMixin, BaseEstimator):
    """Idf-weighted share of query tokens found in each agent description.

    Tokens absent from every card get the maximal idf, so generic filler in a
    query drags every score down and signals uncertainty.
    """

    def __init__(self):
        pass

    def fit(self, cards: Sequence[AgentCard], y=None):
        if not cards:
            raise ValueError("need at least one agent card")
        self.cards_ = tuple(cards)
        self.classes_ = np.array([c.agent_id for c in self.cards_])
        self.idf_, self.unseen_idf_ = _idf(self.cards_)
        self._card_tokens = [frozenset(tokenize(c.description)) for c in self.cards_]
        return self

    def _scores(self, query: str) -> np.ndarray:
        qtoks = set(tokenize(query))
        if not qtoks:
            return np.zeros(len(self.cards_))
        weights = {t: self.idf_.get(t, self.unseen_idf_) for t in qtoks}
        total = sum(weights.values())
        return np.array(
            [sum(w for t, w in weights.items() if t in toks) / total for toks in self._card_tokens]
        )

    def confidence_scores(self, query: str, cards: Sequence[AgentCard]) -> dict[str, float]:
        if not hasattr(self, "cards_") or self.cards_ != tuple(cards):
            self.fit(cards)
        return dict(zip(self.classes_.tolist(), self._scores(query).tolist()))

    def predict_proba(self, X) -> np.ndarray:
        """Raw per-agent confidence scores (rows need not sum to one)."""
        check_is_fitted(self, "cards_")
        return np.vstack([self._scores(q) for q in X]) if len(X) else np.empty((0, len(self.cards_)))

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "cards_")
        return np.array([_argmax(dict(zip(self.classes_, row))) for row in self.predict_proba(X)], dtype=object)


def _argmax(scores: dict[str, float]) -> str:
    return min(scores, key=lambda a: (-scores[a], a))


def classify(
    query: str, cards: Sequence[AgentCard], tau: float, classifier: Classifier
) -> ConfidenceReport:
    if not cards:
        raise ValueError("classify needs at least one agent card")
    scores = classifier.confidence_scores(query, cards)
    missing = {c.agent_id for c in cards} - set(scores)
    if missing:
        raise ValueError(f"classifier returned no score for {sorted(missing)}")
    best = _argmax(scores)
    return ConfidenceReport(scores, best, scores[best] < tau)


Prompt = Callable[[Sequence[tuple[str, Optional[float]]]], str]


def resolve_ambiguity(
    capable: Sequence[tuple[str, Optional[float]]],
    policy: AmbiguityPolicy = AmbiguityPolicy.HIGHEST_CONFIDENCE,
    prompt: Optional[Prompt] = None,
) -> str:
    """Pick one agent out of several capable ones.

    ``capable`` is in pool order. Missing confidences count as zero. The
    interactive policy needs ``prompt``; callers handle its absence.
    """
    if len(capable) < 2:
        raise ValueError("resolve_ambiguity needs at least two capable agents")
    policy = AmbiguityPolicy(policy)
    if policy is AmbiguityPolicy.FIRST_LISTED:
        return capable[0][0]
    if policy is AmbiguityPolicy.INTERACTIVE:
        if prompt is None:
            raise RuntimeError("interactive resolver requires a prompt channel")
        choice = prompt(capable)
        if choice not in {aid for aid, _ in capable}:
            raise ValueError(f"{choice!r} is not among the capable agents")
        return choice
    return min(capable, key=lambda item: (-(item[1] or 0.0), item[0]))[0]


class ManualClock:
    """Injectable clock for deterministic TTL handling."""

    def __init__(self, start: float = 0.0):
        self.now = start

    def __call__(self) -> float:
        return self.now

    def advance(self, seconds: float) -> None:
        self.now += seconds


def _word_count(text: str) -> int:
    return len(text.split())


class KBAOrchestrator(ClassifierMixin, BaseEstimator):
    """Router escalating from cache to description scoring to probing.

    With ``probing=False`` the router classifies and hands off to the best
    description match; this is the description-driven baseline.
    """

    def __init__(
        self,
        tau: float = 0.7,
        theta_cache: float = 0.90,
        theta_inv: float = 0.90,
        resolver: str = "highest_confidence",
        probing: bool = True,
        deadline_ms: int = DEFAULT_DEADLINE_MS,
        network: Optional[NetworkModel] = None,
        classifier: Optional[Classifier] = None,
        embedder_dimension: int = DEFAULT_DIMENSION,
        embedder_seed: int = 0,
        cost_model: Optional[CostModel] = None,
        prompt: Optional[Prompt] = None,
        clock: Optional[Callable[[], float]] = None,
        requestor_id: str = "orchestrator",
    ):
        self.tau = tau
        self.theta_cache = theta_cache
        self.theta_inv = theta_inv
        self.resolver = resolver
        self.probing = probing
        self.deadline_ms = deadline_ms
        self.network = network
        self.classifier = classifier
        self.embedder_dimension = embedder_dimension
        self.embedder_seed = embedder_seed
        self.cost_model = cost_model
        self.prompt = prompt
        self.clock = clock
        self.requestor_id = requestor_id

    @classmethod
    def from_config(cls, config: RouterConfig, **kwargs) -> "KBAOrchestrator":
        return cls(
            tau=config.tau,
            theta_cache=config.cache.lookup_threshold,
            theta_inv=config.cache.invalidation_threshold,
            resolver=config.resolver.value,
            **kwargs,
        )

    @property
    def config(self) -> RouterConfig:
        return RouterConfig(
            tau=self.tau,
            cache=CacheConfig(
                lookup_threshold=self.theta_cache, invalidation_threshold=self.theta_inv
            ),
            resolver=AmbiguityPolicy(self.resolver),
        )

    @property
    def embedder_spec(self) -> EmbedderSpec:
        return EmbedderSpec(self.embedder_dimension, self.embedder_seed)

    def fit(self, pool: Sequence[Probeable], y=None):
        if not pool:
            raise ValueError("agent pool must be non-empty")
        ids = [a.agent_id for a in pool]
        if len(set(ids)) != len(ids):
            raise ValueError("agent ids must be unique within the pool")
        self.config_ = self.config
        self.agents_ = list(pool)
        self.cards_ = [a.card for a in pool]
        self.classes_ = np.array(ids, dtype=object)
        self.classifier_ = self.classifier if self.classifier is not None else LexicalClassifier()
        self.cache_ = SemanticCache(self.config_.cache)
        self.network_ = self.network if self.network is not None else NetworkModel()
        self.cost_model_ = self.cost_model if self.cost_model is not None else CostModel()
        self.clock_ = self.clock if self.clock is not None else time.monotonic
        self._card_words = sum(_word_count(c.description) for c in self.cards_)
        return self

    def reset_caches(self, agents: bool = True) -> None:
        check_is_fitted(self, "agents_")
        self.cache_.clear()
        if agents:
            for agent in self.agents_:
                agent.reset_cache()

    def invalidate(self, topic: str, threshold: Optional[float] = None, now: Optional[float] = None) -> int:
        """Drop cached routes around ``topic`` (e.g. after a KB update)."""
        check_is_fitted(self, "agents_")
        request = InvalidationRequest.from_text(topic, self.embedder_spec, threshold)
        return self.cache_.invalidate_sphere(request, self.clock_() if now is None else now)

    def _resolve(self, capable: list[tuple[str, Optional[float]]]) -> tuple[str, bool]:
        policy = self.config_.resolver
        if policy is AmbiguityPolicy.INTERACTIVE:
            if self.prompt is None:
                return resolve_ambiguity(capable, AmbiguityPolicy.HIGHEST_CONFIDENCE), True
            try:
                return resolve_ambiguity(capable, policy, self.prompt), False
            except (EOFError, OSError):
                return resolve_ambiguity(capable, AmbiguityPolicy.HIGHEST_CONFIDENCE), True
        return resolve_ambiguity(capable, policy), False

    def route_request(self, query: str, now: Optional[float] = None) -> RoutingDecision:
        check_is_fitted(self, "agents_")
        now = self.clock_() if now is None else now
        cost = CostCounters()
        prices = self.cost_model_
        key = embed(query, self.embedder_spec)

        hit = self.cache_.find_similar(key, now)
        if hit is not None:
            cost.cache_hits += 1
            return RoutingDecision(query, hit.payload, Path.CACHE_HIT, cost=cost)

        report = classify(query, self.cards_, self.config_.tau, self.classifier_)
        cost.classifier_calls += 1
        cost.simulated_input_tokens += self._card_words + _word_count(query)
        cost.simulated_output_tokens += prices.classify_output_tokens
        cost.wall_time_ms += prices.classify_latency_ms

        if not (self.probing and report.use_probing):
            self.cache_.store(key, report.best, now)
            return RoutingDecision(query, report.best, Path.DIRECT, cost=cost, report=report)

        fan = parallel_probe(
            query, self.agents_, self.deadline_ms, self.network_, self.requestor_id, now
        )
        cost.probes_sent += len(self.agents_)
        cost.simulated_input_tokens += len(self.agents_) * _word_count(query)
        cost.simulated_output_tokens += len(fan.answered) * prices.probe_output_tokens
        cost.wall_time_ms += fan.elapsed_ms

        by_verdict: dict[Verdict, list[tuple[str, Optional[float]]]] = {Verdict.OK: [], Verdict.PARTIAL: []}
        for response in fan.answered:
            if response.verdict in by_verdict:
                by_verdict[response.verdict].append((response.agent_id, response.confidence))
        capable = by_verdict[Verdict.OK] or by_verdict[Verdict.PARTIAL]
        partial_only = not by_verdict[Verdict.OK] and bool(capable)
        names = tuple(aid for aid, _ in capable)

        if not capable:
            return RoutingDecision(
                query, None, Path.FAILED, cost=cost, message=NO_CAPABLE_AGENT, report=report
            )
        if len(capable) == 1:
            chosen, path, fallback = capable[0][0], Path.PROBED_UNIQUE, False
        else:
            (chosen, fallback), path = self._resolve(capable), Path.PROBED_RESOLVED
        self.cache_.store(key, chosen, now)
        return RoutingDecision(
            query,
            chosen,
            path,
            capable=names,
            cost=cost,
            partial_only=partial_only,
            resolver_fallback=fallback,
            report=report,
        )

    def route(self, query: str) -> RoutingDecision:
        return self.route_request(query)

    def predict(self, X) -> np.ndarray:
        return np.array([self.route_request(q).label for q in X], dtype=object)

