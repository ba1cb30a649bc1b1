"""Baseline-vs-KBA benchmark runs, parameter sweeps and KB threshold calibration."""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from ..agent import VARIANTS, KnowledgeAgent
from ..knowledge_base import KbConfig, KnowledgeBase
from ..orchestrator import (
    CostCounters,
    KBAOrchestrator,
    ManualClock,
    Path,
    RouterConfig,
    RoutingDecision,
)
from ..semantic_cache import CacheConfig
from ..transport import NetworkModel
from ..vectors import EmbedderSpec
from .data import TestCase, build_pool, validate_testset
from .metrics import ClassificationMetrics, classification_metrics
from .synthetic import SuiteSpec, generate_suite, paraphrase

MODES = ("baseline", "kba", "oracle")
CACHE_MODES = ("cold", "warm")
SWEEP_PARAMS = ("tau", "theta", "theta_cache", "overlap", "description_variant")


@dataclass
class RunReport:
    mode: str
    cache: str
    decisions: list[RoutingDecision]
    expected: list[str]
    metrics: ClassificationMetrics
    totals: CostCounters
    config: dict = field(default_factory=dict)

    @property
    def accuracy(self) -> float:
        return self.metrics.accuracy

    @property
    def weighted_precision(self) -> float:
        return self.metrics.weighted_precision

    @property
    def weighted_recall(self) -> float:
        return self.metrics.weighted_recall

    @property
    def weighted_f1(self) -> float:
        return self.metrics.weighted_f1

    @property
    def predicted(self) -> list[str]:
        return [d.label for d in self.decisions]

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "cache": self.cache,
            "accuracy": self.accuracy,
            "weighted_precision": self.weighted_precision,
            "weighted_recall": self.weighted_recall,
            "weighted_f1": self.weighted_f1,
            "confusion": {
                "rows": list(self.metrics.labels),
                "columns": list(self.metrics.columns),
                "matrix": self.metrics.confusion.tolist(),
            },
            "totals": self.totals.to_dict(),
            "decisions": [
                {**d.to_dict(), "expected_agent": e} for d, e in zip(self.decisions, self.expected)
            ],
            "config": self.config,
        }


@dataclass
class BenchSettings:
    """Everything a run needs besides the corpus and the test set."""

    router: RouterConfig = RouterConfig()
    kb: KbConfig = KbConfig()
    network: NetworkModel = NetworkModel()
    embedder: EmbedderSpec = EmbedderSpec()
    deadline_ms: int = 1000
    variant: Optional[str] = "basic_generic"
    seed: int = 0

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "BenchSettings":
        """Parse a run config: RouterConfig keys plus ``seed`` and optional sections."""
        if "seed" not in data:
            raise ValueError("config must set 'seed'")
        router_keys = {"tau", "theta_cache", "theta_inv", "resolver"}
        extra = {"seed", "kb", "network", "embedder", "deadline_ms", "variant"}
        unknown = set(data) - router_keys - extra
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        seed = int(data["seed"])
        network = dict(data.get("network", {}))
        network.setdefault("seed", seed)
        return cls(
            router=RouterConfig.from_dict({k: v for k, v in data.items() if k in router_keys}),
            kb=KbConfig.from_dict(data.get("kb", {})),
            network=NetworkModel.from_dict(network),
            embedder=EmbedderSpec.from_dict(data.get("embedder", {})),
            deadline_ms=int(data.get("deadline_ms", 1000)),
            variant=data.get("variant", "basic_generic"),
            seed=seed,
        )

    def to_dict(self) -> dict:
        return {
            **self.router.to_dict(),
            "seed": self.seed,
            "kb": self.kb.to_dict(),
            "network": self.network.to_dict(),
            "embedder": {"dimension": self.embedder.dimension, "seed": self.embedder.seed},
            "deadline_ms": self.deadline_ms,
            "variant": self.variant,
        }


def make_router(settings: BenchSettings, probing: bool, **kwargs) -> KBAOrchestrator:
    return KBAOrchestrator.from_config(
        settings.router,
        probing=probing,
        deadline_ms=settings.deadline_ms,
        network=settings.network,
        embedder_dimension=settings.embedder.dimension,
        embedder_seed=settings.embedder.seed,
        clock=ManualClock(),
        **kwargs,
    )


def _oracle_decisions(testset: Sequence[TestCase]) -> list[RoutingDecision]:
    return [RoutingDecision(c.question, c.expected_agent, Path.DIRECT) for c in testset]


def run_benchmark(
    pool: Sequence[KnowledgeAgent],
    testset: Sequence[TestCase],
    mode: str = "kba",
    settings: BenchSettings = BenchSettings(),
    cache: str = "cold",
    router: Optional[KBAOrchestrator] = None,
) -> RunReport:
    """Route every question and score the outcome.

    ``cold`` clears the orchestrator and agent caches first; ``warm`` runs
    the suite twice on the same router and reports the second pass.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if cache not in CACHE_MODES:
        raise ValueError(f"cache must be one of {CACHE_MODES}, got {cache!r}")
    agent_ids = [a.agent_id for a in pool]
    validate_testset(testset, agent_ids)

    if mode == "oracle":
        decisions = _oracle_decisions(testset)
    else:
        if router is None:
            router = make_router(settings, probing=(mode == "kba")).fit(pool)
        router.reset_caches()
        passes = 2 if cache == "warm" else 1
        for _ in range(passes):
            decisions = []
            for i, case in enumerate(testset):
                decisions.append(router.route_request(case.question, now=float(i)))

    totals = CostCounters()
    for d in decisions:
        totals += d.cost
    expected = [c.expected_agent for c in testset]
    metrics = classification_metrics(expected, [d.label for d in decisions], labels=agent_ids)
    return RunReport(mode, cache, decisions, expected, metrics, totals, settings.to_dict())


def _clamp_tau(value: float) -> float:
    return min(1.0, max(0.0, float(value)))


def sweep(
    parameter: str,
    values: Sequence[Any],
    settings: BenchSettings,
    corpus: Optional[Mapping[str, Sequence[tuple[str, str]]]] = None,
    testset: Optional[Sequence[TestCase]] = None,
    descriptions: Optional[Mapping[str, Mapping[str, str]]] = None,
    suite_spec: Optional[SuiteSpec] = None,
    modes: Sequence[str] = ("baseline", "kba"),
    cache: str = "cold",
) -> list[dict]:
    """One run per (value, mode) with everything else held fixed.

    ``overlap`` regenerates the synthetic suite from ``suite_spec``; the
    other parameters reuse ``corpus``/``testset``. Returns table rows, each
    carrying its ``RunReport`` under ``"report"``.
    """
    if parameter not in SWEEP_PARAMS:
        raise ValueError(f"parameter must be one of {SWEEP_PARAMS}, got {parameter!r}")
    if len(values) < 2:
        raise ValueError("a sweep needs at least two values")
    if parameter == "overlap":
        if suite_spec is None:
            raise ValueError("an overlap sweep needs a synthetic suite spec")
    elif corpus is None or testset is None:
        raise ValueError("corpus and testset are required")

    rows = []
    for value in values:
        run_settings = settings
        run_corpus, run_testset, run_desc = corpus, testset, descriptions
        if parameter == "tau":
            value = _clamp_tau(value)
            run_settings = replace(settings, router=replace(settings.router, tau=value))
        elif parameter == "theta":
            value = float(value)
            ratio = settings.kb.partial_threshold / settings.kb.ack_threshold
            run_settings = replace(
                settings, kb=replace(settings.kb, ack_threshold=value, partial_threshold=value * ratio)
            )
        elif parameter == "theta_cache":
            value = float(value)
            cache_cfg = replace(settings.router.cache, lookup_threshold=value)
            run_settings = replace(settings, router=replace(settings.router, cache=cache_cfg))
        elif parameter == "description_variant":
            if value not in VARIANTS:
                raise ValueError(f"unknown description variant {value!r}")
            run_settings = replace(settings, variant=value)
        elif parameter == "overlap":
            value = float(value)
            suite = generate_suite(suite_spec.with_overlap(value))
            run_corpus, run_testset, run_desc = suite.corpus, suite.testset, suite.descriptions

        for mode in modes:
            pool = build_pool(
                run_corpus,
                run_desc,
                run_settings.variant if run_desc is not None else None,
                kb_config=run_settings.kb,
                spec=run_settings.embedder,
                cache_config=CacheConfig(lookup_threshold=run_settings.router.cache.lookup_threshold),
            )
            report = run_benchmark(pool, run_testset, mode, run_settings, cache)
            rows.append(
                {
                    "parameter": parameter,
                    "value": value,
                    "mode": mode,
                    "accuracy": report.accuracy,
                    "weighted_precision": report.weighted_precision,
                    "weighted_f1": report.weighted_f1,
                    "probes_sent": report.totals.probes_sent,
                    "classifier_calls": report.totals.classifier_calls,
                    "simulated_tokens": report.totals.simulated_input_tokens
                    + report.totals.simulated_output_tokens,
                    "wall_time_ms": report.totals.wall_time_ms,
                    "report": report,
                }
            )
    return rows


def format_table(rows: Sequence[Mapping[str, Any]]) -> str:
    header = ("value", "mode", "accuracy", "w_precision", "w_f1", "probes", "tokens", "wall_ms")
    lines = ["{:>20} {:>8} {:>9} {:>11} {:>7} {:>7} {:>8} {:>10}".format(*header)]
    for r in rows:
        lines.append(
            "{:>20} {:>8} {:>9.3f} {:>11.3f} {:>7.3f} {:>7d} {:>8d} {:>10.1f}".format(
                str(r["value"]), r["mode"], r["accuracy"], r["weighted_precision"],
                r["weighted_f1"], r["probes_sent"], r["simulated_tokens"], r["wall_time_ms"],
            )
        )
    return "\n".join(lines)


@dataclass(frozen=True)
class Calibration:
    kb: KbConfig
    positives: np.ndarray
    negatives: np.ndarray
    balanced_accuracy: float


def calibrate(
    corpus: Mapping[str, Sequence[tuple[str, str]]],
    seed: int,
    spec: EmbedderSpec = EmbedderSpec(),
    keep: int = 13,
    grid: Optional[Sequence[float]] = None,
    negative_quantile: float = 0.99,
) -> Calibration:
    """Pick (theta, theta_partial) from self-generated paraphrase probes.

    Each document yields one paraphrase. Its owner's top similarity is a
    positive score; the best score over every other agent is a negative one.
    ``theta_partial`` is the first grid point above the chosen quantile of
    negatives; ``theta`` is the grid point above it with the best balanced
    accuracy, preferring the higher value on ties.
    """
    if grid is None:
        grid = [round(0.05 * i, 2) for i in range(1, 20)]
    rng = random.Random(seed)
    kbs = {}
    for agent_id, docs in corpus.items():
        kb = KnowledgeBase(spec)
        kb.ingest(docs)
        kbs[agent_id] = kb
    pos, neg = [], []
    for agent_id, docs in corpus.items():
        for _, text in docs:
            query = paraphrase(text, rng, keep)
            pos.append(kbs[agent_id].search(query, top_k=1).s_star)
            others = [kb.search(query, top_k=1).s_star for a, kb in kbs.items() if a != agent_id]
            if others:
                neg.append(max(others))
    positives, negatives = np.array(pos), np.array(neg)
    cutoff = float(np.quantile(negatives, negative_quantile)) if len(negatives) else 0.0
    above = [g for g in grid if g > cutoff]
    if len(above) < 2:
        raise ValueError("negatives are not separable on the calibration grid")
    partial = above[0]

    def balanced(theta: float) -> float:
        tpr = float(np.mean(positives >= theta)) if len(positives) else 0.0
        tnr = float(np.mean(negatives < theta)) if len(negatives) else 1.0
        return 0.5 * (tpr + tnr)

    best = max(above[1:], key=lambda t: (balanced(t), t))
    return Calibration(KbConfig(best, partial), positives, negatives, balanced(best))
