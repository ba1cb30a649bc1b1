"""Acceptance criteria, one test each.

Every test prints a ``PASS``/``FAIL`` line with its runtime against the
budget; run with ``pytest tests/test_acceptance.py`` (output is shown
even without ``-s``).
"""

import json
import random
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from conftest import random_unit
from scenarios import agent_scenarios, agent_table, route_scenarios, route_table, run_agent_scenario, run_route_scenario
from kba.agent import AclPolicy, AgentCard, KnowledgeAgent, ProbeRequest
from kba.benchkit import BenchSettings, SuiteSpec, build_pool, generate_suite, run_benchmark
from kba.benchkit.harness import make_router
from kba.knowledge_base import KnowledgeBase
from kba.semantic_cache import CacheConfig, InvalidationRequest, SemanticCache, invalidation_radius
from kba.transport import WireError, decode, encode
from kba.vectors import cosine_similarity

GOLDEN = Path(__file__).parent / "golden"
DOMINANCE_SEED = 7
SUITE_SEED = 3


@pytest.fixture
def criterion(capsys):
    @contextmanager
    def run(name, budget_s):
        start = time.perf_counter()
        ok = False
        try:
            yield
            ok = True
        finally:
            elapsed = time.perf_counter() - start
            passed = ok and elapsed < budget_s
            with capsys.disabled():
                print(f"\n{'PASS' if passed else 'FAIL'} {name} ({elapsed:.2f}s / {budget_s:.0f}s budget)")
        assert elapsed < budget_s, f"{name} took {elapsed:.2f}s (budget {budget_s}s)"

    return run


def test_algorithm_conformance(criterion):
    with criterion("algorithm conformance", 5):
        routes, agents = route_scenarios(), agent_scenarios()
        assert len(routes) >= 48 and len(agents) >= 12
        bad_routes = [s for s in routes if run_route_scenario(s) != route_table(s)]
        bad_agents = [s for s in agents if run_agent_scenario(*s) != agent_table(*s)]
        assert not bad_routes and not bad_agents, (bad_routes[:3], bad_agents[:3])


def test_sphere_cosine_identity(criterion):
    with criterion("sphere/cosine identity", 5):
        rng = np.random.default_rng(2024)
        n, d = 10_000, 16
        a = random_unit(rng, n, d)
        b = random_unit(rng, n, d)
        # half the pairs are pulled close to each other so every threshold sees both sides
        near = rng.random(n) < 0.5
        b[near] = a[near] + rng.uniform(0.0, 0.6, size=(near.sum(), 1)) * b[near]
        b /= np.linalg.norm(b, axis=1, keepdims=True)
        b[:50] = a[:50]  # identical pairs for theta = 1
        sims = np.array([cosine_similarity(x, y) for x, y in zip(a, b)])
        dists = np.linalg.norm(a - b, axis=1)
        disagreements = 0
        for theta in (0.5, 0.8, 0.9, 0.95, 1.0):
            r = invalidation_radius(theta)
            in_ball = dists <= r
            in_cone = sims >= theta
            # pairs within 1e-9 of either boundary are excused
            boundary = (np.abs(dists - r) <= 1e-9) | (np.abs(sims - theta) <= 1e-9)
            disagreements += int(np.sum((in_ball != in_cone) & ~boundary))
            assert in_cone.any() and (~in_cone).any() or theta == 1.0
        assert disagreements == 0


def test_invalidation_completeness(criterion):
    with criterion("invalidation completeness", 10):
        rng = np.random.default_rng(77)
        thetas = (0.5, 0.7, 0.8, 0.9, 0.95, 1.0)
        states = 1000
        for _ in range(states):
            d = 8
            k = int(rng.integers(1, 25))
            centroid = random_unit(rng, 1, d)[0]
            spread = rng.uniform(0.0, 1.5, size=(k, 1))
            keys = centroid + spread * random_unit(rng, k, d)
            keys /= np.linalg.norm(keys, axis=1, keepdims=True)
            stored = rng.uniform(0, 10, size=k)
            ttls = [None if rng.random() < 0.5 else float(rng.uniform(1, 20)) for _ in range(k)]
            now = 10.0
            removed = []
            for theta in thetas:
                cache = SemanticCache(CacheConfig())
                for key, at, ttl in zip(keys, stored, ttls):
                    cache.store(key, "agent", float(at), ttl)
                removed.append(cache.invalidate_sphere(InvalidationRequest(centroid, theta), now))
                leftovers = [
                    e for e in cache.live_entries(now) if cosine_similarity(e.embedding, centroid) >= theta
                ]
                assert not leftovers
            assert all(x >= y for x, y in zip(removed, removed[1:])), removed


def test_idempotent_warm_routing(criterion):
    with criterion("idempotent warm routing", 30):
        suite = generate_suite(SuiteSpec(agents=7, docs=20, questions=20, overlap=0.3, seed=SUITE_SEED))
        pool = build_pool(suite.corpus, suite.descriptions, "basic_generic")
        router = make_router(BenchSettings(seed=SUITE_SEED), probing=True).fit(pool)
        first = [router.route_request(c.question, now=float(i)) for i, c in enumerate(suite.testset)]
        second = [router.route_request(c.question, now=float(i)) for i, c in enumerate(suite.testset)]
        assert len(second) == 140
        assert sum(d.cost.probes_sent for d in second) == 0
        assert sum(d.cost.classifier_calls for d in second) == 0
        assert [d.label for d in first] == [d.label for d in second]


def test_kba_dominance(criterion):
    with criterion("KBA dominance", 60):
        suite = generate_suite(SuiteSpec(overlap=0.3, seed=DOMINANCE_SEED))
        settings = BenchSettings(seed=DOMINANCE_SEED)
        acc = {}
        for variant in ("basic_generic", "detailed_fine_tuned"):
            pool = build_pool(suite.corpus, suite.descriptions, variant)
            for mode in ("baseline", "kba"):
                acc[variant, mode] = run_benchmark(pool, suite.testset, mode, settings, "cold").accuracy
        assert acc["basic_generic", "kba"] == 1.0, acc
        assert acc["basic_generic", "baseline"] <= 0.8, acc
        assert acc["detailed_fine_tuned", "baseline"] > acc["basic_generic", "baseline"], acc
        assert abs(acc["detailed_fine_tuned", "kba"] - acc["basic_generic", "kba"]) <= 0.05, acc


def test_cost_direction(criterion):
    with criterion("cost direction", 30):
        suite = generate_suite(SuiteSpec(overlap=0.3, seed=SUITE_SEED))
        pool = build_pool(suite.corpus, suite.descriptions, "basic_generic")
        settings = BenchSettings(seed=SUITE_SEED)
        base = run_benchmark(pool, suite.testset, "baseline", settings, "cold").totals
        kba = run_benchmark(pool, suite.testset, "kba", settings, "cold").totals
        warm = run_benchmark(pool, suite.testset, "kba", settings, "warm").totals
        assert kba.probes_sent >= 1
        assert kba.probes_sent > base.probes_sent
        assert (kba.simulated_input_tokens + kba.simulated_output_tokens) > (
            base.simulated_input_tokens + base.simulated_output_tokens
        )
        assert kba.wall_time_ms > base.wall_time_ms
        assert warm.probes_sent == 0


def test_privacy(criterion):
    with criterion("privacy", 10):
        suite = generate_suite(SuiteSpec(overlap=0.3, seed=SUITE_SEED))
        docs = [text for d in suite.corpus.values() for _, text in d]
        windows = {t[i : i + 12] for t in docs for i in range(len(t) - 11)}
        agents = []
        for i, (agent_id, agent_docs) in enumerate(suite.corpus.items()):
            acl = AclPolicy() if i % 2 == 0 else AclPolicy.only({"orchestrator"})
            agent = KnowledgeAgent(AgentCard(agent_id, agent_id), KnowledgeBase(), acl)
            agent.ingest(agent_docs)
            agents.append(agent)
        rng = random.Random(5)
        probes = 0
        for _ in range(150):
            text = rng.choice(docs)
            query = rng.choice([text, text[: rng.randint(12, len(text))], " ".join(rng.sample(text.split(), 8))])
            requestor = rng.choice(["orchestrator", "stranger"])
            for agent in agents:
                payload = encode(agent.handle_probe(ProbeRequest(query, requestor))).decode("utf-8")
                probes += 1
                assert not any(payload[i : i + 12] in windows for i in range(len(payload) - 11))
        assert probes >= 1000


def test_wire_golden_files(criterion):
    with criterion("wire golden files", 1):
        golden = sorted(GOLDEN.glob("*.json"))
        assert len(golden) >= 5
        for path in golden:
            data = path.read_bytes()
            assert encode(decode(data)) == data, path.name
        manifest = json.loads((GOLDEN / "malformed" / "manifest.json").read_text())
        assert len(manifest) >= 10
        for name, field in manifest.items():
            with pytest.raises(WireError) as info:
                decode((GOLDEN / "malformed" / name).read_bytes())
            assert info.value.field == field, name
