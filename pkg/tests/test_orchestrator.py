import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from scenarios import FixedAgent, FixedClassifier, route_scenarios, route_table, run_route_scenario
from kba.agent import AgentCard
from kba.orchestrator import (
    FAIL_LABEL,
    NO_CAPABLE_AGENT,
    AmbiguityPolicy,
    CostModel,
    KBAOrchestrator,
    LexicalClassifier,
    ManualClock,
    Path,
    RouterConfig,
    classify,
    resolve_ambiguity,
)
from kba.transport import NetworkModel

HR = AgentCard("hr_agent", "payroll benefits parental leave")
IT = AgentCard("it_agent", "network vpn printer laptop")


def router_for(agents, **kw):
    kw.setdefault("network", NetworkModel.zero_latency())
    return KBAOrchestrator(**kw).fit(agents)


def test_disjoint_vocabulary_scores():
    report = classify("parental leave", [HR, IT], 0.7, LexicalClassifier())
    assert report.scores == {"hr_agent": 1.0, "it_agent": 0.0}
    assert report.best == "hr_agent" and not report.use_probing


def test_unknown_vocabulary_requests_probing():
    report = classify("quarterly revenue forecast", [HR, IT], 0.7, LexicalClassifier())
    assert set(report.scores.values()) == {0.0}
    assert report.use_probing


def test_identical_descriptions_tie_break_on_id():
    cards = [AgentCard("b_agent", "same words"), AgentCard("a_agent", "same words")]
    report = classify("same words", cards, 0.7, LexicalClassifier())
    assert report.best == "a_agent"


def test_unseen_tokens_dilute_confidence():
    clf = LexicalClassifier()
    full = clf.confidence_scores("vpn", [HR, IT])["it_agent"]
    diluted = clf.confidence_scores("vpn please help", [HR, IT])["it_agent"]
    assert full == 1.0 and 0.0 < diluted < full


def test_lexical_classifier_estimator_api():
    clf = LexicalClassifier().fit([HR, IT])
    assert list(clf.predict(["vpn laptop", "payroll"])) == ["it_agent", "hr_agent"]
    assert clf.predict_proba(["vpn"]).shape == (1, 2)


def test_classify_rejects_incomplete_scores():
    with pytest.raises(ValueError):
        classify("q", [HR, IT], 0.7, FixedClassifier({"hr_agent": 0.9}))
    with pytest.raises(ValueError):
        classify("q", [], 0.7, LexicalClassifier())


@pytest.mark.parametrize(
    "capable, policy, expected",
    [
        ([("a", 0.6), ("b", 0.9)], "highest_confidence", "b"),
        ([("b", 0.7), ("a", 0.7)], "highest_confidence", "a"),
        ([("a", None), ("b", 0.1)], "highest_confidence", "b"),
        ([("b", 0.1), ("a", 0.9)], "first_listed", "b"),
    ],
)
def test_resolve_ambiguity(capable, policy, expected):
    assert resolve_ambiguity(capable, policy) == expected


def test_resolve_ambiguity_interactive():
    assert resolve_ambiguity([("a", 0.9), ("b", 0.1)], "interactive", lambda c: "b") == "b"
    with pytest.raises(ValueError):
        resolve_ambiguity([("a", 0.9), ("b", 0.1)], "interactive", lambda c: "zzz")
    with pytest.raises(RuntimeError):
        resolve_ambiguity([("a", 0.9), ("b", 0.1)], "interactive")
    with pytest.raises(ValueError):
        resolve_ambiguity([("a", 0.9)], "highest_confidence")


def _two_ok():
    return [FixedAgent("a0", "OK", 0.4), FixedAgent("a1", "OK", 0.8)]


def test_interactive_prompt_choice_is_used_and_cached():
    chosen = []
    router = router_for(
        _two_ok(), resolver="interactive", prompt=lambda c: chosen.append(c) or "a0",
        classifier=FixedClassifier({"a0": 0.1, "a1": 0.1}),
    )
    decision = router.route_request("which agent", now=0.0)
    assert (decision.agent_id, decision.path, decision.resolver_fallback) == ("a0", Path.PROBED_RESOLVED, False)
    assert chosen == [[("a0", 0.4), ("a1", 0.8)]]
    assert router.route_request("which agent", now=1.0).agent_id == "a0"


@pytest.mark.parametrize("prompt", [None, "eof", "oserror"])
def test_interactive_falls_back_to_highest_confidence(prompt):
    def failing(_):
        raise EOFError if prompt == "eof" else OSError("no tty")

    router = router_for(
        _two_ok(), resolver="interactive", prompt=None if prompt is None else failing,
        classifier=FixedClassifier({"a0": 0.1, "a1": 0.1}),
    )
    decision = router.route_request("which agent", now=0.0)
    assert decision.agent_id == "a1" and decision.resolver_fallback


SCENARIOS = route_scenarios()


def test_scenario_space_size():
    assert len(SCENARIOS) == 600


@pytest.mark.parametrize("scenario", SCENARIOS, ids=str)
def test_route_request_matches_decision_table(scenario):
    assert run_route_scenario(scenario) == route_table(scenario)


def test_failed_route_carries_message_and_is_not_cached():
    agents = [FixedAgent("a0", "KO", 0.1), FixedAgent("a1", "NOT_AUTHORIZED", 0.0)]
    router = router_for(agents, classifier=FixedClassifier({"a0": 0.2, "a1": 0.1}))
    first = router.route_request("who knows", now=0.0)
    assert first.failed and first.message == NO_CAPABLE_AGENT and first.label == FAIL_LABEL
    assert len(router.cache_) == 0
    assert router.route_request("who knows", now=1.0).cost.probes_sent == 2


def test_partial_only_capable_set_is_flagged():
    agents = [FixedAgent("a0", "PARTIAL", 0.45), FixedAgent("a1", "KO", 0.1)]
    decision = router_for(agents, classifier=FixedClassifier({"a0": 0.2, "a1": 0.1})).route_request("q", now=0)
    assert decision.partial_only and decision.path is Path.PROBED_UNIQUE


outcome = st.sampled_from(["OK", "PARTIAL", "KO", "NOT_AUTHORIZED"])


@settings(max_examples=100, deadline=None)
@given(
    st.lists(outcome, min_size=1, max_size=4),
    st.lists(st.floats(0, 1), min_size=4, max_size=4),
    st.floats(0, 1),
    st.text("abcdef ", min_size=1, max_size=20),
)
def test_routing_invariants(outcomes, scores, tau, query):
    agents = [FixedAgent(f"a{i}", o, 0.5) for i, o in enumerate(outcomes)]
    clf = FixedClassifier({f"a{i}": s for i, s in enumerate(scores[: len(agents)])})
    router = router_for(agents, tau=tau, classifier=clf)
    first = router.route_request(query, now=0.0)
    # probing happens exactly when the best score is below tau
    assert (first.cost.probes_sent > 0) == (max(clf.scores.values()) < tau)
    # the cache only ever holds successful routes
    assert all(e.payload in clf.scores for e in router.cache_.entries())
    assert len(router.cache_) == (0 if first.failed else 1)
    second = router.route_request(query, now=1.0)
    if not first.failed:
        assert second.path is Path.CACHE_HIT and second.agent_id == first.agent_id
        assert second.cost.classifier_calls == second.cost.probes_sent == 0


@settings(max_examples=100)
@given(st.lists(st.floats(0.01, 1), min_size=2, max_size=6), st.floats(0.1, 0.99))
def test_argmax_is_scale_invariant(scores, c):
    cards = [AgentCard(f"a{i}", "x") for i in range(len(scores))]
    base = classify("q", cards, 0.5, FixedClassifier({f"a{i}": s for i, s in enumerate(scores)}))
    scaled = classify("q", cards, 0.5 * c, FixedClassifier({f"a{i}": s * c for i, s in enumerate(scores)}))
    assert base.best == scaled.best


def test_tau_zero_never_probes_and_baseline_ignores_tau():
    agents = [FixedAgent("a0", "OK", 0.9), FixedAgent("a1", "KO", 0.1)]
    clf = FixedClassifier({"a0": 0.0, "a1": 0.0})
    assert router_for(agents, tau=0.0, classifier=clf).route_request("q", 0).path is Path.DIRECT
    assert router_for(agents, tau=1.0, classifier=clf, probing=False).route_request("q", 0).path is Path.DIRECT


def test_cost_accounting():
    agents = [FixedAgent("a0", "OK", 0.9), FixedAgent("a1", "KO", 0.1)]
    slow = NetworkModel(base_ms=40.0, jitter_ms=0.0)
    router = router_for(agents, classifier=FixedClassifier({"a0": 0.1, "a1": 0.0}), network=slow)
    cost = router.route_request("three word query", now=0).cost
    words = 2 * 2 + 3  # two "aN description" cards plus the query
    assert cost.classifier_calls == 1 and cost.probes_sent == 2
    assert cost.simulated_input_tokens == words + 2 * 3
    assert cost.simulated_output_tokens == CostModel().classify_output_tokens + 2 * CostModel().probe_output_tokens
    assert cost.wall_time_ms == CostModel().classify_latency_ms + 40.0


def test_invalidate_forces_rerouting():
    agents = [FixedAgent("a0", "OK", 0.9), FixedAgent("a1", "KO", 0.1)]
    router = router_for(agents, classifier=FixedClassifier({"a0": 0.9, "a1": 0.0}))
    router.route_request("reset my vpn token", now=0.0)
    assert router.invalidate("quarterly sales figures", now=1.0) == 0
    assert router.invalidate("reset my vpn token", now=1.0) == 1
    assert router.route_request("reset my vpn token", now=2.0).path is Path.DIRECT


def test_manual_clock_drives_cache_time():
    clock = ManualClock(10.0)
    agents = [FixedAgent("a0", "OK", 0.9)]
    router = router_for(agents, classifier=FixedClassifier({"a0": 0.9}), clock=clock)
    router.route_request("q")
    clock.advance(5.0)
    assert router.route_request("q").path is Path.CACHE_HIT
    assert router.cache_.entries()[0].stored_at == 10.0


def test_sklearn_protocol():
    router = KBAOrchestrator(tau=0.4, resolver="first_listed")
    params = router.get_params()
    assert params["tau"] == 0.4 and params["resolver"] == "first_listed"
    copy = clone(router)
    assert copy.get_params() == params and copy is not router
    agents = [FixedAgent("a0", "OK", 0.9), FixedAgent("a1", "KO", 0.1)]
    fitted = router.set_params(network=NetworkModel.zero_latency()).fit(agents)
    assert list(fitted.classes_) == ["a0", "a1"]
    assert fitted.predict(["a0 description"]).tolist() == ["a0"]
    with pytest.raises(ValueError):
        KBAOrchestrator().fit([])
    with pytest.raises(ValueError):
        KBAOrchestrator().fit([FixedAgent("a", "OK", 0.1), FixedAgent("a", "OK", 0.1)])


def test_router_config_round_trip_and_validation():
    cfg = RouterConfig.from_dict({"tau": 0.5, "theta_cache": 0.95, "resolver": "first_listed"})
    assert RouterConfig.from_dict(cfg.to_dict()) == cfg
    assert KBAOrchestrator.from_config(cfg).config == cfg
    assert cfg.resolver is AmbiguityPolicy.FIRST_LISTED
    with pytest.raises(ValueError):
        RouterConfig.from_dict({"tau": 1.5})
    with pytest.raises(ValueError):
        RouterConfig.from_dict({"theta": 0.5})


def test_decision_to_dict():
    router = router_for([FixedAgent("a0", "OK", 0.9)], classifier=FixedClassifier({"a0": 0.9}))
    d = router.route_request("q", now=0).to_dict()
    assert d["path"] == "direct" and d["agent_id"] == "a0" and d["cost"]["classifier_calls"] == 1
