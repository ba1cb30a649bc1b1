"""Seeded synthetic routing suites.

Every agent owns a private core vocabulary of pseudo-words (a handful of
"topic" words are drawn more often than the rest). A controllable fraction of
each document comes from a vocabulary shared by all agents. Questions are
paraphrases of exactly one document, so only the owning agent's KB can answer
them. Agent descriptions come in six variants: three lengths, each written
either from a generic domain template or from the agent's actual documents.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Sequence

from ..agent import LENGTHS, VARIANTS
from ..knowledge_base import dump_corpus
from .data import TestCase, dump_testset

DOMAINS = (
    ("accounting", "accounting"),
    ("hr", "human resources"),
    ("it", "information technology"),
    ("legal", "legal"),
    ("marketing", "marketing"),
    ("research_and_development", "research and development"),
    ("sales", "sales"),
)

QUESTION_TEMPLATES = (
    "how do i",
    "what is the process for",
    "who approves",
    "where can i find",
    "when should i",
    "what are the rules on",
    "how can i request",
)

# padding for descriptions; lengths 3..12 so any window of >= 4 chars can be hit
FILLER = (
    "via", "all", "any", "team", "help", "data", "tasks", "staff", "tools",
    "policy", "assets", "duties", "support", "systems", "records", "requests",
    "guidance", "internal", "questions", "workflows", "approvals", "compliance",
    "procedures", "management", "operational", "maintenance", "requirements",
    "coordination",
)

CHAR_RANGES = {"basic": (120, 125), "balanced": (400, 500), "detailed": (980, 1020)}
GENERIC_TOPICS = {"basic": 2, "balanced": 4, "detailed": 6}
FINE_TUNED_TERMS = {"basic": 4, "balanced": 16, "detailed": 40}

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


@dataclass(frozen=True)
class SuiteSpec:
    agents: int = 7
    docs: int = 20
    questions: int = 20
    overlap: float = 0.0
    seed: int = 0
    doc_tokens: int = 20
    question_tokens: int = 13
    core_vocab: int = 80
    topic_words: int = 6
    shared_vocab: int = 120

    def __post_init__(self) -> None:
        for name in ("agents", "docs", "questions"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 <= self.overlap < 1.0:
            raise ValueError(f"overlap must lie in [0, 1), got {self.overlap}")
        if not 0 < self.question_tokens <= self.doc_tokens:
            raise ValueError("need 0 < question_tokens <= doc_tokens")
        if self.doc_tokens > self.core_vocab or self.topic_words > self.core_vocab:
            raise ValueError("core vocabulary too small for the document size")

    def with_overlap(self, overlap: float) -> "SuiteSpec":
        return replace(self, overlap=overlap)


@dataclass
class Suite:
    spec: SuiteSpec
    corpus: dict[str, list[tuple[str, str]]]
    testset: list[TestCase]
    descriptions: dict[str, dict[str, str]]

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "corpus": out / "corpus.jsonl",
            "testset": out / "testset.jsonl",
            "descriptions": out / "descriptions.json",
            "suite": out / "suite.json",
        }
        paths["corpus"].write_text(dump_corpus(self.corpus), encoding="utf-8")
        paths["testset"].write_text(dump_testset(self.testset), encoding="utf-8")
        paths["descriptions"].write_text(
            json.dumps(self.descriptions, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        paths["suite"].write_text(json.dumps(asdict(self.spec), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return paths


def _reserved() -> set[str]:
    words = set(FILLER)
    for template in QUESTION_TEMPLATES:
        words.update(template.split())
    for name, label in DOMAINS:
        words.update(name.split("_"))
        words.update(label.split())
    words.update("handles topics such as covers it also assists with domain".split())
    return words


def _pseudo_words(rng: random.Random, count: int, taken: set[str]) -> list[str]:
    out = []
    while len(out) < count:
        n = rng.choice((2, 3, 3, 4))
        word = "".join(rng.choice(_CONSONANTS) + rng.choice(_VOWELS) for _ in range(n))
        if word not in taken:
            taken.add(word)
            out.append(word)
    return out


def _weighted_sample(rng: random.Random, items: Sequence[str], weights: Sequence[float], k: int) -> list[str]:
    pool, w = list(items), list(weights)
    chosen = []
    for _ in range(k):
        pick = rng.choices(range(len(pool)), weights=w)[0]
        chosen.append(pool.pop(pick))
        w.pop(pick)
    return chosen


def domain_of(index: int) -> tuple[str, str]:
    if index < len(DOMAINS):
        return DOMAINS[index]
    return f"domain{index}", f"domain {index}"


def paraphrase(text: str, rng: random.Random, keep: int) -> str:
    """Question-like rewrite of ``text``: a template plus a token subset."""
    tokens = text.rstrip(".").split()
    picked = rng.sample(tokens, min(keep, len(tokens)))
    return f"{rng.choice(QUESTION_TEMPLATES)} {' '.join(picked)}?"


def fit_length(prefix: str, items: Sequence[str], bounds: tuple[int, int], rng: random.Random) -> str:
    """Join ``items`` after ``prefix`` and pad with filler to land in ``bounds``."""
    lo, hi = bounds
    items = list(items)

    def body() -> str:
        return prefix + ", ".join(items)

    # final "." takes one char
    while len(body()) > hi - 1 and items:
        items.pop()
    if len(body()) >= lo - 1:
        return body() + "."
    suffix = ". It also assists with"
    # keep room for the suffix plus at least one filler word
    while len(body()) + len(suffix) + 4 > hi - 1 and items:
        items.pop()
    text = body() + suffix
    order = list(FILLER)
    rng.shuffle(order)
    turn = 0
    while len(text) < lo - 1 or text.endswith(suffix):
        room_hi = hi - 1 - len(text)
        room_lo = lo - 1 - len(text)
        for offset in range(len(order)):
            word = order[(turn + offset) % len(order)]
            cost = len(word) + 1
            if cost <= room_hi and (cost >= room_lo or room_hi - cost >= 4):
                text += " " + word
                turn += offset + 1
                break
        else:
            raise RuntimeError(f"cannot pad description into {bounds}")
    return text + "."


def generate_suite(spec: SuiteSpec) -> Suite:
    rng = random.Random(spec.seed)
    taken = _reserved()
    shared = _pseudo_words(rng, spec.shared_vocab, taken) if spec.overlap > 0 else []
    n_shared = round(spec.overlap * spec.doc_tokens)
    corpus: dict[str, list[tuple[str, str]]] = {}
    testset: list[TestCase] = []
    descriptions: dict[str, dict[str, str]] = {}

    for i in range(spec.agents):
        name, label = domain_of(i)
        agent_id = f"{name}_agent"
        core = _pseudo_words(rng, spec.core_vocab, taken)
        topics = core[: spec.topic_words]
        weights = [4.0 if w in topics else 1.0 for w in core]
        docs = []
        for j in range(spec.docs):
            tokens = _weighted_sample(rng, core, weights, spec.doc_tokens - n_shared)
            tokens += rng.sample(shared, n_shared)
            rng.shuffle(tokens)
            docs.append((f"{name}-{j:03d}", " ".join(tokens) + "."))
        corpus[agent_id] = docs
        for q in range(spec.questions):
            _, text = docs[q % spec.docs]
            testset.append(TestCase(paraphrase(text, rng, spec.question_tokens), agent_id))

        counts = Counter(tok for _, text in docs for tok in text.rstrip(".").split())
        frequent = sorted(counts, key=lambda t: (-counts[t], t))
        variants = {}
        for length in LENGTHS:
            bounds = CHAR_RANGES[length]
            variants[f"{length}_generic"] = fit_length(
                f"Handles {label} topics such as ", topics[: GENERIC_TOPICS[length]], bounds, rng
            )
            variants[f"{length}_fine_tuned"] = fit_length(
                "Covers ", frequent[: FINE_TUNED_TERMS[length]], bounds, rng
            )
        descriptions[agent_id] = {v: variants[v] for v in VARIANTS}
    return Suite(spec, corpus, testset, descriptions)
