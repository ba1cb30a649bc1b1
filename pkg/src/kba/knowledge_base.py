"""Per-agent private document store and the acknowledgment rule used by probes."""

from __future__ import annotations

import enum
import json
import threading
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .vectors import EmbedderSpec, embed, similarities


class Verdict(str, enum.Enum):
    """Probe acknowledgment; values are the normative wire spellings."""

    OK = "OK"
    PARTIAL = "PARTIAL"
    KO = "KO"
    NOT_AUTHORIZED = "NOT_AUTHORIZED"

    @property
    def rank(self) -> int:
        return _RANK[self]


_RANK = {Verdict.NOT_AUTHORIZED: 0, Verdict.KO: 0, Verdict.PARTIAL: 1, Verdict.OK: 2}


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    embedding: np.ndarray = field(repr=False, compare=False)


@dataclass(frozen=True)
class KbConfig:
    ack_threshold: float = 0.60
    partial_threshold: float = 0.40
    top_k: int = 5

    def __post_init__(self) -> None:
        if not 0.0 < self.partial_threshold < self.ack_threshold <= 1.0:
            raise ValueError(
                "need 0 < partial_threshold < ack_threshold <= 1, got "
                f"{self.partial_threshold} / {self.ack_threshold}"
            )
        if self.top_k < 1:
            raise ValueError("top_k must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "KbConfig":
        names = {"theta": "ack_threshold", "theta_partial": "partial_threshold", "top_k": "top_k"}
        unknown = set(data) - set(names)
        if unknown:
            raise ValueError(f"unknown KbConfig fields: {sorted(unknown)}")
        return cls(**{names[k]: v for k, v in data.items()})

    def to_dict(self) -> dict:
        return {"theta": self.ack_threshold, "theta_partial": self.partial_threshold, "top_k": self.top_k}


@dataclass(frozen=True)
class RetrievalResult:
    hits: tuple[tuple[str, float], ...]

    @property
    def s_star(self) -> float:
        return self.hits[0][1] if self.hits else -1.0


def rank(query: np.ndarray, ids: Sequence[str], matrix: np.ndarray, k: int) -> RetrievalResult:
    """Top ``k`` rows of ``matrix`` by cosine similarity; ties go to the smaller id."""
    if not len(ids):
        return RetrievalResult(())
    sims = similarities(query, matrix)
    order = sorted(range(len(ids)), key=lambda i: (-sims[i], ids[i]))[:k]
    return RetrievalResult(tuple((ids[i], float(sims[i])) for i in order))


def ack_decision(result: RetrievalResult, cfg: KbConfig) -> Verdict:
    s = result.s_star
    if s >= cfg.ack_threshold:
        return Verdict.OK
    if s >= cfg.partial_threshold:
        return Verdict.PARTIAL
    return Verdict.KO


class KnowledgeBase:
    """Whole-document embedding index searched by brute-force cosine scan."""

    def __init__(self, spec: EmbedderSpec = EmbedderSpec(), config: KbConfig = KbConfig()):
        self.spec = spec
        self.config = config
        self._docs: dict[str, Document] = {}
        self._ids: list[str] = []
        self._matrix = np.empty((0, spec.dimension))
        self._lock = threading.Lock()
        self.search_count = 0

    def __len__(self) -> int:
        return len(self._docs)

    def __iter__(self):
        return iter(self._docs.values())

    def ingest(self, docs: Iterable[tuple[str, str]]) -> int:
        """Add ``(doc_id, text)`` pairs; returns the total document count.

        Re-ingesting an identical pair is a no-op.
        """
        fresh: dict[str, str] = {}
        for doc_id, text in docs:
            existing = self._docs[doc_id].text if doc_id in self._docs else fresh.get(doc_id)
            if existing is None:
                fresh[doc_id] = text
            elif existing != text:
                raise ValueError(f"duplicate doc_id {doc_id!r} with different text")
        for doc_id, text in fresh.items():
            self._docs[doc_id] = Document(doc_id, text, embed(text, self.spec))
        if fresh:
            self._ids = sorted(self._docs)
            self._matrix = np.vstack([self._docs[i].embedding for i in self._ids])
        return len(self._docs)

    def search(self, query: str, top_k: Optional[int] = None) -> RetrievalResult:
        """Top-k documents by cosine similarity, ties broken by doc_id."""
        with self._lock:
            self.search_count += 1
        k = self.config.top_k if top_k is None else top_k
        return rank(embed(query, self.spec), self._ids, self._matrix, k)


def load_corpus(path: str | Path) -> dict[str, list[tuple[str, str]]]:
    """Read corpus JSONL lines ``{"agent", "doc_id", "text"}`` grouped by agent."""
    grouped: dict[str, list[tuple[str, str]]] = defaultdict(list)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            row = json.loads(line)
            missing = {"agent", "doc_id", "text"} - set(row)
            if missing:
                raise ValueError(f"{path}:{lineno}: missing fields {sorted(missing)}")
            grouped[row["agent"]].append((row["doc_id"], row["text"]))
    return dict(grouped)


def dump_corpus(corpus: dict[str, list[tuple[str, str]]]) -> str:
    lines = []
    for agent, docs in corpus.items():
        for doc_id, text in docs:
            lines.append(json.dumps({"agent": agent, "doc_id": doc_id, "text": text}, sort_keys=True))
    return "".join(line + "\n" for line in lines)
