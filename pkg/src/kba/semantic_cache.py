"""Similarity-keyed cache of routing outcomes with TTL and sphere invalidation.

The same structure backs the orchestrator cache (payload = agent id) and the
agent-side verdict cache (payload = verdict tag). Storage is an exact linear
scan; every public operation runs under one lock, so lookups observe the
cache either entirely before or entirely after an invalidation.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .vectors import EmbedderSpec, cosine_similarity, embed, normalize, similarities

_UNIT_TOL = 1e-9
_IDENTITY_TOL = 1e-9


def _check_unit(vec: np.ndarray, what: str) -> None:
    if abs(float(np.linalg.norm(vec)) - 1.0) > 1e-6:
        raise ValueError(f"{what} must be unit-norm")


@dataclass
class CacheEntry:
    entry_id: int
    embedding: np.ndarray
    payload: str
    stored_at: float
    ttl: Optional[float] = None

    def is_live(self, now: float) -> bool:
        return self.ttl is None or now - self.stored_at < self.ttl

    def to_json(self) -> str:
        return json.dumps(
            {
                "embedding": [float(x) for x in self.embedding],
                "payload": self.payload,
                "stored_at": float(self.stored_at),
                "ttl": None if self.ttl is None else float(self.ttl),
            },
            sort_keys=True,
            separators=(",", ":"),
        )


@dataclass(frozen=True)
class CacheConfig:
    lookup_threshold: float = 0.90
    default_ttl: Optional[float] = None
    invalidation_threshold: float = 0.90

    def __post_init__(self) -> None:
        for name in ("lookup_threshold", "invalidation_threshold"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {value}")
        if self.default_ttl is not None and self.default_ttl <= 0:
            raise ValueError("default_ttl must be positive or None")


@dataclass(frozen=True)
class InvalidationRequest:
    centroid: np.ndarray
    threshold: Optional[float] = None

    def __post_init__(self) -> None:
        _check_unit(self.centroid, "centroid")
        if self.threshold is not None and not 0.0 < self.threshold <= 1.0:
            raise ValueError(f"threshold must lie in (0, 1], got {self.threshold}")

    @classmethod
    def from_text(
        cls, topic: str, spec: EmbedderSpec, threshold: Optional[float] = None
    ) -> "InvalidationRequest":
        """Embed ``topic`` with the same model the cache was filled with."""
        return cls(embed(topic, spec), threshold)


@dataclass(frozen=True)
class CacheHit:
    payload: str
    similarity: float
    entry_id: int


def invalidation_radius(threshold: float) -> float:
    """Euclidean radius of the sphere matching cosine similarity >= ``threshold``.

    For unit vectors ||x - c||^2 = 2 (1 - cos(x, c)), hence r = sqrt(2 (1 - theta)).
    """
    if not -1.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [-1, 1], got {threshold}")
    return math.sqrt(max(0.0, 2.0 * (1.0 - threshold)))


class SemanticCache:
    def __init__(self, config: CacheConfig = CacheConfig()):
        self.config = config
        self._entries: list[CacheEntry] = []
        self._next_id = 0
        self._lock = threading.RLock()

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def entries(self) -> list[CacheEntry]:
        with self._lock:
            return list(self._entries)

    def live_entries(self, now: float) -> list[CacheEntry]:
        with self._lock:
            return [e for e in self._entries if e.is_live(now)]

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()

    def _purge_expired(self, now: float) -> None:
        self._entries = [e for e in self._entries if e.is_live(now)]

    def _matrix(self) -> np.ndarray:
        if not self._entries:
            return np.empty((0, 0))
        return np.vstack([e.embedding for e in self._entries])

    def find_similar(self, query: np.ndarray, now: float) -> Optional[CacheHit]:
        """Best live entry with similarity >= the lookup threshold, or None.

        Ties on similarity go to the most recent ``stored_at``, then to the
        lexicographically smallest payload.
        """
        with self._lock:
            self._purge_expired(now)
            if not self._entries:
                return None
            sims = similarities(query, self._matrix())
            best: Optional[tuple[float, float, str, CacheEntry]] = None
            for entry, sim in zip(self._entries, sims):
                sim = float(sim)
                if sim < self.config.lookup_threshold:
                    continue
                # maximize (sim, stored_at), minimize payload
                key = (sim, entry.stored_at)
                if (
                    best is None
                    or key > best[:2]
                    or (key == best[:2] and entry.payload < best[2])
                ):
                    best = (sim, entry.stored_at, entry.payload, entry)
            if best is None:
                return None
            return CacheHit(best[3].payload, best[0], best[3].entry_id)

    def store(
        self, query: np.ndarray, payload: str, now: float, ttl: Optional[float] = None
    ) -> int:
        """Insert an entry, or refresh the live entry identical to ``query``."""
        _check_unit(query, "cache key embedding")
        if ttl is None:
            ttl = self.config.default_ttl
        with self._lock:
            self._purge_expired(now)
            for entry in self._entries:
                if cosine_similarity(entry.embedding, query) >= 1.0 - _IDENTITY_TOL:
                    entry.payload = payload
                    entry.stored_at = now
                    entry.ttl = ttl
                    return entry.entry_id
            entry_id = self._next_id
            self._next_id += 1
            self._entries.append(CacheEntry(entry_id, query, payload, now, ttl))
            return entry_id

    def invalidate_sphere(self, request: InvalidationRequest, now: float) -> int:
        """Remove every live entry with cosine similarity >= the threshold.

        Returns the number of live entries removed; expired entries are
        purged as a side effect but not counted.
        """
        threshold = (
            request.threshold
            if request.threshold is not None
            else self.config.invalidation_threshold
        )
        with self._lock:
            self._purge_expired(now)
            if not self._entries:
                return 0
            sims = similarities(request.centroid, self._matrix())
            keep = [e for e, s in zip(self._entries, sims) if float(s) < threshold]
            removed = len(self._entries) - len(keep)
            self._entries = keep
            return removed

    def export_jsonl(self) -> str:
        with self._lock:
            return "".join(e.to_json() + "\n" for e in self._entries)

    def import_jsonl(self, lines: Iterable[str]) -> int:
        count = 0
        with self._lock:
            for lineno, line in enumerate(lines, 1):
                if not line.strip():
                    continue
                data = json.loads(line)
                expected = {"embedding", "payload", "stored_at", "ttl"}
                if set(data) != expected:
                    raise ValueError(
                        f"line {lineno}: expected fields {sorted(expected)}, got {sorted(data)}"
                    )
                self._entries.append(
                    CacheEntry(
                        self._next_id,
                        normalize(data["embedding"]),
                        str(data["payload"]),
                        float(data["stored_at"]),
                        None if data["ttl"] is None else float(data["ttl"]),
                    )
                )
                self._next_id += 1
                count += 1
        return count


@dataclass(frozen=True)
class ThresholdPolicy:
    floor: float
    ceiling: float
    step: float = 0.01
    dead_band: float = 0.02

    def __post_init__(self) -> None:
        if not 0.0 < self.floor <= self.ceiling <= 1.0:
            raise ValueError("need 0 < floor <= ceiling <= 1")


PRECISION_CRITICAL = ThresholdPolicy(0.90, 0.95)
GENERAL = ThresholdPolicy(0.80, 0.85)


def adapt_threshold(
    false_positive_rate: float,
    false_negative_rate: float,
    current: float,
    policy: ThresholdPolicy = GENERAL,
) -> float:
    """Nudge a similarity threshold from observed error rates.

    Too many false positives raise the threshold by one step, too many false
    negatives lower it; within the dead band it holds. The result is always
    clamped to the policy band.
    """
    for rate in (false_positive_rate, false_negative_rate):
        if not 0.0 <= rate <= 1.0:
            raise ValueError(f"rates must lie in [0, 1], got {rate}")
    gap = false_positive_rate - false_negative_rate
    if gap > policy.dead_band:
        current += policy.step
    elif -gap > policy.dead_band:
        current -= policy.step
    return min(policy.ceiling, max(policy.floor, current))
