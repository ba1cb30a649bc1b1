"""Embedding primitives shared by the semantic cache and the knowledge bases.

Embeddings are unit-norm ``numpy`` vectors. The reference embedder is seeded
feature hashing over normalized tokens, so identical text always produces a
bit-identical vector for a given :class:`EmbedderSpec`.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

DEFAULT_DIMENSION = 256

_TOKEN_RE = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercase ``text`` and split it into alphanumeric tokens."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class EmbedderSpec:
    dimension: int = DEFAULT_DIMENSION
    seed: int = 0

    def __post_init__(self) -> None:
        if isinstance(self.dimension, bool) or not isinstance(self.dimension, int) or self.dimension < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.dimension!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed!r}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "EmbedderSpec":
        unknown = set(data) - {"dimension", "seed"}
        if unknown:
            raise ValueError(f"unknown EmbedderSpec fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "EmbedderSpec":
        return cls.from_dict(json.loads(text))


@lru_cache(maxsize=65536)
def _token_slot(token: str, dimension: int, seed: int) -> tuple[int, float]:
    digest = hashlib.blake2b(
        token.encode("utf-8"), digest_size=8, key=seed.to_bytes(8, "little")
    ).digest()
    h = int.from_bytes(digest, "little")
    return (h >> 1) % dimension, (1.0 if h & 1 else -1.0)


def _frozen(vec: np.ndarray) -> np.ndarray:
    vec.flags.writeable = False
    return vec


def basis_vector(dimension: int, index: int = 0) -> np.ndarray:
    vec = np.zeros(dimension, dtype=np.float64)
    vec[index] = 1.0
    return _frozen(vec)


def embed(text: str, spec: EmbedderSpec = EmbedderSpec()) -> np.ndarray:
    """Embed ``text`` as a unit vector of ``spec.dimension`` components.

    Each token's seeded hash picks a component and a sign; the signed counts
    are L2-normalized. Blank text (or a hash accumulation that cancels to
    zero) maps to the first basis vector.
    """
    acc = np.zeros(spec.dimension, dtype=np.float64)
    for token in tokenize(text):
        idx, sign = _token_slot(token, spec.dimension, spec.seed)
        acc[idx] += sign
    norm = np.linalg.norm(acc)
    if norm == 0.0:
        return basis_vector(spec.dimension)
    return _frozen(acc / norm)


def normalize(vec: Sequence[float] | np.ndarray) -> np.ndarray:
    """Return a read-only unit-norm copy of ``vec``."""
    arr = np.array(vec, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError("embedding must be one-dimensional")
    norm = np.linalg.norm(arr)
    if norm == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return _frozen(arr / norm)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product of two unit vectors, clamped to [-1, 1]."""
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    return float(min(1.0, max(-1.0, float(np.dot(a, b)))))


def similarities(query: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Cosine similarity of ``query`` against each row of ``matrix``."""
    if matrix.size == 0:
        return np.empty(0)
    if matrix.shape[1] != query.shape[0]:
        raise ValueError(f"dimension mismatch: {query.shape[0]} vs {matrix.shape[1]}")
    return np.clip(matrix @ query, -1.0, 1.0)


class HashingEmbedder(TransformerMixin, BaseEstimator):
    """Stateless transformer turning an iterable of strings into unit rows."""

    def __init__(self, dimension: int = DEFAULT_DIMENSION, seed: int = 0):
        self.dimension = dimension
        self.seed = seed

    @property
    def spec(self) -> EmbedderSpec:
        return EmbedderSpec(dimension=self.dimension, seed=self.seed)

    def fit(self, X=None, y=None):
        self.spec_ = self.spec
        self.n_features_out_ = self.dimension
        return self

    def transform(self, X) -> np.ndarray:
        if isinstance(X, str):
            raise TypeError("expected an iterable of strings, got a single string")
        spec = self.spec
        rows = [embed(text, spec) for text in X]
        if not rows:
            return np.empty((0, spec.dimension))
        return np.vstack(rows)
