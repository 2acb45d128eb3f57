"""Pluggable step-similarity providers and embedding-store utilities.

Every provider maps a pair of texts to a similarity in [0, 1], is symmetric,
and scores identical texts 1.0.
"""

from __future__ import annotations

import abc
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import ClassVar

import numpy as np

from .core import ValidationError
from .textnorm import normalize_text, tokenize

logger = logging.getLogger(__name__)

EMBEDDING_FORMATS = ("word_text", "step_jsonl")


class SimilarityProvider(abc.ABC):
    """Interface consumed by the metric and graph-construction code."""

    kind: ClassVar[str]

    @abc.abstractmethod
    def similarity(self, a: str, b: str) -> float:
        raise NotImplementedError


class TokenSimilarity(SimilarityProvider):
    """Cosine of term-frequency vectors over tokenize(text)."""

    kind = "token"

    def __init__(self) -> None:
        self._cache: dict[str, tuple[Counter, float]] = {}

    def _profile(self, text: str) -> tuple[Counter, float]:
        hit = self._cache.get(text)
        if hit is None:
            counts = Counter(tokenize(text))
            sq_norm = float(sum(c * c for c in counts.values()))
            hit = (counts, sq_norm)
            self._cache[text] = hit
        return hit

    def similarity(self, a: str, b: str) -> float:
        if a == b:
            return 1.0
        ca, na = self._profile(a)
        cb, nb = self._profile(b)
        if na == 0.0 or nb == 0.0:
            return 0.0
        if len(cb) < len(ca):
            ca, cb = cb, ca
        dot = float(sum(count * cb[token] for token, count in ca.items() if token in cb))
        value = dot / math.sqrt(na * nb)
        return min(max(value, 0.0), 1.0)


class ExactMatchSimilarity(SimilarityProvider):
    """1.0 for texts equal after normalization, else 0.0. Mostly useful for
    fixtures and debugging alignment behavior."""

    kind = "exact"

    def similarity(self, a: str, b: str) -> float:
        if a == b:
            return 1.0
        return 1.0 if normalize_text(a) == normalize_text(b) else 0.0


@dataclass(frozen=True)
class EmbeddingStore:
    """Precomputed vectors keyed by exact text."""

    dimension: int
    vectors: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ValidationError(f"embedding dimension must be positive, got {self.dimension}")
        for key, vec in self.vectors.items():
            if vec.shape != (self.dimension,):
                raise ValidationError(
                    f"vector for {key!r} has dimension {vec.shape[0]}, expected {self.dimension}"
                )
            if not np.all(np.isfinite(vec)):
                raise ValidationError(f"vector for {key!r} contains NaN or infinity")

    def __contains__(self, key: str) -> bool:
        return key in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)


def load_embeddings(path: str | Path, format: str = "step_jsonl") -> EmbeddingStore:
    """Read an embedding file.

    'word_text' is one whitespace-separated record per line: a token followed
    by its components. 'step_jsonl' is one JSON object per line with 'text'
    and 'vector' fields. Duplicate keys keep the last value, with a warning.
    """
    if format not in EMBEDDING_FORMATS:
        raise ValidationError(f"unknown embedding format {format!r}, expected one of {EMBEDDING_FORMATS}")
    vectors: dict[str, np.ndarray] = {}
    dimension: int | None = None

    def _add(key: str, values: list[float], line_no: int) -> None:
        nonlocal dimension
        if dimension is None:
            if not values:
                raise ValidationError("vector has no components", line=line_no)
            dimension = len(values)
        if len(values) != dimension:
            raise ValidationError(
                f"vector for {key!r} has {len(values)} components, expected {dimension}",
                line=line_no,
            )
        if key in vectors:
            logger.warning("duplicate embedding key %r at line %d, keeping the last value", key, line_no)
        vec = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(vec)):
            raise ValidationError(f"vector for {key!r} contains NaN or infinity", line=line_no)
        vectors[key] = vec

    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            if format == "word_text":
                parts = raw.split()
                if len(parts) < 2:
                    raise ValidationError("expected a token and at least one component", line=line_no)
                try:
                    values = [float(p) for p in parts[1:]]
                except ValueError as exc:
                    raise ValidationError(f"unparsable component: {exc}", line=line_no) from exc
                _add(parts[0], values, line_no)
            else:
                try:
                    obj = json.loads(raw)
                except json.JSONDecodeError as exc:
                    raise ValidationError(f"malformed JSON: {exc.msg}", line=line_no) from exc
                if not isinstance(obj, dict) or not isinstance(obj.get("text"), str):
                    raise ValidationError("expected an object with a string 'text'", line=line_no)
                vec = obj.get("vector")
                if not isinstance(vec, list) or not all(isinstance(x, (int, float)) for x in vec):
                    raise ValidationError("'vector' must be a list of numbers", line=line_no)
                _add(obj["text"], [float(x) for x in vec], line_no)
    if dimension is None:
        raise ValidationError(f"embedding file {path} holds no vectors")
    return EmbeddingStore(dimension=dimension, vectors=vectors)


def _cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu = float(np.dot(u, u))
    nv = float(np.dot(v, v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v)) / math.sqrt(nu * nv)


class EmbeddingSimilarity(SimilarityProvider):
    """Cosine of stored vectors, clamped to [0, 1]. Pairs with a text missing
    from the store fall back to token similarity."""

    kind = "embedding"

    def __init__(self, store: EmbeddingStore) -> None:
        self.store = store
        self._fallback = TokenSimilarity()

    def similarity(self, a: str, b: str) -> float:
        if a == b:
            return 1.0
        va = self.store.vectors.get(a)
        vb = self.store.vectors.get(b)
        if va is None or vb is None:
            return self._fallback.similarity(a, b)
        return min(max(_cosine(va, vb), 0.0), 1.0)


def similarity(provider: SimilarityProvider, a: str, b: str) -> float:
    """Convenience wrapper; providers are usually called directly."""
    return provider.similarity(a, b)


def top_k_similar_tokens(store: EmbeddingStore, token: str, k: int) -> list[str]:
    """The k most cosine-similar stored keys, excluding the query. Ties break
    lexicographically; k larger than the store ranks everything."""
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    if token not in store.vectors:
        raise ValidationError(f"token {token!r} is not in the embedding store")
    query = store.vectors[token]
    ranked = sorted(
        ((-_cosine(query, vec), key) for key, vec in store.vectors.items() if key != token),
    )
    return [key for _, key in ranked[:k]]
