"""Tokenization and Rouge scoring over token streams.

Conventions shared by every scoring function here: a zero denominator yields
0.0, except when both sides agree on emptiness (no tokens, or no n-grams of
the requested size), which counts as perfect agreement and yields 1.0. The
exception is what keeps identity comparisons at 1.0 for single-token texts
under the bigram variant.
"""

from __future__ import annotations

import unicodedata
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass
from functools import lru_cache

TokenStream = list[str]


@lru_cache(maxsize=None)
def _strip_char(ch: str) -> str:
    # Unicode category P* is punctuation; everything else passes through.
    return "" if unicodedata.category(ch).startswith("P") else ch


@lru_cache(maxsize=65536)
def _tokenize_cached(text: str) -> tuple[str, ...]:
    cleaned = "".join(_strip_char(ch) for ch in text.lower())
    return tuple(cleaned.split())


def tokenize(text: str) -> TokenStream:
    """Lowercase, strip punctuation, split on whitespace. No stemming and no
    stopword removal; idempotent."""
    return list(_tokenize_cached(text))


def normalize_text(text: str) -> str:
    """The token stream rejoined with single spaces; the normal form used for
    duplicate detection."""
    return " ".join(_tokenize_cached(text))


def fbeta(precision: float, recall: float, beta: float) -> float:
    """Weighted harmonic mean of precision and recall; beta > 1 weighs recall
    more. Returns 0.0 when the denominator vanishes."""
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if not (0.0 <= precision <= 1.0) or not (0.0 <= recall <= 1.0):
        raise ValueError(f"precision/recall must lie in [0, 1], got {precision}, {recall}")
    b2 = beta * beta
    denom = b2 * precision + recall
    if denom == 0.0:
        return 0.0
    return (1.0 + b2) * precision * recall / denom


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float
    f2: float

    @classmethod
    def from_precision_recall(cls, precision: float, recall: float) -> RougeScore:
        return cls(
            precision=precision,
            recall=recall,
            f1=fbeta(precision, recall, 1.0),
            f2=fbeta(precision, recall, 2.0),
        )


_PERFECT = RougeScore(1.0, 1.0, 1.0, 1.0)
_ZERO = RougeScore(0.0, 0.0, 0.0, 0.0)


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(reference: Sequence[str], candidate: Sequence[str], n: int) -> RougeScore:
    """Clipped n-gram overlap. Recall divides by the reference n-gram count,
    precision by the candidate's."""
    if not isinstance(n, int) or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    ref_counts = _ngram_counts(reference, n)
    cand_counts = _ngram_counts(candidate, n)
    ref_total = sum(ref_counts.values())
    cand_total = sum(cand_counts.values())
    if ref_total == 0 and cand_total == 0:
        return _PERFECT
    if ref_total == 0 or cand_total == 0:
        return _ZERO
    overlap = sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
    return RougeScore.from_precision_recall(overlap / cand_total, overlap / ref_total)


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[len(b)]


def rouge_l(reference: Sequence[str], candidate: Sequence[str]) -> RougeScore:
    """Longest-common-subsequence overlap; rewards in-order agreement without
    requiring contiguity."""
    if not reference and not candidate:
        return _PERFECT
    if not reference or not candidate:
        return _ZERO
    lcs = _lcs_length(reference, candidate)
    return RougeScore.from_precision_recall(lcs / len(candidate), lcs / len(reference))
