"""Dataset splitting and synthetic baseline generators."""

from __future__ import annotations

import logging
import random
from collections.abc import Sequence
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .core import Dataset, Step, TaskGraph, ValidationError
from .sim import EmbeddingStore, top_k_similar_tokens
from .textnorm import tokenize

logger = logging.getLogger(__name__)

SPLIT_NAMES = ("train", "validation", "test")


@dataclass(frozen=True)
class ClusterAssignment:
    """Outcome of a similarity-aware split: the split per task plus the
    clusters that were kept whole."""

    split: dict[str, str]
    clusters: tuple[tuple[str, ...], ...]


class _UnionFind:
    def __init__(self, n: int) -> None:
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def parse_fractions(text: str) -> tuple[float, float, float]:
    """Parse 'train,validation,test' fractions like '0.6,0.1,0.3'."""
    parts = text.split(",")
    if len(parts) != 3:
        raise ValidationError(
            f"expected three comma-separated fractions, got {text!r}"
        )
    try:
        values = tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ValidationError(f"non-numeric fraction in {text!r}") from exc
    return values  # validated in cluster_split


def cluster_split(
    ds: Dataset,
    provider,
    fractions: Sequence[float] = (0.6, 0.1, 0.3),
    link_threshold: float = 0.6,
    seed: int = 0,
) -> ClusterAssignment:
    """Split tasks so near-duplicate tasks never straddle splits.

    Tasks whose task-text similarity strictly exceeds link_threshold are
    linked; linked clusters are assigned whole. Clusters are visited in
    seeded shuffled order and each goes to the split currently furthest
    below its target share.
    """
    if len(fractions) != 3:
        raise ValidationError(f"expected three fractions, got {len(fractions)}")
    if any(f < 0 for f in fractions):
        raise ValidationError(f"fractions must be nonnegative, got {tuple(fractions)}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValidationError(f"fractions must sum to 1, got {tuple(fractions)}")
    tasks = ds.tasks
    n = len(tasks)
    if n == 0:
        raise ValidationError("cannot split an empty dataset")
    uf = _UnionFind(n)
    for i in range(n):
        for j in range(i + 1, n):
            if provider.similarity(tasks[i].task, tasks[j].task) > link_threshold:
                uf.union(i, j)
    members: dict[int, list[int]] = {}
    for i in range(n):
        members.setdefault(uf.find(i), []).append(i)
    # Canonical order before shuffling keeps the split a function of
    # (dataset, seed) alone.
    clusters = [members[root] for root in sorted(members)]
    rng = random.Random(seed)
    rng.shuffle(clusters)
    targets = [f * n for f in fractions]
    filled = [0, 0, 0]
    split: dict[str, str] = {}
    assigned: list[tuple[str, ...]] = []
    for cluster in clusters:
        deficits = [targets[k] - filled[k] for k in range(3)]
        pick = max(range(3), key=lambda k: (deficits[k], -k))
        for idx in cluster:
            split[tasks[idx].task_id] = SPLIT_NAMES[pick]
        filled[pick] += len(cluster)
        assigned.append(tuple(tasks[idx].task_id for idx in cluster))
    return ClusterAssignment(split=split, clusters=tuple(assigned))


# ---------------------------------------------------------------------------
# Baselines


def repeat_task_baseline(
    task: str, m: int, *, task_id: str, context: str | None = None
) -> TaskGraph:
    """A chain of m steps, each step being the task text itself."""
    if m < 1:
        raise ValidationError(f"m must be positive, got {m}", task_id=task_id)
    steps = tuple(Step(id=f"s{i}", text=task) for i in range(m))
    edges = tuple((f"s{i}", f"s{i + 1}") for i in range(m - 1))
    return TaskGraph(task_id=task_id, task=task, steps=steps, edges=edges, context=context)


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Stopword list for baseline token replacement; one word per line,
    blank lines and #-comments ignored. Defaults to the bundled list."""
    if path is None:
        text = (
            resources.files("taskgraphs").joinpath("data/stopwords.txt").read_text("utf-8")
        )
    else:
        text = Path(path).read_text("utf-8")
    words = set()
    for line in text.splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


def repeat_similar_baseline(
    task: str,
    m: int,
    store: EmbeddingStore,
    *,
    task_id: str,
    k: int = 20,
    seed: int = 0,
    stopwords: frozenset[str] | None = None,
    context: str | None = None,
) -> TaskGraph:
    """A chain of m steps, each a copy of the task text with one random
    content token swapped for one of its k nearest embedding neighbors.

    A token is eligible when it is not a stopword and has an embedding.
    Tasks with no eligible token fall back to the plain repeat baseline.
    """
    if m < 1:
        raise ValidationError(f"m must be positive, got {m}", task_id=task_id)
    if k < 1:
        raise ValidationError(f"k must be positive, got {k}", task_id=task_id)
    if stopwords is None:
        stopwords = load_stopwords()
    tokens = tokenize(task)
    eligible = [
        i
        for i, tok in enumerate(tokens)
        if tok not in stopwords and tok in store.vectors
    ]
    if not eligible:
        logger.warning(
            "task %r: no replaceable token (stopwords or missing embeddings), "
            "falling back to the repeat-task baseline",
            task_id,
        )
        return repeat_task_baseline(task, m, task_id=task_id, context=context)
    rng = random.Random(seed)
    texts: list[str] = []
    for _ in range(m):
        position = rng.choice(eligible)
        neighbors = top_k_similar_tokens(store, tokens[position], k)
        replacement = rng.choice(neighbors)
        variant = list(tokens)
        variant[position] = replacement
        texts.append(" ".join(variant))
    steps = tuple(Step(id=f"s{i}", text=text) for i, text in enumerate(texts))
    edges = tuple((f"s{i}", f"s{i + 1}") for i in range(m - 1))
    return TaskGraph(task_id=task_id, task=task, steps=steps, edges=edges, context=context)
