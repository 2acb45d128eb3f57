"""Constructing task graphs from step sequences and order judgments.

Step identity here is textual: two steps are the same node when their texts
agree after normalization. Synthesized graphs number their steps s0, s1, ...
in first-occurrence order.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from . import assign
from .core import (
    Dataset,
    PairwiseOrderLabel,
    Step,
    StepSequenceSet,
    TaskGraph,
    ValidationError,
    iter_jsonl,
)
from .sim import SimilarityProvider
from .textnorm import fbeta, normalize_text

logger = logging.getLogger(__name__)

AGGREGATE_OUTPUTS = ("reduction", "closure")
PAIR_LABELS = ("dup", "distinct")


@dataclass(frozen=True)
class ScoredSequence:
    """One candidate step sequence with its quality score."""

    task_id: str
    steps: tuple[str, ...]
    score: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))
        if not self.task_id:
            raise ValidationError("task_id must be nonempty")
        if not self.steps:
            raise ValidationError("steps must be nonempty", task_id=self.task_id)
        if not math.isfinite(self.score):
            raise ValidationError("score must be finite", task_id=self.task_id)


@dataclass(frozen=True)
class PrecedenceRelation:
    """Order agreements extracted from a sequence set.

    universe lists the distinct step texts in first-occurrence order;
    ordered_pairs holds (earlier, later) for every pair of texts that keeps
    the same relative order in every sequence containing both.
    """

    universe: tuple[str, ...]
    ordered_pairs: frozenset[tuple[str, str]]


# ---------------------------------------------------------------------------
# Small digraph helpers on index space


def strongly_connected_components(n: int, edges: Iterable[tuple[int, int]]) -> list[int]:
    """Tarjan, iteratively. Returns a component id per node."""
    adj: list[list[int]] = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    comp = [-1] * n
    stack: list[int] = []
    counter = 0
    n_comps = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work: list[tuple[int, int]] = [(root, 0)]
        while work:
            node, child_idx = work[-1]
            if child_idx == 0:
                index[node] = low[node] = counter
                counter += 1
                stack.append(node)
                on_stack[node] = True
            advanced = False
            for k in range(child_idx, len(adj[node])):
                child = adj[node][k]
                if index[child] == -1:
                    work[-1] = (node, k + 1)
                    work.append((child, 0))
                    advanced = True
                    break
                if on_stack[child]:
                    low[node] = min(low[node], index[child])
            if advanced:
                continue
            if low[node] == index[node]:
                while True:
                    member = stack.pop()
                    on_stack[member] = False
                    comp[member] = n_comps
                    if member == node:
                        break
                n_comps += 1
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
    return comp


def _reachable_from(n: int, edges: set[tuple[int, int]]) -> list[set[int]]:
    adj: list[list[int]] = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
    out: list[set[int]] = []
    for start in range(n):
        seen: set[int] = set()
        frontier = list(adj[start])
        while frontier:
            node = frontier.pop()
            if node in seen:
                continue
            seen.add(node)
            frontier.extend(adj[node])
        out.append(seen)
    return out


def _transitive_closure(n: int, edges: set[tuple[int, int]]) -> set[tuple[int, int]]:
    reach = _reachable_from(n, edges)
    return {(a, b) for a in range(n) for b in reach[a]}


def _transitive_reduction(n: int, edges: set[tuple[int, int]]) -> set[tuple[int, int]]:
    # Valid for acyclic inputs only: drop every edge implied through an
    # intermediate node.
    reach = _reachable_from(n, edges)
    kept = set()
    for a, b in edges:
        if not any(w != b and b in reach[w] for w in reach[a]):
            kept.add((a, b))
    return kept


def _drop_cycle_edges(n: int, edges: set[tuple[int, int]]) -> set[tuple[int, int]]:
    comp = strongly_connected_components(n, edges)
    return {(a, b) for a, b in edges if comp[a] != comp[b]}


# ---------------------------------------------------------------------------
# Graph construction


def _synth_graph(
    texts: Sequence[str],
    index_edges: Iterable[tuple[int, int]],
    *,
    task_id: str,
    task: str,
    context: str | None,
) -> TaskGraph:
    steps = tuple(Step(id=f"s{i}", text=text) for i, text in enumerate(texts))
    edges = tuple((f"s{a}", f"s{b}") for a, b in sorted(index_edges))
    return TaskGraph(task_id=task_id, task=task, steps=steps, edges=edges, context=context)


def linear_graph(
    steps: Sequence[str], *, task_id: str, task: str, context: str | None = None
) -> TaskGraph:
    """A chain graph: each step depends on the previous one."""
    if not steps:
        raise ValidationError("cannot build a graph from no steps", task_id=task_id)
    seen: set[str] = set()
    for text in steps:
        norm = normalize_text(text)
        if norm in seen:
            raise ValidationError(
                f"step {text!r} repeats after normalization", task_id=task_id
            )
        seen.add(norm)
    return _synth_graph(
        steps,
        [(i, i + 1) for i in range(len(steps) - 1)],
        task_id=task_id,
        task=task,
        context=context,
    )


def build_precedence(seqs: StepSequenceSet) -> PrecedenceRelation:
    """Extract the order agreements shared by every sequence in the set."""
    display: dict[str, str] = {}
    order: list[str] = []
    positions: list[dict[str, int]] = []
    for seq in seqs.sequences:
        pos: dict[str, int] = {}
        for i, text in enumerate(seq):
            norm = normalize_text(text)
            if norm not in display:
                display[norm] = text
                order.append(norm)
            pos[norm] = i
        positions.append(pos)
    forward: set[tuple[str, str]] = set()
    conflicted: set[frozenset[str]] = set()
    for pos in positions:
        keys = sorted(pos, key=pos.get)
        for i, a in enumerate(keys):
            for b in keys[i + 1 :]:
                if (b, a) in forward:
                    conflicted.add(frozenset((a, b)))
                forward.add((a, b))
    agreed = {
        (a, b)
        for a, b in forward
        if frozenset((a, b)) not in conflicted
    }
    return PrecedenceRelation(
        universe=tuple(display[k] for k in order),
        ordered_pairs=frozenset((display[a], display[b]) for a, b in agreed),
    )


def aggregate_sequences(seqs: StepSequenceSet, output: str = "reduction") -> TaskGraph:
    """Merge alternative orderings into one graph.

    An edge is kept only where every sequence containing both steps agrees
    on their order, so steps whose order varies end up unordered. Emits the
    transitive reduction by default, or the full closure.
    """
    if output not in AGGREGATE_OUTPUTS:
        raise ValidationError(
            f"output must be one of {AGGREGATE_OUTPUTS}, got {output!r}",
            task_id=seqs.task_id,
        )
    relation = build_precedence(seqs)
    texts = relation.universe
    index_of = {t: i for i, t in enumerate(texts)}
    pairs = {(index_of[a], index_of[b]) for a, b in relation.ordered_pairs}
    n = len(texts)
    # Ragged sequence sets can produce contradictory chains through partial
    # co-occurrence; dissolve them the same way decycle does. Sets of full
    # permutations never trigger this.
    acyclic = _drop_cycle_edges(n, pairs)
    if acyclic != pairs:
        logger.warning(
            "task %r: contradictory order agreements formed a cycle, dropped",
            seqs.task_id,
        )
    edges = (
        _transitive_reduction(n, acyclic)
        if output == "reduction"
        else _transitive_closure(n, acyclic)
    )
    return _synth_graph(
        texts, edges, task_id=seqs.task_id, task=seqs.task, context=seqs.context
    )


def decycle(g: TaskGraph) -> TaskGraph:
    """Remove every edge inside a strongly connected component of two or
    more nodes; edges between components survive. Steps that disagree on
    order end up unordered rather than ordered arbitrarily."""
    index_of = {s.id: i for i, s in enumerate(g.steps)}
    edges = {(index_of[a], index_of[b]) for a, b in g.edges}
    kept = _drop_cycle_edges(len(g.steps), edges)
    id_edges = tuple(
        (a, b) for a, b in g.edges if (index_of[a], index_of[b]) in kept
    )
    return TaskGraph(
        task_id=g.task_id,
        task=g.task,
        steps=g.steps,
        edges=id_edges,
        context=g.context,
        extra=dict(g.extra),
    )


def labels_to_graph(
    steps: Sequence[Step],
    labels: Sequence[PairwiseOrderLabel],
    *,
    task_id: str,
    task: str,
    context: str | None = None,
) -> TaskGraph:
    """Build a graph from pairwise order judgments.

    Each 'before' label becomes an edge; unlabeled pairs stay unordered.
    Mutually contradictory 'before' labels (both directions) form a cycle
    and are dissolved by decycle.
    """
    known = {s.id for s in steps}
    decided: dict[tuple[str, str], str] = {}
    for label in labels:
        if label.task_id != task_id:
            raise ValidationError(
                f"label for task {label.task_id!r} in build for task {task_id!r}"
            )
        for sid in (label.step_a, label.step_b):
            if sid not in known:
                raise ValidationError(
                    f"label references unknown step {sid!r}", task_id=task_id
                )
        key = (label.step_a, label.step_b)
        previous = decided.get(key)
        if previous is not None and previous != label.label:
            raise ValidationError(
                f"contradictory labels for pair {key}", task_id=task_id
            )
        decided[key] = label.label
    edges = tuple(sorted(key for key, value in decided.items() if value == "before"))
    raw = TaskGraph(task_id=task_id, task=task, steps=tuple(steps), edges=edges, context=context)
    return decycle(raw)


# ---------------------------------------------------------------------------
# Sequence merging and threshold fitting


def dedup_merge(
    seqs: StepSequenceSet, provider: SimilarityProvider, threshold: float
) -> list[str]:
    """Concatenate the sequences, dropping each step whose similarity to an
    already-kept step strictly exceeds the threshold. Kept steps stay in
    first-occurrence order."""
    if not (0.0 <= threshold <= 1.0):
        raise ValidationError(
            f"threshold must lie in [0, 1], got {threshold}", task_id=seqs.task_id
        )
    kept: list[str] = []
    for seq in seqs.sequences:
        for text in seq:
            if any(provider.similarity(text, k) > threshold for k in kept):
                continue
            kept.append(text)
    return kept


@dataclass(frozen=True)
class ThresholdFit:
    threshold: float
    accuracy: float


def _pair_accuracy(sims: Sequence[float], labels: Sequence[str], threshold: float) -> float:
    correct = sum(
        (sim > threshold) == (label == "dup") for sim, label in zip(sims, labels)
    )
    return correct / len(sims)


def fit_dedup_threshold(
    pairs: Sequence[tuple[str, str, str]], provider: SimilarityProvider
) -> ThresholdFit:
    """Pick the duplicate-detection threshold that maximizes accuracy on
    labeled pairs.

    Candidates are 0, 1, and the midpoints between consecutive distinct
    similarity values; a pair counts as a duplicate when its similarity
    strictly exceeds the threshold, matching dedup_merge. Ties prefer the
    smallest threshold.
    """
    if not pairs:
        raise ValidationError("no labeled pairs given")
    for a, b, label in pairs:
        if label not in PAIR_LABELS:
            raise ValidationError(
                f"pair label must be one of {PAIR_LABELS}, got {label!r} for ({a!r}, {b!r})"
            )
    sims = [provider.similarity(a, b) for a, b, _ in pairs]
    labels = [label for _, _, label in pairs]
    distinct = sorted(set(sims))
    candidates = [0.0]
    candidates += [(x + y) / 2.0 for x, y in zip(distinct, distinct[1:])]
    candidates.append(1.0)
    best = ThresholdFit(threshold=candidates[0], accuracy=_pair_accuracy(sims, labels, candidates[0]))
    for t in candidates[1:]:
        accuracy = _pair_accuracy(sims, labels, t)
        if accuracy > best.accuracy:
            best = ThresholdFit(threshold=t, accuracy=accuracy)
    return best


def load_labeled_pairs(path: str | Path) -> list[tuple[str, str, str]]:
    """Read {text_a, text_b, label} JSONL for fit_dedup_threshold."""
    pairs: list[tuple[str, str, str]] = []
    for line_no, obj in iter_jsonl(path):
        if (
            not isinstance(obj, dict)
            or not isinstance(obj.get("text_a"), str)
            or not isinstance(obj.get("text_b"), str)
            or not isinstance(obj.get("label"), str)
        ):
            raise ValidationError(
                "expected an object with string text_a, text_b, and label", line=line_no
            )
        if obj["label"] not in PAIR_LABELS:
            raise ValidationError(
                f"label must be one of {PAIR_LABELS}, got {obj['label']!r}", line=line_no
            )
        pairs.append((obj["text_a"], obj["text_b"], obj["label"]))
    return pairs


# ---------------------------------------------------------------------------
# Sequence scoring


def sequence_assignment_f1(
    candidate: Sequence[str], gold: TaskGraph, provider: SimilarityProvider
) -> float:
    """Assignment F1 of a candidate step list against the gold steps."""
    if not candidate or not gold.steps:
        return 0.0
    matrix = assign.sim_matrix(list(candidate), [s.text for s in gold.steps], provider)
    matching = assign.hungarian(matrix)
    p, r = assign.match_scores(matching, len(candidate), len(gold.steps))
    return fbeta(p, r, 1.0)


def build_sf_training_set(
    gold: Dataset,
    candidates: Iterable[StepSequenceSet],
    provider: SimilarityProvider,
) -> list[ScoredSequence]:
    """Score every candidate sequence against its task's gold steps; the
    output feeds a sequence-scoring model."""
    out: list[ScoredSequence] = []
    for seq_set in candidates:
        gold_task = gold.by_id.get(seq_set.task_id)
        if gold_task is None:
            raise ValidationError(f"candidates reference unknown task {seq_set.task_id!r}")
        for seq in seq_set.sequences:
            out.append(
                ScoredSequence(
                    task_id=seq_set.task_id,
                    steps=seq,
                    score=sequence_assignment_f1(seq, gold_task, provider),
                )
            )
    return out


def swap_candidates(seq: Sequence[str], limit: int = 128) -> list[list[str]]:
    """Every sequence obtained by swapping one pair of positions, enumerated
    by (i, j) in lexicographic order and truncated to the limit."""
    if limit < 1:
        raise ValueError(f"limit must be positive, got {limit}")
    out: list[list[str]] = []
    n = len(seq)
    for i in range(n):
        for j in range(i + 1, n):
            variant = list(seq)
            variant[i], variant[j] = variant[j], variant[i]
            out.append(variant)
            if len(out) == limit:
                return out
    return out


def select_top_sequences(
    scored: Sequence[ScoredSequence], keep_fraction: float
) -> list[ScoredSequence]:
    """Keep the best ceil(fraction * n) sequences by score; equal scores
    keep their input order."""
    if not scored:
        raise ValidationError("no scored sequences given")
    if not (0.0 < keep_fraction <= 1.0):
        raise ValidationError(f"keep_fraction must lie in (0, 1], got {keep_fraction}")
    keep = math.ceil(keep_fraction * len(scored))
    ranked = sorted(scored, key=lambda s: s.score, reverse=True)
    return ranked[:keep]


# ---------------------------------------------------------------------------
# ScoredSequence serialization


def scored_sequence_to_obj(s: ScoredSequence) -> dict[str, Any]:
    return {"task_id": s.task_id, "steps": list(s.steps), "score": s.score}


def load_scored_sequences(path: str | Path) -> list[ScoredSequence]:
    out: list[ScoredSequence] = []
    for line_no, obj in iter_jsonl(path):
        if (
            not isinstance(obj, dict)
            or not isinstance(obj.get("task_id"), str)
            or not isinstance(obj.get("steps"), list)
            or not all(isinstance(x, str) for x in obj.get("steps", []))
            or not isinstance(obj.get("score"), (int, float))
        ):
            raise ValidationError(
                "expected an object with task_id, steps (list of strings), and score",
                line=line_no,
            )
        try:
            out.append(
                ScoredSequence(
                    task_id=obj["task_id"],
                    steps=tuple(obj["steps"]),
                    score=float(obj["score"]),
                )
            )
        except ValidationError as exc:
            raise ValidationError(str(exc), line=line_no) from exc
    return out
