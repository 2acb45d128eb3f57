"""Edge-level evaluation through aligned node neighborhoods.

Nodes of the two graphs are aligned one-to-one with the assignment solver;
every node left unmatched on either side is paired with a dummy singleton.
For each pair, the parent sets, child sets, and their unions are rendered as
small documents and compared with Rouge F1. Pairs involving a dummy always
score 0: a missing or spurious step cannot agree with anything.
"""

from __future__ import annotations

import csv
import io
import logging
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any

from . import assign
from .core import Dataset, PairwiseOrderLabel, Step, TaskGraph, ValidationError
from .sim import SimilarityProvider
from .textnorm import rouge_l, rouge_n, tokenize

logger = logging.getLogger(__name__)

EDGE_METRICS = ("in_degree", "out_degree", "step_proximity")
VARIANTS = ("rouge1", "rouge2", "rougeL")


@dataclass(frozen=True)
class EdgeScores:
    rouge1: float
    rouge2: float
    rougeL: float

    def get(self, variant: str) -> float:
        return getattr(self, variant)


@dataclass(frozen=True)
class AlignedPair:
    """A gold node and its aligned predicted node, with their neighborhoods
    as step-text sets. A None node is the dummy singleton; its sets are
    empty."""

    gold_step: Step | None
    pred_step: Step | None
    gold_parents: frozenset[str]
    gold_children: frozenset[str]
    pred_parents: frozenset[str]
    pred_children: frozenset[str]

    def __post_init__(self) -> None:
        if self.gold_step is None and self.pred_step is None:
            raise ValueError("at most one side of an aligned pair may be a dummy")


def _neighbor_texts(g: TaskGraph, ids: Iterable[str]) -> frozenset[str]:
    return frozenset(g.step_by_id[i].text for i in ids)


def align_nodes(
    gold: TaskGraph, pred: TaskGraph, provider: SimilarityProvider
) -> list[AlignedPair]:
    """One-to-one node alignment plus dummy pairs for the leftovers.

    Returns max(|gold|, |pred|) pairs when sizes differ, |gold| when equal.
    """

    def real_pair(pred_i: int, gold_j: int) -> AlignedPair:
        gs = gold.steps[gold_j]
        ps = pred.steps[pred_i]
        return AlignedPair(
            gold_step=gs,
            pred_step=ps,
            gold_parents=_neighbor_texts(gold, gold.parent_ids[gs.id]),
            gold_children=_neighbor_texts(gold, gold.child_ids[gs.id]),
            pred_parents=_neighbor_texts(pred, pred.parent_ids[ps.id]),
            pred_children=_neighbor_texts(pred, pred.child_ids[ps.id]),
        )

    empty = frozenset()
    if not gold.steps or not pred.steps:
        pairs: list[AlignedPair] = []
        for gs in gold.steps:
            pairs.append(
                AlignedPair(
                    gold_step=gs,
                    pred_step=None,
                    gold_parents=_neighbor_texts(gold, gold.parent_ids[gs.id]),
                    gold_children=_neighbor_texts(gold, gold.child_ids[gs.id]),
                    pred_parents=empty,
                    pred_children=empty,
                )
            )
        for ps in pred.steps:
            pairs.append(
                AlignedPair(
                    gold_step=None,
                    pred_step=ps,
                    gold_parents=empty,
                    gold_children=empty,
                    pred_parents=_neighbor_texts(pred, pred.parent_ids[ps.id]),
                    pred_children=_neighbor_texts(pred, pred.child_ids[ps.id]),
                )
            )
        return pairs

    matrix = assign.sim_matrix(
        [s.text for s in pred.steps], [s.text for s in gold.steps], provider
    )
    matching = assign.hungarian(matrix)
    by_gold = sorted(matching.pairs, key=lambda p: p.col)
    pairs = [real_pair(p.row, p.col) for p in by_gold]
    for gold_j in matching.unmatched_cols:
        gs = gold.steps[gold_j]
        pairs.append(
            AlignedPair(
                gold_step=gs,
                pred_step=None,
                gold_parents=_neighbor_texts(gold, gold.parent_ids[gs.id]),
                gold_children=_neighbor_texts(gold, gold.child_ids[gs.id]),
                pred_parents=empty,
                pred_children=empty,
            )
        )
    for pred_i in matching.unmatched_rows:
        ps = pred.steps[pred_i]
        pairs.append(
            AlignedPair(
                gold_step=None,
                pred_step=ps,
                gold_parents=empty,
                gold_children=empty,
                pred_parents=_neighbor_texts(pred, pred.parent_ids[ps.id]),
                pred_children=_neighbor_texts(pred, pred.child_ids[ps.id]),
            )
        )
    return pairs


def _set_document(texts: frozenset[str]) -> list[str]:
    return tokenize(" ".join(sorted(texts)))


def _overlap(gold_set: frozenset[str], pred_set: frozenset[str]) -> EdgeScores:
    # Agreement on emptiness is perfect agreement; one-sided emptiness is
    # total disagreement. Otherwise compare rendered documents, gold as
    # reference.
    if not gold_set and not pred_set:
        return EdgeScores(1.0, 1.0, 1.0)
    if not gold_set or not pred_set:
        return EdgeScores(0.0, 0.0, 0.0)
    ref = _set_document(gold_set)
    cand = _set_document(pred_set)
    return EdgeScores(
        rouge1=rouge_n(ref, cand, 1).f1,
        rouge2=rouge_n(ref, cand, 2).f1,
        rougeL=rouge_l(ref, cand).f1,
    )


def _score_pairs(pairs: Sequence[AlignedPair]) -> dict[str, EdgeScores]:
    zero = EdgeScores(0.0, 0.0, 0.0)
    per_metric: dict[str, list[EdgeScores]] = {m: [] for m in EDGE_METRICS}
    for pair in pairs:
        if pair.gold_step is None or pair.pred_step is None:
            for m in EDGE_METRICS:
                per_metric[m].append(zero)
            continue
        per_metric["in_degree"].append(_overlap(pair.gold_parents, pair.pred_parents))
        per_metric["out_degree"].append(_overlap(pair.gold_children, pair.pred_children))
        per_metric["step_proximity"].append(
            _overlap(
                pair.gold_parents | pair.gold_children,
                pair.pred_parents | pair.pred_children,
            )
        )
    n = len(pairs)
    return {
        m: EdgeScores(
            rouge1=sum(s.rouge1 for s in scores) / n,
            rouge2=sum(s.rouge2 for s in scores) / n,
            rougeL=sum(s.rougeL for s in scores) / n,
        )
        for m, scores in per_metric.items()
    }


@dataclass(frozen=True)
class EdgeMetricsReport:
    aggregate: dict[str, EdgeScores]
    per_task: dict[str, dict[str, EdgeScores]]
    meta: dict[str, Any]

    def to_json_obj(self) -> dict[str, Any]:
        def fam(scores: dict[str, EdgeScores]) -> dict[str, dict[str, float]]:
            return {
                metric: {v: s.get(v) for v in VARIANTS} for metric, s in scores.items()
            }

        return {
            "meta": dict(self.meta),
            "aggregate": fam(self.aggregate),
            "per_task": {tid: fam(scores) for tid, scores in self.per_task.items()},
        }

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["metric", *VARIANTS])
        for metric in EDGE_METRICS:
            s = self.aggregate[metric]
            writer.writerow([metric, *(s.get(v) for v in VARIANTS)])
        return out.getvalue()


def eval_edges(
    gold: TaskGraph, pred: TaskGraph, provider: SimilarityProvider
) -> EdgeMetricsReport:
    """Score one prediction's edges against its gold task."""
    if gold.task_id != pred.task_id:
        raise ValidationError(
            f"gold task {gold.task_id!r} and prediction task {pred.task_id!r} differ"
        )
    pairs = align_nodes(gold, pred, provider)
    if not pairs:
        logger.warning("task %r has no steps on either side, scoring 0", gold.task_id)
        zero = EdgeScores(0.0, 0.0, 0.0)
        scores = {m: zero for m in EDGE_METRICS}
    else:
        scores = _score_pairs(pairs)
    return EdgeMetricsReport(
        aggregate=scores,
        per_task={gold.task_id: scores},
        meta={"aggregation": "single_task", "n_tasks": 1},
    )


def _edges_worker(
    payload: tuple[TaskGraph, TaskGraph, SimilarityProvider],
) -> tuple[str, dict[str, EdgeScores]]:
    gold, pred, provider = payload
    pairs = align_nodes(gold, pred, provider)
    if not pairs:
        zero = EdgeScores(0.0, 0.0, 0.0)
        return gold.task_id, {m: zero for m in EDGE_METRICS}
    return gold.task_id, _score_pairs(pairs)


def eval_edges_corpus(
    gold: Dataset, preds: Dataset, provider: SimilarityProvider, *, jobs: int = 1
) -> EdgeMetricsReport:
    """Edge metrics for a whole prediction set, macro-averaged over tasks."""
    from .nodemetrics import check_task_coverage

    check_task_coverage(gold, preds)
    ordered_ids = sorted(gold.by_id)
    payloads = [(gold.by_id[tid], preds.by_id[tid], provider) for tid in ordered_ids]
    if jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = dict(pool.map(_edges_worker, payloads, chunksize=8))
    else:
        results = dict(map(_edges_worker, payloads))
    per_task = {tid: results[tid] for tid in ordered_ids}
    n = len(ordered_ids)
    aggregate = {
        metric: EdgeScores(
            rouge1=sum(per_task[tid][metric].rouge1 for tid in ordered_ids) / n,
            rouge2=sum(per_task[tid][metric].rouge2 for tid in ordered_ids) / n,
            rougeL=sum(per_task[tid][metric].rougeL for tid in ordered_ids) / n,
        )
        for metric in EDGE_METRICS
    }
    return EdgeMetricsReport(
        aggregate=aggregate,
        per_task=per_task,
        meta={"aggregation": "macro", "n_tasks": n},
    )


# ---------------------------------------------------------------------------
# Pairwise order labels


def reachable_sets(g: TaskGraph) -> dict[str, frozenset[str]]:
    """For each step id, the set of step ids reachable through edges."""
    children = g.child_ids
    out: dict[str, frozenset[str]] = {}
    for s in g.steps:
        seen: set[str] = set()
        frontier = list(children[s.id])
        while frontier:
            node = frontier.pop()
            if node in seen:
                continue
            seen.add(node)
            frontier.extend(children[node])
        out[s.id] = frozenset(seen)
    return out


def _count_correct(gold: TaskGraph, labels: Sequence[PairwiseOrderLabel]) -> int:
    reach = reachable_sets(gold)
    correct = 0
    for label in labels:
        if label.task_id != gold.task_id:
            raise ValidationError(
                f"label for task {label.task_id!r} scored against task {gold.task_id!r}"
            )
        for sid in (label.step_a, label.step_b):
            if sid not in gold.step_by_id:
                raise ValidationError(
                    f"label references unknown step {sid!r}", task_id=gold.task_id
                )
        truth = "before" if label.step_b in reach[label.step_a] else "not_before"
        correct += label.label == truth
    return correct


def eval_pairwise_labels(
    gold: TaskGraph, labels: Sequence[PairwiseOrderLabel]
) -> float:
    """Accuracy of before/not_before labels against the gold graph.

    The gold truth for (a, b) is 'before' exactly when b is reachable from a,
    so implied transitive orderings count, not only direct edges.
    """
    if not labels:
        raise ValidationError(f"no labels given for task {gold.task_id!r}")
    return _count_correct(gold, labels) / len(labels)


@dataclass(frozen=True)
class PairwiseLabelReport:
    accuracy: float
    n_labels: int
    per_task: dict[str, dict[str, float]]
    meta: dict[str, Any]

    def to_json_obj(self) -> dict[str, Any]:
        return {
            "meta": dict(self.meta),
            "accuracy": self.accuracy,
            "n_labels": self.n_labels,
            "per_task": {tid: dict(v) for tid, v in self.per_task.items()},
        }

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["scope", "accuracy", "n_labels"])
        writer.writerow(["overall", self.accuracy, self.n_labels])
        for tid in sorted(self.per_task):
            row = self.per_task[tid]
            writer.writerow([tid, row["accuracy"], int(row["n_labels"])])
        return out.getvalue()


def eval_pairwise_corpus(
    gold: Dataset, labels: Sequence[PairwiseOrderLabel]
) -> PairwiseLabelReport:
    """Accuracy over all labels, counted per pair across the whole set."""
    if not labels:
        raise ValidationError("no labels given")
    grouped: dict[str, list[PairwiseOrderLabel]] = {}
    for label in labels:
        if label.task_id not in gold.by_id:
            raise ValidationError(f"label references unknown task {label.task_id!r}")
        grouped.setdefault(label.task_id, []).append(label)
    per_task: dict[str, dict[str, float]] = {}
    correct_total = 0
    for tid in sorted(grouped):
        task_labels = grouped[tid]
        correct = _count_correct(gold.by_id[tid], task_labels)
        per_task[tid] = {
            "accuracy": correct / len(task_labels),
            "n_labels": float(len(task_labels)),
        }
        correct_total += correct
    n = len(labels)
    return PairwiseLabelReport(
        accuracy=correct_total / n,
        n_labels=n,
        per_task=per_task,
        meta={"aggregation": "micro", "n_tasks": len(grouped)},
    )


def all_not_before_labels(g: TaskGraph) -> list[PairwiseOrderLabel]:
    """The majority-class labeler: every ordered step pair gets not_before."""
    return [
        PairwiseOrderLabel(task_id=g.task_id, step_a=a.id, step_b=b.id, label="not_before")
        for a in g.steps
        for b in g.steps
        if a.id != b.id
    ]
