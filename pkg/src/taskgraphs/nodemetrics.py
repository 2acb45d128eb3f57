"""Node-level evaluation of predicted step sets against gold step sets.

Six metric families are reported per task and macro-averaged over a corpus:
three document Rouge variants over the concatenated step texts, the per-side
best-match scores (legacy), the one-to-one assignment scores (hungarian), and
the one-to-two relaxation (relaxed_hungarian). Corpus F1/F2 are recomputed
from the averaged precision and recall; means of the per-task F values are
available on request.
"""

from __future__ import annotations

import csv
import io
import logging
from collections.abc import Mapping
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any

from . import assign
from .core import Dataset, TaskGraph, ValidationError
from .sim import SimilarityProvider
from .textnorm import RougeScore, rouge_l, rouge_n, tokenize

logger = logging.getLogger(__name__)

FAMILIES = ("rouge1", "rouge2", "rougeL", "legacy", "hungarian", "relaxed_hungarian")

FamilyScores = RougeScore


def _document(g: TaskGraph) -> list[str]:
    # Steps concatenated in stored order with single spaces, then tokenized.
    return tokenize(" ".join(s.text for s in g.steps))


def _score_task(
    gold: TaskGraph, pred: TaskGraph, provider: SimilarityProvider
) -> dict[str, FamilyScores]:
    zero = RougeScore(0.0, 0.0, 0.0, 0.0)
    if not pred.steps or not gold.steps:
        side = "predicted" if not pred.steps else "gold"
        logger.warning(
            "task %r has no %s steps, scoring every family 0", gold.task_id, side
        )
        return {family: zero for family in FAMILIES}

    gold_doc = _document(gold)
    pred_doc = _document(pred)
    scores: dict[str, FamilyScores] = {
        "rouge1": rouge_n(gold_doc, pred_doc, 1),
        "rouge2": rouge_n(gold_doc, pred_doc, 2),
        "rougeL": rouge_l(gold_doc, pred_doc),
    }

    matrix = assign.sim_matrix(
        [s.text for s in pred.steps], [s.text for s in gold.steps], provider
    )
    n_pred, n_gold = matrix.shape

    p, r = assign.legacy_scores(matrix)
    scores["legacy"] = RougeScore.from_precision_recall(p, r)

    one_to_one = assign.hungarian(matrix)
    p, r = assign.match_scores(one_to_one, n_pred, n_gold)
    scores["hungarian"] = RougeScore.from_precision_recall(p, r)

    relaxed_p, _ = assign.match_scores(
        assign.relaxed_match(matrix, "gold_duplicated"), n_pred, n_gold
    )
    _, relaxed_r = assign.match_scores(
        assign.relaxed_match(matrix, "pred_duplicated"), n_pred, n_gold
    )
    scores["relaxed_hungarian"] = RougeScore.from_precision_recall(relaxed_p, relaxed_r)
    return scores


@dataclass(frozen=True)
class NodeMetricsReport:
    aggregate: dict[str, FamilyScores]
    per_task: dict[str, dict[str, FamilyScores]]
    meta: dict[str, Any]

    def to_json_obj(self) -> dict[str, Any]:
        def fam(scores: Mapping[str, FamilyScores]) -> dict[str, dict[str, float]]:
            return {
                family: {
                    "precision": s.precision,
                    "recall": s.recall,
                    "f1": s.f1,
                    "f2": s.f2,
                }
                for family, s in scores.items()
            }

        return {
            "meta": dict(self.meta),
            "aggregate": fam(self.aggregate),
            "per_task": {tid: fam(scores) for tid, scores in self.per_task.items()},
        }

    def to_csv(self) -> str:
        task_means = self.meta.get("f_task_means")
        out = io.StringIO()
        header = ["family", "precision", "recall", "f1", "f2"]
        if task_means is not None:
            header += ["f1_task_mean", "f2_task_mean"]
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(header)
        for family in FAMILIES:
            s = self.aggregate[family]
            row = [family, s.precision, s.recall, s.f1, s.f2]
            if task_means is not None:
                row += [task_means[family]["f1"], task_means[family]["f2"]]
            writer.writerow(row)
        return out.getvalue()


def eval_nodes(
    gold: TaskGraph, pred: TaskGraph, provider: SimilarityProvider
) -> NodeMetricsReport:
    """Score one prediction against its gold task."""
    if gold.task_id != pred.task_id:
        raise ValidationError(
            f"gold task {gold.task_id!r} and prediction task {pred.task_id!r} differ"
        )
    scores = _score_task(gold, pred, provider)
    return NodeMetricsReport(
        aggregate=scores,
        per_task={gold.task_id: scores},
        meta={"aggregation": "single_task", "n_tasks": 1},
    )


def _corpus_worker(
    payload: tuple[TaskGraph, TaskGraph, SimilarityProvider],
) -> tuple[str, dict[str, FamilyScores]]:
    gold, pred, provider = payload
    return gold.task_id, _score_task(gold, pred, provider)


def check_task_coverage(gold: Dataset, preds: Dataset) -> None:
    """Require exactly one prediction per gold task, nothing extra."""
    gold_ids = set(gold.by_id)
    pred_ids = set(preds.by_id)
    missing = gold_ids - pred_ids
    if missing:
        raise ValidationError(f"missing predictions for tasks: {sorted(missing)}")
    extras = pred_ids - gold_ids
    if extras:
        raise ValidationError(f"predictions for unknown tasks: {sorted(extras)}")


def eval_corpus(
    gold: Dataset,
    preds: Dataset,
    provider: SimilarityProvider,
    *,
    jobs: int = 1,
    include_f_task_means: bool = False,
) -> NodeMetricsReport:
    """Score a whole prediction set and macro-average over tasks.

    The aggregate F1/F2 are recomputed from the averaged precision and
    recall. include_f_task_means additionally reports plain means of the
    per-task F values under meta['f_task_means'].
    """
    check_task_coverage(gold, preds)
    ordered_ids = sorted(gold.by_id)
    payloads = [(gold.by_id[tid], preds.by_id[tid], provider) for tid in ordered_ids]
    if jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = dict(pool.map(_corpus_worker, payloads, chunksize=8))
    else:
        results = dict(map(_corpus_worker, payloads))

    per_task = {tid: results[tid] for tid in ordered_ids}
    n = len(ordered_ids)
    aggregate: dict[str, FamilyScores] = {}
    task_means: dict[str, dict[str, float]] = {}
    for family in FAMILIES:
        mean_p = sum(per_task[tid][family].precision for tid in ordered_ids) / n
        mean_r = sum(per_task[tid][family].recall for tid in ordered_ids) / n
        aggregate[family] = RougeScore.from_precision_recall(mean_p, mean_r)
        if include_f_task_means:
            task_means[family] = {
                "f1": sum(per_task[tid][family].f1 for tid in ordered_ids) / n,
                "f2": sum(per_task[tid][family].f2 for tid in ordered_ids) / n,
            }
    meta: dict[str, Any] = {"aggregation": "macro", "n_tasks": n}
    if include_f_task_means:
        meta["f_task_means"] = task_means
    return NodeMetricsReport(aggregate=aggregate, per_task=per_task, meta=meta)
