"""Command line interface.

Every subcommand reads JSONL, writes JSONL or a report, and exits 0 on
success, 1 on invalid input, 2 on I/O failure. Reports go to stdout unless
--out is given, in which case stdout carries a one-line summary instead.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any

from . import dataops, graphops, tasklama
from .core import (
    Dataset,
    StepSequenceSet,
    ValidationError,
    dump_jsonl,
    jsonl_line,
    load_jsonl,
    sequence_set_to_obj,
    task_graph_to_obj,
)
from .edgemetrics import (
    all_not_before_labels,
    eval_edges_corpus,
    eval_pairwise_corpus,
)
from .nodemetrics import eval_corpus
from .sim import (
    EMBEDDING_FORMATS,
    EmbeddingSimilarity,
    ExactMatchSimilarity,
    SimilarityProvider,
    TokenSimilarity,
    load_embeddings,
)

SIM_KINDS = ("token", "embedding", "exact")


def _add_sim_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--sim",
        choices=SIM_KINDS,
        default="token",
        help="similarity used to compare step texts (default: token)",
    )
    parser.add_argument(
        "--embeddings",
        metavar="FILE",
        help="embedding file, required with --sim embedding",
    )
    parser.add_argument(
        "--embedding-format",
        choices=EMBEDDING_FORMATS,
        default="word_text",
        help="embedding file layout (default: word_text)",
    )


def _add_report_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--format",
        choices=("json", "csv"),
        default="json",
        help="report format (default: json)",
    )
    parser.add_argument("--out", metavar="FILE", help="write the report here")


def _provider(args: argparse.Namespace) -> SimilarityProvider:
    if args.sim == "token":
        return TokenSimilarity()
    if args.sim == "exact":
        return ExactMatchSimilarity()
    if not args.embeddings:
        raise ValidationError("--sim embedding requires --embeddings")
    store = load_embeddings(args.embeddings, args.embedding_format)
    return EmbeddingSimilarity(store)


def _write_report(report: Any, args: argparse.Namespace, summary: str) -> None:
    if args.format == "csv":
        text = report.to_csv()
    else:
        text = json.dumps(report.to_json_obj(), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"{summary} -> {args.out}")
    else:
        sys.stdout.write(text)


def _write_json(obj: dict[str, Any], out: str | None, summary: str) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
        print(f"{summary} -> {out}")
    else:
        sys.stdout.write(text)


def _write_stream(objs: list[dict[str, Any]], out: str | None, label: str) -> None:
    if out:
        dump_jsonl(objs, out)
        print(f"{label}: wrote {len(objs)} records -> {out}")
    else:
        for obj in objs:
            sys.stdout.write(jsonl_line(obj) + "\n")


def _load_dataset(path: str) -> Dataset:
    ds = load_jsonl(path, "graph")
    assert isinstance(ds, Dataset)
    return ds


# ---------------------------------------------------------------------------
# Evaluation commands


def cmd_eval_nodes(args: argparse.Namespace) -> int:
    gold = _load_dataset(args.gold)
    preds = _load_dataset(args.pred)
    report = eval_corpus(
        gold,
        preds,
        _provider(args),
        jobs=args.jobs,
        include_f_task_means=args.task_means,
    )
    hungarian_f1 = report.aggregate["hungarian"].f1
    summary = (
        f"eval-nodes: {report.meta['n_tasks']} tasks, hungarian F1 {hungarian_f1:.4f}"
    )
    _write_report(report, args, summary)
    return 0


def cmd_eval_edges(args: argparse.Namespace) -> int:
    gold = _load_dataset(args.gold)
    preds = _load_dataset(args.pred)
    report = eval_edges_corpus(gold, preds, _provider(args), jobs=args.jobs)
    proximity = report.aggregate["step_proximity"].rouge2
    summary = (
        f"eval-edges: {report.meta['n_tasks']} tasks, "
        f"step_proximity rouge2 {proximity:.4f}"
    )
    _write_report(report, args, summary)
    return 0


def cmd_eval_pairwise(args: argparse.Namespace) -> int:
    gold = _load_dataset(args.gold)
    if args.not_before_baseline:
        labels = [
            label for g in gold.tasks for label in all_not_before_labels(g)
        ]
    elif args.labels:
        labels = load_jsonl(args.labels, "labels")
    else:
        raise ValidationError("give --labels or --not-before-baseline")
    report = eval_pairwise_corpus(gold, labels)
    summary = (
        f"eval-pairwise: accuracy {report.accuracy:.4f} over {report.n_labels} labels"
    )
    _write_report(report, args, summary)
    return 0


# ---------------------------------------------------------------------------
# Graph construction commands


def cmd_graph_from_sequences(args: argparse.Namespace) -> int:
    records = load_jsonl(args.input, "sequences")
    graphs = [graphops.aggregate_sequences(s, output=args.emit) for s in records]
    _write_stream([task_graph_to_obj(g) for g in graphs], args.out, "graph-from-sequences")
    return 0


def _only_sequence(record) -> tuple[str, ...]:
    if len(record.sequences) != 1:
        raise ValidationError(
            f"expected exactly one sequence, found {len(record.sequences)}",
            task_id=record.task_id,
        )
    return record.sequences[0]


def cmd_graph_linear(args: argparse.Namespace) -> int:
    records = load_jsonl(args.input, "sequences")
    graphs = [
        graphops.linear_graph(
            _only_sequence(r), task_id=r.task_id, task=r.task, context=r.context
        )
        for r in records
    ]
    _write_stream([task_graph_to_obj(g) for g in graphs], args.out, "graph-linear")
    return 0


def cmd_decycle(args: argparse.Namespace) -> int:
    graphs = [graphops.decycle(g) for g in _load_dataset(args.input).tasks]
    _write_stream([task_graph_to_obj(g) for g in graphs], args.out, "decycle")
    return 0


def cmd_merge_sequences(args: argparse.Namespace) -> int:
    provider = _provider(args)
    out_objs = []
    for record in load_jsonl(args.input, "sequences"):
        merged = graphops.dedup_merge(record, provider, args.threshold)
        merged_record = StepSequenceSet(
            task_id=record.task_id,
            task=record.task,
            sequences=(tuple(merged),),
            context=record.context,
        )
        out_objs.append(sequence_set_to_obj(merged_record))
    _write_stream(out_objs, args.out, "merge-sequences")
    return 0


def cmd_fit_threshold(args: argparse.Namespace) -> int:
    pairs = graphops.load_labeled_pairs(args.pairs)
    fit = graphops.fit_dedup_threshold(pairs, _provider(args))
    summary = f"fit-threshold: threshold {fit.threshold:.6g}, accuracy {fit.accuracy:.4f}"
    _write_json(
        {"threshold": fit.threshold, "accuracy": fit.accuracy}, args.out, summary
    )
    return 0


# ---------------------------------------------------------------------------
# Sequence scoring commands


def cmd_sf_dataset(args: argparse.Namespace) -> int:
    gold = _load_dataset(args.gold)
    candidates = load_jsonl(args.candidates, "sequences")
    scored = graphops.build_sf_training_set(gold, candidates, _provider(args))
    _write_stream(
        [graphops.scored_sequence_to_obj(s) for s in scored], args.out, "sf-dataset"
    )
    return 0


def cmd_swap_candidates(args: argparse.Namespace) -> int:
    out_objs = []
    for record in load_jsonl(args.input, "sequences"):
        seq = _only_sequence(record)
        variants = graphops.swap_candidates(seq, limit=args.limit)
        if not variants:
            logging.getLogger(__name__).warning(
                "task %r: single-step sequence has no swap variants, skipped",
                record.task_id,
            )
            continue
        variant_record = StepSequenceSet(
            task_id=record.task_id,
            task=record.task,
            sequences=tuple(tuple(v) for v in variants),
            context=record.context,
        )
        out_objs.append(sequence_set_to_obj(variant_record))
    _write_stream(out_objs, args.out, "swap-candidates")
    return 0


def cmd_select_top(args: argparse.Namespace) -> int:
    scored = graphops.load_scored_sequences(args.input)
    groups: dict[str, list] = {}
    order: list[str] = []
    for s in scored:
        if s.task_id not in groups:
            groups[s.task_id] = []
            order.append(s.task_id)
        groups[s.task_id].append(s)
    kept = []
    for tid in order:
        kept.extend(graphops.select_top_sequences(groups[tid], args.keep_fraction))
    _write_stream(
        [graphops.scored_sequence_to_obj(s) for s in kept], args.out, "select-top"
    )
    return 0


# ---------------------------------------------------------------------------
# Dataset commands


def cmd_split_dataset(args: argparse.Namespace) -> int:
    ds = _load_dataset(args.input)
    fractions = dataops.parse_fractions(args.fractions)
    assignment = dataops.cluster_split(
        ds,
        _provider(args),
        fractions=fractions,
        link_threshold=args.link_threshold,
        seed=args.seed,
    )
    counts = {name: 0 for name in dataops.SPLIT_NAMES}
    for name in assignment.split.values():
        counts[name] += 1
    summary = "split-dataset: " + ", ".join(
        f"{name} {counts[name]}" for name in dataops.SPLIT_NAMES
    )
    _write_json(
        {
            "split": dict(assignment.split),
            "clusters": [list(c) for c in assignment.clusters],
        },
        args.out,
        summary,
    )
    return 0


def cmd_baseline_repeat_task(args: argparse.Namespace) -> int:
    graphs = [
        dataops.repeat_task_baseline(g.task, args.m, task_id=g.task_id, context=g.context)
        for g in _load_dataset(args.input).tasks
    ]
    _write_stream(
        [task_graph_to_obj(g) for g in graphs], args.out, "baseline-repeat-task"
    )
    return 0


def cmd_baseline_repeat_similar(args: argparse.Namespace) -> int:
    store = load_embeddings(args.embeddings, args.embedding_format)
    stopwords = dataops.load_stopwords(args.stopwords)
    graphs = [
        dataops.repeat_similar_baseline(
            g.task,
            args.m,
            store,
            task_id=g.task_id,
            k=args.k,
            seed=args.seed ^ index,
            stopwords=stopwords,
            context=g.context,
        )
        for index, g in enumerate(_load_dataset(args.input).tasks)
    ]
    _write_stream(
        [task_graph_to_obj(g) for g in graphs], args.out, "baseline-repeat-similar"
    )
    return 0


def cmd_convert_tasklama(args: argparse.Namespace) -> int:
    ds = tasklama.convert_archive(args.archive)
    stats = tasklama.dataset_stats(ds)
    objs = [task_graph_to_obj(g) for g in ds.tasks]
    if args.out:
        dump_jsonl(objs, args.out)
        print(
            f"convert-tasklama: {stats['tasks']} tasks, {stats['steps']} steps, "
            f"{stats['edges']} edges -> {args.out}"
        )
    else:
        for obj in objs:
            sys.stdout.write(jsonl_line(obj) + "\n")
        print(
            f"convert-tasklama: {stats['tasks']} tasks, {stats['steps']} steps, "
            f"{stats['edges']} edges",
            file=sys.stderr,
        )
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taskgraphs",
        description="Evaluate and construct step-dependency graphs for complex tasks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval-nodes", help="step-content metrics for predictions")
    p.add_argument("--gold", required=True, metavar="FILE")
    p.add_argument("--pred", required=True, metavar="FILE")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default: 1)")
    p.add_argument(
        "--task-means",
        action="store_true",
        help="also report plain means of per-task F scores",
    )
    _add_sim_options(p)
    _add_report_options(p)
    p.set_defaults(func=cmd_eval_nodes)

    p = sub.add_parser("eval-edges", help="dependency metrics for predictions")
    p.add_argument("--gold", required=True, metavar="FILE")
    p.add_argument("--pred", required=True, metavar="FILE")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default: 1)")
    _add_sim_options(p)
    _add_report_options(p)
    p.set_defaults(func=cmd_eval_edges)

    p = sub.add_parser("eval-pairwise", help="accuracy of before/not_before labels")
    p.add_argument("--gold", required=True, metavar="FILE")
    p.add_argument("--labels", metavar="FILE")
    p.add_argument(
        "--not-before-baseline",
        action="store_true",
        help="score the all-not_before labeler instead of --labels",
    )
    _add_report_options(p)
    p.set_defaults(func=cmd_eval_pairwise)

    p = sub.add_parser(
        "graph-from-sequences", help="merge alternative orderings into graphs"
    )
    p.add_argument("--in", dest="input", required=True, metavar="FILE")
    p.add_argument(
        "--emit",
        choices=graphops.AGGREGATE_OUTPUTS,
        default="reduction",
        help="edge set to emit (default: reduction)",
    )
    p.add_argument("--out", metavar="FILE")
    p.set_defaults(func=cmd_graph_from_sequences)

    p = sub.add_parser("graph-linear", help="chain graphs from single sequences")
    p.add_argument("--in", dest="input", required=True, metavar="FILE")
    p.add_argument("--out", metavar="FILE")
    p.set_defaults(func=cmd_graph_linear)

    p = sub.add_parser("decycle", help="drop edges inside dependency cycles")
    p.add_argument("--in", dest="input", required=True, metavar="FILE")
    p.add_argument("--out", metavar="FILE")
    p.set_defaults(func=cmd_decycle)

    p = sub.add_parser(
        "merge-sequences", help="concatenate sequences, dropping near-duplicate steps"
    )
    p.add_argument("--in", dest="input", required=True, metavar="FILE")
    p.add_argument(
        "--threshold",
        type=float,
        required=True,
        help="drop a step when similarity to a kept step exceeds this",
    )
    _add_sim_options(p)
    p.add_argument("--out", metavar="FILE")
    p.set_defaults(func=cmd_merge_sequences)

    p = sub.add_parser(
        "fit-threshold", help="fit the duplicate threshold on labeled pairs"
    )
    p.add_argument("--pairs", required=True, metavar="FILE")
    _add_sim_options(p)
    p.add_argument("--out", metavar="FILE")
    p.set_defaults(func=cmd_fit_threshold)

    p = sub.add_parser(
        "sf-dataset", help="score candidate sequences against gold steps"
    )
    p.add_argument("--gold", required=True, metavar="FILE")
    p.add_argument("--candidates", required=True, metavar="FILE")
    _add_sim_options(p)
    p.add_argument("--out", metavar="FILE")
    p.set_defaults(func=cmd_sf_dataset)

    p = sub.add_parser(
        "swap-candidates", help="single-swap reorderings of each sequence"
    )
    p.add_argument("--in", dest="input", required=True, metavar="FILE")
    p.add_argument(
        "--limit", type=int, default=128, help="max variants per sequence (default: 128)"
    )
    p.add_argument("--out", metavar="FILE")
    p.set_defaults(func=cmd_swap_candidates)

    p = sub.add_parser("select-top", help="keep the best-scored sequences per task")
    p.add_argument("--in", dest="input", required=True, metavar="FILE")
    p.add_argument(
        "--keep-fraction",
        type=float,
        default=0.5,
        help="fraction of each task's sequences to keep (default: 0.5)",
    )
    p.add_argument("--out", metavar="FILE")
    p.set_defaults(func=cmd_select_top)

    p = sub.add_parser(
        "split-dataset", help="similarity-aware train/validation/test split"
    )
    p.add_argument("--in", dest="input", required=True, metavar="FILE")
    p.add_argument(
        "--fractions",
        default="0.6,0.1,0.3",
        help="train,validation,test shares (default: 0.6,0.1,0.3)",
    )
    p.add_argument(
        "--link-threshold",
        type=float,
        default=0.6,
        help="task-text similarity above which tasks stay together (default: 0.6)",
    )
    p.add_argument("--seed", type=int, default=0)
    _add_sim_options(p)
    p.add_argument("--out", metavar="FILE")
    p.set_defaults(func=cmd_split_dataset)

    p = sub.add_parser(
        "baseline-repeat-task", help="chain of m copies of the task text"
    )
    p.add_argument("--in", dest="input", required=True, metavar="FILE")
    p.add_argument("-m", type=int, required=True, help="steps per task")
    p.add_argument("--out", metavar="FILE")
    p.set_defaults(func=cmd_baseline_repeat_task)

    p = sub.add_parser(
        "baseline-repeat-similar",
        help="chain of m task copies with one token swapped per step",
    )
    p.add_argument("--in", dest="input", required=True, metavar="FILE")
    p.add_argument("-m", type=int, required=True, help="steps per task")
    p.add_argument("--embeddings", required=True, metavar="FILE")
    p.add_argument(
        "--embedding-format",
        choices=EMBEDDING_FORMATS,
        default="word_text",
        help="embedding file layout (default: word_text)",
    )
    p.add_argument("-k", type=int, default=20, help="neighbor pool size (default: 20)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stopwords", metavar="FILE", help="override the bundled stopword list")
    p.add_argument("--out", metavar="FILE")
    p.set_defaults(func=cmd_baseline_repeat_similar)

    p = sub.add_parser(
        "convert-tasklama", help="convert a published task archive to graph JSONL"
    )
    p.add_argument("--archive", required=True, metavar="PATH")
    p.add_argument("--out", metavar="FILE")
    p.set_defaults(func=cmd_convert_tasklama)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
