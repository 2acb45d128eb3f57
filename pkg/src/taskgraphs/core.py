"""Canonical record types and JSONL (de)serialization for step graphs.

The interchange format is JSONL: one record per line, UTF-8. Unknown JSON
fields are preserved on load and re-emitted on save, but never interpreted.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

from .textnorm import normalize_text

VALID_SPLITS = ("train", "validation", "test")
VALID_LABELS = ("before", "not_before")

_GRAPH_FIELDS = {"task_id", "task", "context", "steps", "edges"}
_SEQ_FIELDS = {"task_id", "task", "context", "sequences"}
_LABEL_FIELDS = {"task_id", "step_a", "step_b", "label"}


class ValidationError(ValueError):
    """A record violates the schema or a type invariant.

    Carries enough context (line number, task id, field) to locate the
    offending record in its source file.
    """

    def __init__(
        self,
        message: str,
        *,
        task_id: str | None = None,
        line: int | None = None,
        field_name: str | None = None,
    ) -> None:
        parts = []
        if line is not None:
            parts.append(f"line {line}")
        if task_id is not None:
            parts.append(f"task {task_id!r}")
        if field_name is not None:
            parts.append(f"field {field_name!r}")
        prefix = ", ".join(parts)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.task_id = task_id
        self.line = line
        self.field_name = field_name


@dataclass(frozen=True)
class Step:
    """One step of a task: an opaque id plus the step text."""

    id: str
    text: str

    def __post_init__(self) -> None:
        if not isinstance(self.id, str) or not self.id:
            raise ValidationError("step id must be a nonempty string", field_name="id")
        if not isinstance(self.text, str) or not self.text.strip():
            raise ValidationError(
                "step text must be nonempty after whitespace trimming",
                field_name="text",
            )


@dataclass(frozen=True)
class TaskGraph:
    """A task with its steps and directed precedence edges.

    Edges point from a step to a step that depends on it. Acyclicity is not
    required at ingestion; use validate_dag or graphops.decycle when a DAG
    is needed.
    """

    task_id: str
    task: str
    steps: tuple[Step, ...]
    edges: tuple[tuple[str, str], ...] = ()
    context: str | None = None
    extra: dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        if not isinstance(self.task_id, str) or not self.task_id:
            raise ValidationError("task_id must be a nonempty string", field_name="task_id")
        if not isinstance(self.task, str):
            raise ValidationError(
                "task must be a string", task_id=self.task_id, field_name="task"
            )
        object.__setattr__(self, "steps", tuple(self.steps))
        object.__setattr__(
            self, "edges", tuple((str(a), str(b)) for a, b in self.edges)
        )
        seen: set[str] = set()
        for s in self.steps:
            if s.id in seen:
                raise ValidationError(
                    f"duplicate step id {s.id!r}", task_id=self.task_id, field_name="steps"
                )
            seen.add(s.id)
        edge_seen: set[tuple[str, str]] = set()
        for a, b in self.edges:
            if a not in seen or b not in seen:
                missing = a if a not in seen else b
                raise ValidationError(
                    f"edge endpoint {missing!r} is not a step id",
                    task_id=self.task_id,
                    field_name="edges",
                )
            if a == b:
                raise ValidationError(
                    f"self-loop on step {a!r}", task_id=self.task_id, field_name="edges"
                )
            if (a, b) in edge_seen:
                raise ValidationError(
                    f"duplicate edge {a!r} -> {b!r}",
                    task_id=self.task_id,
                    field_name="edges",
                )
            edge_seen.add((a, b))

    @cached_property
    def step_by_id(self) -> dict[str, Step]:
        return {s.id: s for s in self.steps}

    @cached_property
    def parent_ids(self) -> dict[str, tuple[str, ...]]:
        """Map step id to the ids of steps it directly depends on."""
        parents: dict[str, list[str]] = {s.id: [] for s in self.steps}
        for a, b in self.edges:
            parents[b].append(a)
        return {k: tuple(v) for k, v in parents.items()}

    @cached_property
    def child_ids(self) -> dict[str, tuple[str, ...]]:
        """Map step id to the ids of steps that directly depend on it."""
        children: dict[str, list[str]] = {s.id: [] for s in self.steps}
        for a, b in self.edges:
            children[a].append(b)
        return {k: tuple(v) for k, v in children.items()}


@dataclass(frozen=True)
class StepSequenceSet:
    """Alternative step orderings for one task, e.g. sampled generations."""

    task_id: str
    task: str
    sequences: tuple[tuple[str, ...], ...]
    context: str | None = None
    extra: dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        if not isinstance(self.task_id, str) or not self.task_id:
            raise ValidationError("task_id must be a nonempty string", field_name="task_id")
        object.__setattr__(
            self, "sequences", tuple(tuple(seq) for seq in self.sequences)
        )
        if not self.sequences:
            raise ValidationError(
                "at least one sequence is required",
                task_id=self.task_id,
                field_name="sequences",
            )
        for i, seq in enumerate(self.sequences):
            if not seq:
                raise ValidationError(
                    f"sequence {i} is empty", task_id=self.task_id, field_name="sequences"
                )
            norm_seen: set[str] = set()
            for text in seq:
                if not isinstance(text, str) or not text.strip():
                    raise ValidationError(
                        f"sequence {i} contains an empty step text",
                        task_id=self.task_id,
                        field_name="sequences",
                    )
                norm = normalize_text(text)
                if norm in norm_seen:
                    raise ValidationError(
                        f"sequence {i} repeats step {text!r} after normalization",
                        task_id=self.task_id,
                        field_name="sequences",
                    )
                norm_seen.add(norm)


@dataclass(frozen=True)
class PairwiseOrderLabel:
    """A judgment about one ordered step pair of a task."""

    task_id: str
    step_a: str
    step_b: str
    label: str
    extra: dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        if not isinstance(self.task_id, str) or not self.task_id:
            raise ValidationError("task_id must be a nonempty string", field_name="task_id")
        if self.step_a == self.step_b:
            raise ValidationError(
                f"step_a and step_b are both {self.step_a!r}",
                task_id=self.task_id,
                field_name="step_b",
            )
        if self.label not in VALID_LABELS:
            raise ValidationError(
                f"label must be one of {VALID_LABELS}, got {self.label!r}",
                task_id=self.task_id,
                field_name="label",
            )


@dataclass(frozen=True)
class Dataset:
    """A collection of task graphs, optionally carrying a split assignment."""

    tasks: tuple[TaskGraph, ...]
    split: dict[str, str] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "tasks", tuple(self.tasks))
        seen: set[str] = set()
        for t in self.tasks:
            if t.task_id in seen:
                raise ValidationError(f"duplicate task_id {t.task_id!r}")
            seen.add(t.task_id)
        if self.split is not None:
            for task_id, split in self.split.items():
                if task_id not in seen:
                    raise ValidationError(
                        f"split assigns unknown task_id {task_id!r}", field_name="split"
                    )
                if split not in VALID_SPLITS:
                    raise ValidationError(
                        f"split must be one of {VALID_SPLITS}, got {split!r}",
                        task_id=task_id,
                        field_name="split",
                    )
            missing = seen - set(self.split)
            if missing:
                raise ValidationError(
                    f"split misses task_ids: {sorted(missing)}", field_name="split"
                )

    @cached_property
    def by_id(self) -> dict[str, TaskGraph]:
        return {t.task_id: t for t in self.tasks}


def validate_dag(g: TaskGraph) -> tuple[bool, list[str] | None]:
    """Check acyclicity; on failure return one cycle as a step-id list."""
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {s.id: WHITE for s in g.steps}
    parent: dict[str, str] = {}
    children = g.child_ids
    for s in g.steps:
        if color[s.id] != WHITE:
            continue
        color[s.id] = GRAY
        stack: list[tuple[str, int]] = [(s.id, 0)]
        while stack:
            node, idx = stack[-1]
            kids = children[node]
            if idx < len(kids):
                stack[-1] = (node, idx + 1)
                child = kids[idx]
                if color[child] == WHITE:
                    color[child] = GRAY
                    parent[child] = node
                    stack.append((child, 0))
                elif color[child] == GRAY:
                    walk = [node]
                    cur = node
                    while cur != child:
                        cur = parent[cur]
                        walk.append(cur)
                    walk.reverse()
                    return False, walk
            else:
                color[node] = BLACK
                stack.pop()
    return True, None


# ---------------------------------------------------------------------------
# JSONL parsing


def _require_str(obj: Mapping[str, Any], key: str, line: int) -> str:
    value = obj.get(key)
    if not isinstance(value, str):
        raise ValidationError(
            f"expected a string for {key!r}, got {type(value).__name__}",
            line=line,
            field_name=key,
        )
    return value


def _optional_context(obj: Mapping[str, Any], line: int) -> str | None:
    value = obj.get("context")
    if value is None:
        return None
    if not isinstance(value, str):
        raise ValidationError(
            "context must be a string or null", line=line, field_name="context"
        )
    return value


def _extra_fields(obj: Mapping[str, Any], known: set[str]) -> dict[str, Any]:
    return {k: v for k, v in obj.items() if k not in known}


def _parse_graph(obj: Mapping[str, Any], line: int) -> TaskGraph:
    task_id = _require_str(obj, "task_id", line)
    task = _require_str(obj, "task", line)
    raw_steps = obj.get("steps")
    if not isinstance(raw_steps, list):
        raise ValidationError(
            "steps must be a list", line=line, task_id=task_id, field_name="steps"
        )
    steps = []
    for i, rs in enumerate(raw_steps):
        if not isinstance(rs, Mapping) or not isinstance(rs.get("id"), str) or not isinstance(rs.get("text"), str):
            raise ValidationError(
                f"step {i} must be an object with string 'id' and 'text'",
                line=line,
                task_id=task_id,
                field_name="steps",
            )
        try:
            steps.append(Step(id=rs["id"], text=rs["text"]))
        except ValidationError as exc:
            raise ValidationError(
                f"step {i}: {exc}", line=line, task_id=task_id, field_name="steps"
            ) from exc
    raw_edges = obj.get("edges", [])
    if not isinstance(raw_edges, list):
        raise ValidationError(
            "edges must be a list", line=line, task_id=task_id, field_name="edges"
        )
    edges = []
    for i, re_ in enumerate(raw_edges):
        if (
            not isinstance(re_, (list, tuple))
            or len(re_) != 2
            or not all(isinstance(x, str) for x in re_)
        ):
            raise ValidationError(
                f"edge {i} must be a pair of step ids",
                line=line,
                task_id=task_id,
                field_name="edges",
            )
        edges.append((re_[0], re_[1]))
    try:
        return TaskGraph(
            task_id=task_id,
            task=task,
            steps=tuple(steps),
            edges=tuple(edges),
            context=_optional_context(obj, line),
            extra=_extra_fields(obj, _GRAPH_FIELDS),
        )
    except ValidationError as exc:
        raise ValidationError(str(exc), line=line) from exc


def _parse_sequences(obj: Mapping[str, Any], line: int) -> StepSequenceSet:
    task_id = _require_str(obj, "task_id", line)
    task = _require_str(obj, "task", line)
    raw = obj.get("sequences")
    if not isinstance(raw, list) or not all(isinstance(s, list) for s in raw):
        raise ValidationError(
            "sequences must be a list of lists",
            line=line,
            task_id=task_id,
            field_name="sequences",
        )
    for seq in raw:
        for text in seq:
            if not isinstance(text, str):
                raise ValidationError(
                    "sequence entries must be strings",
                    line=line,
                    task_id=task_id,
                    field_name="sequences",
                )
    try:
        return StepSequenceSet(
            task_id=task_id,
            task=task,
            sequences=tuple(tuple(s) for s in raw),
            context=_optional_context(obj, line),
            extra=_extra_fields(obj, _SEQ_FIELDS),
        )
    except ValidationError as exc:
        raise ValidationError(str(exc), line=line) from exc


def _parse_label(obj: Mapping[str, Any], line: int) -> PairwiseOrderLabel:
    try:
        return PairwiseOrderLabel(
            task_id=_require_str(obj, "task_id", line),
            step_a=_require_str(obj, "step_a", line),
            step_b=_require_str(obj, "step_b", line),
            label=_require_str(obj, "label", line),
            extra=_extra_fields(obj, _LABEL_FIELDS),
        )
    except ValidationError as exc:
        raise ValidationError(str(exc), line=line) from exc


def iter_jsonl(path: str | Path) -> Iterable[tuple[int, Any]]:
    """Yield (line_number, parsed_object) for every nonblank line."""
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                yield line_no, json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"malformed JSON: {exc.msg}", line=line_no) from exc


def load_jsonl(
    path: str | Path, kind: str = "graph"
) -> Dataset | list[StepSequenceSet] | list[PairwiseOrderLabel]:
    """Load a JSONL file of the given kind.

    kind 'graph' returns a Dataset; 'sequences' a list of StepSequenceSet;
    'labels' a list of PairwiseOrderLabel.
    """
    parsers = {"graph": _parse_graph, "sequences": _parse_sequences, "labels": _parse_label}
    if kind not in parsers:
        raise ValidationError(f"unknown kind {kind!r}, expected one of {sorted(parsers)}")
    parse = parsers[kind]
    records = []
    for line_no, obj in iter_jsonl(path):
        if not isinstance(obj, Mapping):
            raise ValidationError("each line must hold a JSON object", line=line_no)
        records.append(parse(obj, line_no))
    if kind == "graph":
        return Dataset(tasks=tuple(records))
    return records


# ---------------------------------------------------------------------------
# Serialization


def step_to_obj(s: Step) -> dict[str, Any]:
    return {"id": s.id, "text": s.text}


def task_graph_to_obj(g: TaskGraph) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "task_id": g.task_id,
        "task": g.task,
        "steps": [step_to_obj(s) for s in g.steps],
        "edges": [[a, b] for a, b in g.edges],
    }
    if g.context is not None:
        obj["context"] = g.context
    obj.update(g.extra)
    return obj


def sequence_set_to_obj(s: StepSequenceSet) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "task_id": s.task_id,
        "task": s.task,
        "sequences": [list(seq) for seq in s.sequences],
    }
    if s.context is not None:
        obj["context"] = s.context
    obj.update(s.extra)
    return obj


def label_to_obj(l: PairwiseOrderLabel) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "task_id": l.task_id,
        "step_a": l.step_a,
        "step_b": l.step_b,
        "label": l.label,
    }
    obj.update(l.extra)
    return obj


def jsonl_line(obj: Mapping[str, Any]) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def dump_jsonl(objs: Iterable[Mapping[str, Any]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for obj in objs:
            fh.write(jsonl_line(obj))
            fh.write("\n")
