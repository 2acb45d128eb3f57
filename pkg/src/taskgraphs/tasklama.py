"""Converter for externally published task-decomposition archives.

Source archives vary in field naming and step/edge encoding, so the reader
maps a handful of known aliases onto the package's graph schema and reports
what it had to guess.
"""

from __future__ import annotations

import json
import logging
import zipfile
from pathlib import Path
from typing import Any

from .core import Dataset, Step, TaskGraph, ValidationError

logger = logging.getLogger(__name__)

_TASK_KEYS = ("task", "task_name", "title", "query", "goal")
_CONTEXT_KEYS = ("context", "assumption", "assumptions", "scenario")
_ID_KEYS = ("task_id", "id", "uid")
_STEP_LIST_KEYS = ("steps", "step_list", "substeps", "nodes")
_STEP_TEXT_KEYS = ("text", "step", "name", "step_text", "title")
_EDGE_KEYS = ("dependencies", "edges", "links", "dependency_edges")


def _first_str(obj: dict[str, Any], keys: tuple[str, ...]) -> str | None:
    for key in keys:
        value = obj.get(key)
        if isinstance(value, str) and value.strip():
            return value
        if isinstance(value, list) and value and all(isinstance(v, str) for v in value):
            joined = " ".join(v.strip() for v in value if v.strip())
            if joined:
                return joined
    return None


def _step_texts(obj: dict[str, Any]) -> list[str] | None:
    for key in _STEP_LIST_KEYS:
        raw = obj.get(key)
        if not isinstance(raw, list) or not raw:
            continue
        texts: list[str] = []
        for item in raw:
            if isinstance(item, str):
                texts.append(item)
            elif isinstance(item, dict):
                text = _first_str(item, _STEP_TEXT_KEYS)
                if text is None:
                    return None
                texts.append(text)
            else:
                return None
        return texts
    return None


def _edge_pairs(obj: dict[str, Any]) -> list[tuple[Any, Any]]:
    for key in _EDGE_KEYS:
        raw = obj.get(key)
        if not isinstance(raw, list):
            continue
        pairs: list[tuple[Any, Any]] = []
        for item in raw:
            if isinstance(item, (list, tuple)) and len(item) == 2:
                pairs.append((item[0], item[1]))
            elif isinstance(item, dict):
                a = item.get("from", item.get("source", item.get("before")))
                b = item.get("to", item.get("target", item.get("after")))
                if a is None or b is None:
                    continue
                pairs.append((a, b))
        return pairs
    return []


def _convert_record(obj: dict[str, Any], idx: int) -> TaskGraph | None:
    task = _first_str(obj, _TASK_KEYS)
    texts = _step_texts(obj)
    if task is None or texts is None:
        return None
    task_id = _first_str(obj, _ID_KEYS) or f"t{idx:05d}"
    context = _first_str(obj, _CONTEXT_KEYS)
    texts = [t.strip() for t in texts if t.strip()]
    if not texts:
        return None
    steps = tuple(Step(id=f"s{i}", text=text) for i, text in enumerate(texts))
    by_index = {i: s.id for i, s in enumerate(steps)}
    # Some archives count steps from 1; detect by range.
    raw_pairs = _edge_pairs(obj)
    int_pairs = [p for p in raw_pairs if isinstance(p[0], int) and isinstance(p[1], int)]
    one_based = bool(int_pairs) and all(
        1 <= a <= len(steps) and 1 <= b <= len(steps) for a, b in int_pairs
    ) and any(a == len(steps) or b == len(steps) for a, b in int_pairs)
    edges: list[tuple[str, str]] = []
    ids = {s.id for s in steps}
    for a, b in raw_pairs:
        if isinstance(a, int) and isinstance(b, int):
            if one_based:
                a, b = a - 1, b - 1
            ea, eb = by_index.get(a), by_index.get(b)
        else:
            ea = a if a in ids else None
            eb = b if b in ids else None
        if ea is None or eb is None:
            logger.warning("task %r: dropped edge with unknown endpoint (%r, %r)", task_id, a, b)
            continue
        if ea == eb:
            logger.warning("task %r: dropped self-loop on %r", task_id, ea)
            continue
        if (ea, eb) in edges:
            logger.warning("task %r: dropped duplicate edge (%r, %r)", task_id, ea, eb)
            continue
        edges.append((ea, eb))
    return TaskGraph(
        task_id=task_id,
        task=task.strip(),
        steps=steps,
        edges=tuple(edges),
        context=context,
    )


def _iter_objects(path: Path):
    if path.is_dir():
        for child in sorted(path.rglob("*")):
            if child.suffix.lower() in (".json", ".jsonl") and child.is_file():
                yield from _iter_file_objects(child.read_text("utf-8"), str(child))
        return
    if path.suffix.lower() == ".zip" or zipfile.is_zipfile(path):
        with zipfile.ZipFile(path) as zf:
            for name in sorted(zf.namelist()):
                if name.lower().endswith((".json", ".jsonl")):
                    yield from _iter_file_objects(zf.read(name).decode("utf-8"), name)
        return
    yield from _iter_file_objects(path.read_text("utf-8"), str(path))


def _iter_file_objects(text: str, source: str):
    stripped = text.lstrip()
    if not stripped:
        return
    if stripped.startswith("["):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed JSON in {source}: {exc}") from exc
        for obj in data:
            if isinstance(obj, dict):
                yield obj
        return
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(
                f"malformed JSON in {source}: {exc}", line=line_no
            ) from exc
        if isinstance(obj, dict):
            yield obj


def convert_archive(path: str | Path) -> Dataset:
    """Read a zip, directory, or single JSON/JSONL file of task records and
    convert everything recognizable into a Dataset. Records missing a task
    text or steps are skipped with a warning."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"archive not found: {path}")
    tasks: list[TaskGraph] = []
    seen_ids: set[str] = set()
    skipped = 0
    for idx, obj in enumerate(_iter_objects(path)):
        graph = _convert_record(obj, idx)
        if graph is None:
            skipped += 1
            continue
        if graph.task_id in seen_ids:
            replacement = f"{graph.task_id}-dup{idx}"
            logger.warning(
                "duplicate task id %r, renamed to %r", graph.task_id, replacement
            )
            graph = TaskGraph(
                task_id=replacement,
                task=graph.task,
                steps=graph.steps,
                edges=graph.edges,
                context=graph.context,
            )
        seen_ids.add(graph.task_id)
        tasks.append(graph)
    if skipped:
        logger.warning("skipped %d records with no recognizable task or steps", skipped)
    if not tasks:
        raise ValidationError(f"no convertible task records found in {path}")
    return Dataset(tasks=tuple(tasks))


def dataset_stats(ds: Dataset) -> dict[str, float]:
    n_steps = sum(len(t.steps) for t in ds.tasks)
    n_edges = sum(len(t.edges) for t in ds.tasks)
    n = len(ds.tasks)
    return {
        "tasks": n,
        "steps": n_steps,
        "edges": n_edges,
        "avg_steps": n_steps / n,
        "avg_edges": n_edges / n,
    }
