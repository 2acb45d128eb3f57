"""Shared test utilities."""

from __future__ import annotations

from taskgraphs.sim import SimilarityProvider


class TableSimilarity(SimilarityProvider):
    """Similarity read from an explicit symmetric table; identical texts
    score 1.0 and unlisted pairs 0.0. Lets a test pin an arbitrary matrix."""

    kind = "table"

    def __init__(self, table: dict[tuple[str, str], float]) -> None:
        self.table = dict(table)
        for (a, b), value in list(table.items()):
            self.table.setdefault((b, a), value)

    def similarity(self, a: str, b: str) -> float:
        if a == b:
            return 1.0
        return self.table.get((a, b), 0.0)
