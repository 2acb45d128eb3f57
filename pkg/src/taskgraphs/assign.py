"""Bipartite matching between predicted and gold steps.

Similarity matrices are oriented predicted-by-gold: rows are predicted steps,
columns are gold steps. The solver works on exact integers derived from the
float entries, so optima are exact and ties are broken reproducibly: among
maximum-weight matchings, the one whose (row, col) pair sequence sorted by
row is lexicographically smallest wins.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .sim import SimilarityProvider

MATCH_KINDS = ("one_to_one", "gold_duplicated", "pred_duplicated")


@dataclass(frozen=True)
class MatchedPair:
    row: int
    col: int
    similarity: float


@dataclass(frozen=True)
class Matching:
    """Result of an assignment solve.

    kind 'one_to_one' pairs each row and column at most once. The relaxed
    kinds allow one side to be used twice: 'gold_duplicated' lets up to two
    rows share a column, 'pred_duplicated' lets one row cover two columns.
    """

    kind: str
    pairs: tuple[MatchedPair, ...]
    unmatched_rows: tuple[int, ...]
    unmatched_cols: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.kind not in MATCH_KINDS:
            raise ValueError(f"kind must be one of {MATCH_KINDS}, got {self.kind!r}")
        rows = [p.row for p in self.pairs]
        cols = [p.col for p in self.pairs]
        if len(set(self.pairs)) != len(self.pairs):
            raise ValueError("matching holds a duplicate pair")
        row_cap = 2 if self.kind == "pred_duplicated" else 1
        col_cap = 2 if self.kind == "gold_duplicated" else 1
        if rows and max(map(rows.count, set(rows))) > row_cap:
            raise ValueError(f"a row is used more than {row_cap} time(s)")
        if cols and max(map(cols.count, set(cols))) > col_cap:
            raise ValueError(f"a column is used more than {col_cap} time(s)")

    @property
    def total_similarity(self) -> float:
        return sum(p.similarity for p in self.pairs)


def as_sim_matrix(matrix: object) -> np.ndarray:
    """Validate and return a 2-D float array with entries in [0, 1]."""
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"similarity matrix must be 2-D, got shape {m.shape}")
    if m.size and not np.all(np.isfinite(m)):
        raise ValueError("similarity matrix contains NaN or infinity")
    if m.size and (m.min() < 0.0 or m.max() > 1.0):
        bad = np.argwhere((m < 0.0) | (m > 1.0))[0]
        raise ValueError(
            f"similarity matrix entry at {tuple(int(x) for x in bad)} lies outside [0, 1]"
        )
    return m


def sim_matrix(
    pred_texts: Sequence[str], gold_texts: Sequence[str], provider: SimilarityProvider
) -> np.ndarray:
    """Pairwise similarities, predicted texts as rows and gold texts as
    columns. Tiny numeric spill outside [0, 1] is clamped."""
    m = np.empty((len(pred_texts), len(gold_texts)), dtype=float)
    for i, p in enumerate(pred_texts):
        for j, g in enumerate(gold_texts):
            m[i, j] = min(max(provider.similarity(p, g), 0.0), 1.0)
    return m


def legacy_scores(matrix: object) -> tuple[float, float]:
    """Precision and recall by per-side best match: precision averages each
    predicted row's maximum, recall each gold column's maximum.

    Duplicating a well-matched predicted step raises this precision, which is
    the failure mode the assignment-based scores below remove.
    """
    m = as_sim_matrix(matrix)
    if m.size == 0:
        return 0.0, 0.0
    precision = float(np.mean(np.max(m, axis=1)))
    recall = float(np.mean(np.max(m, axis=0)))
    return precision, recall


# ---------------------------------------------------------------------------
# Exact solver


def _exact_scaled_ints(m: np.ndarray) -> list[list[int]]:
    # Every float in [0, 1] is num / 2**t exactly; rescale all entries to the
    # largest t so that comparisons and sums below are exact.
    ratios = [[float(x).as_integer_ratio() for x in row] for row in m.tolist()]
    max_exp = max(den.bit_length() - 1 for row in ratios for _, den in row)
    return [
        [num << (max_exp - (den.bit_length() - 1)) for num, den in row] for row in ratios
    ]


def _lex_weighted(m: np.ndarray) -> list[list[int]]:
    # Primary objective: the exact scaled similarity. Secondary: a positional
    # bonus in base (cols + 2) that makes the lexicographically smallest
    # optimal pair sequence the unique argmax. The bonus also keeps every
    # weight positive, which forces full cardinality min(rows, cols).
    n_rows, n_cols = m.shape
    scaled = _exact_scaled_ints(m)
    base = n_cols + 2
    factor = base**n_rows
    return [
        [
            scaled[i][j] * factor + (n_cols + 1 - j) * base ** (n_rows - 1 - i)
            for j in range(n_cols)
        ]
        for i in range(n_rows)
    ]


def _solve_rows_le_cols(cost: list[list[int]]) -> list[tuple[int, int]]:
    # Shortest-augmenting-path assignment on exact integer costs, rows <= cols.
    n_rows = len(cost)
    n_cols = len(cost[0])
    inf = (max(abs(c) for row in cost for c in row) + 1) * (n_rows + n_cols + 2)
    u = [0] * n_rows
    v = [0] * (n_cols + 1)
    row_of_col = [-1] * (n_cols + 1)
    way = [0] * n_cols
    for i in range(n_rows):
        row_of_col[n_cols] = i
        j0 = n_cols
        minv = [inf] * n_cols
        used = [False] * (n_cols + 1)
        while True:
            used[j0] = True
            i0 = row_of_col[j0]
            delta = inf
            j1 = -1
            for j in range(n_cols):
                if used[j]:
                    continue
                cur = cost[i0][j] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n_cols):
                if used[j]:
                    u[row_of_col[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            u[row_of_col[n_cols]] += delta
            v[n_cols] -= delta
            j0 = j1
            if row_of_col[j0] == -1:
                break
        while j0 != n_cols:
            j1 = way[j0]
            row_of_col[j0] = row_of_col[j1]
            j0 = j1
    return [(row_of_col[j], j) for j in range(n_cols) if row_of_col[j] != -1]


def _assignment_pairs(m: np.ndarray) -> list[tuple[int, int]]:
    weights = _lex_weighted(m)
    n_rows, n_cols = m.shape
    if n_rows <= n_cols:
        cost = [[-w for w in row] for row in weights]
        return sorted(_solve_rows_le_cols(cost))
    cost = [[-weights[i][j] for i in range(n_rows)] for j in range(n_cols)]
    return sorted((i, j) for j, i in _solve_rows_le_cols(cost))


def hungarian(matrix: object) -> Matching:
    """Maximum-similarity one-to-one matching of cardinality min(rows, cols).

    The optimum is computed exactly; among equal-total matchings the pair
    sequence sorted by row compares lexicographically smallest.
    """
    m = as_sim_matrix(matrix)
    if m.size == 0:
        raise ValueError("similarity matrix must be nonempty")
    idx = _assignment_pairs(m)
    pairs = tuple(MatchedPair(i, j, float(m[i, j])) for i, j in idx)
    matched_rows = {i for i, _ in idx}
    matched_cols = {j for _, j in idx}
    return Matching(
        kind="one_to_one",
        pairs=pairs,
        unmatched_rows=tuple(i for i in range(m.shape[0]) if i not in matched_rows),
        unmatched_cols=tuple(j for j in range(m.shape[1]) if j not in matched_cols),
    )


def relaxed_match(matrix: object, side: str) -> Matching:
    """One-to-two relaxation of the one-to-one matching.

    side 'gold_duplicated' doubles the gold columns so that up to two
    predicted steps may share a gold step; use its precision. side
    'pred_duplicated' doubles the predicted rows so that one predicted step
    may cover two gold steps; use its recall.
    """
    m = as_sim_matrix(matrix)
    if m.size == 0:
        raise ValueError("similarity matrix must be nonempty")
    if side == "gold_duplicated":
        doubled = np.hstack([m, m])
        idx = [(i, j % m.shape[1]) for i, j in _assignment_pairs(doubled)]
    elif side == "pred_duplicated":
        doubled = np.vstack([m, m])
        idx = [(i % m.shape[0], j) for i, j in _assignment_pairs(doubled)]
    else:
        raise ValueError(
            f"side must be 'gold_duplicated' or 'pred_duplicated', got {side!r}"
        )
    idx.sort()
    pairs = tuple(MatchedPair(i, j, float(m[i, j])) for i, j in idx)
    matched_rows = {i for i, _ in idx}
    matched_cols = {j for _, j in idx}
    return Matching(
        kind=side,
        pairs=pairs,
        unmatched_rows=tuple(i for i in range(m.shape[0]) if i not in matched_rows),
        unmatched_cols=tuple(j for j in range(m.shape[1]) if j not in matched_cols),
    )


def match_scores(matching: Matching, n_pred: int, n_gold: int) -> tuple[float, float]:
    """Precision and recall of a matching: total matched similarity divided
    by the predicted and gold step counts. Zero counts score 0."""
    if n_pred < 0 or n_gold < 0:
        raise ValueError("step counts must be nonnegative")
    if len({p.row for p in matching.pairs}) > n_pred or len({p.col for p in matching.pairs}) > n_gold:
        raise ValueError("matching references more steps than the given counts")
    total = matching.total_similarity
    precision = total / n_pred if n_pred else 0.0
    recall = total / n_gold if n_gold else 0.0
    return precision, recall
