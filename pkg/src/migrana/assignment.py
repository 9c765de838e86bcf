"""Hungarian assignment of overflow refugees to near-capacity countries."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from migrana.errors import InputError


class Objective(str, Enum):
    MINIMIZE = "min"
    MAXIMIZE = "max"


@dataclass(frozen=True)
class CostMatrix:
    values: np.ndarray
    row_labels: tuple[str, ...] = ()
    col_labels: tuple[str, ...] = ()

    def __post_init__(self):
        c = np.array(self.values, dtype=float)
        if c.ndim != 2 or c.size == 0:
            raise InputError("cost matrix must be a non-empty 2-D array")
        if not np.all(np.isfinite(c)):
            raise InputError("cost matrix entries must be finite")
        if np.any(c < 0):
            raise InputError("cost matrix entries must be non-negative")
        rows = tuple(self.row_labels) or tuple(f"r{i}" for i in range(c.shape[0]))
        cols = tuple(self.col_labels) or tuple(f"c{j}" for j in range(c.shape[1]))
        if len(rows) != c.shape[0] or len(cols) != c.shape[1]:
            raise InputError("label counts do not match the matrix shape")
        c.setflags(write=False)
        object.__setattr__(self, "values", c)
        object.__setattr__(self, "row_labels", rows)
        object.__setattr__(self, "col_labels", cols)


@dataclass(frozen=True)
class Assignment:
    pairs: dict
    total: float
    objective: Objective
    permutation: tuple[int, ...]
    unassigned: tuple[str, ...] = field(default=())


def reduce_matrix(c) -> np.ndarray:
    """Subtract each row's minimum, then each column's minimum."""
    c = np.asarray(c.values if isinstance(c, CostMatrix) else c, dtype=float)
    if np.any(c < 0):
        raise InputError("cost matrix entries must be non-negative")
    reduced = c - c.min(axis=1, keepdims=True)
    return reduced - reduced.min(axis=0, keepdims=True)


def _hungarian_duals(c: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Optimal assignment of a square matrix with its dual potentials.

    Rows are added one at a time; each is matched by growing a tree of tight
    edges and, when the tree is stuck, shifting the potentials by the
    smallest slack among uncovered entries (the reduce/cover/adjust step in
    dual form). Returns ``(row_to_col, u, v)`` with ``u[i] + v[j] <= c[i, j]``
    and equality on matched pairs.
    """
    n = c.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    owner = np.zeros(n + 1, dtype=int)  # owner[j]: 1-based row matched to column j
    way = np.zeros(n + 1, dtype=int)
    # warm start from the row/column reduction
    u[1:] = c.min(axis=1)
    v[1:] = (c - u[1:, None]).min(axis=0)
    for i in range(1, n + 1):
        owner[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = owner[j0]
            free = ~used
            free[0] = False
            cols = np.flatnonzero(free)
            cur = c[i0 - 1, cols - 1] - u[i0] - v[cols]
            better = cur < minv[cols]
            minv[cols[better]] = cur[better]
            way[cols[better]] = j0
            j1 = cols[np.argmin(minv[cols])]
            delta = minv[j1]
            u[owner[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1
    row_to_col = np.empty(n, dtype=int)
    row_to_col[owner[1:] - 1] = np.arange(n)
    return row_to_col, u[1:], v[1:]


def _lexicographic_optimum(c: np.ndarray, match: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Smallest row-to-column permutation among all optimal ones.

    Every optimal assignment uses only tight entries of an optimal dual, so
    the search runs over the tight graph: rows are fixed in order to their
    smallest feasible column, keeping a perfect matching on the rest.
    """
    n = c.shape[0]
    eps = 1e-9 * max(1.0, float(np.abs(c).max()))
    tight = [np.flatnonzero(np.abs(c[i] - u[i] - v) <= eps).tolist() for i in range(n)]
    match = match.copy()
    col_owner = np.empty(n, dtype=int)
    col_owner[match] = np.arange(n)
    fixed_cols = set()

    def augment(row, target, first, seen):
        # alternating path from `row` to the free column `target` over unfixed rows
        for col in tight[row]:
            if col in fixed_cols or col in seen:
                continue
            seen.add(col)
            if col == target:
                match[row] = col
                col_owner[col] = row
                return True
            nxt = col_owner[col]
            if nxt >= first and augment(nxt, target, first, seen):
                match[row] = col
                col_owner[col] = row
                return True
        return False

    for i in range(n):
        for j in tight[i]:
            if j in fixed_cols:
                continue
            if match[i] == j:
                break
            saved = (match.copy(), col_owner.copy())
            freed, displaced = match[i], col_owner[j]
            match[i] = j
            col_owner[j] = i
            if augment(displaced, freed, i + 1, {j}):
                break
            match[:], col_owner[:] = saved
        fixed_cols.add(int(match[i]))
    return match


def solve_assignment(c, objective: Objective | str = Objective.MINIMIZE) -> Assignment:
    """Optimal one-to-one pairing of rows with columns.

    Rectangular matrices are padded with zero-cost dummy rows or columns;
    rows or columns paired with a dummy are listed as unassigned. Among
    optimal permutations the lexicographically smallest is returned.
    Maximization minimizes ``max_entry - entry``.
    """
    cm = c if isinstance(c, CostMatrix) else CostMatrix(c)
    objective = Objective(objective)
    m, n = cm.values.shape
    size = max(m, n)
    padded = np.zeros((size, size))
    padded[:m, :n] = cm.values
    work = padded.copy()
    if objective is Objective.MAXIMIZE:
        work[:m, :n] = cm.values.max() - cm.values
        work[m:, :] = 0.0
        work[:, n:] = 0.0
    match, u, v = _hungarian_duals(work)
    match = _lexicographic_optimum(work, match, u, v)

    pairs = {}
    unassigned = []
    for i in range(size):
        j = int(match[i])
        if i < m and j < n:
            pairs[cm.row_labels[i]] = cm.col_labels[j]
        elif i < m:
            unassigned.append(cm.row_labels[i])
        elif j < n:
            unassigned.append(cm.col_labels[j])
    total = float(sum(cm.values[i, match[i]] for i in range(m) if match[i] < n))
    return Assignment(pairs, total, objective, tuple(int(j) for j in match), tuple(unassigned))


def load_cost_matrix(source) -> CostMatrix:
    """Read a labelled matrix: header row of column labels, first column of row labels."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if len(lines) < 2:
        raise InputError("cost matrix needs a header row and at least one data row")
    delimiter = "\t" if "\t" in lines[0] else ","
    rows = list(csv.reader(io.StringIO("\n".join(lines)), delimiter=delimiter))
    col_labels = tuple(h.strip() for h in rows[0][1:])
    row_labels, values = [], []
    for r, row in enumerate(rows[1:], start=1):
        if len(row) != len(col_labels) + 1:
            raise InputError(f"cost matrix row {r} has {len(row) - 1} values, expected {len(col_labels)}")
        row_labels.append(row[0].strip())
        try:
            values.append([float(x.replace(",", "")) for x in row[1:]])
        except ValueError:
            raise InputError(f"cost matrix row {r}: non-numeric entry") from None
    return CostMatrix(np.array(values), tuple(row_labels), col_labels)
