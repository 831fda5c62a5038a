"""Two-way contingency tables."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .marginals import Marginal, from_counts


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    """Integer cell counts ``f[k, l]`` with numeric row/column labels.

    Labels are the support values of X (rows) and Y (columns); for
    nominal categories they default to ``0..I-1``.  ``row_names`` and
    ``col_names`` are display strings only.
    """

    counts: np.ndarray
    row_labels: np.ndarray = None
    col_labels: np.ndarray = None
    row_names: tuple[str, ...] = field(default=None)
    col_names: tuple[str, ...] = field(default=None)

    def __post_init__(self):
        f = np.asarray(self.counts)
        if f.ndim != 2 or f.size == 0:
            raise ValueError("counts must be a non-empty 2-d array")
        if np.any(f < 0) or np.any(f != np.round(f)):
            raise ValueError("counts must be nonnegative integers")
        f = f.astype(np.int64)
        if f.sum() <= 0:
            raise ValueError("table is empty")
        I, J = f.shape
        rl = np.arange(I, dtype=float) if self.row_labels is None else np.asarray(self.row_labels, dtype=float)
        cl = np.arange(J, dtype=float) if self.col_labels is None else np.asarray(self.col_labels, dtype=float)
        if rl.shape != (I,) or cl.shape != (J,):
            raise ValueError("label count does not match table shape")
        if np.any(np.diff(rl) <= 0) or np.any(np.diff(cl) <= 0):
            raise ValueError("labels must be strictly increasing")
        rn = tuple(str(s) for s in self.row_names) if self.row_names is not None else tuple(_fmt(v) for v in rl)
        cn = tuple(str(s) for s in self.col_names) if self.col_names is not None else tuple(_fmt(v) for v in cl)
        if len(rn) != I or len(cn) != J:
            raise ValueError("name count does not match table shape")
        f.setflags(write=False)
        object.__setattr__(self, "counts", f)
        object.__setattr__(self, "row_labels", rl)
        object.__setattr__(self, "col_labels", cl)
        object.__setattr__(self, "row_names", rn)
        object.__setattr__(self, "col_names", cn)

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def probs(self) -> np.ndarray:
        return self.counts / self.n

    def row_marginal(self) -> Marginal:
        return from_counts(self.row_labels, self.row_totals)

    def col_marginal(self) -> Marginal:
        return from_counts(self.col_labels, self.col_totals)

    def nonempty_cells(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(row_idx, col_idx, count)`` for cells with positive count."""
        k, l = np.nonzero(self.counts)
        return k, l, self.counts[k, l]

    def to_pairs(self) -> np.ndarray:
        """Expand to one ``(x, y)`` row per observation, row-major order."""
        k, l, c = self.nonempty_cells()
        return np.column_stack([np.repeat(self.row_labels[k], c), np.repeat(self.col_labels[l], c)])

    @classmethod
    def from_pairs(cls, x, y) -> "ContingencyTable":
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        rl, ix = np.unique(x, return_inverse=True)
        cl, iy = np.unique(y, return_inverse=True)
        f = np.zeros((rl.size, cl.size), dtype=np.int64)
        np.add.at(f, (ix, iy), 1)
        return cls(f, rl, cl)


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))
