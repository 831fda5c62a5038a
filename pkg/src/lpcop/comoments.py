"""LP-comeans and PenSum constraint selection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lp_basis import LpBasis


@dataclass(frozen=True, eq=False)
class CoMomentTable:
    """Empirical LP-comeans ``values[j-1, k-1] = mean_i T_j(x_i) T_k(y_i)``."""

    values: np.ndarray
    n: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __getitem__(self, jk: tuple[int, int]) -> float:
        j, k = jk
        return float(self.values[j - 1, k - 1])


@dataclass(frozen=True)
class SelectionResult:
    """Selected index pairs (1-based, ordered by decreasing |comean|)."""

    chosen: tuple[tuple[int, int], ...]
    pensum_trace: tuple[float, ...]
    gamma: float

    def __len__(self) -> int:
        return len(self.chosen)


def comoments_from_indices(bx: LpBasis, by: LpBasis, ix, iy, weights=None) -> CoMomentTable:
    """Comeans from atom indices, optionally weighted by cell counts."""
    ix = np.asarray(ix, dtype=int)
    iy = np.asarray(iy, dtype=int)
    if ix.size == 0:
        raise ValueError("no observations")
    if ix.shape != iy.shape:
        raise ValueError("x and y index vectors differ in length")
    w = np.ones(ix.size) if weights is None else np.asarray(weights, dtype=float)
    n = w.sum()
    tx = bx.table[:, ix]
    ty = by.table[:, iy]
    values = (tx * w) @ ty.T / n
    return CoMomentTable(values=values, n=int(round(n)))


def comoments(bx: LpBasis, by: LpBasis, pairs) -> CoMomentTable:
    """LP-comeans of observed ``(x, y)`` pairs.

    Every ``x`` (``y``) must be an atom of ``bx`` (``by``).
    """
    arr = np.asarray(pairs, dtype=float)
    if arr.size == 0:
        raise ValueError("no observations")
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("pairs must have shape (n, 2)")
    return comoments_from_indices(bx, by, bx.marginal.locate(arr[:, 0]),
                                  by.marginal.locate(arr[:, 1]))


def penalty_gamma(penalty: str | float, n: int) -> float | None:
    """Map ``"aic"``/``"bic"``/``"none"`` or a number to the PenSum constant.

    ``None`` means no pruning: every comean is kept.
    """
    if isinstance(penalty, str):
        key = penalty.lower()
        if key == "aic":
            return 2.0
        if key == "bic":
            return math.log(n)
        if key == "none":
            return None
        raise ValueError(f"unknown penalty {penalty!r}")
    gamma = float(penalty)
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return gamma


def _ranked(values: np.ndarray) -> list[tuple[int, int]]:
    m1, m2 = values.shape
    keys = [(-abs(values[j, k]), j + k, j, (j + 1, k + 1)) for j in range(m1) for k in range(m2)]
    keys.sort(key=lambda t: t[:3])
    return [t[3] for t in keys]


def select(t: CoMomentTable, gamma: float | None = 2.0) -> SelectionResult:
    """Keep the top-q comeans maximising ``PenSum(q)``.

    ``PenSum(q) = sum of the q largest squared comeans - gamma * q / n``.
    Equal magnitudes are ordered by lower ``j + k`` and then lower ``j``.
    If no ``PenSum(q)`` is positive the selection is empty (independence).
    ``gamma=None`` keeps every index, ordered the same way.
    """
    ranked = _ranked(t.values)
    if gamma is None:
        return SelectionResult(chosen=tuple(ranked), pensum_trace=(), gamma=0.0)
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    sq = np.array([t.values[j - 1, k - 1] ** 2 for j, k in ranked])
    trace = np.cumsum(sq) - gamma / t.n * np.arange(1, sq.size + 1)
    best = int(np.argmax(trace))
    q = best + 1 if trace[best] > 0 else 0
    return SelectionResult(chosen=tuple(ranked[:q]), pensum_trace=tuple(trace.tolist()),
                           gamma=float(gamma))
