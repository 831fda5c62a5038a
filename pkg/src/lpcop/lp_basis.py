"""Orthonormal LP polynomials of the mid-distribution transform.

The basis is stored as an evaluation table ``T[j-1, k] = T_j(atom_k)``.
Because every ``S_j(u) = T_j(Q(u))`` is constant on the probability
cells of the marginal, no integral in this package needs quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .marginals import Marginal

DEFAULT_DEGREE_CAP = 4

_DEGENERACY_RTOL = 1e-10


class BasisError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LpBasis:
    marginal: Marginal
    degree: int
    table: np.ndarray

    def __post_init__(self):
        self.table.setflags(write=False)

    @property
    def size(self) -> int:
        return self.marginal.size

    def _check_order(self, j: int):
        if not 1 <= j <= self.degree:
            raise BasisError(f"order {j} outside 1..{self.degree}")

    def eval_u(self, j: int, u):
        """Unit-domain basis ``S_j(u) = T_j(Q(u))``."""
        self._check_order(j)
        try:
            cells = self.marginal.cell(u)
        except ValueError as exc:
            raise BasisError(str(exc)) from None
        out = self.table[j - 1, cells]
        return float(out) if np.ndim(out) == 0 else out

    def eval_x(self, j: int, x):
        """``T_j(x)`` for ``x`` on the support."""
        self._check_order(j)
        out = self.table[j - 1, self.marginal.locate(x)]
        return float(out[0]) if np.ndim(x) == 0 else out

    def at(self, x, snap: bool = False) -> np.ndarray:
        """All orders evaluated at ``x``: array of shape ``(degree, len(x))``.

        With ``snap=True`` off-support values take the nearest atom's value.
        """
        idx = self.marginal.nearest(x) if snap else self.marginal.locate(x)
        return self.table[:, idx]

    def gram(self) -> np.ndarray:
        """Gram matrix ``<T_i, T_j>`` under the marginal's measure."""
        return (self.table * self.marginal.probs) @ self.table.T


def max_degree_default(m: Marginal, cap: int = DEFAULT_DEGREE_CAP) -> int:
    """Largest usable order: ``min(K - 1, cap)`` for ``K`` atoms."""
    if cap < 1:
        raise BasisError("degree cap must be at least 1")
    return min(m.size - 1, cap)


def first_order(m: Marginal) -> np.ndarray:
    """Standardised mid-distribution transform evaluated at the atoms."""
    p = m.probs
    return np.sqrt(12.0) * (m.mid - 0.5) / np.sqrt(1.0 - np.sum(p ** 3))


def build(m: Marginal, degree: int) -> LpBasis:
    """Build ``T_1..T_degree`` for ``m``.

    Higher orders come from modified Gram-Schmidt on the powers
    ``T_1**j`` against the constant and the lower orders, with a second
    re-orthogonalisation pass.

    Raises
    ------
    BasisError
        If ``degree`` exceeds ``K - 1`` or a power becomes numerically
        dependent on the lower orders.
    """
    degree = int(degree)
    if degree < 1:
        raise BasisError("basis order must be at least 1")
    if degree > m.size - 1:
        raise BasisError("basis order exceeds support size")
    w = m.probs
    t1 = first_order(m)
    rows = [np.ones_like(t1), t1]
    for j in range(2, degree + 1):
        v = t1 ** j
        before = np.sqrt(np.dot(w, v * v))
        for _ in range(2):
            for r in rows:
                v = v - np.dot(w, v * r) * r
        norm = np.sqrt(np.dot(w, v * v))
        if norm < _DEGENERACY_RTOL * before:
            raise BasisError(f"degenerate basis at order {j}")
        rows.append(v / norm)
    return LpBasis(marginal=m, degree=degree, table=np.array(rows[1:]))
