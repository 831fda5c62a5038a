"""Goodman association analysis from the LP-copula.

The coefficient matrix ``Theta`` of a discrete x discrete fit is
decomposed as ``U diag(mu) V^T``; the spectral row and column scores are
``phi_j = sum_i U[i, j] T_i`` and ``psi_j = sum_l V[l, j] T_l`` evaluated on
the table's categories.  This gives

    log cop(k, l) = mu_0 + sum_j mu_j phi_jk psi_jl.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contingency import ContingencyTable
from .lp_basis import build
from .maxent import MaxEntCopulaModel

_DROP_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class LogLinearModel:
    """Intrinsic association parameters and LP spectral scores.

    ``row_scores[j, k]`` is ``phi_{j+1}`` at row ``k``; likewise
    ``col_scores[j, l]``.  ``row_probs``/``col_probs`` are the weights
    under which the scores are orthonormal.
    """

    mu: np.ndarray
    row_scores: np.ndarray
    col_scores: np.ndarray
    mu0: float
    row_probs: np.ndarray
    col_probs: np.ndarray

    @property
    def m(self) -> int:
        return self.mu.size

    @property
    def row_effects(self) -> np.ndarray:
        """``log p_{k+}``."""
        return np.log(self.row_probs)

    @property
    def col_effects(self) -> np.ndarray:
        """``log p_{+l}``."""
        return np.log(self.col_probs)

    def log_dependence(self) -> np.ndarray:
        """``mu_0 + sum_j mu_j phi_jk psi_jl`` for every cell."""
        return self.mu0 + (self.row_scores.T * self.mu) @ self.col_scores

    def log_cell_probs(self) -> np.ndarray:
        """Goodman's weighted association form of ``log p_kl``."""
        return self.row_effects[:, None] + self.col_effects[None, :] + self.log_dependence()


def _signed_svd(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    u, s, vt = np.linalg.svd(mat, full_matrices=False)
    v = vt.T
    keep = s >= _DROP_TOL
    u, s, v = u[:, keep], s[keep], v[:, keep]
    for j in range(s.size):
        nz = np.flatnonzero(np.abs(u[:, j]) > _DROP_TOL)
        if nz.size and u[nz[0], j] < 0:
            u[:, j] *= -1
            v[:, j] *= -1
    return u, s, v


def to_loglinear(m: MaxEntCopulaModel) -> LogLinearModel:
    """Spectral (log-linear) form of a fitted copula via SVD of ``Theta``.

    Singular vectors are signed so that the first nonzero entry of each
    left vector is positive; components with ``mu < 1e-12`` are dropped.
    Tied singular values keep the SVD routine's order.
    """
    u, s, v = _signed_svd(m.theta_matrix())
    return LogLinearModel(
        mu=s,
        row_scores=u.T @ m.bx.table,
        col_scores=v.T @ m.by.table,
        mu0=-m.log_z,
        row_probs=m.bx.marginal.probs.copy(),
        col_probs=m.by.marginal.probs.copy(),
    )


def plugin_loglinear(t: ContingencyTable) -> LogLinearModel:
    """Saturated plug-in association model of a strictly positive table.

    Projects ``log p_kl`` on the complete LP product basis of the table's
    margins and decomposes the interaction block.  Reproduces every
    sample log-odds-ratio exactly.
    """
    if np.any(t.counts == 0):
        raise ValueError("plug-in intrinsic association undefined on sparse table; "
                         "use to_loglinear on the MaxEnt fit")
    mx, my = t.row_marginal(), t.col_marginal()
    bx = build(mx, mx.size - 1)
    by = build(my, my.size - 1)
    logp = np.log(t.probs)
    a = (bx.table * mx.probs) @ logp @ (by.table * my.probs).T
    u, s, v = _signed_svd(a)
    # mu_0 is the constant of log cop = log p - log p_k+ - log p_+l
    logdep = logp - np.log(mx.probs)[:, None] - np.log(my.probs)[None, :]
    mu0 = float(mx.probs @ logdep @ my.probs)
    return LogLinearModel(mu=s, row_scores=u.T @ bx.table, col_scores=v.T @ by.table,
                          mu0=mu0, row_probs=mx.probs.copy(), col_probs=my.probs.copy())


def intrinsic_association(t: ContingencyTable, scores: LogLinearModel) -> np.ndarray:
    """Plug-in ``mu_j = sum_kl log(p_kl) p_k+ p_+l phi_jk psi_jl``."""
    if np.any(t.counts == 0):
        raise ValueError("plug-in intrinsic association undefined on sparse table; "
                         "use to_loglinear on the MaxEnt fit")
    I, J = t.shape
    if scores.row_scores.shape[1] != I or scores.col_scores.shape[1] != J:
        raise ValueError("score dimensions do not match the table")
    w = np.outer(t.row_totals, t.col_totals) / t.n ** 2 * np.log(t.probs)
    return np.einsum("kl,jk,jl->j", w, scores.row_scores, scores.col_scores)


def log_odds_ratio(m: LogLinearModel, k: int, k2: int, l: int, l2: int) -> float:
    """Log odds-ratio of the 2x2 subtable on rows ``k, k2`` and columns ``l, l2`` (0-based)."""
    I, J = m.row_scores.shape[1], m.col_scores.shape[1]
    for idx, size in ((k, I), (k2, I), (l, J), (l2, J)):
        if not 0 <= idx < size:
            raise IndexError(f"index {idx} out of range 0..{size - 1}")
    dphi = m.row_scores[:, k] - m.row_scores[:, k2]
    dpsi = m.col_scores[:, l] - m.col_scores[:, l2]
    return float(np.sum(m.mu * dphi * dpsi))


def biplot_coordinates(m: LogLinearModel) -> tuple[np.ndarray, np.ndarray]:
    """Logratio biplot points ``(mu_1 phi_1k, mu_2 phi_2k)`` and ``(mu_1 psi_1l, mu_2 psi_2l)``.

    Missing components are padded with zeros.
    """
    I, J = m.row_scores.shape[1], m.col_scores.shape[1]
    rows = np.zeros((I, 2))
    cols = np.zeros((J, 2))
    r = min(m.m, 2)
    rows[:, :r] = (m.row_scores[:r] * m.mu[:r, None]).T
    cols[:, :r] = (m.col_scores[:r] * m.mu[:r, None]).T
    return rows, cols
