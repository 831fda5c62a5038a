"""End-to-end fitting: data -> marginals -> LP bases -> comeans -> selection -> MaxEnt fit."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import marginals as _marg
from .comoments import comoments_from_indices, penalty_gamma, select
from .contingency import ContingencyTable
from .lp_basis import DEFAULT_DEGREE_CAP, build, max_degree_default
from .maxent import DEFAULT_MAX_ITER, DEFAULT_TOL, MaxEntCopulaModel, fit


@dataclass(frozen=True)
class FitConfig:
    """Knobs of the fitting pipeline.

    ``penalty`` is ``"aic"``, ``"bic"``, ``"none"`` (keep every comean) or a
    positive number used directly as the PenSum constant.  ``marginals`` is
    ``"empirical"`` (eLP bases) or ``"negbin"`` (gLP bases on fitted
    negative binomial laws).
    """

    penalty: str | float = "aic"
    max_order: int = DEFAULT_DEGREE_CAP
    marginals: str = "empirical"
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    trunc_eps: float = _marg.DEFAULT_TRUNCATION_EPS

    def __post_init__(self):
        if self.marginals not in ("empirical", "negbin"):
            raise ValueError(f"unknown marginal family {self.marginals!r}")
        if self.max_order < 1:
            raise ValueError("max_order must be at least 1")

    def to_dict(self) -> dict:
        return asdict(self)


def _side(values: np.ndarray, counts: np.ndarray | None, config: FitConfig):
    """Marginal and per-observation atom indices for one variable.

    ``values`` are observation values (or table labels when ``counts``
    gives their multiplicities).
    """
    if config.marginals == "empirical":
        if counts is None:
            atoms, c, inverse = _marg.pool_values(values)
            return _marg.Marginal(atoms, c / c.sum(), kind="empirical"), inverse
        m = _marg.from_counts(values, counts)
        return m, np.arange(m.size)
    obs = values if counts is None else np.repeat(values, counts)
    params = _marg.fit_negbin(obs)
    m = _marg.truncate_parametric(params, config.trunc_eps, min_support=int(np.max(obs)))
    return m, m.locate(values)


def _fit(mx, my, ix, iy, weights, config: FitConfig) -> MaxEntCopulaModel:
    if mx.size < 2 or my.size < 2:
        raise ValueError("both variables need at least two distinct values")
    bx = build(mx, max_degree_default(mx, config.max_order))
    by = build(my, max_degree_default(my, config.max_order))
    table = comoments_from_indices(bx, by, ix, iy, weights)
    sel = select(table, penalty_gamma(config.penalty, table.n))
    return fit(table, sel, bx, by, tol=config.tol, max_iter=config.max_iter)


def fit_pairs(x, y, config: FitConfig | None = None) -> MaxEntCopulaModel:
    """Fit a MaxEnt copula to paired observations (any mix of discrete/continuous)."""
    config = config or FitConfig()
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError("x and y have different lengths")
    if x.size == 0:
        raise ValueError("no observations")
    mx, ix = _side(x, None, config)
    my, iy = _side(y, None, config)
    return _fit(mx, my, ix, iy, None, config)


def fit_table(table: ContingencyTable, config: FitConfig | None = None) -> MaxEntCopulaModel:
    """Fit a MaxEnt copula to a contingency table (rows = X, columns = Y)."""
    config = config or FitConfig()
    mx, rmap = _side(table.row_labels, table.row_totals, config)
    my, cmap = _side(table.col_labels, table.col_totals, config)
    k, l, c = table.nonempty_cells()
    return _fit(mx, my, rmap[k], cmap[l], c.astype(float), config)
