"""Copula-logistic regression and LP feature matrices.

For a binary response ``Y`` with base rate ``mu`` the MaxEnt copula
implies

    logit P(Y=1 | X=x) = logit(mu) + sum_j theta_j1 / sqrt(mu (1-mu)) T_j(x).
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.special import expit, logit

from .lp_basis import LpBasis, build, max_degree_default
from .marginals import Marginal, pool_values
from .maxent import MaxEntCopulaModel


@dataclass(frozen=True, eq=False)
class CopulaLogisticModel:
    alpha0: float
    alphas: np.ndarray
    basis: LpBasis
    mu: float

    def linear_predictor(self, x, snap: bool = True) -> np.ndarray:
        """``alpha_0 + sum_j alpha_j T_j(x)``.

        Off-support ``x`` takes the basis value of the nearest training atom
        when ``snap`` is true; otherwise it raises.
        """
        t = self.basis.at(x, snap=snap)
        return self.alpha0 + self.alphas @ t

    def predict_proba(self, x, snap: bool = True):
        out = expit(self.linear_predictor(x, snap=snap))
        return float(out[0]) if np.ndim(x) == 0 else out


def from_copula(m: MaxEntCopulaModel, binary_side: str = "y") -> CopulaLogisticModel:
    """Logit coefficients implied by a copula fit with one binary margin."""
    side = binary_side.lower()
    if side not in ("x", "y"):
        raise ValueError("binary_side must be 'x' or 'y'")
    binary, other = (m.by, m.bx) if side == "y" else (m.bx, m.by)
    if binary.size != 2:
        raise ValueError(f"the {side} side is not binary ({binary.size} atoms)")
    mu = float(binary.marginal.probs[1])
    th = m.theta_matrix()
    coefs = th[:, 0] if side == "y" else th[0, :]
    alphas = coefs / np.sqrt(mu * (1.0 - mu))
    return CopulaLogisticModel(alpha0=float(logit(mu)), alphas=alphas, basis=other, mu=mu)


def predict_proba(m: CopulaLogisticModel, x, snap: bool = True):
    return m.predict_proba(x, snap=snap)


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Column-stacked LP features ``[T_X1 | ... | T_Xp]``."""

    values: np.ndarray
    columns: tuple[str, ...]
    bases: dict[str, LpBasis]

    def schema(self) -> dict:
        return {
            "format": "lpcop-features/1",
            "columns": list(self.columns),
            "variables": [
                {
                    "name": name,
                    "orders": list(range(1, b.degree + 1)),
                    "atoms": b.marginal.atoms.tolist(),
                    "probs": b.marginal.probs.tolist(),
                    "table": b.table.tolist(),
                }
                for name, b in self.bases.items()
            ],
        }

    def write(self, csv_path, schema_path=None) -> None:
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            for row in self.values:
                w.writerow([repr(float(v)) for v in row])
        if schema_path is not None:
            with open(schema_path, "w", encoding="utf-8") as fh:
                json.dump(self.schema(), fh, indent=2)


def feature_matrix(columns: Sequence, max_order: int = 4,
                   names: Sequence[str] | None = None) -> FeatureMatrix:
    """Empirical LP features for each predictor column.

    Each predictor contributes ``min(K - 1, max_order)`` columns named
    ``"var:order"``.  Constant predictors are skipped with a warning.
    """
    if max_order < 1:
        raise ValueError("max_order must be at least 1")
    names = list(names) if names is not None else [f"x{i + 1}" for i in range(len(columns))]
    if len(names) != len(columns):
        raise ValueError("one name per column required")
    blocks, cols, bases = [], [], {}
    n = None
    for name, col in zip(names, columns):
        atoms, counts, inverse = pool_values(col)
        if n is None:
            n = inverse.size
        elif inverse.size != n:
            raise ValueError("columns have different lengths")
        if atoms.size < 2:
            warnings.warn(f"skipping constant predictor {name!r}", stacklevel=2)
            continue
        marg = Marginal(atoms, counts / counts.sum(), kind="empirical")
        basis = build(marg, max_degree_default(marg, max_order))
        bases[name] = basis
        blocks.append(basis.table[:, inverse].T)
        cols.extend(f"{name}:{j}" for j in range(1, basis.degree + 1))
    values = np.hstack(blocks) if blocks else np.zeros((n or 0, 0))
    return FeatureMatrix(values=values, columns=tuple(cols), bases=bases)


def ls_plot_coordinates(coefs: Mapping[str, Mapping[int, float]]) -> dict[str, tuple[float, float]]:
    """Location-scale plot points ``(alpha_j1, alpha_j2)`` scaled per axis.

    Each axis is divided by its largest absolute coefficient; an axis that
    is identically zero is left at zero.
    """
    raw = {name: (float(c.get(1, 0.0)), float(c.get(2, 0.0))) for name, c in coefs.items()}
    if not raw:
        return {}
    arr = np.array(list(raw.values()))
    scale = np.max(np.abs(arr), axis=0)
    scale[scale == 0] = 1.0
    return {name: (float(a / scale[0]), float(b / scale[1])) for name, (a, b) in raw.items()}
