"""Mutual information and independence tests."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special

from .contingency import ContingencyTable
from .maxent import MaxEntCopulaModel, model_moments
from .pipeline import FitConfig, fit_pairs, fit_table


@dataclass(frozen=True)
class TestReport:
    statistic: float
    df: int
    p_value: float
    method: str
    n: int

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        return {"method": self.method, "statistic": self.statistic, "df": self.df,
                "p_value": self.p_value, "n": self.n}


def chi_square_sf(x: float, df: int) -> float:
    """Upper tail ``P(chi2_df > x)`` via the regularised upper incomplete gamma."""
    if df < 1:
        raise ValueError("df must be at least 1")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0:
        return 1.0
    return float(special.gammaincc(0.5 * df, 0.5 * x))


def mutual_information(m: MaxEntCopulaModel) -> float:
    """``sum theta_jk LP_jk - log Z`` with model-expected comeans."""
    if m.is_uniform:
        return 0.0
    expected, _ = model_moments(m.bx, m.by, m.indices, m.theta)
    return float(m.theta @ expected - m.log_z)


def empirical_mi(t: ContingencyTable) -> float:
    """Plug-in mutual information of a table (empty cells contribute 0)."""
    p = t.probs
    pr = t.row_totals / t.n
    pc = t.col_totals / t.n
    nz = p > 0
    ratio = p[nz] / np.outer(pr, pc)[nz]
    return float(np.sum(p[nz] * np.log(ratio)))


def g2_test(t: ContingencyTable) -> TestReport:
    """Log-likelihood ratio test of independence, ``G2 = 2 n MI``."""
    stat = max(2.0 * t.n * empirical_mi(t), 0.0)
    I = int(np.count_nonzero(t.row_totals))
    J = int(np.count_nonzero(t.col_totals))
    df = (I - 1) * (J - 1)
    p = chi_square_sf(stat, df) if df >= 1 else 1.0
    return TestReport(statistic=stat, df=df, p_value=p, method="G2", n=t.n)


def smooth_g2_test(t: ContingencyTable, fit_config: FitConfig | None = None) -> TestReport:
    """``2 n MI`` of the MaxEnt fit, referred to chi-square with ``|I|`` df."""
    model = fit_table(t, fit_config)
    df = len(model.indices)
    if df == 0:
        return TestReport(statistic=0.0, df=0, p_value=1.0, method="smoothG2", n=t.n)
    stat = max(2.0 * t.n * mutual_information(model), 0.0)
    return TestReport(statistic=stat, df=df, p_value=chi_square_sf(stat, df),
                      method="smoothG2", n=t.n)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("LPCOP_THREADS", "1")))
    except ValueError:
        return 1


def mi_permutation_pvalue(pairs, fit_config: FitConfig | None = None, B: int = 999,
                          seed: int | None = 0) -> TestReport:
    """Permutation p-value of the model-based MI.

    The y column is permuted ``B`` times with a seeded generator (all
    permutations are drawn up front, so the result does not depend on
    ``LPCOP_THREADS``).  ``p = (1 + #{MI_perm >= MI_obs}) / (B + 1)``.
    """
    if B < 99:
        raise ValueError("use at least B = 99 permutations")
    arr = np.asarray(pairs, dtype=float)
    x, y = arr[:, 0], arr[:, 1]
    mi_obs = mutual_information(fit_pairs(x, y, fit_config))
    rng = np.random.default_rng(seed)
    perms = [rng.permutation(y.size) for _ in range(B)]

    def one(idx):
        return mutual_information(fit_pairs(x, y[idx], fit_config))

    workers = _threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            null = list(pool.map(one, perms))
    else:
        null = [one(idx) for idx in perms]
    # tiny slack so replicates equal to the observed value up to rounding count as ties
    exceed = int(np.sum(np.asarray(null) >= mi_obs - 1e-12))
    n = int(y.size)
    return TestReport(statistic=2.0 * n * mi_obs, df=0, p_value=(1 + exceed) / (B + 1),
                      method="MI-permutation", n=n)
