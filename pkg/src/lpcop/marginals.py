"""One-dimensional marginal distributions on a finite set of atoms.

Every marginal, whether it comes from a sample, a table margin or a
truncated parametric law, is reduced to ``(atoms, probs)``.  All
integrals downstream are finite weighted sums over these atoms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize, special, stats

#: Default upper-tail mass dropped when a parametric law is truncated.
DEFAULT_TRUNCATION_EPS = 1e-8

_POOL_RTOL = 1e-12


class MarginalError(ValueError):
    """Raised for invalid marginal inputs or off-support lookups."""


@dataclass(frozen=True)
class NegBinomialParams:
    """Negative binomial law with mean ``mu`` and dispersion ``phi``.

    Variance is ``mu + mu**2 / phi``.
    """

    mu: float
    phi: float

    def __post_init__(self):
        if not (self.mu > 0 and self.phi > 0):
            raise MarginalError("negative binomial needs mu > 0 and phi > 0")

    @property
    def scipy_args(self) -> tuple[float, float]:
        """``(n, p)`` in the parameterisation used by ``scipy.stats.nbinom``."""
        return self.phi, self.phi / (self.mu + self.phi)

    def pmf(self, k):
        return stats.nbinom.pmf(k, *self.scipy_args)

    def sf(self, k):
        return stats.nbinom.sf(k, *self.scipy_args)

    def to_dict(self) -> dict:
        return {"name": "negbin", "mu": self.mu, "phi": self.phi}


@dataclass(frozen=True, eq=False)
class Marginal:
    """A discrete distribution over strictly increasing atoms.

    Parameters
    ----------
    atoms : array of float
        Distinct support values, strictly increasing.
    probs : array of float
        Probability mass of each atom.  Strictly positive, sums to one.
    kind : {"empirical", "tabulated", "parametric"}
        How the marginal was obtained.
    params : NegBinomialParams, optional
        Parametric law for ``kind == "parametric"``.
    """

    atoms: np.ndarray
    probs: np.ndarray
    kind: str = "empirical"
    params: NegBinomialParams | None = None
    _cdf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        probs = np.asarray(self.probs, dtype=float)
        if atoms.ndim != 1 or atoms.shape != probs.shape or atoms.size == 0:
            raise MarginalError("atoms and probs must be aligned non-empty vectors")
        if np.any(np.diff(atoms) <= 0):
            raise MarginalError("atoms must be strictly increasing")
        if np.any(probs <= 0):
            raise MarginalError("probabilities must be strictly positive")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise MarginalError(f"probabilities sum to {probs.sum()!r}, not 1")
        if self.kind not in ("empirical", "tabulated", "parametric"):
            raise MarginalError(f"unknown marginal kind {self.kind!r}")
        atoms.setflags(write=False)
        probs.setflags(write=False)
        cdf = np.cumsum(probs)
        cdf[-1] = 1.0
        cdf.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "_cdf", cdf)

    def __len__(self) -> int:
        return self.atoms.size

    @property
    def size(self) -> int:
        return self.atoms.size

    @property
    def cdf(self) -> np.ndarray:
        """Right-closed cdf ``F(atom_k)``."""
        return self._cdf

    @property
    def mid(self) -> np.ndarray:
        """Mid-distribution values ``F(atom_k) - p_k / 2`` for every atom."""
        return self._cdf - 0.5 * self.probs

    def locate(self, values) -> np.ndarray:
        """Indices of the atoms equal to ``values``.

        Reals match within a relative tolerance of 1e-12; anything else
        raises ``MarginalError("off-support evaluation")``.
        """
        v = np.atleast_1d(np.asarray(values, dtype=float))
        idx = np.searchsorted(self.atoms, v)
        best = np.clip(idx, 0, self.size - 1)
        lower = np.clip(idx - 1, 0, self.size - 1)
        pick_lower = np.abs(self.atoms[lower] - v) < np.abs(self.atoms[best] - v)
        best = np.where(pick_lower, lower, best)
        tol = _POOL_RTOL * np.maximum(np.abs(v), np.abs(self.atoms[best]))
        if np.any(np.abs(self.atoms[best] - v) > tol):
            raise MarginalError("off-support evaluation")
        return best

    def nearest(self, values) -> np.ndarray:
        """Indices of the nearest atoms (ties go to the lower atom)."""
        v = np.atleast_1d(np.asarray(values, dtype=float))
        idx = np.clip(np.searchsorted(self.atoms, v), 1, max(self.size - 1, 1))
        if self.size == 1:
            return np.zeros(v.shape, dtype=int)
        lo = idx - 1
        return np.where(v - self.atoms[lo] <= self.atoms[idx] - v, lo, idx)

    def cell(self, u) -> np.ndarray:
        """Index of the probability cell containing ``u`` in (0, 1).

        This is the atom index of the quantile ``Q(u) = inf{x : F(x) >= u}``.
        """
        u = np.asarray(u, dtype=float)
        if np.any((u <= 0) | (u >= 1)):
            raise MarginalError("u must lie in the open interval (0, 1)")
        return np.minimum(np.searchsorted(self._cdf, u, side="left"), self.size - 1)

    def quantile(self, u):
        return self.atoms[self.cell(u)]

    def mean(self) -> float:
        return float(np.dot(self.probs, self.atoms))

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "atoms": self.atoms.tolist(), "probs": self.probs.tolist()}
        if self.params is not None:
            out["params"] = self.params.to_dict()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Marginal":
        params = None
        if d.get("params"):
            p = d["params"]
            params = NegBinomialParams(mu=float(p["mu"]), phi=float(p["phi"]))
        return cls(np.array(d["atoms"], dtype=float), np.array(d["probs"], dtype=float),
                   kind=d["kind"], params=params)


def pool_values(values) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sort and pool ``values`` into distinct atoms.

    Returns ``(atoms, counts, inverse)`` where ``atoms[inverse]`` recovers
    each input up to the pooling tolerance.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise MarginalError("empty sample")
    if not np.all(np.isfinite(v)):
        raise MarginalError("sample contains non-finite values")
    order = np.argsort(v, kind="stable")
    s = v[order]
    gap = np.diff(s) > _POOL_RTOL * np.maximum(np.abs(s[:-1]), np.abs(s[1:]))
    group = np.concatenate([[0], np.cumsum(gap)])
    starts = np.concatenate([[0], np.flatnonzero(gap) + 1])
    atoms = s[starts]
    counts = np.bincount(group)
    inverse = np.empty(v.size, dtype=int)
    inverse[order] = group
    return atoms, counts, inverse


def from_samples(values: Sequence[float]) -> Marginal:
    """Empirical marginal: distinct sorted values with relative frequencies."""
    atoms, counts, _ = pool_values(values)
    return Marginal(atoms, counts / counts.sum(), kind="empirical")


def from_counts(atoms: Sequence[float], counts: Sequence[float]) -> Marginal:
    """Tabulated marginal from labelled counts (e.g. a table margin)."""
    counts = np.asarray(counts, dtype=float)
    if np.any(counts <= 0):
        raise MarginalError("tabulated marginal has an empty category")
    return Marginal(np.asarray(atoms, dtype=float), counts / counts.sum(), kind="tabulated")


def mid_distribution(m: Marginal, x: float) -> float:
    """Mid-distribution transform ``F(x) - p(x)/2`` at a support point."""
    k = m.locate(x)[0]
    return float(m.mid[k])


def _nb_profile_score(phi, y, mu):
    n = y.size
    return (special.digamma(y + phi).sum() - n * special.digamma(phi)
            + n * math.log(phi / (mu + phi)))


def _nb_profile_curvature(phi, y, mu):
    n = y.size
    return (special.polygamma(1, y + phi).sum() - n * special.polygamma(1, phi)
            + n * mu / (phi * (mu + phi)))


def nb_loglik(values, params: NegBinomialParams) -> float:
    y = np.asarray(values, dtype=float)
    return float(stats.nbinom.logpmf(y, *params.scipy_args).sum())


def fit_negbin(values: Sequence[int]) -> NegBinomialParams:
    """Maximum likelihood negative binomial fit.

    The mean estimate is the sample mean.  The dispersion maximises the
    profile likelihood over ``log(phi)`` in ``[log 1e-3, log 1e6]``
    (bounded Brent search), followed by a Newton polish on the score.
    """
    y = np.asarray(values, dtype=float).ravel()
    if y.size == 0:
        raise MarginalError("empty sample")
    if np.any(y < 0) or np.any(y != np.round(y)):
        raise MarginalError("negative binomial data must be nonnegative integers")
    if np.unique(y).size < 2:
        raise MarginalError("negative binomial fit needs at least two distinct values")
    mu = float(y.mean())
    # MLE of phi is finite iff the (1/n) variance exceeds the mean.
    if y.var() <= mu:
        raise MarginalError(
            "negative binomial MLE diverges (phi → ∞); data are not overdispersed, "
            "use a Poisson marginal instead")

    def negloglik(logphi):
        phi = math.exp(logphi)
        return -stats.nbinom.logpmf(y, phi, phi / (mu + phi)).sum()

    lo, hi = math.log(1e-3), math.log(1e6)
    res = optimize.minimize_scalar(negloglik, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-10})
    phi = math.exp(res.x)
    for _ in range(20):
        score = _nb_profile_score(phi, y, mu)
        curv = _nb_profile_curvature(phi, y, mu)
        if curv >= 0:
            break
        step = score / curv
        new = phi - step
        if not (1e-3 <= new <= 1e6):
            break
        if abs(_nb_profile_score(new, y, mu)) >= abs(score):
            break
        phi = new
        if abs(step) < 1e-12 * phi:
            break
    return NegBinomialParams(mu=mu, phi=phi)


def truncate_parametric(p: NegBinomialParams, eps: float = DEFAULT_TRUNCATION_EPS,
                        min_support: int = 0) -> Marginal:
    """Finite marginal on ``0..K`` for a negative binomial law.

    ``K`` is the smallest integer whose upper tail mass ``P(X > K)`` is
    below ``eps`` (and at least ``min_support``, so observed values stay
    on the support).  Probabilities are renormalised.
    """
    if not (0 < eps < 1e-4):
        raise MarginalError("truncation eps must lie in (0, 1e-4)")
    K = max(int(stats.nbinom.isf(eps, *p.scipy_args)) - 1, 0)
    while p.sf(K) >= eps:
        K += 1
    while K > 0 and p.sf(K - 1) < eps:
        K -= 1
    K = max(K, int(min_support))
    k = np.arange(K + 1)
    probs = p.pmf(k)
    keep = probs > 0
    if not np.all(keep):
        raise MarginalError("truncated support contains zero-mass atoms; reduce min_support")
    probs = probs / probs.sum()
    return Marginal(k.astype(float), probs, kind="parametric", params=p)
