"""Log-bilinear maximum-entropy copula on the product cell grid.

The copula density is

    cop(u, v) = exp(sum_{(j,k) in I} theta_jk S_j(u) S_k(v)) / Z

and ``S_j`` are constant on the marginal probability cells, so ``Z``,
its gradient (model comeans) and Hessian (their covariance) are exact
sums over the ``Kx x Ky`` grid weighted by ``p_k q_l``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .comoments import CoMomentTable, SelectionResult
from .contingency import ContingencyTable
from .lp_basis import LpBasis

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200
_ARMIJO_C = 1e-4
_MAX_HALVINGS = 60


class FitError(RuntimeError):
    """Raised when the Newton iteration does not reach the gradient tolerance."""

    def __init__(self, message: str, grad_norm: float, iterations: int):
        super().__init__(f"{message} (max |gradient| = {grad_norm:.3e} after {iterations} iterations)")
        self.grad_norm = grad_norm
        self.iterations = iterations


@dataclass(frozen=True)
class FitReport:
    iterations: int = 0
    grad_norm: float = 0.0
    converged: bool = True
    fallback_steps: int = 0


def theta_matrix(bx: LpBasis, by: LpBasis, indices, theta) -> np.ndarray:
    """Dense ``degree_x x degree_y`` coefficient matrix, zeros off the index set."""
    out = np.zeros((bx.degree, by.degree))
    for (j, k), t in zip(indices, np.asarray(theta, dtype=float)):
        out[j - 1, k - 1] = t
    return out


def exponent_grid(bx: LpBasis, by: LpBasis, indices, theta) -> np.ndarray:
    """``E[k, l] = sum theta_jk T_j(x_k) T_k(y_l)`` over the atom grid."""
    th = theta_matrix(bx, by, indices, theta)
    return bx.table.T @ th @ by.table


def _log_weights(bx: LpBasis, by: LpBasis) -> np.ndarray:
    return np.log(bx.marginal.probs)[:, None] + np.log(by.marginal.probs)[None, :]


def _logsumexp(a: np.ndarray) -> float:
    top = a.max()
    return float(top + np.log(np.exp(a - top).sum()))


def log_partition(bx: LpBasis, by: LpBasis, indices, theta) -> float:
    """Exact ``log Z`` with a max shift against overflow."""
    if len(indices) == 0:
        return 0.0
    return _logsumexp(exponent_grid(bx, by, indices, theta) + _log_weights(bx, by))


def _features(bx: LpBasis, by: LpBasis, indices) -> np.ndarray:
    """Sufficient statistics on the grid, shape ``(|I|, Kx*Ky)``."""
    return np.array([np.outer(bx.table[j - 1], by.table[k - 1]).ravel() for j, k in indices]
                    ).reshape(len(indices), bx.size * by.size)


def _cell_probs(feats: np.ndarray, logw: np.ndarray, theta: np.ndarray) -> tuple[np.ndarray, float]:
    a = logw + theta @ feats
    log_z = _logsumexp(a)
    return np.exp(a - log_z), log_z


def model_moments(bx: LpBasis, by: LpBasis, indices, theta) -> tuple[np.ndarray, np.ndarray]:
    """Model comeans ``E_theta[S_j S_k]`` and their covariance matrix."""
    feats = _features(bx, by, indices)
    w, _ = _cell_probs(feats, _log_weights(bx, by).ravel(), np.asarray(theta, dtype=float))
    mean = feats @ w
    cov = (feats * w) @ feats.T - np.outer(mean, mean)
    return mean, cov


@dataclass(frozen=True, eq=False)
class MaxEntCopulaModel:
    """Fitted log-bilinear copula.

    ``indices`` are 1-based ``(j, k)`` pairs aligned with ``theta``;
    ``targets`` are the comeans the fit matched.
    """

    bx: LpBasis
    by: LpBasis
    indices: tuple[tuple[int, int], ...]
    theta: np.ndarray
    log_z: float
    targets: np.ndarray
    n: int = 0
    fit_report: FitReport = field(default_factory=FitReport)
    comeans: CoMomentTable | None = None
    selection: SelectionResult | None = None

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float)
        tg = np.asarray(self.targets, dtype=float)
        if th.shape != (len(self.indices),) or tg.shape != th.shape:
            raise ValueError("theta, targets and indices are misaligned")
        th.setflags(write=False)
        tg.setflags(write=False)
        object.__setattr__(self, "indices", tuple((int(j), int(k)) for j, k in self.indices))
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "targets", tg)

    @property
    def is_uniform(self) -> bool:
        return len(self.indices) == 0

    def coefficient(self, j: int, k: int) -> float:
        for idx, t in zip(self.indices, self.theta):
            if idx == (j, k):
                return float(t)
        return 0.0

    def theta_matrix(self) -> np.ndarray:
        return theta_matrix(self.bx, self.by, self.indices, self.theta)

    def exponent_grid(self) -> np.ndarray:
        return exponent_grid(self.bx, self.by, self.indices, self.theta)

    def cell_density(self) -> np.ndarray:
        """Copula value on every ``(x-cell, y-cell)``."""
        return np.exp(self.exponent_grid() - self.log_z)

    def joint_cells(self) -> np.ndarray:
        """``p_k q_l cop(k, l)``: the model's joint cell probabilities."""
        return np.outer(self.bx.marginal.probs, self.by.marginal.probs) * self.cell_density()

    def expected_comeans(self) -> np.ndarray:
        if self.is_uniform:
            return np.zeros(0)
        return model_moments(self.bx, self.by, self.indices, self.theta)[0]

    def density(self, u, v):
        """Copula density at ``(u, v)`` in the open unit square."""
        try:
            ku = self.bx.marginal.cell(u)
            kv = self.by.marginal.cell(v)
        except ValueError as exc:
            raise ValueError(f"density evaluated outside (0,1)^2: {exc}") from None
        out = self.cell_density()[ku, kv]
        return float(out) if np.ndim(out) == 0 else out

    def grid(self, resolution: int) -> tuple[np.ndarray, np.ndarray]:
        """Average copula density over each square of a regular u-v grid.

        Returns the square midpoints and a ``resolution x resolution``
        array.  Squares straddling cell boundaries are averaged exactly, so
        the grid integrates to one: ``values.sum() / resolution**2 == 1``.
        """
        if resolution < 1:
            raise ValueError("resolution must be positive")
        edges = np.linspace(0.0, 1.0, resolution + 1)
        mids = 0.5 * (edges[:-1] + edges[1:])
        ov_x = _overlap(edges, self.bx.marginal.cdf)
        ov_y = _overlap(edges, self.by.marginal.cdf)
        values = (ov_x @ self.cell_density() @ ov_y.T) * resolution ** 2
        return mids, values

    def ccd_slice(self, side: str, condition) -> "CcdSlice":
        """Conditional comparison density slice of the copula.

        ``side="x|y"`` returns ``d(u; X, X | Y = condition)`` as a function of
        ``u``; ``side="y|x"`` returns ``d(v; Y, Y | X = condition)``.
        """
        side = _normalise_side(side)
        th = self.theta_matrix()
        if side == "x|y":
            k = self.by.marginal.locate(condition)[0]
            coefs = th @ self.by.table[:, k]
            basis = self.bx
        else:
            k = self.bx.marginal.locate(condition)[0]
            coefs = self.bx.table[:, k] @ th
            basis = self.by
        exps = coefs @ basis.table
        log_norm = _logsumexp(exps + np.log(basis.marginal.probs))
        return CcdSlice(basis=basis, coefficients=coefs, log_z=self.log_z, log_norm=log_norm)

    def display(self, precision: int = 3) -> str:
        """Fitted model in the ``exp{... - log Z}`` display convention."""
        terms = []
        for (j, k), t in zip(self.indices, self.theta):
            sign = "-" if t < 0 else "+"
            terms.append(f"{sign} {abs(t):.{precision}f}·S{j}(u;X)·S{k}(v;Y)")
        body = " ".join(terms).lstrip("+ ") if terms else "0"
        if body.startswith("- "):
            body = "-" + body[2:]
        sign = "-" if self.log_z >= 0 else "+"
        return f"cop(u,v) = exp{{{body} {sign} {abs(self.log_z):.{precision}f}}}"


def _overlap(edges: np.ndarray, cdf: np.ndarray) -> np.ndarray:
    """Length of ``[edge_a, edge_a+1] ∩ cell_k``, shape ``(n_squares, K)``."""
    lo = np.concatenate([[0.0], cdf[:-1]])
    hi = cdf
    a = edges[:-1, None]
    b = edges[1:, None]
    return np.clip(np.minimum(b, hi[None, :]) - np.maximum(a, lo[None, :]), 0.0, None)


def _normalise_side(side: str) -> str:
    s = side.lower().replace(" ", "").replace("-given-", "|")
    if s in ("x|y", "u|v"):
        return "x|y"
    if s in ("y|x", "v|u"):
        return "y|x"
    raise ValueError(f"unknown slice side {side!r}; use 'x|y' or 'y|x'")


@dataclass(frozen=True, eq=False)
class CcdSlice:
    """One slice of the copula, expanded in the LP basis of the free variable.

    ``coefficients[j-1]`` multiplies ``S_j``.  The raw slice shares the
    model's ``-log Z`` constant; calling the slice gives the version
    renormalised to integrate to one under the free variable's marginal.
    """

    basis: LpBasis
    coefficients: np.ndarray
    log_z: float
    log_norm: float

    @property
    def constant(self) -> float:
        return -self.log_z

    def log_raw_atoms(self) -> np.ndarray:
        return self.coefficients @ self.basis.table - self.log_z

    def raw_atoms(self) -> np.ndarray:
        return np.exp(self.log_raw_atoms())

    def atoms(self) -> np.ndarray:
        return np.exp(self.coefficients @ self.basis.table - self.log_norm)

    def raw(self, u):
        out = self.raw_atoms()[self.basis.marginal.cell(u)]
        return float(out) if np.ndim(out) == 0 else out

    def __call__(self, u):
        out = self.atoms()[self.basis.marginal.cell(u)]
        return float(out) if np.ndim(out) == 0 else out


def model_from_theta(bx: LpBasis, by: LpBasis, indices, theta) -> MaxEntCopulaModel:
    """Model with given coefficients (no fitting); targets are the model comeans."""
    indices = tuple(tuple(ix) for ix in indices)
    theta = np.asarray(theta, dtype=float)
    if not indices:
        return MaxEntCopulaModel(bx, by, (), np.zeros(0), 0.0, np.zeros(0))
    mean, _ = model_moments(bx, by, indices, theta)
    return MaxEntCopulaModel(bx, by, indices, theta, log_partition(bx, by, indices, theta), mean)


def fit(t: CoMomentTable, sel: SelectionResult, bx: LpBasis, by: LpBasis,
        tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> MaxEntCopulaModel:
    """Maximum likelihood (moment-matching) fit of the selected coefficients.

    Minimises ``log Z(theta) - theta . LP`` by Newton's method with Armijo
    step halving, starting from ``theta = 0``.  A Hessian that cannot be
    factorised even after a ``1e-10 * trace`` ridge triggers a gradient step.
    """
    if t.values.shape != (bx.degree, by.degree):
        raise ValueError("comean table does not match the basis degrees")
    indices = tuple(sel.chosen)
    if not indices:
        return MaxEntCopulaModel(bx, by, (), np.zeros(0), 0.0, np.zeros(0), n=t.n,
                                 comeans=t, selection=sel)
    target = np.array([t.values[j - 1, k - 1] for j, k in indices])
    feats = _features(bx, by, indices)
    logw = _log_weights(bx, by).ravel()
    theta = np.zeros(len(indices))

    def evaluate(th):
        w, log_z = _cell_probs(feats, logw, th)
        return w, log_z, log_z - th @ target

    w, log_z, obj = evaluate(theta)
    fallback = 0
    it = 0
    while True:
        mean = feats @ w
        grad = mean - target
        gnorm = float(np.max(np.abs(grad)))
        if gnorm < tol:
            break
        if it >= max_iter:
            raise FitError("MaxEnt fit did not converge", gnorm, it)
        it += 1
        hess = (feats * w) @ feats.T - np.outer(mean, mean)
        direction = _newton_direction(hess, grad)
        if direction is None or grad @ direction >= 0:
            direction = -grad
            fallback += 1
        slope = grad @ direction
        # near the optimum the decrease drops below the roundoff of log Z
        slack = 64 * np.finfo(float).eps * max(1.0, abs(obj), abs(log_z))
        step = 1.0
        for _ in range(_MAX_HALVINGS):
            cand = theta + step * direction
            w_c, lz_c, obj_c = evaluate(cand)
            if obj_c <= obj + _ARMIJO_C * step * slope + slack:
                break
            step *= 0.5
        else:
            raise FitError("line search failed", gnorm, it)
        theta, w, log_z, obj = cand, w_c, lz_c, obj_c
    report = FitReport(iterations=it, grad_norm=gnorm, converged=True, fallback_steps=fallback)
    return MaxEntCopulaModel(bx, by, indices, theta, log_z, target, n=t.n, fit_report=report,
                             comeans=t, selection=sel)


def _newton_direction(hess: np.ndarray, grad: np.ndarray) -> np.ndarray | None:
    try:
        c = np.linalg.cholesky(hess)
    except np.linalg.LinAlgError:
        ridge = 1e-10 * max(float(np.trace(hess)), np.finfo(float).tiny)
        try:
            c = np.linalg.cholesky(hess + ridge * np.eye(hess.shape[0]))
        except np.linalg.LinAlgError:
            return None
    y = np.linalg.solve(c, -grad)
    d = np.linalg.solve(c.T, y)
    return d if np.all(np.isfinite(d)) else None


def smooth_cells(m: MaxEntCopulaModel, table: ContingencyTable | None = None,
                 restrict: bool = False) -> np.ndarray:
    """Copula-smoothed cell probabilities ``g1(k) g2(l) cop(k, l)``.

    The result covers the model's full atom grid and sums to one.  With
    ``restrict=True`` only the rows and columns matching ``table``'s
    labels are returned (useful for parametric marginals whose support
    extends past the observed categories).
    """
    probs = m.joint_cells()
    if table is None:
        return probs
    mx, my = m.bx.marginal, m.by.marginal
    if mx.kind == "parametric" or my.kind == "parametric":
        try:
            rows = mx.locate(table.row_labels)
            cols = my.locate(table.col_labels)
        except ValueError:
            raise ValueError("dimension mismatch: table labels are off the model support") from None
    else:
        if table.shape != probs.shape:
            raise ValueError(f"dimension mismatch: table {table.shape} vs model grid {probs.shape}")
        rows, cols = np.arange(table.shape[0]), np.arange(table.shape[1])
    return probs[np.ix_(rows, cols)] if restrict else probs


def discrete_kernel(m: MaxEntCopulaModel) -> np.ndarray:
    """``dKernel(k, l)``: the fitted copula at the marginal cells."""
    return m.cell_density()
