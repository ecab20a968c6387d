"""Quantile regression by exact minimization of the empirical check loss.

The estimator solves an equivalent linear program with a simplex
method (see simplex.py), so fitted coefficients sit at an exact vertex
that interpolates min(p, n) observations. Residuals on the
interpolation set are snapped to exactly zero, which makes the
residual-sign bookkeeping downstream deterministic; a zero residual
counts as "response <= fitted value".
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import simplex
from .data import Dataset
from .errors import FitError
from .model import CoefVector, ModelSpec, design_matrix

_RANK_RTOL = 1e-10


def check_loss(e, tau: float):
    """Check function (tau - 1{e < 0}) * e; nonnegative, zero iff e == 0."""
    e = np.asarray(e, dtype=float)
    return (tau - (e < 0.0)) * e


@dataclass(frozen=True)
class FitResult:
    """A fitted quantile regression at an exact LP vertex.

    basis_rows are the interpolated observations; design is the
    evaluated model matrix, kept so tests and bootstrap refits do not
    rebuild it.
    """

    beta: CoefVector
    residuals: np.ndarray
    objective: float
    n_zero_residuals: int
    model: ModelSpec
    design: np.ndarray = field(repr=False)
    basis_rows: tuple[int, ...] = ()
    iterations: int = 0

    @property
    def fitted(self) -> np.ndarray:
        return self.design @ self.beta.beta


def _check_rank(X: np.ndarray, labels) -> None:
    # n == p is allowed: the fit is then an exact interpolation.
    n, p = X.shape
    if n < p:
        raise FitError(f"need n >= p, got n={n}, p={p}")
    r, piv = scipy.linalg.qr(X, mode="r", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        raise FitError("design matrix is identically zero")
    rank = int(np.sum(diag > _RANK_RTOL * diag[0]))
    if rank < p:
        dep = [labels[j] for j in piv[rank:]]
        raise FitError(
            "design matrix is rank deficient; dependent columns: " + ", ".join(dep)
        )


def _solve(X: np.ndarray, y: np.ndarray, tau: float, model: ModelSpec, warm_rows=None) -> FitResult:
    sol = simplex.solve(X, y, tau, warm_rows=warm_rows)
    resid = y - X @ sol.beta
    resid[sol.basis_rows] = 0.0
    objective = float(check_loss(resid, tau).sum())
    return FitResult(
        beta=CoefVector(sol.beta, tau),
        residuals=resid,
        objective=objective,
        n_zero_residuals=int(np.count_nonzero(resid == 0.0)),
        model=model,
        design=X,
        basis_rows=tuple(int(i) for i in sol.basis_rows),
        iterations=sol.iterations,
    )


def fit(spec: ModelSpec, d: Dataset, tau: float) -> FitResult:
    """Global minimizer of sum_i check_loss(y_i - design_i @ beta, tau).

    Requires n > p and a full-column-rank design (checked against the
    largest singular value scale). The returned vertex is the first
    optimal basis reached under Bland's rule, hence deterministic for
    a given row order.
    """
    if not 0.0 < tau < 1.0:
        raise FitError(f"tau must lie strictly inside (0, 1), got {tau}")
    X = design_matrix(spec, d)
    _check_rank(X, spec.term_labels())
    return _solve(X, d.y, tau, spec)


def refit(prev: FitResult, y_new: np.ndarray) -> FitResult:
    """Refit on a new response over the same design, warm-started.

    Used by the bootstrap: the design (and its full-rank property) is
    unchanged, only y moves, so the previous interpolation set is a
    feasible starting vertex.
    """
    y_new = np.asarray(y_new, dtype=float)
    return _solve(prev.design, y_new, prev.beta.tau, prev.model, warm_rows=prev.basis_rows)


def directional_derivative(X: np.ndarray, y: np.ndarray, tau: float, beta: np.ndarray,
                           direction: np.ndarray, zero_tol: float | None = None) -> float:
    """One-sided derivative of the total check loss at beta along direction.

    Nonnegative along every direction exactly when beta is a minimizer.
    Residuals within zero_tol of zero are treated as sitting on a kink;
    at an LP vertex the interpolated rows are zero only up to rounding.
    """
    resid = y - X @ beta
    if zero_tol is None:
        zero_tol = 1e-9 * (1.0 + float(np.abs(y).max(initial=0.0)))
    step = X @ direction
    pos = resid > zero_tol
    neg = resid < -zero_tol
    zero = ~pos & ~neg
    out = -tau * step[pos].sum()
    out += (1.0 - tau) * step[neg].sum()
    z = step[zero]
    out += float(((z > 0.0) * (1.0 - tau) * z - (z <= 0.0) * tau * z).sum())
    return float(out)
