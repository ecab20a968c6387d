"""Lack-of-fit test statistics for a fitted parametric quantile regression.

Three statistics are provided:

* ``t_n``: the pairwise kernel statistic. With residual signs
  u_i = 1{y_i <= fitted_i} - tau, it studentizes the second-order
  U-statistic

      I_n = [n(n-1)]^{-1} sum_{i != j} u_i u_j h^{-1} K((W_i-W_j)/h) psi(X_i-X_j)

  by v_n^2 = 2 tau^2 (1-tau)^2 [n(n-1)]^{-1} sum_{i != j} h^{-1} K^2 psi^2,
  giving T_n = n sqrt(h) I_n / v_n, asymptotically standard normal under
  a correct model. Only the scalar W is smoothed; the remaining
  covariates enter through the fixed weight psi. One-sided upper
  rejection: p = 1 - Phi(T_n). v_n^2 depends on covariates and tau only,
  never on the response.

* ``zheng_stat``: the fully smoothed competitor, which kernels over all
  q = 1 + m covariate coordinates at once via a triangular kernel of
  the norm of the scaled differences.

* ``hz_stat``: the cumulative-sum competitor, the largest eigenvalue of
  the outer-product average of the weighted residual-sign process
  R(t) = n^{-1/2} sum_j (tau - 1{e_j < 0}) Z_j 1{Z_j <= t} evaluated at
  the sample points. No pivotal limit, so it is bootstrap-only.

All pairwise sums are plain O(n^2) dense computations; `pairwise_weights`
and friends let callers precompute the covariate-only matrices once and
reuse them across bootstrap replicates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .data import Dataset
from .errors import DegenerateVarianceError, InternalError
from .kernels import KernelSpec, bandwidth, k_eval, triangle_var1
from .qrfit import FitResult

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class TestResult:
    """Outcome of one lack-of-fit statistic on one dataset.

    Fields not meaningful for a method are None: i_n is reported by the
    pairwise-kernel test only, v_n2 by the two studentized tests, and
    the cumulative-sum test has neither an asymptotic p-value nor a
    bandwidth.
    """

    method: str
    statistic: float
    tau: float
    h: float | None = None
    i_n: float | None = None
    v_n2: float | None = None
    p_asymptotic: float | None = None

    def __post_init__(self):
        if self.v_n2 is not None and not self.v_n2 > 0.0:
            raise InternalError(f"v_n2 must be positive, got {self.v_n2}")
        if self.p_asymptotic is not None and not 0.0 <= self.p_asymptotic <= 1.0:
            raise InternalError(f"p-value outside [0, 1]: {self.p_asymptotic}")


@dataclass(frozen=True)
class SignVector:
    """Residual signs u_i = 1{y_i <= fitted_i} - tau; entries in {1-tau, -tau}."""

    u: np.ndarray
    tau: float

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        allowed = {1.0 - self.tau, -self.tau}
        if not set(np.unique(self.u)).issubset(allowed):
            raise InternalError("sign vector entries must lie in {1-tau, -tau}")


def residual_signs(fit: FitResult, tau: float) -> SignVector:
    """Signs from fit residuals; a zero residual counts as y <= fitted."""
    return SignVector(signs_from_residuals(fit.residuals, tau), tau)


def signs_from_residuals(residuals: np.ndarray, tau: float) -> np.ndarray:
    return np.where(residuals <= 0.0, 1.0 - tau, -tau)


def _as_sign_array(u) -> np.ndarray:
    return u.u if isinstance(u, SignVector) else np.asarray(u, dtype=float)


def pairwise_psi(d: Dataset) -> np.ndarray:
    """Matrix psi(X_i - X_j) for the gaussian product weight (ones when m = 0)."""
    n = d.n
    psi = np.ones((n, n))
    for c in range(d.m):
        col = d.x[:, c]
        diff = col[:, None] - col[None, :]
        psi = psi * (_INV_SQRT_2PI * np.exp(-0.5 * diff * diff))
    return psi


def pairwise_weights(d: Dataset, kspec: KernelSpec, h: float, psi: np.ndarray | None = None) -> np.ndarray:
    """Matrix K((W_i - W_j)/h) * psi(X_i - X_j) with a zero diagonal."""
    dw = d.w[:, None] - d.w[None, :]
    a = k_eval(kspec, dw / h)
    a = a * (pairwise_psi(d) if psi is None else psi)
    np.fill_diagonal(a, 0.0)
    return a


def i_n(u, d: Dataset, kspec: KernelSpec, h: float, weights: np.ndarray | None = None) -> float:
    """Second-order U-statistic [n(n-1)]^{-1} sum_{i != j} u_i u_j h^{-1} K_h psi."""
    uu = _as_sign_array(u)
    n = d.n
    a = pairwise_weights(d, kspec, h) if weights is None else weights
    return float(uu @ a @ uu) / (h * n * (n - 1))


def v_n2(d: Dataset, kspec: KernelSpec, h: float, tau: float, weights: np.ndarray | None = None) -> float:
    """Conditional-on-covariates null variance of n sqrt(h) I_n.

    A function of the covariates and tau only; the response never
    enters. Raises DegenerateVarianceError when every pairwise kernel
    weight vanishes (e.g. all W pairs outside the kernel support).
    """
    n = d.n
    a = pairwise_weights(d, kspec, h) if weights is None else weights
    total = float((a * a).sum())
    if total <= 0.0:
        raise DegenerateVarianceError(
            "all pairwise kernel weights are zero; decrease c or check W"
        )
    return 2.0 * tau * tau * (1.0 - tau) ** 2 * total / (h * n * (n - 1))


def t_n(fit: FitResult, d: Dataset, kspec: KernelSpec, tau: float,
        h: float | None = None, weights: np.ndarray | None = None) -> TestResult:
    """Studentized pairwise-kernel statistic T_n = n sqrt(h) I_n / v_n."""
    if h is None:
        h = bandwidth(kspec, d.n)
    a = pairwise_weights(d, kspec, h) if weights is None else weights
    u = signs_from_residuals(fit.residuals, tau)
    inval = i_n(u, d, kspec, h, weights=a)
    v2 = v_n2(d, kspec, h, tau, weights=a)
    stat = d.n * math.sqrt(h) * inval / math.sqrt(v2)
    return TestResult(
        method="mlp",
        statistic=stat,
        tau=tau,
        h=h,
        i_n=inval,
        v_n2=v2,
        p_asymptotic=float(norm.sf(stat)),
    )


def zheng_weights(d: Dataset, h: float) -> np.ndarray:
    """Matrix K~((W_i-W_j)/h, (X_i-X_j)/h): triangular kernel of the norm
    of the stacked scaled differences. Zero diagonal."""
    dw = d.w[:, None] - d.w[None, :]
    sq = dw * dw
    for c in range(d.m):
        col = d.x[:, c]
        diff = col[:, None] - col[None, :]
        sq = sq + diff * diff
    kt = triangle_var1(np.sqrt(sq) / h)
    np.fill_diagonal(kt, 0.0)
    return kt


def zheng_sigma2(d: Dataset, h: float, tau: float, weights: np.ndarray | None = None) -> float:
    """Studentizer for the fully smoothed statistic; covariate-only, like v_n2."""
    n = d.n
    q = 1 + d.m
    kt = zheng_weights(d, h) if weights is None else weights
    total = float((kt * kt).sum())
    if total <= 0.0:
        raise DegenerateVarianceError(
            "all pairwise kernel weights are zero in the fully smoothed statistic"
        )
    return 2.0 * tau * tau * (1.0 - tau) ** 2 * total / (h**q * n * (n - 1))


def zheng_stat(fit: FitResult, d: Dataset, h: float, tau: float,
               weights: np.ndarray | None = None) -> TestResult:
    """Fully smoothed competitor statistic (kernels over all covariates)."""
    n = d.n
    q = 1 + d.m
    kt = zheng_weights(d, h) if weights is None else weights
    sigma2 = zheng_sigma2(d, h, tau, weights=kt)
    u = signs_from_residuals(fit.residuals, tau)
    num = float(u @ kt @ u)
    stat = num * h ** (-q / 2.0) / (math.sqrt(sigma2) * (n - 1))
    return TestResult(
        method="zheng",
        statistic=stat,
        tau=tau,
        h=h,
        i_n=None,
        v_n2=sigma2,
        p_asymptotic=float(norm.sf(stat)),
    )


def hz_indicators(design: np.ndarray, intercept_mask: np.ndarray) -> np.ndarray:
    """Indicator matrix Ind[j, i] = 1{Z_j <= Z_i} componentwise.

    The comparison runs over all regressor coordinates except intercept
    columns, where an all-ones coordinate would make it vacuous.
    """
    n = design.shape[0]
    ind = np.ones((n, n), dtype=bool)
    for k in range(design.shape[1]):
        if intercept_mask[k]:
            continue
        col = design[:, k]
        ind &= col[:, None] <= col[None, :]
    return ind


def hz_stat(fit: FitResult, d: Dataset, tau: float,
            indicators: np.ndarray | None = None) -> TestResult:
    """Largest eigenvalue of the averaged outer product of the cumulative
    weighted residual-sign process; bootstrap-only (no pivotal limit)."""
    if indicators is None:
        indicators = hz_indicators(fit.design, fit.model.intercept_mask())
    stat = hz_statistic_from_residuals(fit.residuals, fit.design, tau, indicators)
    return TestResult(method="hz", statistic=stat, tau=tau)


def hz_statistic_from_residuals(residuals: np.ndarray, design: np.ndarray,
                                tau: float, indicators: np.ndarray) -> float:
    n = design.shape[0]
    s = tau - (residuals < 0.0)
    r = (design * s[:, None]).T @ indicators / math.sqrt(n)
    m = r @ r.T / n
    top = float(np.linalg.eigvalsh(m)[-1])
    return max(top, 0.0)
