"""Bootstrap calibration of the lack-of-fit tests.

Three resampling schemes for the residuals, all keeping the covariates
fixed and rebuilding the response around the fitted values:

* wild: eps*_i = w_i |eps_i| with two-point weights taking 2(1-tau)
  with probability 1-tau and -2tau with probability tau, so the
  tau-quantile of eps*_i given the data is exactly zero even under
  heteroscedastic errors.
* naive: resample the fitted residuals with replacement.
* uniform: draw eps*_i from Uniform[-tau, 1-tau], a fixed continuous
  law with tau-quantile zero.

Every replication refits the quantile regression from scratch on the
synthetic response (warm-started on the previous vertex, which changes
speed, not the solution) and recomputes the statistic, so estimation
noise propagates into the bootstrap distribution. Replication b draws
from the stream derived from (seed, b); results are independent of
execution order and worker count, and a failed replication aborts with
its index rather than being skipped, since skipping would bias the
critical value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import loftests, qrfit
from .data import Dataset
from .errors import ConfigError, QcheckError
from .kernels import KernelSpec, bandwidth
from .loftests import TestResult
from .model import ModelSpec
from .rng import substream

SCHEMES = ("wild", "naive", "uniform")
METHODS = ("mlp", "zheng", "hz")


@dataclass(frozen=True)
class BootstrapConfig:
    scheme: str
    B: int
    seed: int
    alpha: float = 0.10

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown bootstrap scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.B < 1:
            raise ConfigError(f"B must be >= 1, got {self.B}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class BootstrapOutcome:
    """Bootstrap statistics with the derived critical value and p-value."""

    t_star: np.ndarray
    critical_value: float
    p_value: float

    def __post_init__(self):
        if not 0.0 < self.p_value <= 1.0:
            raise ConfigError(f"p-value outside (0, 1]: {self.p_value}")


def wild_weights(tau: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Two-point weights: 2(1-tau) with probability 1-tau, else -2tau."""
    if not 0.0 < tau < 1.0:
        raise ConfigError(f"tau must lie strictly inside (0, 1), got {tau}")
    negative = rng.random(n) < tau
    return np.where(negative, -2.0 * tau, 2.0 * (1.0 - tau))


def resample(scheme: str, fit: qrfit.FitResult, d: Dataset, tau: float,
             rng: np.random.Generator) -> np.ndarray:
    """Synthetic response y* = fitted + eps* under the given scheme."""
    fitted = d.y - fit.residuals
    if scheme == "wild":
        w = wild_weights(tau, d.n, rng)
        return fitted + w * np.abs(fit.residuals)
    if scheme == "naive":
        idx = rng.integers(0, d.n, size=d.n)
        return fitted + fit.residuals[idx]
    if scheme == "uniform":
        return fitted + rng.uniform(-tau, 1.0 - tau, size=d.n)
    raise ConfigError(f"unknown bootstrap scheme {scheme!r}; expected one of {SCHEMES}")


def critical_value(t_star: np.ndarray, alpha: float) -> float:
    """Order statistic of rank ceil((1-alpha)(B+1)), clamped to [1, B]."""
    b = len(t_star)
    rank = min(max(math.ceil((1.0 - alpha) * (b + 1)), 1), b)
    return float(np.sort(t_star)[rank - 1])


def p_value(t_star: np.ndarray, observed: float) -> float:
    """Smoothed exceedance proportion (1 + #{T* >= T}) / (B + 1)."""
    b = len(t_star)
    return (1.0 + int(np.count_nonzero(t_star >= observed))) / (b + 1.0)


def prepare_statistic(method: str, fit: qrfit.FitResult, d: Dataset,
                      tau: float, kspec: KernelSpec):
    """Observed TestResult plus a closure mapping a refit to its statistic.

    The covariate-only pieces (kernel weight matrices, studentizers,
    indicator matrices) are computed once here and shared by every
    bootstrap replicate, which is valid because resampling never moves
    the covariates.
    """
    n = d.n
    if method == "mlp":
        h = bandwidth(kspec, n)
        weights = loftests.pairwise_weights(d, kspec, h)
        observed = loftests.t_n(fit, d, kspec, tau, h=h, weights=weights)
        denom = math.sqrt(observed.v_n2)
        scale = n * math.sqrt(h) / (h * n * (n - 1))

        def star(fb: qrfit.FitResult) -> float:
            u = loftests.signs_from_residuals(fb.residuals, tau)
            return scale * float(u @ weights @ u) / denom

        return observed, star
    if method == "zheng":
        h = bandwidth(kspec, n)
        q = 1 + d.m
        weights = loftests.zheng_weights(d, h)
        observed = loftests.zheng_stat(fit, d, h, tau, weights=weights)
        scale = h ** (-q / 2.0) / (math.sqrt(observed.v_n2) * (n - 1))

        def star(fb: qrfit.FitResult) -> float:
            u = loftests.signs_from_residuals(fb.residuals, tau)
            return scale * float(u @ weights @ u)

        return observed, star
    if method == "hz":
        indicators = loftests.hz_indicators(fit.design, fit.model.intercept_mask())
        observed = loftests.hz_stat(fit, d, tau, indicators=indicators)
        design = fit.design

        def star(fb: qrfit.FitResult) -> float:
            return loftests.hz_statistic_from_residuals(fb.residuals, design, tau, indicators)

        return observed, star
    raise ConfigError(f"unknown test method {method!r}; expected one of {METHODS}")


def bootstrap_test(method: str, spec: ModelSpec, d: Dataset, tau: float,
                   kspec: KernelSpec, cfg: BootstrapConfig) -> tuple[TestResult, BootstrapOutcome]:
    """Run one test with bootstrap critical values.

    Fits the model on the original data, then for each of the B
    replications regenerates the response, refits, and recomputes the
    statistic. The rejection decision at level alpha is
    observed.statistic >= outcome.critical_value.
    """
    fit0 = qrfit.fit(spec, d, tau)
    observed, star = prepare_statistic(method, fit0, d, tau, kspec)
    t_star = np.empty(cfg.B)
    for b in range(cfg.B):
        rng = substream(cfg.seed, b)
        try:
            y_star = resample(cfg.scheme, fit0, d, tau, rng)
            fb = qrfit.refit(fit0, y_star)
            t_star[b] = star(fb)
        except QcheckError as exc:
            raise type(exc)(f"bootstrap replication {b} failed: {exc}") from exc
    outcome = BootstrapOutcome(
        t_star=t_star,
        critical_value=critical_value(t_star, cfg.alpha),
        p_value=p_value(t_star, observed.statistic),
    )
    return observed, outcome
