"""Monte Carlo harness for level and power experiments.

Data-generating processes (all with W ~ N(0,1) and X ~ Binomial(5, 0.5)
independent of W, X drawn as a sum of five fair coins):

    setup1: Y = 1 + W + X + delta * (W^2 + W X + X^2) + eps
    setup2: Y = delta * log(1 + W^2 + X^2) + eps

with error laws N(0,1), exp(N(0,1)) - 1 (median zero), and the
heteroscedastic N(0, (1+W^2)/2); the extra law "none" (eps = 0) is a
diagnostics hook. The fitted null model is always the linear median
regression on (1, W, X) at tau = 0.5, so delta = 0 sits inside the null
family and delta > 0 indexes the deviation.

Simulated draws are used as generated; covariates are not standardized
here.

Replication r of a cell group draws its data from the stream
(seed, 0, family, law, delta, r) and its bootstrap replicate b for
scheme s from (seed, 1, family, law, delta, s, r, b), so any cell can
be recomputed in isolation and results do not depend on worker count.
Within one replication the bootstrap refits are shared across the
bandwidth grid (and, in the power study, across test statistics): the
resampled response does not depend on the bandwidth, so only the cheap
statistic evaluation is per-bandwidth. Rejection decisions for
different bandwidths are therefore correlated across replications, but
each cell's marginal rejection rate is unaffected.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from . import bootstrap, loftests, qrfit
from .data import Dataset
from .errors import ConfigError, QcheckError
from .kernels import DEFAULT_C_GRID, KernelSpec
from .model import ModelSpec, Term
from .rng import substream

FAMILIES = ("setup1", "setup2")
ERROR_LAWS = ("gauss", "lognorm_centered", "hetero_gauss", "none")
DEFAULT_DELTAS = {
    "setup1": (0.0, 0.05, 0.1, 0.15, 0.2),
    "setup2": (0.0, 0.25, 0.5, 0.75, 1.0),
}

_FAMILY_ID = {name: k for k, name in enumerate(FAMILIES)}
_LAW_ID = {name: k for k, name in enumerate(ERROR_LAWS)}
_SCHEME_ID = {name: k for k, name in enumerate(bootstrap.SCHEMES)}
_DOMAIN_DATA = 0
_DOMAIN_BOOT = 1

NULL_MODEL = ModelSpec((Term("intercept"), Term("raw", ("w",)), Term("raw", ("x1",))))

CSV_COLUMNS = ("study", "dgp", "error_law", "method", "scheme", "c",
               "delta", "n", "reps", "rejection_rate", "mc_std_error")


@dataclass(frozen=True)
class DgpSpec:
    family: str
    delta: float
    error_law: str
    n: int

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown DGP family {self.family!r}; expected one of {FAMILIES}")
        if self.error_law not in ERROR_LAWS:
            raise ConfigError(f"unknown error law {self.error_law!r}; expected one of {ERROR_LAWS}")
        if self.delta < 0:
            raise ConfigError(f"delta must be >= 0, got {self.delta}")
        if self.n < 10:
            raise ConfigError(f"simulation sample size must be >= 10, got {self.n}")


def draw_dataset(dgp: DgpSpec, rng: np.random.Generator) -> Dataset:
    """One simulated sample; draw order is fixed as W, X, then eps."""
    n = dgp.n
    w = rng.standard_normal(n)
    x = (rng.random((n, 5)) < 0.5).sum(axis=1).astype(float)
    if dgp.error_law == "gauss":
        eps = rng.standard_normal(n)
    elif dgp.error_law == "lognorm_centered":
        eps = np.exp(rng.standard_normal(n)) - 1.0
    elif dgp.error_law == "hetero_gauss":
        eps = rng.standard_normal(n) * np.sqrt((1.0 + w * w) / 2.0)
    else:  # "none", diagnostics hook
        eps = np.zeros(n)
    if dgp.family == "setup1":
        y = 1.0 + w + x + dgp.delta * (w * w + w * x + x * x) + eps
    else:
        y = dgp.delta * np.log1p(w * w + x * x) + eps
    return Dataset(y=y, w=w, x=x[:, None], w_name="w", x_names=("x1",))


@dataclass(frozen=True)
class McRow:
    study: str
    dgp: str
    error_law: str
    method: str
    scheme: str
    c: float | None
    delta: float
    n: int
    reps: int
    rejection_rate: float
    mc_std_error: float


@dataclass(frozen=True)
class McResult:
    rows: tuple[McRow, ...]

    def cell(self, **criteria) -> McRow:
        """The unique row matching the given field values."""
        hits = [r for r in self.rows
                if all(getattr(r, k) == v for k, v in criteria.items())]
        if len(hits) != 1:
            raise ConfigError(f"criteria {criteria} matched {len(hits)} rows")
        return hits[0]


def _se(rate: float, reps: int) -> float:
    return math.sqrt(rate * (1.0 - rate) / reps)


def _delta_key(delta: float) -> int:
    return int(round(delta * 1e8))


@dataclass(frozen=True)
class LevelStudyConfig:
    """Size experiment: setup1 with delta = 0, nominal level alpha."""

    seed: int
    n: int = 100
    reps: int = 1000
    B: int = 199
    tau: float = 0.5
    alpha: float = 0.10
    c_grid: tuple[float, ...] = DEFAULT_C_GRID
    error_laws: tuple[str, ...] = ("gauss", "lognorm_centered", "hetero_gauss")
    schemes: tuple[str, ...] = bootstrap.SCHEMES
    k_family: str = "triangle_var1"
    threads: int = 1

    def __post_init__(self):
        for law in self.error_laws:
            if law not in ERROR_LAWS:
                raise ConfigError(f"unknown error law {law!r}")
        for s in self.schemes:
            if s not in bootstrap.SCHEMES:
                raise ConfigError(f"unknown bootstrap scheme {s!r}")
        if self.reps < 1 or self.B < 1:
            raise ConfigError("reps and B must be >= 1")


@dataclass(frozen=True)
class PowerStudyConfig:
    """Power experiment as a function of delta, wild bootstrap throughout."""

    seed: int
    n: int = 100
    reps: int = 1000
    B: int = 199
    tau: float = 0.5
    alpha: float = 0.10
    c_grid: tuple[float, ...] = DEFAULT_C_GRID
    families: tuple[str, ...] = FAMILIES
    deltas: dict = field(default_factory=lambda: dict(DEFAULT_DELTAS))
    error_laws: tuple[str, ...] = ("gauss",)
    methods: tuple[str, ...] = ("mlp", "zheng", "hz")
    k_family: str = "triangle_var1"
    threads: int = 1

    def __post_init__(self):
        for fam in self.families:
            if fam not in FAMILIES:
                raise ConfigError(f"unknown DGP family {fam!r}")
            if fam not in self.deltas:
                raise ConfigError(f"no delta grid given for family {fam!r}")
        for m in self.methods:
            if m not in bootstrap.METHODS:
                raise ConfigError(f"unknown method {m!r}")


def _fit_null(d: Dataset, tau: float) -> qrfit.FitResult:
    return qrfit.fit(NULL_MODEL, d, tau)


def _mlp_channels(d, fit0, tau, c_grid, k_family):
    """Per-bandwidth weight matrices, studentizers, and observed statistics."""
    n = d.n
    psi = loftests.pairwise_psi(d)
    chans = []
    for c in c_grid:
        kspec = KernelSpec(k_family=k_family, c=c)
        h = kspec.c * float(n) ** (-0.2)
        a = loftests.pairwise_weights(d, kspec, h, psi=psi)
        v2 = loftests.v_n2(d, kspec, h, tau, weights=a)
        scale = n * math.sqrt(h) / (h * n * (n - 1))
        denom = math.sqrt(v2)
        u0 = loftests.signs_from_residuals(fit0.residuals, tau)
        observed = scale * float(u0 @ a @ u0) / denom
        chans.append((a, scale / denom, observed))
    return chans


def _level_replication(cfg: LevelStudyConfig, law: str, rep: int) -> np.ndarray:
    """Decisions for one replication: row 0 asymptotic, then one row per scheme."""
    fam_id, law_id, dkey = _FAMILY_ID["setup1"], _LAW_ID[law], _delta_key(0.0)
    rng_d = substream(cfg.seed, _DOMAIN_DATA, fam_id, law_id, dkey, rep)
    d = draw_dataset(DgpSpec("setup1", 0.0, law, cfg.n), rng_d)
    fit0 = _fit_null(d, cfg.tau)
    chans = _mlp_channels(d, fit0, cfg.tau, cfg.c_grid, cfg.k_family)
    observed = np.array([obs for _, _, obs in chans])

    nc = len(cfg.c_grid)
    out = np.zeros((1 + len(cfg.schemes), nc), dtype=bool)
    out[0] = observed >= norm.isf(cfg.alpha)

    for si, scheme in enumerate(cfg.schemes):
        sid = _SCHEME_ID[scheme]
        t_star = np.empty((cfg.B, nc))
        for b in range(cfg.B):
            rng_b = substream(cfg.seed, _DOMAIN_BOOT, fam_id, law_id, dkey, sid, rep, b)
            try:
                y_star = bootstrap.resample(scheme, fit0, d, cfg.tau, rng_b)
                fb = qrfit.refit(fit0, y_star)
            except QcheckError as exc:
                raise type(exc)(
                    f"replication {rep}, scheme {scheme}, bootstrap draw {b}: {exc}"
                ) from exc
            u = loftests.signs_from_residuals(fb.residuals, cfg.tau)
            for ci, (a, factor, _) in enumerate(chans):
                t_star[b, ci] = factor * float(u @ a @ u)
        for ci in range(nc):
            cv = bootstrap.critical_value(t_star[:, ci], cfg.alpha)
            out[1 + si, ci] = observed[ci] >= cv
    return out


def run_level_study(cfg: LevelStudyConfig) -> McResult:
    """Empirical rejection rates of the pairwise-kernel test under the null.

    For every (error law, bandwidth constant) the output has one row
    per bootstrap scheme plus a row for the asymptotic critical value.
    """
    rows = []
    for law in cfg.error_laws:
        decisions = _aggregate(cfg.threads, _level_replication, cfg, law, cfg.reps)
        rates = decisions / cfg.reps
        for ci, c in enumerate(cfg.c_grid):
            for si, scheme in enumerate(("asymptotic",) + tuple(cfg.schemes)):
                rate = float(rates[si, ci])
                rows.append(McRow(
                    study="level", dgp="setup1", error_law=law, method="mlp",
                    scheme=scheme, c=float(c), delta=0.0, n=cfg.n, reps=cfg.reps,
                    rejection_rate=rate, mc_std_error=_se(rate, cfg.reps),
                ))
    return McResult(tuple(rows))


def _power_replication(cfg: PowerStudyConfig, family: str, law: str, delta: float, rep: int) -> np.ndarray:
    fam_id, law_id, dkey = _FAMILY_ID[family], _LAW_ID[law], _delta_key(delta)
    rng_d = substream(cfg.seed, _DOMAIN_DATA, fam_id, law_id, dkey, rep)
    d = draw_dataset(DgpSpec(family, delta, law, cfg.n), rng_d)
    fit0 = _fit_null(d, cfg.tau)

    evaluators = []  # (star(fit)->float, observed)
    if "mlp" in cfg.methods:
        for a, factor, obs in _mlp_channels(d, fit0, cfg.tau, cfg.c_grid, cfg.k_family):
            evaluators.append((_QuadStar(a, factor, cfg.tau), obs))
    if "zheng" in cfg.methods:
        for c in cfg.c_grid:
            h = c * float(cfg.n) ** (-0.2)
            kt = loftests.zheng_weights(d, h)
            sigma2 = loftests.zheng_sigma2(d, h, cfg.tau, weights=kt)
            factor = h ** (-(1 + d.m) / 2.0) / (math.sqrt(sigma2) * (cfg.n - 1))
            star = _QuadStar(kt, factor, cfg.tau)
            u0 = loftests.signs_from_residuals(fit0.residuals, cfg.tau)
            evaluators.append((star, factor * float(u0 @ kt @ u0)))
    if "hz" in cfg.methods:
        ind = loftests.hz_indicators(fit0.design, NULL_MODEL.intercept_mask())
        star = _HzStar(fit0.design, ind, cfg.tau)
        evaluators.append((star, star.from_fit(fit0)))

    nk = len(evaluators)
    observed = np.array([obs for _, obs in evaluators])
    t_star = np.empty((cfg.B, nk))
    sid = _SCHEME_ID["wild"]
    for b in range(cfg.B):
        rng_b = substream(cfg.seed, _DOMAIN_BOOT, fam_id, law_id, dkey, sid, rep, b)
        try:
            y_star = bootstrap.resample("wild", fit0, d, cfg.tau, rng_b)
            fb = qrfit.refit(fit0, y_star)
        except QcheckError as exc:
            raise type(exc)(
                f"replication {rep}, delta {delta}, bootstrap draw {b}: {exc}"
            ) from exc
        for k, (star, _) in enumerate(evaluators):
            t_star[b, k] = star.from_fit(fb)
    decisions = np.zeros(nk, dtype=bool)
    for k in range(nk):
        decisions[k] = observed[k] >= bootstrap.critical_value(t_star[:, k], cfg.alpha)
    return decisions


class _QuadStar:
    """Statistic = factor * u' A u with u the residual signs of a fit."""

    def __init__(self, weights, factor, tau):
        self.weights = weights
        self.factor = factor
        self.tau = tau

    def from_fit(self, f: qrfit.FitResult) -> float:
        u = loftests.signs_from_residuals(f.residuals, self.tau)
        return self.factor * float(u @ self.weights @ u)


class _HzStar:
    def __init__(self, design, indicators, tau):
        self.design = design
        self.indicators = indicators
        self.tau = tau

    def from_fit(self, f: qrfit.FitResult) -> float:
        return loftests.hz_statistic_from_residuals(
            f.residuals, self.design, self.tau, self.indicators)


def _power_channel_labels(cfg: PowerStudyConfig):
    labels = []
    if "mlp" in cfg.methods:
        labels += [("mlp", float(c)) for c in cfg.c_grid]
    if "zheng" in cfg.methods:
        labels += [("zheng", float(c)) for c in cfg.c_grid]
    if "hz" in cfg.methods:
        labels.append(("hz", None))
    return labels


def run_power_study(cfg: PowerStudyConfig) -> McResult:
    """Wild-bootstrap rejection rates along the delta grids.

    All statistics within a replication share the sample, the fit, and
    the bootstrap refits, so method comparisons are paired.
    """
    rows = []
    for family in cfg.families:
        for law in cfg.error_laws:
            for delta in cfg.deltas[family]:
                decisions = _aggregate(
                    cfg.threads, _power_replication, cfg, family, law, float(delta), cfg.reps)
                rates = decisions / cfg.reps
                for (method, c), rate in zip(_power_channel_labels(cfg), rates):
                    rate = float(rate)
                    rows.append(McRow(
                        study="power", dgp=family, error_law=law, method=method,
                        scheme="wild", c=c, delta=float(delta), n=cfg.n,
                        reps=cfg.reps, rejection_rate=rate,
                        mc_std_error=_se(rate, cfg.reps),
                    ))
    return McResult(tuple(rows))


def _aggregate(threads: int, fn, cfg, *args) -> np.ndarray:
    """Sum fn(cfg, *head, rep) over rep = 0..reps-1; reps is the last arg.

    Replications own derived streams, so execution may be parallel;
    aggregation is by replication index and the total is identical for
    any worker count.
    """
    *head, reps = args
    if threads <= 1:
        total = None
        for rep in range(reps):
            dec = fn(cfg, *head, rep)
            total = dec.astype(np.int64) if total is None else total + dec
        return total
    with ProcessPoolExecutor(max_workers=threads) as pool:
        chunk = max(1, reps // (8 * threads))
        results = pool.map(_WorkerCall(fn, cfg, tuple(head)), range(reps), chunksize=chunk)
        total = None
        for dec in results:
            total = dec.astype(np.int64) if total is None else total + dec
        return total


class _WorkerCall:
    """Picklable bound call for process pools."""

    def __init__(self, fn, cfg, head):
        self.fn = fn
        self.cfg = cfg
        self.head = head

    def __call__(self, rep: int):
        return self.fn(self.cfg, *self.head, rep)


def rows_to_csv(rows, fh, header_comment: str | None = None) -> None:
    """Write rows in the fixed column order; floats via repr so output
    is byte-stable across runs."""
    if header_comment:
        fh.write(f"# {header_comment}\n")
    fh.write(",".join(CSV_COLUMNS) + "\n")
    for r in rows:
        fh.write(",".join([
            r.study, r.dgp, r.error_law, r.method, r.scheme,
            "" if r.c is None else repr(float(r.c)),
            repr(float(r.delta)), str(r.n), str(r.reps),
            repr(float(r.rejection_rate)), repr(float(r.mc_std_error)),
        ]) + "\n")


def rows_to_plot_csv(rows, fh, header_comment: str | None = None) -> None:
    """Long-format per-curve data: x is the bandwidth constant for the
    level study and delta for the power study."""
    if header_comment:
        fh.write(f"# {header_comment}\n")
    fh.write("study,curve,x_name,x,rejection_rate,mc_std_error\n")
    for r in rows:
        if r.study == "level":
            curve = f"{r.dgp}:{r.error_law}:{r.method}:{r.scheme}"
            x_name, x = "c", r.c
        else:
            tag = "" if r.c is None else f":c={repr(float(r.c))}"
            curve = f"{r.dgp}:{r.error_law}:{r.method}:{r.scheme}{tag}"
            x_name, x = "delta", r.delta
        fh.write(",".join([
            r.study, curve, x_name, repr(float(x)),
            repr(float(r.rejection_rate)), repr(float(r.mc_std_error)),
        ]) + "\n")
