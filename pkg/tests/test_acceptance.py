"""Acceptance criteria for the package, one test per criterion.

Each test prints a single PASS/FAIL line (plus measured numbers) and
asserts the stated tolerance. Run with:

    python -m pytest tests/test_acceptance.py -v -s

The Monte Carlo criteria use the pinned design: n=100, 1000 outer
replications, B=199 bootstrap draws, nominal level 10%, bandwidth
constants {0.5, 1, 2, 4}, seed fixed below. Expect roughly half an
hour on a single core.
"""

import json
import math
import subprocess
import sys
import time
from itertools import combinations

import numpy as np
import pytest
from scipy.stats import kstest, norm

from oracle_utils import (hz_sphere_oracle, i_n_oracle, v_n2_oracle,
                          zheng_parts_oracle)
from qcheck.bootstrap import resample, wild_weights
from qcheck.data import bundled_birthweight_path
from qcheck.kernels import KernelSpec, bandwidth
from qcheck.loftests import (hz_stat, i_n, pairwise_weights,
                             signs_from_residuals, v_n2, zheng_sigma2,
                             zheng_weights)
from qcheck.mc import (DgpSpec, LevelStudyConfig, PowerStudyConfig, NULL_MODEL,
                       _mlp_channels, draw_dataset, run_level_study,
                       run_power_study)
from qcheck.model import parse_model_inline
from qcheck.qrfit import check_loss, fit, refit
from qcheck.rng import substream

SEED = 20240808
BAND = (0.07, 0.13)
C_GRID = (0.5, 1.0, 2.0, 4.0)
TAU = 0.5


@pytest.fixture()
def report(capsys):
    """Print one PASS/FAIL line per criterion straight to the terminal,
    bypassing capture so the line shows in any pytest invocation."""

    def _report(tag, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {tag}: {'PASS' if ok else 'FAIL'} - {detail}")
        return ok

    return _report


@pytest.fixture(scope="module")
def level_gauss():
    cfg = LevelStudyConfig(seed=SEED, n=100, reps=1000, B=199, c_grid=C_GRID,
                           error_laws=("gauss",), schemes=("wild",))
    return run_level_study(cfg)


@pytest.fixture(scope="module")
def level_hetero():
    cfg = LevelStudyConfig(seed=SEED, n=100, reps=1000, B=199, c_grid=C_GRID,
                           error_laws=("hetero_gauss",),
                           schemes=("wild", "naive", "uniform"))
    return run_level_study(cfg)


def test_criterion_1_null_calibration_homoscedastic(level_gauss, report):
    rates = {c: level_gauss.cell(scheme="wild", c=c).rejection_rate for c in C_GRID}
    ok = all(BAND[0] <= r <= BAND[1] for r in rates.values())
    detail = "wild/gauss rejection at 10%: " + ", ".join(
        f"c={c}: {r:.3f}" for c, r in rates.items())
    assert report("1 [null calibration, homoscedastic]", ok, detail), detail


def test_criterion_2_heteroscedastic_discrimination(level_gauss, level_hetero, report):
    wild = {c: level_hetero.cell(scheme="wild", c=c).rejection_rate for c in C_GRID}
    naive = {c: level_hetero.cell(scheme="naive", c=c).rejection_rate for c in C_GRID}
    unif = {c: level_hetero.cell(scheme="uniform", c=c).rejection_rate for c in C_GRID}
    asym = {c: level_gauss.cell(scheme="asymptotic", c=c).rejection_rate for c in C_GRID}
    ok_wild = all(BAND[0] <= r <= BAND[1] for r in wild.values())
    ok_naive = all(r > 0.13 for r in naive.values())
    ok_unif = all(r > 0.13 for r in unif.values())
    ok_asym = all(r < 0.07 for r in asym.values())
    detail = (
        "hetero wild " + "/".join(f"{wild[c]:.3f}" for c in C_GRID)
        + f" in [.07,.13]: {ok_wild}; "
        + "naive " + "/".join(f"{naive[c]:.3f}" for c in C_GRID)
        + f" > .13: {ok_naive}; "
        + "uniform " + "/".join(f"{unif[c]:.3f}" for c in C_GRID)
        + f" > .13: {ok_unif}; "
        + "asymptotic(gauss) " + "/".join(f"{asym[c]:.3f}" for c in C_GRID)
        + f" < .07: {ok_asym}"
    )
    ok = ok_wild and ok_naive and ok_unif and ok_asym
    assert report("2 [heteroscedastic discrimination]", ok, detail), detail


@pytest.fixture(scope="module")
def power_setup2():
    cfg = PowerStudyConfig(
        seed=SEED, n=100, reps=1000, B=199, c_grid=(2.0,),
        families=("setup2",), deltas={"setup2": (0.0, 1.0)},
        methods=("mlp", "zheng", "hz"))
    return run_power_study(cfg)


def test_criterion_3_power_ordering(power_setup2, report):
    mlp2 = power_setup2.cell(method="mlp", c=2.0, delta=1.0)
    zh2 = power_setup2.cell(method="zheng", c=2.0, delta=1.0)
    hz2 = power_setup2.cell(method="hz", delta=1.0)
    ok_methods = mlp2.rejection_rate >= hz2.rejection_rate - 2 * hz2.mc_std_error

    setup1 = run_power_study(PowerStudyConfig(
        seed=SEED, n=100, reps=1000, B=199, c_grid=(0.5, 2.0),
        families=("setup1",), deltas={"setup1": (0.2,)}, methods=("mlp",)))
    lo = setup1.cell(method="mlp", c=0.5, delta=0.2)
    hi = setup1.cell(method="mlp", c=2.0, delta=0.2)
    ok_bandwidth = hi.rejection_rate >= lo.rejection_rate - 2 * lo.mc_std_error

    detail = (
        f"setup2 delta=1: mlp(c=2)={mlp2.rejection_rate:.3f}, zheng(c=2)="
        f"{zh2.rejection_rate:.3f}, hz={hz2.rejection_rate:.3f} "
        f"(2se={2*hz2.mc_std_error:.3f}); setup1 delta=0.2: mlp c=2 "
        f"{hi.rejection_rate:.3f} vs c=0.5 {lo.rejection_rate:.3f} "
        f"(2se={2*lo.mc_std_error:.3f})"
    )
    ok = ok_methods and ok_bandwidth
    assert report("3 [power ordering]", ok, detail), detail


def test_power_at_null_equals_level(power_setup2, report):
    # every method's delta = 0 rejection sits at the nominal level
    nulls = {m: power_setup2.cell(method=m, delta=0.0)
             for m in ("mlp", "zheng", "hz")}
    ok = all(abs(r.rejection_rate - 0.10) <= 3 * max(r.mc_std_error, 0.0095)
             for r in nulls.values())
    detail = "delta=0 rejection at nominal 10%: " + ", ".join(
        f"{m}={r.rejection_rate:.3f}" for m, r in nulls.items())
    assert report("3x [power at null equals level]", ok, detail), detail


def test_power_monotone_in_delta(report):
    # desk-scale check that rejection is nondecreasing along the delta
    # grid, allowing 2 mc_std_error slack between adjacent points
    res = run_power_study(PowerStudyConfig(
        seed=SEED + 40, n=100, reps=400, B=99, c_grid=(1.0,),
        families=("setup1",), deltas={"setup1": (0.0, 0.05, 0.1, 0.15, 0.2)},
        methods=("mlp",)))
    cells = [res.cell(method="mlp", c=1.0, delta=d)
             for d in (0.0, 0.05, 0.1, 0.15, 0.2)]
    ok = all(
        b.rejection_rate >= a.rejection_rate
        - 2 * max(a.mc_std_error, b.mc_std_error)
        for a, b in zip(cells, cells[1:]))
    detail = "setup1 mlp c=1 rejection along delta grid: " + " -> ".join(
        f"{c.rejection_rate:.3f}" for c in cells)
    assert report("3y [power monotone in delta]", ok, detail), detail


def _tn_null_draws(n, reps, c, seed, fitted=True):
    kspec = KernelSpec(c=c)
    out = np.empty(reps)
    for r in range(reps):
        d = draw_dataset(DgpSpec("setup1", 0.0, "gauss", n), substream(seed, r))
        chans = None
        if fitted:
            f0 = fit(NULL_MODEL, d, TAU)
            resid = f0.residuals
        else:
            design = np.column_stack([np.ones(n), d.w, d.x[:, 0]])
            resid = d.y - design @ np.array([1.0, 1.0, 1.0])
        h = bandwidth(kspec, n)
        a = pairwise_weights(d, kspec, h)
        v2 = v_n2(d, kspec, h, TAU, weights=a)
        u = signs_from_residuals(resid, TAU)
        out[r] = n * math.sqrt(h) * (float(u @ a @ u) / (h * n * (n - 1))) / math.sqrt(v2)
    return out


def test_criterion_4a_statistic_asymptotic_normality(report):
    t = _tn_null_draws(n=500, reps=2000, c=1.0, seed=SEED + 1, fitted=True)
    control = _tn_null_draws(n=500, reps=2000, c=1.0, seed=SEED + 2, fitted=False)
    p_fit = float(kstest(t, "norm").pvalue)
    p_ctl = float(kstest(control, "norm").pvalue)
    ok = p_fit >= 0.01
    detail = (
        f"fitted T_n at n=500: mean {t.mean():+.3f}, sd {t.std():.3f}, KS p={p_fit:.2e} "
        f"(need >= 0.01); true-coefficient control: mean {control.mean():+.3f}, "
        f"sd {control.std():.3f}, KS p={p_ctl:.2e}. The estimation shift decays "
        f"like n^(-1/10) and still dominates at n=500 (the control's own "
        f"remaining discrepancy is the statistic's finite-n skew, an order "
        f"of magnitude smaller); see README."
    )
    assert report("4a [statistic normality at n=500]", ok, detail), detail


def test_criterion_4b_bootstrap_normality(report):
    n, B = 500, 2000
    d = draw_dataset(DgpSpec("setup1", 0.0, "gauss", n), substream(SEED + 3, 0))
    f0 = fit(NULL_MODEL, d, TAU)
    (a, factor, _), = _mlp_channels(d, f0, TAU, (1.0,), "triangle_var1")
    t_star = np.empty(B)
    for b in range(B):
        y_star = resample("wild", f0, d, TAU, substream(SEED + 3, 1, b))
        fb = refit(f0, y_star)
        u = signs_from_residuals(fb.residuals, TAU)
        t_star[b] = factor * float(u @ a @ u)
    p = float(kstest(t_star, "norm").pvalue)
    ok = p >= 0.01
    detail = (
        f"wild-bootstrap T*_n at n=500, B=2000: mean {t_star.mean():+.3f}, "
        f"sd {t_star.std():.3f}, KS p={p:.2e} (need >= 0.01). T* tracks the "
        f"finite-n law of T_n (which is what calibrates the test), not yet N(0,1)."
    )
    assert report("4b [bootstrap normality at n=500]", ok, detail), detail


def test_criterion_5a_pairwise_oracles(report):
    worst = 0.0
    rng = np.random.default_rng(SEED)
    from qcheck.data import Dataset
    for n in (2, 3, 5, 9, 17, 33, 50):
        for m in (0, 1, 2):
            d = Dataset(rng.standard_normal(n), rng.standard_normal(n) * 0.8,
                        rng.standard_normal((n, m)),
                        x_names=tuple(f"x{j+1}" for j in range(m)))
            u = signs_from_residuals(rng.standard_normal(n), 0.3)
            for kf, h in (("triangle_var1", 1.5), ("gaussian", 0.6)):
                kspec = KernelSpec(k_family=kf)
                got = i_n(u, d, kspec, h)
                want = i_n_oracle(u, d, kspec, h)
                worst = max(worst, abs(got - want) / max(abs(want), 1e-300))
                got = v_n2(d, kspec, h, 0.3)
                want = v_n2_oracle(d, kspec, h, 0.3)
                worst = max(worst, abs(got - want) / abs(want))
            num, sig2 = zheng_parts_oracle(u, d, 1.2, 0.3)
            got_sig = zheng_sigma2(d, 1.2, 0.3)
            worst = max(worst, abs(got_sig - sig2) / abs(sig2))
            kt = zheng_weights(d, 1.2)
            got_num = float(u @ kt @ u) / 1.2 ** (1 + m)
            worst = max(worst, abs(got_num - num) / max(abs(num), 1e-12))
    ok = worst <= 1e-12
    detail = f"max relative error vs double-loop oracles over n<=50 sweep: {worst:.2e}"
    assert report("5a [pairwise statistic oracles]", ok, detail), detail


def test_criterion_5b_lp_oracle(report):
    rng = np.random.default_rng(SEED + 10)
    worst = 0.0
    sign_ok = True
    for trial in range(30):
        n = int(rng.integers(4, 13))
        p = int(rng.integers(1, 3))
        X = np.column_stack([np.ones(n)] + [rng.standard_normal(n) for _ in range(p - 1)])
        y = rng.standard_normal(n) * float(rng.choice([1.0, 5.0]))
        if trial % 3 == 0:
            y = np.round(y, 1)  # ties
        tau = float(rng.uniform(0.1, 0.9))
        from qcheck.data import Dataset
        d = Dataset(y, X[:, -1] if p > 1 else rng.standard_normal(n), np.empty((n, 0)))
        spec = parse_model_inline("intercept" if p == 1 else "intercept,raw w")
        res = fit(spec, d, tau)
        best = np.inf
        for rows in combinations(range(n), p):
            sub = res.design[list(rows)]
            if abs(np.linalg.det(sub)) < 1e-12:
                continue
            beta = np.linalg.solve(sub, y[list(rows)])
            best = min(best, float(check_loss(y - res.design @ beta, tau).sum()))
        worst = max(worst, abs(res.objective - best))
        probes = res.beta.beta + rng.standard_normal((10_000, p)) * rng.choice(
            [0.01, 0.3, 3.0], size=(10_000, 1))
        objs = check_loss(y[None, :] - probes @ res.design.T, tau).sum(axis=1)
        worst = max(worst, max(0.0, res.objective - float(objs.min())))
        n_neg = int(np.sum(res.residuals < 0))
        n_nonpos = int(np.sum(res.residuals <= 0))
        sign_ok &= n_neg <= n * tau <= n_nonpos
        sign_ok &= res.n_zero_residuals >= min(p, n)
    ok = worst <= 1e-8 and sign_ok
    detail = (f"max objective gap vs vertex enumeration + 10k probes over 30 "
              f"instances: {worst:.2e}; quantile sign counts hold: {sign_ok}")
    assert report("5b [check-loss LP oracle]", ok, detail), detail


def test_criterion_5c_hz_sphere_oracle(report):
    rng = np.random.default_rng(SEED + 20)
    from qcheck.data import Dataset
    worst = -np.inf
    for trial in range(5):
        n = int(rng.integers(20, 45))
        d = Dataset(rng.standard_normal(n), rng.standard_normal(n),
                    rng.standard_normal((n, 1)), x_names=("x1",))
        res = fit(parse_model_inline("intercept,raw w,raw x1"), d, 0.25)
        tr = hz_stat(res, d, 0.25)
        probe = hz_sphere_oracle(res.residuals, res.design, 0.25,
                                 res.model.intercept_mask(), 10_000, seed=trial)
        worst = max(worst, probe - tr.statistic)
    ok = worst <= 1e-6
    detail = f"max(sphere probe - eigenvalue) over 5 instances: {worst:.2e} (need <= 1e-6)"
    assert report("5c [cumulative-sum eigenvalue oracle]", ok, detail), detail


def test_criterion_5d_wild_weight_frequency(report):
    devs = {}
    for i, tau in enumerate((0.1, 0.25, 0.5, 0.75, 0.9)):
        w = wild_weights(tau, 100_000, substream(SEED + 30, i))
        devs[tau] = abs(float((w < 0).mean()) - tau)
    ok = all(v <= 0.005 for v in devs.values())
    detail = "negative-atom frequency deviation over 100k draws: " + ", ".join(
        f"tau={t}: {v:.4f}" for t, v in devs.items())
    assert report("5d [wild weight frequencies]", ok, detail), detail


def test_criterion_5e_bit_reproducibility(report):
    cfg = dict(seed=SEED, n=60, reps=30, B=39, c_grid=(1.0, 2.0),
               error_laws=("hetero_gauss",), schemes=("wild", "naive"))
    a = run_level_study(LevelStudyConfig(**cfg))
    b = run_level_study(LevelStudyConfig(**cfg))
    c = run_level_study(LevelStudyConfig(threads=2, **cfg))
    sub = run_level_study(LevelStudyConfig(**{**cfg, "c_grid": (2.0,),
                                              "schemes": ("naive",)}))
    ok = (a == b) and (a == c) and (
        a.cell(scheme="naive", c=2.0).rejection_rate
        == sub.cell(scheme="naive", c=2.0).rejection_rate)
    detail = (f"rerun identical: {a == b}; 2-worker run identical: {a == c}; "
              f"single cell recomputed from restricted grid matches: {ok}")
    assert report("5e [bit reproducibility]", ok, detail), detail


def test_criterion_6_cli_end_to_end(tmp_path, report):
    data = str(bundled_birthweight_path())
    model = tmp_path / "model.txt"
    model.write_text(
        "intercept\nraw age\nraw wtgain\nraw cigar\nraw boy\nraw black\n"
        "raw married\nraw novisit\nraw visits\n")
    t0 = time.time()
    payloads = []
    for tau in (0.5, 0.1):
        for c in (1.0, 2.0):
            out = tmp_path / f"t_{tau}_{c}.json"
            cmd = [sys.executable, "-m", "qcheck.cli", "test",
                   "--data", data, "--w-col", "age", "--standardize",
                   "--model", str(model), "--tau", str(tau),
                   "--method", "mlp", "--c", str(c),
                   "--bootstrap", "wild", "--B", "199", "--seed", "42",
                   "--out", str(out)]
            proc = subprocess.run(cmd, capture_output=True, text=True)
            assert proc.returncode == 0, proc.stderr
            payloads.append(json.loads(out.read_text()))
    elapsed = time.time() - t0
    schema_ok = all(
        doc["schema_version"] == "1"
        and {"statistic", "p_value", "critical_value", "h", "p_asymptotic",
             "config"} <= set(doc)
        and 0 < doc["p_value"] <= 1
        for doc in payloads)
    ok = schema_ok and elapsed < 60.0
    pvals = ", ".join(
        f"tau={doc['tau']}, c={doc['config']['argv'][doc['config']['argv'].index('--c') + 1]}: "
        f"p={doc['p_value']:.3f}" for doc in payloads)
    detail = (f"4 runs (c in {{1,2}} x tau in {{0.5,0.1}}, n=1168, B=199) in "
              f"{elapsed:.1f}s (< 60s): {elapsed < 60.0}; schema valid: "
              f"{schema_ok}; {pvals}")
    assert report("6 [CLI end-to-end on bundled data]", ok, detail), detail
