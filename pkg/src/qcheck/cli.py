"""Command-line interface: qcheck {fit, test, simulate}.

Exit codes: 0 success, 2 configuration error (bad flags, unknown
columns, malformed model), 1 data or fit error. Single-analysis
results are JSON, simulation grids are CSV; both carry a
schema_version and the fully resolved configuration, which is itself a
valid flag set reproducing the run. QCHECK_SEED serves as a fallback
seed when --seed is not given.
"""

from __future__ import annotations

import argparse
import json
import os
import shlex
import sys
import time

from . import bootstrap as bt
from . import data as data_mod
from . import kernels, loftests, mc, model, qrfit
from .errors import ConfigError, QcheckError

SCHEMA_VERSION = "1"

_KERNEL_CLI = {"triangle": "triangle_var1", "gaussian": "gaussian",
               "laplace": "laplace", "logistic": "logistic"}
_KERNEL_NAMES = {v: k for k, v in _KERNEL_CLI.items()}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcheck",
        description="Lack-of-fit testing for parametric quantile regression.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_flags(p):
        p.add_argument("--data", required=True, help="CSV file with a header row")
        p.add_argument("--w-col", required=True, help="name of the continuous smoothing covariate")
        p.add_argument("--y-col", default="y", help="name of the response column (default: y)")
        p.add_argument("--standardize", action="store_true",
                       help="standardize all covariate columns to mean 0 / sd 1")
        p.add_argument("--model", help="model file, one term per line")
        p.add_argument("--model-inline", help="comma-separated term list, e.g. 'intercept,raw w,raw x1'")
        p.add_argument("--tau", type=float, required=True,
                       help="quantile level in (0, 1); no default on purpose")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--verbose", action="store_true",
                       help="progress diagnostics on standard error")

    p_fit = sub.add_parser("fit", help="fit the quantile regression and report coefficients")
    add_data_flags(p_fit)

    p_test = sub.add_parser("test", help="run a lack-of-fit test on a fitted model")
    add_data_flags(p_test)
    p_test.add_argument("--method", required=True, choices=["mlp", "zheng", "hz"],
                        help="mlp = pairwise-kernel test, zheng = fully smoothed, hz = cumulative-sum")
    p_test.add_argument("--c", type=float, help="bandwidth constant in h = c n^(-1/5) (mlp, zheng)")
    p_test.add_argument("--kernel", default="triangle", choices=sorted(_KERNEL_CLI),
                        help="univariate kernel family (default: triangle)")
    p_test.add_argument("--psi", default="gaussian", choices=["gaussian"],
                        help="multivariate weight family")
    p_test.add_argument("--bootstrap", choices=list(bt.SCHEMES),
                        help="bootstrap scheme for critical values")
    p_test.add_argument("--B", type=int, help="bootstrap replications (required with --bootstrap; 999 is a sensible single-analysis choice)")
    p_test.add_argument("--seed", type=int, help="root seed (fallback: QCHECK_SEED)")
    p_test.add_argument("--alpha", type=float, default=0.10, help="nominal level (default: 0.10)")

    p_sim = sub.add_parser("simulate", help="run the Monte Carlo level/power studies")
    p_sim.add_argument("--study", required=True, choices=["level", "power"])
    p_sim.add_argument("--reps", type=int, default=1000, help="outer replications (default: 1000)")
    p_sim.add_argument("--B", type=int, default=199, help="bootstrap replications per test (default: 199)")
    p_sim.add_argument("--n", type=int, default=100, help="sample size per replication (default: 100)")
    p_sim.add_argument("--seed", type=int, help="root seed (fallback: QCHECK_SEED)")
    p_sim.add_argument("--alpha", type=float, default=0.10)
    p_sim.add_argument("--threads", type=int, default=1,
                       help="worker processes; results are invariant to this")
    p_sim.add_argument("--kernel", default="triangle", choices=sorted(_KERNEL_CLI))
    p_sim.add_argument("--c-grid", default="0.5,1,2,4", help="comma-separated bandwidth constants")
    p_sim.add_argument("--error-laws", help="comma-separated subset of gauss,lognorm_centered,hetero_gauss")
    p_sim.add_argument("--schemes", default="wild,naive,uniform",
                       help="bootstrap schemes for the level study")
    p_sim.add_argument("--methods", default="mlp,zheng,hz", help="methods for the power study")
    p_sim.add_argument("--families", default="setup1,setup2", help="DGP families for the power study")
    p_sim.add_argument("--delta-grid-setup1", default="0,0.05,0.1,0.15,0.2")
    p_sim.add_argument("--delta-grid-setup2", default="0,0.25,0.5,0.75,1.0")
    p_sim.add_argument("--out", help="output CSV path (default: stdout)")
    p_sim.add_argument("--verbose", action="store_true",
                       help="progress diagnostics on standard error")
    p_sim.add_argument("--emit-plot-data", metavar="PATH",
                       help="also write per-curve long-format CSV to PATH")
    return parser


def _floats_csv(text: str, flag: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip() != "")
    except ValueError:
        raise ConfigError(f"{flag}: cannot parse {text!r} as comma-separated numbers") from None
    if not vals:
        raise ConfigError(f"{flag}: empty list")
    return vals


def _names_csv(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _vlog(ns, message: str) -> None:
    if ns.verbose:
        print(f"qcheck: {message}", file=sys.stderr)


def _resolve_seed(ns) -> int:
    if ns.seed is not None:
        return ns.seed
    env = os.environ.get("QCHECK_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"QCHECK_SEED is not an integer: {env!r}") from None
    raise ConfigError("no seed given: pass --seed or set QCHECK_SEED")


def _load_inputs(ns):
    if bool(ns.model) == bool(ns.model_inline):
        raise ConfigError("provide exactly one of --model / --model-inline")
    if not 0.0 < ns.tau < 1.0:
        raise ConfigError(f"--tau must lie strictly inside (0, 1), got {ns.tau}")
    d = data_mod.load_csv(ns.data, w_column=ns.w_col, y_column=ns.y_col)
    if ns.standardize:
        d, _ = data_mod.standardize(d)
    spec = model.load_model_file(ns.model) if ns.model else model.parse_model_inline(ns.model_inline)
    return d, spec


def _common_argv(ns) -> list[str]:
    argv = ["--data", ns.data, "--w-col", ns.w_col, "--y-col", ns.y_col]
    if ns.standardize:
        argv.append("--standardize")
    if ns.model:
        argv += ["--model", ns.model]
    else:
        argv += ["--model-inline", ns.model_inline]
    argv += ["--tau", repr(float(ns.tau))]
    if ns.verbose:
        argv.append("--verbose")
    return argv


def _emit(payload: dict, out_path) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_fit(ns) -> int:
    d, spec = _load_inputs(ns)
    t0 = time.perf_counter()
    result = qrfit.fit(spec, d, ns.tau)
    _vlog(ns, f"fit: n={d.n}, p={spec.p}, {result.iterations} pivots, "
              f"{time.perf_counter() - t0:.3f}s")
    argv = ["fit"] + _common_argv(ns)
    if ns.out:
        argv += ["--out", ns.out]
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "fit",
        "config": {"argv": argv},
        "terms": list(spec.term_labels()),
        "beta": [float(b) for b in result.beta.beta],
        "tau": float(ns.tau),
        "objective": result.objective,
        "n_zero_residuals": result.n_zero_residuals,
    }
    _emit(payload, ns.out)
    return 0


def _cmd_test(ns) -> int:
    if ns.method in ("mlp", "zheng"):
        if ns.c is None:
            raise ConfigError(f"--method {ns.method} requires --c")
        if not ns.c > 0:
            raise ConfigError(f"--c must be positive, got {ns.c}")
    elif ns.c is not None:
        raise ConfigError("--c applies to mlp and zheng only")
    if ns.method == "hz" and not ns.bootstrap:
        raise ConfigError("hz has no asymptotic p-value: pass --bootstrap")
    if ns.bootstrap and ns.B is None:
        raise ConfigError("--bootstrap requires --B")
    if ns.B is not None and not ns.bootstrap:
        raise ConfigError("--B is only meaningful with --bootstrap")
    seed = _resolve_seed(ns) if ns.bootstrap else None

    d, spec = _load_inputs(ns)
    kspec = kernels.KernelSpec(
        k_family=_KERNEL_CLI[ns.kernel],
        psi_family="gaussian_product",
        c=ns.c if ns.c is not None else 1.0,
    )

    argv = ["test"] + _common_argv(ns) + ["--method", ns.method]
    if ns.c is not None:
        argv += ["--c", repr(float(ns.c))]
    argv += ["--kernel", ns.kernel, "--psi", ns.psi]
    if ns.bootstrap:
        argv += ["--bootstrap", ns.bootstrap, "--B", str(ns.B),
                 "--seed", str(seed), "--alpha", repr(float(ns.alpha))]
    if ns.out:
        argv += ["--out", ns.out]

    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "test",
        "config": {"argv": argv},
        "method": ns.method,
        "tau": float(ns.tau),
    }
    if ns.bootstrap:
        cfg = bt.BootstrapConfig(scheme=ns.bootstrap, B=ns.B, seed=seed, alpha=ns.alpha)
        t0 = time.perf_counter()
        observed, outcome = bt.bootstrap_test(ns.method, spec, d, ns.tau, kspec, cfg)
        _vlog(ns, f"test: n={d.n}, method={ns.method}, {ns.B} bootstrap refits, "
                  f"{time.perf_counter() - t0:.3f}s")
        payload.update({
            "scheme": ns.bootstrap,
            "B": ns.B,
            "seed": seed,
            "alpha": float(ns.alpha),
            "critical_value": outcome.critical_value,
            "p_value": outcome.p_value,
            "reject": bool(observed.statistic >= outcome.critical_value),
        })
    else:
        fit0 = qrfit.fit(spec, d, ns.tau)
        if ns.method == "mlp":
            observed = loftests.t_n(fit0, d, kspec, ns.tau)
        else:
            h = kernels.bandwidth(kspec, d.n)
            observed = loftests.zheng_stat(fit0, d, h, ns.tau)
    payload.update({
        "statistic": float(observed.statistic),
        "h": observed.h,
        "i_n": observed.i_n,
        "v_n2": observed.v_n2,
        "p_asymptotic": observed.p_asymptotic,
    })
    _emit(payload, ns.out)
    return 0


def _cmd_simulate(ns) -> int:
    seed = _resolve_seed(ns)
    if ns.reps < 1:
        raise ConfigError(f"--reps must be >= 1, got {ns.reps}")
    if ns.threads < 1:
        raise ConfigError(f"--threads must be >= 1, got {ns.threads}")
    c_grid = _floats_csv(ns.c_grid, "--c-grid")
    k_family = _KERNEL_CLI[ns.kernel]

    argv = ["simulate", "--study", ns.study, "--reps", str(ns.reps), "--B", str(ns.B),
            "--n", str(ns.n), "--seed", str(seed), "--alpha", repr(float(ns.alpha)),
            "--threads", str(ns.threads), "--kernel", ns.kernel, "--c-grid", ns.c_grid]

    if ns.study == "level":
        laws = _names_csv(ns.error_laws) if ns.error_laws else (
            "gauss", "lognorm_centered", "hetero_gauss")
        schemes = _names_csv(ns.schemes)
        argv += ["--error-laws", ",".join(laws), "--schemes", ",".join(schemes)]
        cfg = mc.LevelStudyConfig(
            seed=seed, n=ns.n, reps=ns.reps, B=ns.B, alpha=ns.alpha,
            c_grid=c_grid, error_laws=laws, schemes=schemes,
            k_family=k_family, threads=ns.threads,
        )
        t0 = time.perf_counter()
        result = mc.run_level_study(cfg)
        _vlog(ns, f"level study: {len(result.rows)} cells, "
                  f"{time.perf_counter() - t0:.3f}s")
    else:
        laws = _names_csv(ns.error_laws) if ns.error_laws else ("gauss",)
        methods = _names_csv(ns.methods)
        families = _names_csv(ns.families)
        deltas = {
            "setup1": _floats_csv(ns.delta_grid_setup1, "--delta-grid-setup1"),
            "setup2": _floats_csv(ns.delta_grid_setup2, "--delta-grid-setup2"),
        }
        argv += ["--error-laws", ",".join(laws), "--methods", ",".join(methods),
                 "--families", ",".join(families),
                 "--delta-grid-setup1", ns.delta_grid_setup1,
                 "--delta-grid-setup2", ns.delta_grid_setup2]
        cfg = mc.PowerStudyConfig(
            seed=seed, n=ns.n, reps=ns.reps, B=ns.B, alpha=ns.alpha,
            c_grid=c_grid, families=families, deltas=deltas,
            error_laws=laws, methods=methods, k_family=k_family,
            threads=ns.threads,
        )
        t0 = time.perf_counter()
        result = mc.run_power_study(cfg)
        _vlog(ns, f"power study: {len(result.rows)} cells, "
                  f"{time.perf_counter() - t0:.3f}s")

    if ns.out:
        argv += ["--out", ns.out]
    if ns.verbose:
        argv.append("--verbose")
    if ns.emit_plot_data:
        argv += ["--emit-plot-data", ns.emit_plot_data]
    comment = "qcheck " + shlex.join(argv) + f" [schema_version={SCHEMA_VERSION}]"

    if ns.out:
        with open(ns.out, "w", encoding="utf-8") as fh:
            mc.rows_to_csv(result.rows, fh, header_comment=comment)
    else:
        mc.rows_to_csv(result.rows, sys.stdout, header_comment=comment)
    if ns.emit_plot_data:
        with open(ns.emit_plot_data, "w", encoding="utf-8") as fh:
            mc.rows_to_plot_csv(result.rows, fh, header_comment=comment)
    return 0


def run(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if ns.command == "fit":
            return _cmd_fit(ns)
        if ns.command == "test":
            return _cmd_test(ns)
        return _cmd_simulate(ns)
    except ConfigError as exc:
        print(f"qcheck: configuration error: {exc}", file=sys.stderr)
        return 2
    except QcheckError as exc:
        print(f"qcheck: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
