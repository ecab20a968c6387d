"""Exact simplex solver for the quantile-regression linear program.

The problem solved is the primal LP

    min  sum_i  tau * up_i + (1 - tau) * um_i
    s.t. X beta + up - um = y,   up, um >= 0,   beta free,

whose optimal vertices interpolate (generically) p observations. The
solver is a revised primal simplex specialized to that structure: a
basis consists of the basic coefficient columns plus one residual
column per non-interpolated row, so the only matrix ever inverted is
the p x p block of X on the interpolated rows. Each pivot costs O(n p)
instead of the O(n^2) a dense tableau would pay.

Pivot rules. The leaving variable is always the minimum-ratio row with
ties broken by the smallest variable index (Bland order). The entering
variable under the default "dantzig" rule is the most-violated dual
constraint (scaled by column norms for coefficient columns), ties to
the smallest index; whenever a run of degenerate pivots is detected
the solver switches to Bland's smallest-index entering rule until a
pivot makes progress, which preserves the anti-cycling guarantee while
keeping the typical pivot count far below pure Bland. rule="bland"
forces smallest-index entering throughout. Both rules are
deterministic for a given row order and reach a global minimizer; they
may stop at different optimal vertices when the optimum is not unique.

The variable order for Bland's rule is: beta_0..beta_{p-1}, then
up_0..up_{n-1}, then um_0..um_{n-1}. Coefficient variables are free:
once basic they never leave, and they are eligible to enter whenever
their reduced cost is nonzero (entering in the descent direction).
Residual variables of a row carry opposite-sign unit columns, so for a
non-interpolated row exactly one of up_i / um_i can be basic and the
partner's reduced cost is 1; only interpolated rows can re-enter the
residual pool.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InternalError

_REFACTOR_EVERY = 64
_TOL_DUAL = 1e-9
_TOL_RATIO = 1e-10
_TIE_REL = 1e-12
_STALL_LIMIT = 30


@dataclass
class SimplexSolution:
    beta: np.ndarray
    basis_rows: np.ndarray  # sorted interpolated row indices, length <= p
    iterations: int


def _bordered_inverse(inv, u_col, xlF_inv, schur):
    """Grow the inverse of [[A, b], [c', e]] from inv = A^{-1}.

    u_col = A^{-1} b, xlF_inv = c' A^{-1}, schur = e - c' A^{-1} b.
    """
    k = inv.shape[0]
    out = np.empty((k + 1, k + 1))
    out[:k, :k] = inv + np.outer(u_col, xlF_inv) / schur
    out[:k, k] = -u_col / schur
    out[k, :k] = -xlF_inv / schur
    out[k, k] = 1.0 / schur
    return out


def solve(X: np.ndarray, y: np.ndarray, tau: float, warm_rows=None,
          max_iter=None, rule: str = "dantzig") -> SimplexSolution:
    """Minimize the check loss exactly; X must have full column rank.

    warm_rows, when given, is an interpolation row set from a previous
    solve on the same design (the bootstrap refit path); the solver
    starts from that vertex instead of from beta = 0.
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    n, p = X.shape
    if max_iter is None:
        max_iter = 400 * (n + p) + 1000
    if rule not in ("dantzig", "bland"):
        raise InternalError(f"unknown pivot rule {rule!r}")

    col_scale = 1.0 + np.abs(X).max(axis=0)
    tol_rc = 1e-8 * col_scale
    theta_tiny = 1e-12 * (1.0 + float(np.abs(y).max(initial=0.0)))

    in_S = np.zeros(n, dtype=bool)
    in_F = np.zeros(p, dtype=bool)
    sgn = np.where(y >= 0.0, 1.0, -1.0)

    S = np.empty(0, dtype=np.intp)
    F = np.empty(0, dtype=np.intp)
    inv = np.zeros((0, 0))
    if warm_rows is not None and len(warm_rows) == p:
        S_try = np.asarray(warm_rows, dtype=np.intp).copy()
        try:
            inv_try = np.linalg.inv(X[S_try, :])
        except np.linalg.LinAlgError:
            pass
        else:
            S, F, inv = S_try, np.arange(p, dtype=np.intp), inv_try
            in_S[S] = True
            in_F[:] = True
            resid0 = y - X @ (inv @ y[S])
            sgn = np.where(resid0 >= 0.0, 1.0, -1.0)

    XF = X if (len(F) == p and np.array_equal(F, np.arange(p))) else X[:, F]
    iterations = 0
    since_refactor = 0
    stall = 0
    bland_mode = rule == "bland"

    # Dual values off the interpolation set never change except at the
    # two rows touched by a pivot, so the vector is maintained in place.
    d = np.where(sgn > 0.0, tau, tau - 1.0)
    d[S] = 0.0

    while True:
        if iterations >= max_iter:
            raise InternalError(f"simplex exceeded {max_iter} iterations (n={n}, p={p})")
        if since_refactor >= _REFACTOR_EVERY:
            inv = np.linalg.inv(X[np.ix_(S, F)])
            since_refactor = 0

        k = len(F)
        beta_F = inv @ y[S] if k else np.zeros(0)
        resid = y - XF @ beta_F if k else y.copy()
        if k:
            resid[S] = 0.0
            gF = XF.T @ d
            dS = -(inv.T @ gF)
        else:
            dS = np.zeros(0)

        # Entering variable.
        enter_kind = None
        if not in_F.all():
            g_all = X.T @ d
            rc_all = -(g_all + (X[S, :].T @ dS if k else 0.0))
            cand = np.flatnonzero(~in_F & (np.abs(rc_all) > tol_rc))
            if cand.size:
                if bland_mode:
                    j = int(cand[0])
                else:
                    j = int(cand[np.argmax(np.abs(rc_all[cand]) / col_scale[cand])])
                enter_kind = "beta"
                enter_dir = 1.0 if rc_all[j] < 0.0 else -1.0
        if enter_kind is None and k:
            viol_hi = dS - tau
            viol_lo = (tau - 1.0) - dS
            if bland_mode:
                # Every up index (p + row) precedes every um index
                # (p + n + row), so any up candidate wins under Bland.
                hi = np.flatnonzero(viol_hi > _TOL_DUAL)
                lo = np.flatnonzero(viol_lo > _TOL_DUAL)
                if hi.size:
                    slot, sigma = int(hi[np.argmin(S[hi])]), 1.0
                    enter_kind = "u"
                elif lo.size:
                    slot, sigma = int(lo[np.argmin(S[lo])]), -1.0
                    enter_kind = "u"
            else:
                sh = int(np.argmax(viol_hi))
                sl = int(np.argmax(viol_lo))
                vh, vl = viol_hi[sh], viol_lo[sl]
                if max(vh, vl) > _TOL_DUAL:
                    slot, sigma = (sh, 1.0) if vh >= vl else (sl, -1.0)
                    enter_kind = "u"
        if enter_kind is None:
            break

        # Tableau column of the entering variable.
        if enter_kind == "beta":
            a_full = enter_dir * X[:, j]
            tF = inv @ a_full[S] if k else np.zeros(0)
            t = sgn * (a_full - (XF @ tF if k else 0.0))
        else:
            tF = sigma * inv[:, slot]
            t = -sgn * (XF @ tF)

        # Ratio test over basic residual variables (rows outside S).
        uvals = np.maximum(sgn * resid, 0.0)
        blockers = ~in_S & (t > _TOL_RATIO)
        if not blockers.any():
            if enter_kind == "beta":
                raise InternalError("simplex detected an unbounded direction on a full-rank design")
            raise InternalError("no blocking variable in ratio test")
        rows_b = np.flatnonzero(blockers)
        ratios = uvals[rows_b] / t[rows_b]
        theta = ratios.min()
        tie = ratios <= theta + _TIE_REL * (1.0 + theta)
        tied_rows = rows_b[tie]
        tied_pos = tied_rows[sgn[tied_rows] > 0.0]
        leave = int(tied_pos.min()) if tied_pos.size else int(tied_rows.min())

        # Degenerate-stall bookkeeping: a long run of zero-step pivots
        # under dantzig pricing switches to Bland until progress resumes.
        if theta <= theta_tiny:
            stall += 1
            if rule == "dantzig" and stall >= _STALL_LIMIT:
                bland_mode = True
        else:
            stall = 0
            if rule == "dantzig":
                bland_mode = False

        # Pivot.
        if enter_kind == "beta":
            b_col = X[S, j] if k else np.zeros(0)
            u_col = inv @ b_col if k else np.zeros(0)
            xlF_inv = X[leave, F] @ inv if k else np.zeros(0)
            schur = X[leave, j] - (X[leave, F] @ u_col if k else 0.0)
            if abs(schur) <= _TOL_RATIO:
                raise InternalError("degenerate pivot in coefficient entering step")
            inv = _bordered_inverse(inv, u_col, xlF_inv, schur)
            S = np.append(S, leave)
            F = np.append(F, j)
            in_S[leave] = True
            in_F[j] = True
            d[leave] = 0.0
            XF = X if (len(F) == p and np.array_equal(F, np.arange(p))) else X[:, F]
        else:
            r = int(S[slot])
            delta = X[leave, F] - X[r, F]
            ivp = inv[:, slot].copy()
            w_row = delta @ inv
            denom = 1.0 + delta @ ivp
            inv = inv - np.outer(ivp, w_row) / denom
            S[slot] = leave
            in_S[r] = False
            in_S[leave] = True
            sgn[r] = sigma
            d[r] = tau if sigma > 0.0 else tau - 1.0
            d[leave] = 0.0

        iterations += 1
        since_refactor += 1

    # Completion pivots: force remaining coefficients into the basis at
    # (numerically) zero reduced cost so the returned vertex interpolates
    # min(p, n) observations whenever a blocking row exists.
    for j in np.flatnonzero(~in_F):
        k = len(F)
        beta_F = inv @ y[S] if k else np.zeros(0)
        resid = y - (XF @ beta_F if k else 0.0)
        if k:
            resid[S] = 0.0
        a_full = X[:, j]
        tF = inv @ a_full[S] if k else np.zeros(0)
        t = sgn * (a_full - (XF @ tF if k else 0.0))
        uvals = np.maximum(sgn * resid, 0.0)
        for direction in (1.0, -1.0):
            td = direction * t
            blockers = ~in_S & (td > _TOL_RATIO)
            if not blockers.any():
                continue
            rows_b = np.flatnonzero(blockers)
            ratios = uvals[rows_b] / td[rows_b]
            theta = ratios.min()
            tie = ratios <= theta + _TIE_REL * (1.0 + theta)
            tied_rows = rows_b[tie]
            tied_pos = tied_rows[sgn[tied_rows] > 0.0]
            leave = int(tied_pos.min()) if tied_pos.size else int(tied_rows.min())
            b_col = X[S, j] if k else np.zeros(0)
            u_col = inv @ b_col if k else np.zeros(0)
            xlF_inv = X[leave, F] @ inv if k else np.zeros(0)
            schur = X[leave, j] - (X[leave, F] @ u_col if k else 0.0)
            if abs(schur) <= _TOL_RATIO:
                continue
            inv = _bordered_inverse(inv, u_col, xlF_inv, schur)
            S = np.append(S, leave)
            F = np.append(F, j)
            in_S[leave] = True
            in_F[j] = True
            d[leave] = 0.0
            XF = X if (len(F) == p and np.array_equal(F, np.arange(p))) else X[:, F]
            iterations += 1
            break

    # Final polish: refresh the inverse so the interpolation is tight.
    beta = np.zeros(p)
    if len(F):
        inv = np.linalg.inv(X[np.ix_(S, F)])
        beta[F] = inv @ y[S]
    return SimplexSolution(beta=beta, basis_rows=np.sort(S), iterations=iterations)
