"""Check-loss machinery: weighted linear quantile regression, QAR(1),
and the four direct quantile recursions (SAV, AS, indirect-GARCH,
adaptive).

The linear solver exploits the fact that some minimizer of the check
loss interpolates p observations (a basic solution). Small two-column
problems are solved by exhaustive enumeration of those candidates;
large ones minimize a smoothed (Moreau-envelope) check loss with a
damped Newton iteration over four continuation stages, then snap onto
the best basic solution through the rows nearest the smoothed optimum.
Intercept-only designs reduce to a sorted cumulative-weight rule. All
tie breaks go to the lexicographically smallest coefficient vector, so
repeated runs are bit-identical. Multi-level fits on a shared design
(the expected-shortfall sub-level ladder) run batched across levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from .errors import (
    DegenerateWeights,
    DomainError,
    FitError,
    ForecastError,
    InsufficientData,
    SingularDesign,
)
from .rng import make_generator

__all__ = [
    "QrFit",
    "CaviarFit",
    "CAVIAR_SPECS",
    "check_loss",
    "weighted_linear_qr",
    "weighted_linear_qr_path",
    "qar1_forecast",
    "caviar_fit",
    "caviar_forecast",
]

CAVIAR_SPECS = ("SAV", "AS", "IndirectGarch", "Adaptive")

# smoothing widths (relative to the response spread) of the continuation
_STAGE_WIDTHS = (1e-1, 10 ** (-8 / 3), 10 ** (-13 / 3), 1e-6)
_ENUM_LIMIT = 40  # below this row count, enumerate every basic solution


def check_loss(x, tau: float):
    """rho_tau(x) = x * (tau - 1[x <= 0]); nonnegative for tau in (0,1)."""
    x = np.asarray(x, dtype=float)
    out = x * (tau - (x <= 0.0))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class QrFit:
    beta: np.ndarray
    tau: float
    objective: float


def _weighted_quantile_lower(y: np.ndarray, w: np.ndarray, tau: float) -> float:
    """Smallest minimizer of sum_i w_i rho_tau(y_i - b) over b."""
    order = np.argsort(y, kind="stable")
    ys, ws = y[order], w[order]
    cw = np.cumsum(ws)
    j = int(np.searchsorted(cw, tau * cw[-1], side="left"))
    return float(ys[min(j, ys.size - 1)])


def _exact_objective(X, y, w, tau, beta) -> float:
    return float(np.sum(w * check_loss(y - X @ beta, tau)))


# -- validation ----------------------------------------------------------------


def _validate_qr_inputs(X, y, w, taus):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    n, p = X.shape
    if y.shape != (n,) or w.shape != (n,):
        raise DomainError("X, y, w must agree in length")
    for tau in taus:
        if not 0.0 < tau < 1.0:
            raise DomainError("tau must lie in (0, 1)")
    if n < p + 5:
        raise InsufficientData(f"need at least {p + 5} rows for {p} coefficients")
    if np.any(w < 0.0) or not (
        np.all(np.isfinite(w)) and np.all(np.isfinite(y)) and np.all(np.isfinite(X))
    ):
        raise DomainError("inputs must be finite with nonnegative weights")
    active = w > 0.0
    if not np.any(active):
        raise DegenerateWeights("all weights are zero")
    return X, y, w, active


def _check_rank(X, active, p):
    if p == 2 and np.all(X[:, 0] == 1.0):
        if np.ptp(X[active, 1]) == 0.0:
            raise SingularDesign("second design column is constant")
        return
    if np.linalg.matrix_rank(X[active]) < p:
        raise SingularDesign("design matrix is rank deficient")


# -- one-coefficient designs ----------------------------------------------------


def _solve_single_column(X, y, w, tau, active):
    col = X[active, 0]
    if np.all(col == col[0]):
        c = float(col[0])
        if c == 0.0:
            raise SingularDesign("design column is identically zero")
        yv, wv = y[active], w[active]
        if c > 0.0:
            # lower b maps to the lower endpoint of the optimal interval
            b = _weighted_quantile_lower(yv, wv, tau) / c
        else:
            # decreasing map: lower b corresponds to the upper endpoint,
            # obtained from the mirrored problem (-y, 1 - tau)
            b = -_weighted_quantile_lower(-yv, wv, 1.0 - tau) / c
        return np.array([b])
    ok = active & (X[:, 0] != 0.0)
    if not np.any(ok):
        raise SingularDesign("design column is identically zero on weighted rows")
    candidates = np.unique(y[ok] / X[ok, 0])
    objs = np.array([_exact_objective(X, y, w, tau, np.array([b])) for b in candidates])
    best = float(np.min(objs))
    return np.array([float(candidates[objs == best][0])])


# -- two-coefficient batched core ------------------------------------------------


def _pair_betas(X, y, i, j):
    """Closed-form solutions of the 2x2 systems through row pairs (i, j)."""
    det = X[i, 0] * X[j, 1] - X[i, 1] * X[j, 0]
    scale = float(np.max(np.abs(X))) or 1.0
    ok = np.abs(det) > 1e-12 * scale * scale
    i, j, det = i[ok], j[ok], det[ok]
    b0 = (X[j, 1] * y[i] - X[i, 1] * y[j]) / det
    b1 = (X[i, 0] * y[j] - X[j, 0] * y[i]) / det
    return np.column_stack([b0, b1])


def _best_candidate(X, y, w, tau, cand):
    """Exact-objective argmin over candidate betas, lexicographic ties."""
    resid = y[:, None] - X @ cand.T
    objs = (w[:, None] * check_loss(resid, tau)).sum(axis=0)
    best = float(np.min(objs))
    tied = cand[objs <= best + 1e-12 * max(1.0, best)]
    order = np.lexsort((tied[:, 1], tied[:, 0]))
    return tied[order[0]].copy(), best


def _batched_objective(X, y, w, taus, B):
    resid = y[:, None] - X @ B.T
    return (w[:, None] * resid * (taus[None, :] - (resid <= 0.0))).sum(axis=0)


def _batched_env(X, y, w, taus, delta, B):
    r = y[:, None] - X @ B.T
    hi = delta * taus
    lo = -delta * (1.0 - taus)
    vals = np.where(
        r > hi,
        taus * r - 0.5 * delta * taus * taus,
        (taus - 1.0) * r - 0.5 * delta * (1.0 - taus) ** 2,
    )
    mid = (r >= lo) & (r <= hi)
    vals = np.where(mid, r * r / (2.0 * delta), vals)
    return (w[:, None] * vals).sum(axis=0)


def _newton_batched(X, y, w, taus, delta, B, max_iter=14):
    """Damped Newton on the smoothed loss, all levels in lock step.

    Only proximity to the optimum matters here (the basic-solution
    polish and the pivot certificate finish the job exactly), so the
    iteration budget is modest and converged levels drop out of the
    line search early.
    """
    x0, x1 = X[:, 0], X[:, 1]
    x00, x01, x11 = x0 * x0, x0 * x1, x1 * x1
    m = taus.size
    live = np.arange(m)
    F = _batched_env(X, y, w, taus, delta, B)
    for _ in range(max_iter):
        tl = taus[live]
        Bl = B[live]
        Fl = F[live]
        hi = delta * tl
        lo = -delta * (1.0 - tl)
        R = y[:, None] - X @ Bl.T
        mid = (R >= lo) & (R <= hi)
        psi = np.where(R > hi, tl, tl - 1.0)
        psi = np.where(mid, R / delta, psi)
        wp = w[:, None] * psi
        g0 = -(x0 @ wp)
        g1 = -(x1 @ wp)
        d = (w[:, None] * mid) / delta
        h00 = x00 @ d
        h01 = x01 @ d
        h11 = x11 @ d
        ridge = 1e-10 * (1.0 + h00 + h11)
        h00 = h00 + ridge
        h11 = h11 + ridge
        det = h00 * h11 - h01 * h01
        with np.errstate(divide="ignore", invalid="ignore"):
            s0 = np.where(det > 0.0, (-g0 * h11 + g1 * h01) / det, 0.0)
            s1 = np.where(det > 0.0, (g0 * h01 - g1 * h00) / det, 0.0)
        flat = ~(det > 0.0) | ~np.isfinite(s0) | ~np.isfinite(s1)
        if np.any(flat):
            # no curvature in band: gradient step scaled to the data
            gnorm = np.hypot(g0, g1)
            scale = (np.median(np.abs(R), axis=0) + delta) / (gnorm + 1e-300)
            s0 = np.where(flat, -g0 * scale, s0)
            s1 = np.where(flat, -g1 * scale, s1)
        snorm = np.hypot(s0, s1)
        cap = 1e3 * (1.0 + np.abs(Bl).sum(axis=1))
        shrink = np.where(snorm > cap, cap / (snorm + 1e-300), 1.0)
        S = np.column_stack([s0 * shrink, s1 * shrink])
        slope = g0 * S[:, 0] + g1 * S[:, 1]

        # backtracking restricted to still-unaccepted levels
        idx = np.arange(live.size)
        t = np.ones(live.size)
        B_new, F_new = Bl.copy(), Fl.copy()
        for _ in range(25):
            trial = Bl[idx] + t[idx, None] * S[idx]
            Ftr = _batched_env(X, y, w, tl[idx], delta, trial)
            ok = Ftr <= Fl[idx] + 1e-4 * t[idx] * slope[idx]
            acc = idx[ok]
            B_new[acc] = trial[ok]
            F_new[acc] = Ftr[ok]
            idx = idx[~ok]
            if idx.size == 0:
                break
            t[idx] *= 0.5
        stalled = np.zeros(live.size, dtype=bool)
        stalled[idx] = True
        gain = Fl - F_new
        B[live] = B_new
        F[live] = F_new
        keep = ~(stalled | (gain <= 1e-12 * (1.0 + np.abs(F_new))))
        live = live[keep]
        if live.size == 0:
            break
    return B


def _polish_batched(X, y, w, taus, B, enumerate_all):
    """Snap each level onto its best nearby (or globally best) basic
    solution; exact objectives, lexicographic tie handling."""
    n = y.size
    m = taus.size
    out = np.empty_like(B)
    if enumerate_all:
        ii, jj = np.triu_indices(n, k=1)
        shared = _pair_betas(X, y, ii, jj)
        resid = y[:, None] - X @ shared.T
        for l in range(m):
            cand = np.vstack([B[l], np.zeros(2), shared])
            extra = y[:, None] - X @ cand[:2].T
            objs_extra = (w[:, None] * check_loss(extra, taus[l])).sum(axis=0)
            objs_shared = (w[:, None] * check_loss(resid, taus[l])).sum(axis=0)
            objs = np.concatenate([objs_extra, objs_shared])
            out[l] = _lex_best(cand, objs)
        return out
    R = np.abs(y[:, None] - X @ B.T)
    near = np.argsort(R, axis=0, kind="stable")[:8]
    for l in range(m):
        rows = near[:, l]
        ii, jj = np.triu_indices(rows.size, k=1)
        cand = np.vstack([B[l], np.zeros(2), _pair_betas(X, y, rows[ii], rows[jj])])
        resid = y[:, None] - X @ cand.T
        objs = (w[:, None] * check_loss(resid, taus[l])).sum(axis=0)
        out[l] = _lex_best(cand, objs)
    return out


def _lex_best(cand, objs):
    best = float(np.min(objs))
    tied = cand[objs <= best + 1e-12 * max(1.0, best)]
    order = np.lexsort((tied[:, 1], tied[:, 0]))
    return tied[order[0]]


def _probe_directions(X, r):
    """Signed probe directions at the current point: the axes plus the
    kink lines of the two rows fitted most closely. Together these
    certify optimality of a point with at most two active rows."""
    rows = np.argsort(np.abs(r), kind="stable")[:2]
    dirs = [(1.0, 0.0), (0.0, 1.0)]
    for a in rows:
        u0, u1 = -X[a, 1], X[a, 0]
        norm = math.hypot(u0, u1)
        if norm > 0.0:
            dirs.append((u0 / norm, u1 / norm))
    out = np.empty((2 * len(dirs), 2))
    out[0::2] = dirs
    out[1::2] = -out[0::2]
    return out


def _steepest_probe(X, y, w, tau, beta, r, zero_tol):
    """Most negative one-sided directional derivative over the probes.

    Rows at a kink (zero residual) contribute the one-sided slope
    rho_tau(s); the rest contribute their current linear slope.
    """
    U = _probe_directions(X, r)
    S = -(X @ U.T)
    at_kink = np.abs(r) <= zero_tol
    base = np.where(r > 0.0, tau, tau - 1.0)[:, None] * S
    kinked = S * (tau - (S <= 0.0))
    slopes = w @ np.where(at_kink[:, None], kinked, base)
    k = int(np.argmin(slopes))
    return float(slopes[k]), U[k], S[:, k]


def _line_minimum_step(r, s, w, tau, d0, zero_tol):
    """Smallest t > 0 minimizing the convex piecewise-linear map
    t -> sum_i w_i rho_tau(r_i + t s_i), given slope d0 < 0 at t = 0.

    Walking the residual-crossing kinks in order, each crossing adds
    w|s| to the slope; the minimum sits at the first kink where the
    accumulated slope turns nonnegative.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        t_cross = -r / s
    movable = np.isfinite(t_cross) & (t_cross > zero_tol)
    if not np.any(movable):
        return None
    t_sorted_idx = np.argsort(t_cross[movable], kind="stable")
    t_vals = t_cross[movable][t_sorted_idx]
    jumps = (w[movable] * np.abs(s[movable]))[t_sorted_idx]
    slope = d0 + np.cumsum(jumps)
    k = int(np.searchsorted(slope, 0.0, side="left"))
    if k >= t_vals.size:
        return None  # unbounded descent direction (cannot happen for full rank)
    return float(t_vals[k])


def _pivot_descent(X, y, w, tau, beta, max_pivots=120):
    """Simplex-style descent: while some probe direction at the current
    point has negative one-sided derivative, slide to the slope-change
    point along it. The objective is convex piecewise linear, so the
    walk ends at a certified global minimizer."""
    scale = float(np.max(np.abs(y))) or 1.0
    zero_tol = 1e-10 * scale
    obj = _exact_objective(X, y, w, tau, beta)
    for _ in range(max_pivots):
        r = y - X @ beta
        worst, u, s = _steepest_probe(X, y, w, tau, beta, r, zero_tol)
        if worst >= -1e-12 * (1.0 + obj):
            break
        t_star = _line_minimum_step(r, s, w, tau, worst, zero_tol)
        if t_star is None:
            break
        moved = beta + t_star * u
        new_obj = _exact_objective(X, y, w, tau, moved)
        if new_obj >= obj:
            break
        beta, obj = moved, new_obj
    return beta


def _solve_two_columns(X, y, w, taus, active):
    """Certified minimizers for every level of a shared design.

    Levels are walked in increasing order: the first is located by the
    smoothed continuation plus polish, each later one re-certifies the
    previous level's vertex and pivots from it (adjacent quantile
    vertices are typically a pivot or two apart).
    """
    n = y.size
    if n <= _ENUM_LIMIT:
        B = np.zeros((taus.size, 2))
        return _polish_batched(X, y, w, taus, B, enumerate_all=True)
    sd = float(np.std(y[active])) or 1.0
    sw = np.sqrt(w)
    start, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    first = np.array([taus[0]])
    B0 = start[None, :]
    for width in _STAGE_WIDTHS:
        B0 = _newton_batched(X, y, w, first, width * sd, B0)
    B0 = _polish_batched(X, y, w, first, B0, enumerate_all=False)
    B = np.empty((taus.size, 2))
    beta = _pivot_descent(X, y, w, float(taus[0]), B0[0])
    B[0] = beta
    for l in range(1, taus.size):
        beta = _pivot_descent(X, y, w, float(taus[l]), beta)
        B[l] = beta
    return B


# -- general designs -------------------------------------------------------------


def _smoothed_newton(X, y, w, tau, delta, beta):
    """Scalar-level damped Newton for designs with p > 2 columns."""
    hi, lo = delta * tau, -delta * (1.0 - tau)
    p = X.shape[1]

    def f(b):
        r = y - X @ b
        mid = (r >= lo) & (r <= hi)
        vals = np.where(
            r > hi,
            tau * r - 0.5 * delta * tau * tau,
            (tau - 1.0) * r - 0.5 * delta * (1.0 - tau) ** 2,
        )
        vals = np.where(mid, r * r / (2.0 * delta), vals)
        return float(np.sum(w * vals))

    fb = f(beta)
    for _ in range(60):
        r = y - X @ beta
        mid = (r >= lo) & (r <= hi)
        psi = np.where(r > hi, tau, tau - 1.0)
        psi = np.where(mid, r / delta, psi)
        g = -X.T @ (w * psi)
        d = (w * mid) / delta
        H = X.T @ (X * d[:, None])
        H += (1e-10 * (1.0 + np.trace(H))) * np.eye(p)
        try:
            step = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            step = -g * (np.median(np.abs(r)) + delta) / (np.linalg.norm(g) + 1e-300)
        if not np.all(np.isfinite(step)):
            break
        norm = np.linalg.norm(step)
        cap = 1e3 * (1.0 + np.abs(beta).sum())
        if norm > cap:
            step *= cap / norm
        slope = float(g @ step)
        t, improved, fn = 1.0, False, fb
        for _ in range(25):
            fn = f(beta + t * step)
            if fn <= fb + 1e-4 * t * slope:
                beta = beta + t * step
                improved = True
                break
            t *= 0.5
        if not improved or fb - fn <= 1e-13 * (1.0 + abs(fb)):
            fb = min(fb, fn)
            break
        fb = fn
    return beta


def _vertex_polish_general(X, y, w, tau, beta):
    n, p = X.shape
    cand_list = [beta, np.zeros(p)]
    r = np.abs(y - X @ beta)
    nearest = np.argsort(r, kind="stable")[: min(n, p + 6)]
    scale = float(np.max(np.abs(X))) or 1.0
    for rows in combinations(nearest.tolist(), p):
        A = X[list(rows)]
        if abs(np.linalg.det(A)) <= 1e-12 * scale**p:
            continue
        cand_list.append(np.linalg.solve(A, y[list(rows)]))
    objs = np.array([_exact_objective(X, y, w, tau, b) for b in cand_list])
    best = float(np.min(objs))
    tol = 1e-12 * max(1.0, best)
    tied = sorted((tuple(b) for b, o in zip(cand_list, objs) if o <= best + tol))
    return np.array(tied[0])


# -- public fitting API -----------------------------------------------------------


def weighted_linear_qr(X, y, w, tau: float) -> QrFit:
    """Minimize sum_i w_i rho_tau(y_i - X_i beta) over beta.

    Requires at least p + 5 rows, a full-rank design (over rows with
    positive weight) and at least one positive weight. Non-unique
    minimizers resolve to the lexicographically smallest coefficient
    vector (for an intercept-only design, the lower endpoint of the
    optimal interval).
    """
    return weighted_linear_qr_path(X, y, w, [tau])[0]


def weighted_linear_qr_path(X, y, w, taus) -> list[QrFit]:
    """Fit the same weighted design at several levels, sharing work.

    Two-column designs (the dominant case) solve every level in one
    batched pass; results come back in the order given and match
    standalone :func:`weighted_linear_qr` calls.
    """
    taus = [float(t) for t in taus]
    X, y, w, active = _validate_qr_inputs(X, y, w, taus)
    p = X.shape[1]
    unique = sorted(set(taus))

    fits: dict[float, QrFit] = {}
    if p == 1:
        for tau in unique:
            beta = _solve_single_column(X, y, w, tau, active)
            fits[tau] = QrFit(beta, tau, _exact_objective(X, y, w, tau, beta))
    elif p == 2:
        _check_rank(X, active, p)
        arr = np.array(unique)
        B = _solve_two_columns(X, y, w, arr, active)
        objs = _batched_objective(X, y, w, arr, B)
        for k, tau in enumerate(unique):
            fits[tau] = QrFit(B[k].copy(), tau, float(objs[k]))
    else:
        _check_rank(X, active, p)
        sd = float(np.std(y[active])) or 1.0
        sw = np.sqrt(w)
        beta, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
        for tau in unique:
            b = beta
            for width in _STAGE_WIDTHS:
                b = _smoothed_newton(X, y, w, tau, width * sd, b)
            b = _vertex_polish_general(X, y, w, tau, b)
            fits[tau] = QrFit(b, tau, _exact_objective(X, y, w, tau, b))
    return [fits[tau] for tau in taus]


def qar1_forecast(window, alpha_tail: float) -> float:
    """One-step upper-quantile forecast from a linear lag-1 regression.

    Fits response window[1:] on (1, window[:-1]) at level 1 - alpha and
    evaluates the line at the final observation. A constant window
    degenerates to that constant.
    """
    x = np.asarray(window, dtype=float)
    if x.size < 30:
        raise InsufficientData("QAR forecasting needs at least 30 observations")
    if not 0.0 < alpha_tail < 0.5:
        raise DomainError("tail probability must lie in (0, 0.5)")
    y, lagged = x[1:], x[:-1]
    tau = 1.0 - alpha_tail
    ones = np.ones(y.size)
    if np.ptp(lagged) == 0.0:
        fit = weighted_linear_qr(ones[:, None], y, ones, tau)
        return float(fit.beta[0])
    design = np.column_stack([ones, lagged])
    fit = weighted_linear_qr(design, y, ones, tau)
    return float(fit.beta[0] + fit.beta[1] * x[-1])


# -- direct quantile recursions ----------------------------------------------


@dataclass(frozen=True)
class CaviarFit:
    spec: str
    beta: np.ndarray
    tau: float
    quantile_path: np.ndarray
    objective: float
    G: float | None = None
    converged: bool = True


def _caviar_path(spec: str, beta, y: np.ndarray, q0: float, tau: float, G: float):
    """Quantile path over the window; None when the recursion leaves its
    domain (negative squared-scale state)."""
    n = y.size
    if spec == "SAV":
        b1, b2, b3 = beta
        drive = b1 + b3 * np.abs(y[:-1])
        out = np.empty(n)
        out[0] = q0
        out[1:], _ = lfilter([1.0], [1.0, -b2], drive, zi=[b2 * q0])
        return out
    if spec == "AS":
        b1, b2, b3, b4 = beta
        drive = b1 + b3 * np.maximum(y[:-1], 0.0) - b4 * np.minimum(y[:-1], 0.0)
        out = np.empty(n)
        out[0] = q0
        out[1:], _ = lfilter([1.0], [1.0, -b2], drive, zi=[b2 * q0])
        return out
    if spec == "IndirectGarch":
        b1, b2, b3 = beta
        drive = b1 + b3 * y[:-1] ** 2
        s = np.empty(n)
        s[0] = q0 * q0
        s[1:], _ = lfilter([1.0], [1.0, -b2], drive, zi=[b2 * s[0]])
        if np.any(s < 0.0):
            return None
        return np.sqrt(s)
    if spec == "Adaptive":
        (b1,) = beta
        out = np.empty(n)
        out[0] = q0
        q = q0
        for t in range(1, n):
            arg = min(max(G * (y[t - 1] - q), -700.0), 700.0)
            q = q + b1 * (1.0 / (1.0 + math.exp(arg)) - tau)
            out[t] = q
        return out
    raise DomainError(f"unknown recursion spec {spec!r}")


_PENALTY = 1e300  # finite so the simplex bookkeeping never sees inf - inf


def _caviar_objective(spec, beta, y, q0, tau, G) -> float:
    if not np.all(np.isfinite(beta)):
        return _PENALTY
    path = _caviar_path(spec, beta, y, q0, tau, G)
    if path is None or not np.all(np.isfinite(path)):
        return _PENALTY
    return float(np.sum(check_loss(y - path, tau)))


def caviar_fit(
    window,
    spec: str,
    alpha_tail: float,
    *,
    starts: int = 25,
    G: float = 10.0,
    seed: int = 0,
) -> CaviarFit:
    """Fit a direct quantile recursion by minimizing its check loss.

    The search refines ``starts`` uniform random coefficient vectors
    (persistence coefficient in [0, 0.99], all others in [-1, 1]) plus
    the constant path at the empirical window quantile; the best
    refined objective wins. The path starts at that empirical quantile.
    """
    y = np.asarray(window, dtype=float)
    if y.size < 100:
        raise InsufficientData("recursion fitting needs at least 100 observations")
    if spec not in CAVIAR_SPECS:
        raise DomainError(f"spec must be one of {CAVIAR_SPECS}")
    if not 0.0 < alpha_tail < 0.5:
        raise DomainError("tail probability must lie in (0, 0.5)")
    tau = 1.0 - alpha_tail
    q0 = float(np.quantile(y, tau))

    dim = {"SAV": 3, "AS": 4, "IndirectGarch": 3, "Adaptive": 1}[spec]
    rng = make_generator(seed)
    points = rng.uniform(-1.0, 1.0, size=(starts, dim))
    if spec != "Adaptive":
        points[:, 1] = rng.uniform(0.0, 0.99, size=starts)
    if spec == "Adaptive":
        const_start = np.zeros(1)
    elif spec == "IndirectGarch":
        const_start = np.array([q0 * q0] + [0.0] * (dim - 1))
    else:
        const_start = np.array([q0] + [0.0] * (dim - 1))
    all_starts = np.vstack([points, const_start])

    best_beta, best_obj, converged = None, np.inf, False
    for x0 in all_starts:
        res = minimize(
            lambda b: _caviar_objective(spec, b, y, q0, tau, G),
            x0,
            method="Nelder-Mead",
            options={"fatol": 1e-9, "xatol": 1e-7, "maxiter": 300 * dim, "maxfev": 300 * dim},
        )
        converged = converged or bool(res.success)
        if res.fun < best_obj:
            best_obj, best_beta = float(res.fun), np.asarray(res.x, dtype=float)

    path = _caviar_path(spec, best_beta, y, q0, tau, G)
    fit = CaviarFit(
        spec=spec,
        beta=best_beta,
        tau=tau,
        quantile_path=path,
        objective=best_obj,
        G=G if spec == "Adaptive" else None,
        converged=converged,
    )
    if not converged:
        raise FitError("recursion fit did not converge", best=fit)
    return fit


def caviar_forecast(f: CaviarFit, last_loss: float) -> float:
    """One more recursion step from the end of the fitted path."""
    q = float(f.quantile_path[-1])
    b = f.beta
    if f.spec == "SAV":
        return float(b[0] + b[1] * q + b[2] * abs(last_loss))
    if f.spec == "AS":
        return float(b[0] + b[1] * q + b[2] * max(last_loss, 0.0) - b[3] * min(last_loss, 0.0))
    if f.spec == "IndirectGarch":
        rad = b[0] + b[1] * q * q + b[2] * last_loss * last_loss
        if rad < 0.0:
            raise ForecastError("negative squared-scale state in one-step forecast")
        return float(math.sqrt(rad))
    arg = min(max(f.G * (last_loss - q), -700.0), 700.0)
    return float(q + b[0] * (1.0 / (1.0 + math.exp(arg)) - f.tau))
