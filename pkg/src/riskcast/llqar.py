"""Local linear quantile autoregression with lag-scaled kernel weights.

Each regression pair (window[i-1] -> window[i]) is weighted by a
Gaussian kernel applied to the *scaled distance*

    u_i = (window[i-1] - L) * lag_i / (W - 1),      lag_i = W - i,

where L is the current (final) loss of the window. Two observations at
the same loss distance therefore get different weights: the older one,
with its larger lag multiplier, sits further out in the kernel and is
down-weighted more. The design is centered at L, so the fitted
intercept is directly the one-step quantile forecast.

Bandwidths come from a rule-of-thumb IQR formula recomputed per window,
or from a one-off cross-validated quantile of the scaled distances
(frozen after the first window), or are fixed by the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .distributions import Dist, gaussian_kernel, pdf, quantile
from .errors import DegenerateBandwidth, DegenerateWeights, DomainError, InsufficientData
from .quantile_regression import _weighted_quantile_lower, check_loss, weighted_linear_qr_path

__all__ = [
    "LlqarConfig",
    "QcvResult",
    "scaled_distances",
    "rot_bandwidth",
    "qcv_bandwidth",
    "es_sublevels",
    "monotone_repair",
    "llqar_forecasts",
    "llqar_var",
    "llqar_es",
    "llqar_var_es",
    "yu_jones_bandwidth",
    "hall_sheather_bandwidth",
    "bofinger_bandwidth",
]

_MIN_WINDOW = 30
_WEIGHT_FLOOR = 1e-12

ROT = "rot"
QCV = "qcv"
FIXED = "fixed"


def _default_grid() -> tuple[float, ...]:
    return tuple(np.round(np.arange(0.05, 0.951, 0.05), 10))


@dataclass(frozen=True)
class LlqarConfig:
    """Estimator knobs: bandwidth policy and ES discretization depth."""

    bandwidth_rule: str = ROT
    fixed_h: float | None = None
    es_sublevels: int = 20
    qcv_grid: tuple[float, ...] = field(default_factory=_default_grid)

    def __post_init__(self):
        if self.bandwidth_rule not in (ROT, QCV, FIXED):
            raise DomainError(f"unknown bandwidth rule {self.bandwidth_rule!r}")
        if self.bandwidth_rule == FIXED and not (self.fixed_h and self.fixed_h > 0):
            raise DomainError("fixed bandwidth rule requires fixed_h > 0")
        if self.es_sublevels < 5:
            raise DomainError("need at least 5 ES sublevels")


def scaled_distances(window, point: float | None = None) -> np.ndarray:
    """Lag-scaled loss distances of every predictor from ``point``.

    ``point`` defaults to the final window value (the current loss).
    The result has one entry per regression pair, most recent last.
    """
    x = np.asarray(window, dtype=float)
    if x.size < _MIN_WINDOW:
        raise InsufficientData(f"need at least {_MIN_WINDOW} observations")
    w = x.size
    lags = np.arange(w - 1, 0, -1, dtype=float)
    center = float(x[-1]) if point is None else float(point)
    return (x[:-1] - center) * lags / (w - 1)


def rot_bandwidth(u) -> float:
    """Rule-of-thumb bandwidth (4/(3n))^(1/5) * IQR(|u|).

    Falls back to a tenth of the largest |u| when the interquartile
    range collapses; raises if even that is zero.
    """
    a = np.abs(np.asarray(u, dtype=float))
    if a.size < 2:
        raise InsufficientData("need at least two distances")
    q75, q25 = np.quantile(a, 0.75), np.quantile(a, 0.25)
    iqr = float(q75 - q25)
    if iqr > 0.0:
        return (4.0 / (3.0 * a.size)) ** 0.2 * iqr
    h = 0.1 * float(np.max(a))
    if h > 0.0:
        return h
    raise DegenerateBandwidth("all scaled distances are zero")


class QcvResult(NamedTuple):
    q_opt: float
    h: float
    grid: tuple[float, ...]
    cv_losses: tuple[float, ...]


def qcv_bandwidth(first_window, alpha_tail: float, grid: Sequence[float] | None = None) -> QcvResult:
    """Pick the |u|-quantile that best leave-one-out cross-validates.

    For each grid candidate q the bandwidth h_q is the q-th quantile of
    the window's |scaled distances|. Every regression pair is held out
    in turn, the local fit is recentered at the held-out predictor, and
    the check loss of the held-out response is accumulated. The
    candidate with the smallest total loss wins; the resulting h is
    meant to be frozen and reused for later windows.
    """
    x = np.asarray(first_window, dtype=float)
    if x.size < 100:
        raise InsufficientData("cross-validation needs at least 100 observations")
    if not 0.0 < alpha_tail < 0.5:
        raise DomainError("tail probability must lie in (0, 0.5)")
    grid = tuple(grid) if grid is not None else _default_grid()
    if not grid:
        raise DomainError("empty bandwidth grid")
    tau = 1.0 - alpha_tail

    abs_u = np.abs(scaled_distances(x))
    n_pairs = x.size - 1
    w_len = x.size
    lags = np.arange(w_len - 1, 0, -1, dtype=float)
    pred, resp = x[:-1], x[1:]

    losses: list[float] = []
    usable = 0
    for q in grid:
        h = float(np.quantile(abs_u, q))
        if h <= 0.0:
            losses.append(math.inf)
            continue
        usable += 1
        total = 0.0
        for j in range(n_pairs):
            keep = np.ones(n_pairs, dtype=bool)
            keep[j] = False
            u_j = (pred - pred[j]) * lags / (w_len - 1)
            fc = _forecast_levels(
                pred[keep] - pred[j],
                resp[keep],
                gaussian_kernel(u_j[keep] / h),
                (tau,),
                fallback_unweighted=True,
            )[0]
            total += float(check_loss(resp[j] - fc, tau))
        losses.append(total)
    if usable == 0:
        raise DegenerateBandwidth("every grid candidate produced a zero bandwidth")
    best = int(np.argmin(losses))
    q_opt = float(grid[best])
    return QcvResult(q_opt, float(np.quantile(abs_u, q_opt)), grid, tuple(losses))


def _forecast_levels(centered, y, w, upper_levels, fallback_unweighted=False):
    """Intercepts of the centered weighted fit at each upper level."""
    centered = np.asarray(centered, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    if float(np.sum(w)) < _WEIGHT_FLOOR:
        if not fallback_unweighted:
            raise DegenerateWeights("kernel weights underflowed")
        w = np.ones_like(w)
    if np.ptp(centered) == 0.0:
        return [
            _weighted_quantile_lower(y, w, tau) for tau in upper_levels
        ]
    design = np.column_stack([np.ones_like(y), centered])
    fits = weighted_linear_qr_path(design, y, w, upper_levels)
    return [float(f.beta[0]) for f in fits]


def es_sublevels(alpha_tail: float, k: int) -> np.ndarray:
    """Midpoint discretization of the tail: alpha * (j - 1/2)/k."""
    return alpha_tail * (np.arange(1, k + 1) - 0.5) / k


def monotone_repair(upper_levels: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Make fitted quantiles nondecreasing in the upper level.

    Individually fitted levels can cross; the running maximum over
    increasing level is the smallest repair that restores a valid
    quantile curve, and it never lowers the shallowest level.
    """
    order = np.argsort(upper_levels, kind="stable")
    repaired = np.empty_like(values)
    repaired[order] = np.maximum.accumulate(values[order])
    return repaired


def llqar_forecasts(window, alphas, h: float, k: int = 20) -> dict[float, tuple[float, float]]:
    """Jointly repaired one-step (VaR, ES) per tail level.

    All levels needed by every requested alpha (the VaR level plus the
    k ES sub-levels each) are fitted in one batched pass on the shared
    weighted design, then monotone-repaired together. The repair makes
    every reported pair coherent: es >= var within a level and both
    nondecreasing as the tail gets rarer.
    """
    x = np.asarray(window, dtype=float)
    if not h > 0.0:
        raise DomainError("bandwidth must be positive")
    alphas = [float(a) for a in alphas]
    for a in alphas:
        if not 0.0 < a < 0.5:
            raise DomainError("tail probability must lie in (0, 0.5)")
    if k < 1:
        raise DomainError("need at least one ES sublevel")
    u = scaled_distances(x)
    w = gaussian_kernel(u / h)
    levels: list[float] = []
    for a in alphas:
        levels.append(1.0 - a)
        levels.extend(1.0 - s for s in es_sublevels(a, k))
    arr = np.array(levels)
    values = np.array(_forecast_levels(x[:-1] - x[-1], x[1:], w, arr))
    repaired = monotone_repair(arr, values)
    out: dict[float, tuple[float, float]] = {}
    pos = 0
    for a in alphas:
        var = float(repaired[pos])
        # the mean of values >= var is >= var; the max guards the last ulp
        es = max(float(np.mean(repaired[pos + 1 : pos + 1 + k])), var)
        out[a] = (var, es)
        pos += 1 + k
    # rarer tails never report smaller risk, ulp-rounding included
    run_var = run_es = -math.inf
    for a in sorted(out, reverse=True):
        var, es = out[a]
        run_var = max(run_var, var)
        run_es = max(run_es, es, run_var)
        out[a] = (run_var, run_es)
    return out


def llqar_var_es(window, alpha_tail: float, h: float, k: int = 20) -> tuple[float, float]:
    """One-step VaR and ES at a single tail level (see
    :func:`llqar_forecasts`)."""
    return llqar_forecasts(window, [alpha_tail], h, k)[float(alpha_tail)]


def llqar_var(window, alpha_tail: float, h: float) -> float:
    """One-step upper-quantile forecast: the centered fit's intercept."""
    x = np.asarray(window, dtype=float)
    if not h > 0.0:
        raise DomainError("bandwidth must be positive")
    if not 0.0 < alpha_tail < 0.5:
        raise DomainError("tail probability must lie in (0, 0.5)")
    u = scaled_distances(x)
    w = gaussian_kernel(u / h)
    return _forecast_levels(x[:-1] - x[-1], x[1:], w, (1.0 - alpha_tail,))[0]


def llqar_es(window, alpha_tail: float, h: float, k: int = 20) -> float:
    """Midpoint-discretized tail mean of the repaired sub-level
    forecasts."""
    return llqar_var_es(window, alpha_tail, h, k)[1]


# -- reference bandwidths (diagnostics only, never drive forecasts) ----------


def yu_jones_bandwidth(h_mean: float, tau: float) -> float:
    """Quantile rescaling of a caller-supplied mean-regression bandwidth."""
    q = quantile(Dist.normal(), tau)
    return float(h_mean * (tau * (1.0 - tau) / pdf(Dist.normal(), q) ** 2) ** 0.2)


def hall_sheather_bandwidth(n: int, tau: float) -> float:
    """Closed-form reference bandwidth indexed by sample size and level."""
    q = quantile(Dist.normal(), tau)
    z = quantile(Dist.normal(), 1.0 - tau / 2.0)
    return float(n ** (-0.5) * z ** (2.0 / 3.0) * (1.5 * pdf(Dist.normal(), q) ** 2 / (2.0 * q * q + 1.0)))


def bofinger_bandwidth(n: int, tau: float) -> float:
    """Closed-form reference bandwidth indexed by sample size and level."""
    q = quantile(Dist.normal(), tau)
    return float(n ** (-0.2) * (4.5 * pdf(Dist.normal(), q) ** 4 / (2.0 * q * q + 1.0) ** 2))
