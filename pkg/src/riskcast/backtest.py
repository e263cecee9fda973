"""Coverage tests, the ES bootstrap on exceedance residuals, the
V discrepancy and RMSE/region error summaries.

Conventions: a violation is a *strict* exceedance (loss > VaR); tail
probabilities of the chi-square statistics come from the regularized
incomplete gamma; the ES bootstrap is one-sided against the residual
mean being positive (the ES underestimating the realized tail).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc

from .errors import (
    AlignmentError,
    DegenerateResiduals,
    DomainError,
    EmptyResiduals,
    InsufficientData,
    NotApplicable,
)
from .rng import make_generator

__all__ = [
    "ViolationSeries",
    "BacktestReport",
    "RegionErrorSummary",
    "violations",
    "kupiec_uc",
    "christoffersen_cc",
    "exceedance_residuals",
    "es_bootstrap_test",
    "v_measure",
    "rmse",
    "region_errors",
    "chi2_sf",
    "compute_backtest",
]


@dataclass(frozen=True)
class ViolationSeries:
    indicators: np.ndarray
    x: int
    n: int


@dataclass(frozen=True)
class BacktestReport:
    model: str
    alpha_tail: float
    n: int
    x: int
    violation_prop: float
    uc_lr: float
    uc_p: float
    cc_lr: float
    cc_p: float
    es_boot_p: float | None
    v1: float | None
    v2: float | None
    v: float | None
    rmse_var: float | None = None
    rmse_es: float | None = None


@dataclass(frozen=True)
class RegionErrorSummary:
    """Per-region (count, mean error, error variance) rows."""

    counts: tuple[int, ...]
    bias: tuple[float, ...]
    variance: tuple[float, ...]


def chi2_sf(x: float, df: int) -> float:
    """Upper tail of the chi-square law via the regularized
    incomplete gamma."""
    if x < 0.0 or df < 1:
        raise DomainError("need x >= 0 and df >= 1")
    return float(gammaincc(df / 2.0, x / 2.0))


def violations(losses, var) -> ViolationSeries:
    """Indicator series of strict exceedances loss > VaR."""
    losses = np.asarray(losses, dtype=float)
    var = np.asarray(var, dtype=float)
    if losses.shape != var.shape:
        raise AlignmentError("losses and VaR forecasts must align")
    ind = (losses > var).astype(int)
    return ViolationSeries(ind, int(ind.sum()), int(ind.size))


def _xlogy(x: float, y: float) -> float:
    return 0.0 if x == 0.0 else x * math.log(y)


def kupiec_uc(x: int, n: int, alpha_tail: float) -> tuple[float, float]:
    """Unconditional-coverage likelihood ratio and its chi-square(1)
    p-value."""
    if not 0 <= x <= n or n < 1:
        raise DomainError("need 0 <= x <= n, n >= 1")
    if not 0.0 < alpha_tail < 1.0:
        raise DomainError("tail probability must lie in (0, 1)")
    pi_hat = x / n
    ll_null = _xlogy(n - x, 1.0 - alpha_tail) + _xlogy(x, alpha_tail)
    ll_alt = _xlogy(n - x, 1.0 - pi_hat) + _xlogy(x, pi_hat)
    lr = max(0.0, -2.0 * (ll_null - ll_alt))
    return lr, chi2_sf(lr, 1)


def christoffersen_cc(v: ViolationSeries, alpha_tail: float) -> tuple[float, float]:
    """Joint coverage-and-independence likelihood ratio, chi-square(2).

    The independence part compares a first-order Markov alternative
    against a constant violation probability over the transition pairs;
    states with no outgoing transitions contribute nothing.
    """
    if v.n < 2:
        raise InsufficientData("need at least two indicators")
    ind = v.indicators
    prev, curr = ind[:-1], ind[1:]
    n00 = int(np.sum((prev == 0) & (curr == 0)))
    n01 = int(np.sum((prev == 0) & (curr == 1)))
    n10 = int(np.sum((prev == 1) & (curr == 0)))
    n11 = int(np.sum((prev == 1) & (curr == 1)))
    total = n00 + n01 + n10 + n11
    pi = (n01 + n11) / total
    ll0 = _xlogy(n01 + n11, pi) + _xlogy(n00 + n10, 1.0 - pi) if 0.0 < pi < 1.0 else 0.0
    ll1 = 0.0
    if n00 + n01 > 0:
        pi0 = n01 / (n00 + n01)
        ll1 += _xlogy(n01, pi0) + _xlogy(n00, 1.0 - pi0) if 0.0 < pi0 < 1.0 else 0.0
    if n10 + n11 > 0:
        pi1 = n11 / (n10 + n11)
        ll1 += _xlogy(n11, pi1) + _xlogy(n10, 1.0 - pi1) if 0.0 < pi1 < 1.0 else 0.0
    lr_ind = max(0.0, -2.0 * (ll0 - ll1))
    lr_uc, _ = kupiec_uc(v.x, v.n, alpha_tail)
    lr_cc = lr_uc + lr_ind
    return lr_cc, chi2_sf(lr_cc, 2)


def exceedance_residuals(losses, var, es, sigma=None) -> np.ndarray:
    """(loss - ES)/sigma collected at violation times only.

    ``sigma`` defaults to 1 for models without a conditional SD.
    """
    losses = np.asarray(losses, dtype=float)
    var = np.asarray(var, dtype=float)
    es = np.asarray(es, dtype=float)
    sigma = np.ones_like(losses) if sigma is None else np.asarray(sigma, dtype=float)
    if not losses.shape == var.shape == es.shape == sigma.shape:
        raise AlignmentError("losses, var, es and sigma must align")
    mask = losses > var
    if not np.any(mask):
        raise EmptyResiduals("no violations: the ES test is not applicable")
    if np.any(sigma[mask] <= 0.0):
        raise DomainError("sigma must be positive at violation times")
    return (losses[mask] - es[mask]) / sigma[mask]


def es_bootstrap_test(r, b: int = 1000, seed: int = 0) -> float:
    """One-sided bootstrap p-value for mean(residual) > 0.

    The observed statistic is the studentized mean; resamples are drawn
    with replacement from the centered residuals, and the add-one
    estimator keeps the p-value inside [1/(b+1), 1].
    """
    r = np.asarray(r, dtype=float)
    if r.size < 3:
        raise InsufficientData("need at least three residuals")
    if b < 200:
        raise DomainError("need at least 200 bootstrap resamples")
    m = r.size
    sd = float(np.std(r, ddof=1))
    if sd == 0.0:
        raise DegenerateResiduals("residuals have zero spread")
    t_obs = float(np.mean(r)) / (sd / math.sqrt(m))
    centered = r - np.mean(r)
    rng = make_generator(seed)
    idx = rng.integers(0, m, size=(b, m))
    boot = centered[idx]
    means = boot.mean(axis=1)
    sds = boot.std(axis=1, ddof=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_star = np.where(sds > 0.0, means / (sds / math.sqrt(m)), np.where(means == 0.0, 0.0, np.inf * np.sign(means)))
    return (1.0 + int(np.sum(t_star >= t_obs))) / (b + 1.0)


def v_measure(losses, var, es) -> tuple[float, float, float]:
    """Estimated vs realized mean exceedance gap over VaR.

    v1 averages es - var over violation times, v2 averages loss - var;
    their difference is near 0 when the ES matches the realized tail.
    """
    losses = np.asarray(losses, dtype=float)
    var = np.asarray(var, dtype=float)
    es = np.asarray(es, dtype=float)
    if not losses.shape == var.shape == es.shape:
        raise AlignmentError("losses, var and es must align")
    mask = losses > var
    if not np.any(mask):
        raise NotApplicable("no violations")
    v1 = float(np.mean(es[mask] - var[mask]))
    v2 = float(np.mean(losses[mask] - var[mask]))
    return v1, v2, v1 - v2


def rmse(forecast, truth) -> float:
    forecast = np.asarray(forecast, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if forecast.shape != truth.shape:
        raise AlignmentError("forecast and truth must align")
    return float(np.sqrt(np.mean((forecast - truth) ** 2)))


def region_errors(forecast, truth, regions: int = 5) -> RegionErrorSummary:
    """Bias and variance of forecast errors inside truth-quantile bins.

    Boundaries are the equally spaced quantiles of ``truth``; a value
    equal to a boundary falls in the lower bin.
    """
    forecast = np.asarray(forecast, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if forecast.shape != truth.shape:
        raise AlignmentError("forecast and truth must align")
    if regions < 2:
        raise DomainError("need at least two regions")
    if truth.size < regions:
        raise InsufficientData("fewer targets than regions")
    bounds = np.quantile(truth, np.arange(1, regions) / regions)
    bins = np.searchsorted(bounds, truth, side="left")
    err = forecast - truth
    counts, bias, variance = [], [], []
    for kk in range(regions):
        sel = err[bins == kk]
        counts.append(int(sel.size))
        bias.append(float(np.mean(sel)) if sel.size else math.nan)
        variance.append(float(np.var(sel, ddof=1)) if sel.size > 1 else math.nan)
    return RegionErrorSummary(tuple(counts), tuple(bias), tuple(variance))


def compute_backtest(
    model: str,
    alpha_tail: float,
    losses,
    var,
    es=None,
    sigma=None,
    truth_var=None,
    truth_es=None,
    b: int = 1000,
    seed: int = 0,
) -> BacktestReport:
    """Full per-(model, level) report; ES entries are None when the
    model carries no ES or the tests are not applicable."""
    v = violations(losses, var)
    uc_lr, uc_p = kupiec_uc(v.x, v.n, alpha_tail)
    cc_lr, cc_p = christoffersen_cc(v, alpha_tail)
    es_boot_p = v1 = v2 = vdiff = None
    if es is not None:
        try:
            resid = exceedance_residuals(losses, var, es, sigma)
            es_boot_p = es_bootstrap_test(resid, b, seed)
        except (EmptyResiduals, InsufficientData, DegenerateResiduals):
            es_boot_p = None
        try:
            v1, v2, vdiff = v_measure(losses, var, es)
        except NotApplicable:
            pass
    rmse_var = rmse(var, truth_var) if truth_var is not None else None
    rmse_es = rmse(es, truth_es) if (truth_es is not None and es is not None) else None
    return BacktestReport(
        model=model,
        alpha_tail=alpha_tail,
        n=v.n,
        x=v.x,
        violation_prop=v.x / v.n,
        uc_lr=uc_lr,
        uc_p=uc_p,
        cc_lr=cc_lr,
        cc_p=cc_p,
        es_boot_p=es_boot_p,
        v1=v1,
        v2=v2,
        v=vdiff,
        rmse_var=rmse_var,
        rmse_es=rmse_es,
    )
