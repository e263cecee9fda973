"""Peaks-over-threshold tail modeling with the generalized Pareto law.

The threshold is an empirical quantile of the standardized residuals
(type-7 interpolation, i.e. linear between order statistics, matching
``numpy.quantile``'s default); exceedances above it are fitted by GPD
maximum likelihood with the shared simplex search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DomainError, FitError, InsufficientTail, TailError, TailMeanUndefined
from .optimize import minimize_multistart

__all__ = [
    "GpdFit",
    "select_threshold",
    "fit_gpd",
    "gpd_loglik",
    "gpd_tail_quantile",
    "gpd_tail_es",
]

_ZETA_LOW, _ZETA_HIGH = -0.5, 0.99
_MIN_EXCEEDANCES = 10


@dataclass(frozen=True)
class GpdFit:
    """GPD tail description: shape ``zeta``, scale ``psi``, threshold ``u``."""

    zeta: float
    psi: float
    u: float
    n_total: int
    n_exceed: int

    def __post_init__(self):
        if not self.psi > 0.0:
            raise DomainError("psi must be positive")
        if self.n_exceed < _MIN_EXCEEDANCES or self.n_exceed > self.n_total:
            raise DomainError("need 10 <= n_exceed <= n_total")


def select_threshold(residuals: np.ndarray, p_u: float = 0.90) -> tuple[float, np.ndarray]:
    """Empirical ``p_u``-quantile threshold and the excesses above it.

    Returns (u, exceedances) where exceedances are r - u for r > u, in
    the original order.
    """
    r = np.asarray(residuals, dtype=float)
    if r.size < 100:
        raise InsufficientTail("need at least 100 residuals")
    if not 0.5 < p_u < 1.0:
        raise DomainError("threshold probability must lie in (0.5, 1)")
    u = float(np.quantile(r, p_u))
    exceed = r[r > u] - u
    if exceed.size < _MIN_EXCEEDANCES:
        raise InsufficientTail(f"only {exceed.size} exceedances above threshold")
    return u, exceed


def gpd_loglik(exceedances: np.ndarray, zeta: float, psi: float) -> float:
    """GPD log-likelihood of positive excesses; -inf outside the support."""
    x = np.asarray(exceedances, dtype=float)
    if psi <= 0.0:
        return -np.inf
    if zeta == 0.0:
        return float(-x.size * math.log(psi) - np.sum(x) / psi)
    t = 1.0 + zeta * x / psi
    if np.any(t <= 0.0):
        return -np.inf
    return float(-x.size * math.log(psi) - (1.0 + 1.0 / zeta) * np.sum(np.log(t)))


def fit_gpd(exceedances: np.ndarray) -> tuple[float, float]:
    """Maximum-likelihood (zeta, psi) for a sample of positive excesses.

    The shape is searched over (-0.5, 0.99) and the scale through its
    logarithm; starts combine fixed shapes with the moment estimator.
    """
    x = np.asarray(exceedances, dtype=float)
    if x.size < _MIN_EXCEEDANCES:
        raise InsufficientTail("need at least 10 exceedances")
    if np.any(x <= 0.0):
        raise DomainError("exceedances must be positive")

    m, v = float(np.mean(x)), float(np.var(x, ddof=1))

    def unpack(theta: np.ndarray) -> tuple[float, float]:
        zeta = _ZETA_LOW + (_ZETA_HIGH - _ZETA_LOW) * float(expit(theta[0]))
        psi = math.exp(theta[1])
        return zeta, psi

    def negloglik(theta: np.ndarray) -> float:
        if not np.all(np.isfinite(theta)):
            return 1e300
        zeta, psi = unpack(theta)
        ll = gpd_loglik(x, zeta, psi)
        return -ll if np.isfinite(ll) else 1e300

    # moment estimator: mean = psi/(1-zeta), var = psi^2/((1-zeta)^2 (1-2 zeta))
    zeta_mom = 0.5 * (1.0 - m * m / v) if v > 0.0 else 0.0
    zeta_starts = [-0.2, 0.0, 0.2, 0.4, min(max(zeta_mom, -0.45), 0.9)]
    starts = []
    for z0 in zeta_starts:
        psi0 = max(m * (1.0 - z0), 1e-8 * (m + 1.0))
        frac = (z0 - _ZETA_LOW) / (_ZETA_HIGH - _ZETA_LOW)
        starts.append(np.array([math.log(frac / (1.0 - frac)), math.log(psi0)]))

    res = minimize_multistart(negloglik, starts)
    zeta, psi = unpack(res.x)
    if not res.converged:
        raise FitError("GPD likelihood search did not converge", best=(zeta, psi))
    return zeta, psi


def gpd_tail_quantile(f: GpdFit, alpha_tail: float) -> float:
    """Upper ``alpha_tail`` quantile implied by the fitted tail.

    Only valid for probabilities inside the modeled tail, i.e.
    alpha_tail < n_exceed / n_total.
    """
    if not 0.0 < alpha_tail < 1.0:
        raise DomainError("tail probability must lie in (0, 1)")
    frac = f.n_exceed / f.n_total
    # at alpha == frac the formula returns the threshold itself
    if alpha_tail > frac:
        raise TailError(f"alpha {alpha_tail} not inside the modeled tail (>{frac:.4f})")
    log_ratio = math.log(alpha_tail / frac)
    if f.zeta == 0.0:
        return f.u - f.psi * log_ratio
    # psi * ((alpha/frac)^(-zeta) - 1)/zeta, written with expm1 so the
    # zeta -> 0 limit is approached smoothly
    return f.u + f.psi * math.expm1(-f.zeta * log_ratio) / f.zeta


def gpd_tail_es(f: GpdFit, q_hat: float) -> float:
    """Conditional tail mean above ``q_hat`` under the fitted GPD."""
    if f.zeta >= 1.0:
        raise TailMeanUndefined("tail mean requires zeta < 1")
    if q_hat < f.u:
        raise DomainError("q_hat must not lie below the threshold")
    return q_hat / (1.0 - f.zeta) + (f.psi - f.zeta * f.u) / (1.0 - f.zeta)
