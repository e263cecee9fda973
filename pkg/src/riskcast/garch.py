"""GARCH(1,1) maximum likelihood, sigma forecasting, and the eGARCH-t
simulator that produces ground-truth VaR/ES paths for the study.

Fitting works on a demeaned window with the variance recursion

    sigma2[t] = omega + alpha * eps[t-1]**2 + beta * sigma2[t-1],

sigma2[0] initialized to the window sample variance. The likelihood is
maximized by Nelder-Mead from five fixed starting points; positivity
and stationarity constraints are enforced through an exp/logistic
reparameterization, so the search itself is unconstrained.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter
from scipy.special import expit, gammaln

from .distributions import Dist, abs_moment, quantile, sample, upper_tail_mean
from .errors import DomainError, FitError, InsufficientData
from .optimize import minimize_multistart

__all__ = [
    "GarchParams",
    "FittedGarch",
    "EgarchParams",
    "SimPath",
    "fit_garch",
    "conditional_loglik",
    "forecast_sigma",
    "simulate_egarch",
    "true_var_es",
]

_LOG_2PI = math.log(2.0 * math.pi)
_MAX_PERSISTENCE = 0.9999
_NU_LOW, _NU_HIGH = 2.1, 100.0

# fixed (alpha, beta) starting points for the likelihood search
_STARTS = ((0.05, 0.90), (0.10, 0.85), (0.02, 0.95), (0.20, 0.70), (0.05, 0.50))
_NU_START = 8.0


@dataclass(frozen=True)
class GarchParams:
    """GARCH(1,1) parameters; ``nu`` is set only for t innovations."""

    omega: float
    alpha: float
    beta: float
    mu: float
    nu: float | None = None

    def __post_init__(self):
        if not self.omega > 0.0:
            raise DomainError("omega must be positive")
        if self.alpha < 0.0 or self.beta < 0.0:
            raise DomainError("alpha and beta must be nonnegative")
        if not self.alpha + self.beta < 1.0:
            raise DomainError("alpha + beta must be below 1")
        if self.nu is not None and not self.nu > 2.0:
            raise DomainError("nu must exceed 2")


@dataclass(frozen=True)
class FittedGarch:
    params: GarchParams
    sigma: np.ndarray
    std_residuals: np.ndarray
    loglik: float
    innovation: Dist
    converged: bool = True


def _sigma2_path(eps2: np.ndarray, omega: float, alpha: float, beta: float, s0: float) -> np.ndarray:
    sig2 = np.empty(eps2.size)
    sig2[0] = s0
    if eps2.size > 1:
        u = omega + alpha * eps2[:-1]
        sig2[1:], _ = lfilter([1.0], [1.0, -beta], u, zi=[beta * s0])
    return sig2


def _loglik_normal(eps2: np.ndarray, sig2: np.ndarray) -> float:
    return -0.5 * float(np.sum(_LOG_2PI + np.log(sig2) + eps2 / sig2))


def _loglik_student_t(eps2: np.ndarray, sig2: np.ndarray, nu: float) -> float:
    logc = gammaln((nu + 1.0) / 2.0) - gammaln(nu / 2.0) - 0.5 * math.log((nu - 2.0) * math.pi)
    return float(
        eps2.size * logc
        - 0.5 * np.sum(np.log(sig2))
        - 0.5 * (nu + 1.0) * np.sum(np.log1p(eps2 / (sig2 * (nu - 2.0))))
    )


def conditional_loglik(values: np.ndarray, params: GarchParams, innovation: str = "normal") -> float:
    """Exact conditional log-likelihood of a window under ``params``.

    Uses the same recursion and initialization as :func:`fit_garch`, so
    fitted parameters can be compared against any alternative on the
    same sample.
    """
    x = np.asarray(values, dtype=float)
    eps2 = (x - params.mu) ** 2
    s0 = float(np.var(x, ddof=1))
    sig2 = _sigma2_path(eps2, params.omega, params.alpha, params.beta, s0)
    if innovation == "normal":
        return _loglik_normal(eps2, sig2)
    if params.nu is None:
        raise DomainError("t likelihood requires nu")
    return _loglik_student_t(eps2, sig2, params.nu)


def _logit(p: float) -> float:
    return math.log(p) - math.log1p(-p)


def fit_garch(values: np.ndarray, innovation: str = "normal") -> FittedGarch:
    """Fit GARCH(1,1) to a window of losses by maximum likelihood.

    ``innovation`` is ``"normal"`` or ``"standardized-t"``; for the t
    law the degrees of freedom are estimated jointly over (2.1, 100).
    Raises :class:`FitError` (carrying the best fit found) if no search
    converged.
    """
    x = np.asarray(values, dtype=float)
    if x.size < 100:
        raise InsufficientData("GARCH fitting needs at least 100 observations")
    if np.ptp(x) == 0.0:
        raise InsufficientData("window is constant")
    if innovation not in ("normal", "standardized-t"):
        raise DomainError(f"unknown innovation {innovation!r}")
    use_t = innovation == "standardized-t"

    mu = float(np.mean(x))
    eps2 = (x - mu) ** 2
    s0 = float(np.var(x, ddof=1))

    # theta = (log omega, logit persistence, logit alpha-share[, logit nu-position])
    def unpack(theta: np.ndarray) -> tuple[float, float, float, float | None]:
        omega = math.exp(theta[0])
        pers = _MAX_PERSISTENCE * expit(theta[1])
        share = expit(theta[2])
        alpha = pers * share
        beta = pers * (1.0 - share)
        nu = _NU_LOW + (_NU_HIGH - _NU_LOW) * expit(theta[3]) if use_t else None
        return omega, alpha, beta, nu

    def negloglik(theta: np.ndarray) -> float:
        if not np.all(np.isfinite(theta)):
            return 1e300
        omega, alpha, beta, nu = unpack(theta)
        if not omega > 0.0 or not np.isfinite(omega):
            return 1e300
        sig2 = _sigma2_path(eps2, omega, alpha, beta, s0)
        ll = _loglik_normal(eps2, sig2) if not use_t else _loglik_student_t(eps2, sig2, nu)
        return -ll if np.isfinite(ll) else 1e300

    starts = []
    for a0, b0 in _STARTS:
        omega0 = (1.0 - a0 - b0) * s0
        theta = [
            math.log(omega0),
            _logit((a0 + b0) / _MAX_PERSISTENCE),
            _logit(a0 / (a0 + b0)),
        ]
        if use_t:
            theta.append(_logit((_NU_START - _NU_LOW) / (_NU_HIGH - _NU_LOW)))
        starts.append(np.array(theta))

    res = minimize_multistart(negloglik, starts)
    omega, alpha, beta, nu = unpack(res.x)
    params = GarchParams(omega, alpha, beta, mu, nu)
    sig2 = _sigma2_path(eps2, omega, alpha, beta, s0)
    sigma = np.sqrt(sig2)
    fitted = FittedGarch(
        params=params,
        sigma=sigma,
        std_residuals=(x - mu) / sigma,
        loglik=-res.fun,
        innovation=Dist.standardized_t(nu) if use_t else Dist.normal(),
        converged=res.converged,
    )
    if not res.converged:
        raise FitError("GARCH likelihood search did not converge", best=fitted)
    return fitted


def forecast_sigma(f: FittedGarch, last_loss: float) -> float:
    """One-step conditional standard deviation given the last loss."""
    p = f.params
    eps = last_loss - p.mu
    sig2_next = p.omega + p.alpha * eps * eps + p.beta * float(f.sigma[-1]) ** 2
    return math.sqrt(sig2_next)


@dataclass(frozen=True)
class EgarchParams:
    """Log-variance recursion coefficients of the eGARCH-t generator."""

    omega: float = -0.40
    alpha: float = -0.09
    gamma_coef: float = 0.16
    beta: float = 0.96
    nu: float = 6.0

    def __post_init__(self):
        if not abs(self.beta) < 1.0:
            raise DomainError("|beta| must be below 1 for a stable recursion")
        if not self.nu > 2.0:
            raise DomainError("nu must exceed 2")


@dataclass(frozen=True)
class SimPath:
    """Simulated losses with the volatility path that generated them."""

    losses: np.ndarray
    sigma_true: np.ndarray
    gamma: np.ndarray
    params: EgarchParams

    def __len__(self) -> int:
        return len(self.losses)


def simulate_egarch(p: EgarchParams, n: int, seed: int, gamma) -> SimPath:
    """Simulate ``n`` losses from the eGARCH-t recursion.

    ``gamma`` is a positive multiplicative volatility profile of length
    ``n`` (an array or any object with a ``values`` attribute). The
    innovation draws depend only on (seed), never on the profile, so
    two profiles under one seed share the same shocks.
    """
    gvals = np.asarray(getattr(gamma, "values", gamma), dtype=float)
    if n < 2:
        raise InsufficientData("need n >= 2")
    if gvals.shape != (n,):
        raise DomainError("gamma profile length must equal n")
    if np.any(gvals <= 0.0):
        raise DomainError("gamma values must be positive")

    z = sample(Dist.standardized_t(p.nu), n, seed)
    e_abs = abs_moment(Dist.standardized_t(p.nu))
    log_s2 = np.empty(n)
    log_s2[0] = p.omega / (1.0 - p.beta)
    for t in range(1, n):
        log_s2[t] = (
            p.omega
            + p.alpha * z[t - 1]
            + p.gamma_coef * (abs(z[t - 1]) - e_abs)
            + p.beta * log_s2[t - 1]
        )
    sigma_core = np.exp(0.5 * log_s2)
    sigma_true = gvals * sigma_core
    return SimPath(sigma_true * z, sigma_true, gvals, p)


def true_var_es(path: SimPath, alpha_tail: float) -> tuple[np.ndarray, np.ndarray]:
    """Ground-truth one-step VaR and ES sequences of a simulated path.

    Conditionally on the past, loss[t] = sigma_true[t] * z with z the
    unit-variance t, so both risk measures are sigma_true scaled by the
    corresponding quantile / tail mean of z.
    """
    if not 0.0 < alpha_tail < 0.5:
        raise DomainError("tail probability must lie in (0, 0.5)")
    d = Dist.standardized_t(path.params.nu)
    qz = quantile(d, 1.0 - alpha_tail)
    esz = upper_tail_mean(d, alpha_tail)
    return path.sigma_true * qz, path.sigma_true * esz
