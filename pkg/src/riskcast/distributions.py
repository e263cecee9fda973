"""Innovation distributions and the Gaussian smoothing kernel.

Two laws are supported: the standard normal and the *standardized*
Student-t, i.e. the location-scale t rescaled by sqrt((nu-2)/nu) so its
variance is exactly 1. Unit variance is what makes sigma_t the
conditional standard deviation in every volatility formula downstream,
so the classical t is never exposed directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, ndtr, ndtri, stdtr, stdtrit

from .errors import DomainError
from .rng import make_generator

__all__ = [
    "Dist",
    "pdf",
    "cdf",
    "quantile",
    "abs_moment",
    "upper_tail_mean",
    "gaussian_kernel",
    "sample",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)

NORMAL = "normal"
STUDENT_T = "standardized-t"


@dataclass(frozen=True)
class Dist:
    """Innovation law: standard normal or unit-variance Student-t."""

    kind: str
    nu: float | None = None

    def __post_init__(self):
        if self.kind == NORMAL:
            if self.nu is not None:
                raise DomainError("normal law takes no degrees of freedom")
        elif self.kind == STUDENT_T:
            if self.nu is None or not self.nu > 2.0:
                raise DomainError("standardized t requires nu > 2")
        else:
            raise DomainError(f"unknown distribution kind {self.kind!r}")

    @staticmethod
    def normal() -> "Dist":
        return Dist(NORMAL)

    @staticmethod
    def standardized_t(nu: float) -> "Dist":
        return Dist(STUDENT_T, float(nu))

    @property
    def scale(self) -> float:
        """Factor mapping the classical t to its unit-variance version."""
        if self.kind == NORMAL:
            return 1.0
        return math.sqrt((self.nu - 2.0) / self.nu)


def _t_log_norm_const(nu: float) -> float:
    # classical t density constant with nu-2 in the kernel: the
    # standardized density is c * (1 + x^2/(nu-2))^(-(nu+1)/2)
    return float(
        gammaln((nu + 1.0) / 2.0)
        - gammaln(nu / 2.0)
        - 0.5 * math.log((nu - 2.0) * math.pi)
    )


def pdf(d: Dist, x):
    """Density of ``d`` at ``x`` (scalar or array)."""
    x = np.asarray(x, dtype=float)
    if d.kind == NORMAL:
        out = np.exp(-0.5 * x * x) / _SQRT_2PI
    else:
        nu = d.nu
        logc = _t_log_norm_const(nu)
        out = np.exp(logc - 0.5 * (nu + 1.0) * np.log1p(x * x / (nu - 2.0)))
    return out if out.ndim else float(out)


def cdf(d: Dist, x):
    """P(Z <= x) under ``d``."""
    x = np.asarray(x, dtype=float)
    if d.kind == NORMAL:
        out = ndtr(x)
    else:
        out = stdtr(d.nu, x / d.scale)
    return out if out.ndim else float(out)


def quantile(d: Dist, p):
    """Inverse cdf of ``d``; ``p`` must lie strictly inside (0, 1)."""
    p_arr = np.asarray(p, dtype=float)
    if np.any(p_arr <= 0.0) or np.any(p_arr >= 1.0):
        raise DomainError("quantile level must lie in (0, 1)")
    if d.kind == NORMAL:
        out = ndtri(p_arr)
    else:
        out = d.scale * stdtrit(d.nu, p_arr)
    return out if out.ndim else float(out)


def abs_moment(d: Dist) -> float:
    """E|Z| under ``d`` (closed form)."""
    if d.kind == NORMAL:
        return math.sqrt(2.0 / math.pi)
    nu = d.nu
    return float(
        2.0
        * math.sqrt(nu - 2.0)
        * math.exp(gammaln((nu + 1.0) / 2.0) - gammaln(nu / 2.0))
        / ((nu - 1.0) * math.sqrt(math.pi))
    )


def upper_tail_mean(d: Dist, alpha: float) -> float:
    """E[Z | Z > q] where q is the upper alpha-quantile of ``d``.

    Closed forms: phi(q)/alpha for the normal; for the unit-variance t
    the classical-t tail identity f(q)(nu + q^2)/(nu - 1) rescaled by
    the standardization factor.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError("tail probability must lie in (0, 1)")
    if d.kind == NORMAL:
        q = float(ndtri(1.0 - alpha))
        return float(math.exp(-0.5 * q * q) / _SQRT_2PI / alpha)
    nu = d.nu
    qc = float(stdtrit(nu, 1.0 - alpha))
    # classical t density at qc
    logc = float(
        gammaln((nu + 1.0) / 2.0) - gammaln(nu / 2.0) - 0.5 * math.log(nu * math.pi)
    )
    fc = math.exp(logc - 0.5 * (nu + 1.0) * math.log1p(qc * qc / nu))
    return float(d.scale * fc * (nu + qc * qc) / ((nu - 1.0) * alpha))


def gaussian_kernel(u):
    """Standard normal density used as the smoothing kernel."""
    return pdf(Dist.normal(), u)


def sample(d: Dist, n: int, seed: int, stream: int = 0) -> np.ndarray:
    """``n`` iid draws from ``d``, fully determined by (seed, stream)."""
    if n < 1:
        raise DomainError("sample size must be >= 1")
    rng = make_generator(seed, stream)
    if d.kind == NORMAL:
        return rng.standard_normal(n)
    return d.scale * rng.standard_t(d.nu, size=n)
