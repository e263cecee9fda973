import math

import mpmath
import numpy as np
import pytest
from scipy.integrate import quad

from riskcast.distributions import (
    Dist,
    abs_moment,
    cdf,
    gaussian_kernel,
    pdf,
    quantile,
    sample,
    upper_tail_mean,
)
from riskcast.errors import DomainError

NORMAL = Dist.normal()
T5 = Dist.standardized_t(5.0)
T6 = Dist.standardized_t(6.0)


def mp_normal_cdf(x):
    # independent series/continued-fraction evaluation of the integral
    return float(mpmath.ncdf(x))


def bisect_quantile(d, p, lo=-40.0, hi=40.0):
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if cdf(d, mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_pdf_peak_value():
    assert abs(pdf(NORMAL, 0.0) - 0.3989422804) < 1e-9
    assert abs(pdf(NORMAL, 0.0) - 1.0 / math.sqrt(2 * math.pi)) < 1e-15


@pytest.mark.parametrize("d", [NORMAL, T5])
def test_pdf_symmetric(d):
    xs = np.linspace(0.1, 6.0, 25)
    assert np.allclose(pdf(d, xs), pdf(d, -xs), rtol=0, atol=0)


@pytest.mark.parametrize("d", [NORMAL, T5, T6])
def test_pdf_integrates_to_one(d):
    total, err = quad(lambda x: pdf(d, x), -30, 30, limit=200)
    assert abs(total - 1.0) < 1e-6


@pytest.mark.parametrize("d", [NORMAL, T5])
def test_cdf_at_zero(d):
    assert cdf(d, 0.0) == pytest.approx(0.5, abs=1e-14)


def test_cdf_against_series_oracle():
    assert abs(cdf(NORMAL, 1.959963985) - 0.975) < 1e-8
    for x in (-3.0, -1.0, 0.5, 2.5, 4.0):
        assert abs(cdf(NORMAL, x) - mp_normal_cdf(x)) < 1e-12


def test_cdf_monotone():
    xs = np.linspace(-9, 9, 400)
    for d in (NORMAL, T5):
        vals = cdf(d, xs)
        assert np.all(np.diff(vals) >= 0)


def test_quantile_median_and_tail():
    assert quantile(NORMAL, 0.5) == 0.0
    assert abs(quantile(NORMAL, 0.95) - 1.644853627) < 1e-8
    assert abs(quantile(NORMAL, 0.95) - bisect_quantile(NORMAL, 0.95)) < 1e-9


def test_quantile_domain():
    for bad in (0.0, 1.0, -0.2, 1.4):
        with pytest.raises(DomainError):
            quantile(NORMAL, bad)


def test_quantile_large_nu_matches_normal():
    big = Dist.standardized_t(1e6)
    for p in (0.9, 0.95, 0.99):
        assert abs(quantile(big, p) - quantile(NORMAL, p)) < 1e-3


@pytest.mark.parametrize("d", [NORMAL, T5])
def test_quantile_cdf_consistency(d):
    for p in (1e-6, 0.01, 0.3, 0.5, 0.77, 0.99, 1 - 1e-6):
        assert abs(cdf(d, quantile(d, p)) - p) < 1e-10


@pytest.mark.parametrize("d", [NORMAL, T5])
def test_roundtrip_identity(d):
    # the lower tail keeps full relative precision in the probability;
    # the upper tail follows by the distributions' exact symmetry, which
    # is asserted separately (1 - p saturates in float64 above ~5.7
    # sigma, so the literal upper-tail composition is not invertible)
    xs = np.linspace(-8.0, 0.0, 1601)
    err = np.abs(quantile(d, cdf(d, xs)) - xs)
    assert np.max(err) < 1e-9


@pytest.mark.parametrize("d", [NORMAL, T5])
def test_symmetry_identities(d):
    xs = np.linspace(0.0, 8.0, 65)
    assert np.max(np.abs(cdf(d, xs) + cdf(d, -xs) - 1.0)) < 1e-15
    ps = np.linspace(1e-9, 0.5, 101)
    q = quantile(d, ps)
    assert np.max(np.abs(q + quantile(d, 1.0 - ps)) / (1.0 + np.abs(q))) < 1e-8


@pytest.mark.parametrize("d", [NORMAL, T5])
def test_cdf_derivative_matches_pdf(d):
    h = 1e-6
    xs = np.linspace(-6, 6, 49)
    fd = (cdf(d, xs + h) - cdf(d, xs - h)) / (2 * h)
    assert np.max(np.abs(fd - pdf(d, xs))) < 1e-6


def test_abs_moment_normal():
    assert abs(abs_moment(NORMAL) - 0.7978845608) < 1e-9
    assert abs(abs_moment(NORMAL) - math.sqrt(2 / math.pi)) < 1e-15


def test_abs_moment_large_nu_limit():
    assert abs(abs_moment(Dist.standardized_t(1e6)) - math.sqrt(2 / math.pi)) < 1e-5


def test_abs_moment_monte_carlo():
    draws = np.abs(sample(T6, 10**6, seed=7))
    se = draws.std(ddof=1) / math.sqrt(draws.size)
    assert abs(draws.mean() - abs_moment(T6)) < 3 * se


def test_gaussian_kernel_shape():
    assert abs(gaussian_kernel(0.0) - 0.3989422804) < 1e-9
    us = np.linspace(0.1, 5, 30)
    assert np.allclose(gaussian_kernel(us), gaussian_kernel(-us))
    vals = gaussian_kernel(np.linspace(0, 5, 60))
    assert np.all(np.diff(vals) < 0)


def test_sample_deterministic():
    a = sample(T5, 1000, seed=11)
    b = sample(T5, 1000, seed=11)
    assert np.array_equal(a, b)
    c = sample(T5, 1000, seed=12)
    assert not np.array_equal(a, c)


def test_sample_moments():
    z = sample(Dist.standardized_t(6.0), 10**6, seed=3)
    assert abs(z.var(ddof=1) - 1.0) < 0.01
    g = sample(NORMAL, 10**6, seed=4)
    assert abs(g.mean()) < 0.004
    assert abs(g.var(ddof=1) - 1.0) < 0.01


def test_upper_tail_mean_normal_closed_form():
    q = quantile(NORMAL, 0.95)
    assert abs(upper_tail_mean(NORMAL, 0.05) - pdf(NORMAL, q) / 0.05) < 1e-12


def test_upper_tail_mean_monte_carlo():
    z = sample(T6, 2 * 10**6, seed=9)
    q = quantile(T6, 0.95)
    tail = z[z > q]
    se = tail.std(ddof=1) / math.sqrt(tail.size)
    assert abs(tail.mean() - upper_tail_mean(T6, 0.05)) < 4 * se


def test_standardized_t_requires_valid_nu():
    with pytest.raises(DomainError):
        Dist.standardized_t(2.0)
    with pytest.raises(DomainError):
        Dist("weird")
