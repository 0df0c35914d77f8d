import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holderlab.errors import DomainError, SeriesTruncationError
from holderlab.special import (
    SeriesConfig,
    brownian_ratio_f,
    gamma,
    gaussian_abs_moment,
    log_gamma,
    log_script_e,
    script_e,
)

# sqrt(Σ Γ(1/2)^n / Γ(n/2 + 1)) summed to 200 terms at 40 digits
SCRIPT_E_HALF_AT_ONE = 6.782280301593473
# log ℰ_{1/4}(2): Beta-product series at 40 digits (187685 terms), matched by the
# leading Mittag-Leffler asymptotic (4 Γ(1/4))^4 / 2 - log(1/4) / 2
LOG_SCRIPT_E_QUARTER_AT_TWO = 22118.103203329077
LONG_SERIES = SeriesConfig(max_terms=10**6)


def beta_product_script_e(r, x, dps=40):
    """sqrt(E_η(x²)) with η = 1 - r, E_η(z) = 1 + Σ_n z^n Π_{k<n} B(1-η, k(1-η)+1)."""
    with mp.workdps(dps):
        r = mp.mpf(r)
        z = mp.mpf(x) ** 2
        total, prod, n = mp.mpf(1), mp.mpf(1), 0
        while True:
            prod *= mp.beta(r, n * r + 1)
            n += 1
            term = z**n * prod
            total += term
            if term < mp.mpf(10) ** (-dps + 5) * total:
                return float(mp.sqrt(total))


@pytest.mark.parametrize("x, expected", [(1.0, 1.0), (0.5, math.sqrt(math.pi)), (6.0, 120.0), (0.1, 9.513507698668732)])
def test_gamma_values(x, expected):
    assert gamma(x) == pytest.approx(expected, rel=1e-13)


def test_gamma_against_stdlib_and_recurrence():
    xs = np.linspace(0.5, 20, 400)
    for x in xs:
        assert gamma(x) == pytest.approx(math.gamma(x), rel=1e-13)
        assert gamma(x + 1) == pytest.approx(x * gamma(x), rel=1e-12)
        assert log_gamma(x) == pytest.approx(math.lgamma(x), abs=1e-13)


@pytest.mark.parametrize("x", [0.0, -1.0, float("nan")])
def test_gamma_domain(x):
    with pytest.raises(DomainError):
        gamma(x)


def test_script_e_at_zero():
    for r in (0.1, 0.5, 1.0, 3.0):
        assert script_e(r, 0.0) == 1.0


def test_script_e_exponential_case():
    assert script_e(1.0, 1.0) == pytest.approx(1.6487212707001282, rel=1e-12)
    xs = np.linspace(0.0, 3.0, 301)
    dev = max(abs(script_e(1.0, x) / math.exp(x * x / 2) - 1) for x in xs)
    assert dev <= 1e-12


def test_script_e_half_golden():
    assert script_e(0.5, 1.0) == pytest.approx(SCRIPT_E_HALF_AT_ONE, rel=1e-13)


CELLS = [(r, x) for r in (0.25, 0.5, 1.0) for x in (0.5, 1.0, 2.0) if (r, x) != (0.25, 2.0)]


@pytest.mark.parametrize("r, x", CELLS)
def test_script_e_matches_beta_product(r, x):
    assert script_e(r, x) == pytest.approx(beta_product_script_e(r, x), rel=1e-10)
    assert log_script_e(r, x) == pytest.approx(math.log(script_e(r, x)), rel=1e-13)


def test_script_e_beyond_double_range():
    # ℰ_{1/4}(2) is about e^22118; only its log is representable
    with pytest.raises(OverflowError):
        script_e(0.25, 2.0, LONG_SERIES)
    with pytest.raises(SeriesTruncationError):
        log_script_e(0.25, 2.0)
    got = log_script_e(0.25, 2.0, LONG_SERIES)
    assert abs(got - LOG_SCRIPT_E_QUARTER_AT_TWO) <= 1e-10


def test_script_e_large_argument_uses_log_terms():
    # terms beyond Γ(171) need the log-space branch
    assert script_e(1.0, 12.0) == pytest.approx(math.exp(72.0), rel=1e-11)


def test_script_e_truncation_is_reported():
    with pytest.raises(SeriesTruncationError):
        script_e(0.5, 5.0, SeriesConfig(max_terms=3))


def test_script_e_domain():
    with pytest.raises(DomainError):
        script_e(0.0, 1.0)
    with pytest.raises(DomainError):
        script_e(1.0, -0.1)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.5, 2.0), st.floats(0.0, 3.0), st.floats(0.0, 0.5))
def test_script_e_monotone_in_x(r, x, dx):
    a, b = log_script_e(r, x), log_script_e(r, x + dx)
    assert b >= a - 1e-13 * max(1.0, abs(a))
    assert a >= 0.0


def test_log_script_e_exponential_case():
    for x in (0.0, 0.3, 5.0, 20.0, 40.0):
        assert log_script_e(1.0, x) == pytest.approx(x * x / 2, rel=1e-13, abs=1e-15)


@pytest.mark.parametrize("p, expected", [(2, 1.0), (4, 3 ** 0.25), (1, math.sqrt(2 / math.pi))])
def test_gaussian_abs_moment(p, expected):
    assert gaussian_abs_moment(p) == pytest.approx(expected, rel=1e-14)


def test_gaussian_abs_moment_branches_agree_and_increase():
    ps = np.linspace(1, 100, 500)
    vals = [gaussian_abs_moment(p) for p in ps]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    with mp.workdps(30):
        for p in (59.9, 60.1, 80.0):
            exact = (2 ** (mp.mpf(p) / 2) * mp.gamma((mp.mpf(p) + 1) / 2) / mp.sqrt(mp.pi)) ** (1 / mp.mpf(p))
            assert gaussian_abs_moment(p) == pytest.approx(float(exact), rel=1e-12)
    with pytest.raises(DomainError):
        gaussian_abs_moment(0.5)


def test_brownian_ratio_endpoints():
    assert brownian_ratio_f(0.0) == pytest.approx(1 / math.sqrt(2), rel=1e-15)
    assert brownian_ratio_f(0.5) == 1.0
    closed = 0.25**0.25 / (2**0.25 * 0.75**0.75)
    assert brownian_ratio_f(0.25) == pytest.approx(closed, rel=1e-14)


def test_brownian_ratio_is_max_of_g():
    # f(α)² = max over x in (0, 1] of (2x)^(1-2α) (1-x), attained at x = (1/2 - α)/(1 - α)
    for a in (0.0, 0.1, 0.25, 0.4):
        xs = np.linspace(1e-6, 1, 2_000_001)
        g = (2 * xs) ** (1 - 2 * a) * (1 - xs)
        assert g.max() == pytest.approx(brownian_ratio_f(a) ** 2, rel=1e-9)


def test_brownian_ratio_monotone_and_bounded():
    vals = [brownian_ratio_f(a) for a in np.linspace(0, 0.5, 1001)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert 1 / math.sqrt(2) - 1e-15 <= min(vals) and max(vals) <= 1.0
    with pytest.raises(DomainError):
        brownian_ratio_f(0.6)
