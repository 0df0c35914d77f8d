"""Scalar special functions: Γ, the ℰ_r series, Gaussian absolute moments
and the Brownian interpolation ratio f(α)."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, SeriesTruncationError

# Lanczos approximation, g = 7, nine coefficients.
LANCZOS_G = 7.0
LANCZOS_COEFFS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _lanczos_sum(z: float) -> float:
    # z is the shifted argument x - 1
    a = LANCZOS_COEFFS[0]
    for i in range(1, len(LANCZOS_COEFFS)):
        a += LANCZOS_COEFFS[i] / (z + i)
    return a


def gamma(x: float) -> float:
    """Γ(x) for x > 0 (relative error around 1e-15)."""
    x = float(x)
    if not x > 0 or math.isnan(x):
        raise DomainError(f"gamma is defined here for x > 0 only, got {x!r}")
    if x < 0.5:
        return gamma(x + 1.0) / x
    if x > 171.7:
        return math.inf
    z = x - 1.0
    t = z + LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * t ** (z + 0.5) * math.exp(-t) * _lanczos_sum(z)


def log_gamma(x: float) -> float:
    """log Γ(x) for x > 0."""
    x = float(x)
    if not x > 0:
        raise DomainError(f"log_gamma is defined here for x > 0 only, got {x!r}")
    if x < 0.5:
        return log_gamma(x + 1.0) - math.log(x)
    z = x - 1.0
    t = z + LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * math.log(t) - t + math.log(_lanczos_sum(z))


@dataclass(frozen=True)
class SeriesConfig:
    rel_tol: float = 1e-14
    max_terms: int = 10_000

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise DomainError("rel_tol must be positive")
        if self.max_terms < 1:
            raise DomainError("max_terms must be at least 1")


DEFAULT_SERIES = SeriesConfig()


def _script_e_term(n: int, r: float, x: float, g_r: float, log_g_r: float) -> float:
    if x == 0.0:
        return 1.0 if n == 0 else 0.0
    arg = n * r + 1.0
    if arg < 170.0:
        with_overflow = False
        try:
            num = x ** (2 * n) * g_r**n
            with_overflow = math.isinf(num)
        except OverflowError:
            with_overflow = True
        if not with_overflow:
            return num / gamma(arg)
    return math.exp(2 * n * math.log(x) + n * log_g_r - log_gamma(arg))


def script_e_squared(r: float, x: float, cfg: SeriesConfig = DEFAULT_SERIES) -> float:
    """Σ_{n>=0} x^{2n} Γ(r)^n / Γ(nr + 1), i.e. ℰ_r(x)²."""
    r, x = float(r), float(x)
    if not r > 0:
        raise DomainError(f"r must be positive, got {r!r}")
    if not x >= 0:
        raise DomainError(f"x must be nonnegative, got {x!r}")
    if x == 0.0:
        return 1.0
    g_r = gamma(r)
    log_g_r = math.log(g_r)
    total = 1.0
    prev = 1.0
    for n in range(1, cfg.max_terms + 1):
        term = _script_e_term(n, r, x, g_r, log_g_r)
        total += term
        if math.isinf(total):
            raise OverflowError(f"script_e({r}, {x})^2 exceeds the double range")
        if term < cfg.rel_tol * total and term <= prev:
            return total
        prev = term
    raise SeriesTruncationError(
        f"script_e({r}, {x}) did not converge within {cfg.max_terms} terms"
    )


def log_script_e(r: float, x: float, cfg: SeriesConfig = DEFAULT_SERIES) -> float:
    """log ℰ_r(x), summed in log space so that it never overflows.

    Uses the same truncation rule as :func:`script_e_squared`: stop at the
    first term below ``rel_tol`` times the partial sum that is not larger
    than its predecessor.
    """
    r, x = float(r), float(x)
    if not r > 0:
        raise DomainError(f"r must be positive, got {r!r}")
    if not x >= 0:
        raise DomainError(f"x must be nonnegative, got {x!r}")
    if x == 0.0:
        return 0.0
    c = 2.0 * math.log(x) + math.lgamma(r)
    log_tol = math.log(cfg.rel_tol)
    # running log-sum-exp: total = exp(m) * acc
    m, acc, prev = 0.0, 1.0, 0.0
    for n in range(1, cfg.max_terms + 1):
        ln = n * c - math.lgamma(n * r + 1.0)
        if ln > m:
            acc = acc * math.exp(m - ln) + 1.0
            m = ln
        else:
            acc += math.exp(ln - m)
        if ln < log_tol + m + math.log(acc) and ln <= prev:
            return 0.5 * (m + math.log(acc))
        prev = ln
    raise SeriesTruncationError(
        f"script_e({r}, {x}) did not converge within {cfg.max_terms} terms"
    )


def script_e(r: float, x: float, cfg: SeriesConfig = DEFAULT_SERIES) -> float:
    """ℰ_r(x) = sqrt(Σ_{n>=0} x^{2n} Γ(r)^n / Γ(nr + 1)); always >= 1.

    Raises OverflowError when ℰ_r(x) exceeds the double range; use
    :func:`log_script_e` there.
    """
    try:
        return math.sqrt(script_e_squared(r, x, cfg))
    except OverflowError:
        pass
    try:
        return math.exp(log_script_e(r, x, cfg))
    except OverflowError:
        raise OverflowError(f"script_e({r}, {x}) exceeds the double range; use log_script_e") from None


def gaussian_abs_moment(p: float) -> float:
    """(E|Z|^p)^{1/p} for a standard normal Z."""
    p = float(p)
    if not p >= 1:
        raise DomainError(f"p must be at least 1, got {p!r}")
    if p <= 60:
        moment = 2.0 ** (0.5 * p) * gamma(0.5 * (p + 1.0)) / math.sqrt(math.pi)
        return moment ** (1.0 / p)
    log_moment = 0.5 * p * math.log(2.0) + log_gamma(0.5 * (p + 1.0)) - 0.5 * math.log(math.pi)
    return math.exp(log_moment / p)


def brownian_ratio_f(alpha: float) -> float:
    """(1/2 - α)^(1/2 - α) / (2^α (1 - α)^(1 - α)) on [0, 1/2], with 0^0 = 1.

    Increases from 1/√2 at α = 0 to 1 at α = 1/2.
    """
    a = float(alpha)
    if not (0.0 <= a <= 0.5):
        raise DomainError(f"alpha must lie in [0, 1/2], got {a!r}")
    h = 0.5 - a
    log_num = h * math.log(h) if h > 0 else 0.0
    return math.exp(log_num - a * math.log(2.0) - (1.0 - a) * math.log(1.0 - a))
