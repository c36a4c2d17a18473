"""Numerically stable special functions for the closed-form expected norm.

Log-gamma ratios and the confluent hypergeometric function 1F1 with its
derivative, in the regime the expected-norm formula needs: first parameter
a in [-3, 0], argument x <= 0 (and the transformed positive-argument series).
"""

from __future__ import annotations

import math

from scipy.special import gammaln

__all__ = [
    "ConvergenceError",
    "log_gamma_ratio",
    "kummer_1f1",
    "kummer_1f1_derivative",
]

_REL_TOL = 1e-15
_MAX_TERMS = 10_000
# e^x underflows past ~-745; hand over to the asymptotic limit a bit early.
_ASYMPTOTIC_CUTOFF = -700.0


class ConvergenceError(RuntimeError):
    """Raised when a series does not converge within the term budget."""


def log_gamma_ratio(num: float, den: float) -> float:
    """Return ln Gamma(num) - ln Gamma(den) for positive arguments.

    Works in log space so ratios like Gamma(D/2 + 1/2) / Gamma(D/2) stay
    finite for large D, where Gamma itself overflows double precision.
    """
    if num <= 0.0 or den <= 0.0:
        raise ValueError(f"log_gamma_ratio needs positive arguments, got ({num}, {den})")
    return float(gammaln(num) - gammaln(den))


def _series_1f1(a: float, b: float, x: float) -> float:
    # Plain power series. Consecutive terms are related by
    # t_{k+1} = t_k * (a+k)/(b+k) * x/(k+1), so no Pochhammer overflow.
    term = 1.0
    total = 1.0
    for k in range(_MAX_TERMS):
        term *= (a + k) / (b + k) * x / (k + 1)
        if term == 0.0:
            # a hit a non-positive integer: the series terminates exactly
            return total
        total += term
        if abs(term) < _REL_TOL * abs(total):
            return total
    raise ConvergenceError(f"1F1 series did not converge for a={a}, b={b}, x={x}")


def _asymptotic_1f1(a: float, b: float, x: float) -> tuple[float, bool]:
    # Large negative argument expansion
    #   1F1(a, b, x) ~ Gamma(b)/Gamma(b-a) * (-x)^(-a)
    #                  * sum_s (a)_s (a-b+1)_s / (s! (-x)^s),
    # summed to its smallest term. The flag reports whether that smallest
    # term is negligible; if not, the expansion is unusable here (|x| not
    # large against b^2) and the caller must use the log-space series.
    y = -x
    term = 1.0
    total = 1.0
    smallest = 1.0
    for k in range(200):
        term *= (a + k) * (a - b + 1.0 + k) / ((k + 1.0) * y)
        if abs(term) >= smallest:
            break
        total += term
        smallest = abs(term)
        if smallest < _REL_TOL * abs(total):
            break
    value = math.exp(log_gamma_ratio(b, b - a) - a * math.log(y)) * total
    return value, smallest <= 1e-13 * abs(total)


def _log_series_1f1(a: float, b: float, x: float) -> float:
    # e^x * 1F1(b-a, b, -x) for x < 0, where the transformed series has
    # positive terms but a peak near e^(-x) that overflows doubles; the
    # running sum is rescaled and the exponent carried separately.
    y = -x
    aa = b - a
    term = 1.0
    total = 1.0
    shift = 0.0
    budget = _MAX_TERMS + int(3.0 * y)
    for k in range(budget):
        term *= (aa + k) / (b + k) * y / (k + 1)
        total += term
        if term < _REL_TOL * total:
            return math.exp(math.log(total) + shift + x)
        if total > 1e280:
            total *= 1e-280
            term *= 1e-280
            shift += 280.0 * math.log(10.0)
    raise ConvergenceError(f"1F1 series did not converge for a={a}, b={b}, x={x}")


def kummer_1f1(a: float, b: float, x: float) -> float:
    """Confluent hypergeometric function of the first kind, 1F1(a; b; x).

    Parameters
    ----------
    a, b, x : float
        Series parameters; b must be positive. Accuracy is guaranteed for
        a in [-3, 0] with x <= 0, the regime of the expected-norm formula.

    Notes
    -----
    Negative arguments are always routed through the transformation
    1F1(a, b, x) = e^x 1F1(b - a, b, -x), whose series has positive terms
    when b - a > 0. The raw alternating series loses all precision once
    -x grows past a few tens. The series stops when the next term falls
    below 1e-15 of the partial sum. Past x = -700 a naive e^x underflows,
    so the large-argument expansion takes over, falling back to a log-space
    rescaled series in the corner where |x| is not large against b^2 and
    the expansion diverges too early.
    """
    if b <= 0.0:
        raise ValueError(f"kummer_1f1 needs b > 0, got b={b}")
    if x == 0.0:
        return 1.0
    if x < _ASYMPTOTIC_CUTOFF:
        value, accurate = _asymptotic_1f1(a, b, x)
        if accurate:
            return value
        return _log_series_1f1(a, b, x)
    if x < 0.0:
        return math.exp(x) * _series_1f1(b - a, b, -x)
    return _series_1f1(a, b, x)


def kummer_1f1_derivative(a: float, b: float, x: float) -> float:
    """Derivative of 1F1 in its argument: (a/b) * 1F1(a + 1, b + 1, x)."""
    return (a / b) * kummer_1f1(a + 1.0, b + 1.0, x)
