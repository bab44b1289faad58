"""Self-contained statistics kernel shared by every analysis module.

Implements the four hypothesis tests used across the bias dimensions
(chi-square on 2x2 tables, Wilcoxon rank-sum, two-sample
Kolmogorov-Smirnov, Spearman rank correlation) plus percentile
confidence envelopes for Monte Carlo simulations.

The kernel is deliberately dependency-free: the special functions it
needs (log-gamma, the regularized incomplete gamma and beta functions,
the Kolmogorov survival function) are implemented here with a relative
accuracy target of 1e-8.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

CHI_SQUARE = "chi_square"
WILCOXON = "wilcoxon"
KS = "ks"
SPEARMAN = "spearman"


class StatsError(ValueError):
    """Raised when a test's preconditions are violated."""


class SmallSampleWarning(UserWarning):
    """Emitted when an asymptotic p-value is unreliable at the given n."""


@dataclass(frozen=True)
class TestResult:
    """Outcome of a two-sample or association test.

    direction is +1, -1 or 0 and follows each test's documented sign
    convention (for the two-sample tests: +1 means the first sample is
    shifted toward larger values).
    """

    statistic: float
    p_value: float
    direction: int
    method: str


@dataclass(frozen=True)
class MonteCarloEnvelope:
    """Mean and 95% percentile confidence interval of simulated values."""

    mean: float
    ci_low: float
    ci_high: float
    n_runs: int
    seed: int

    def contains(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high


# ---------------------------------------------------------------------------
# Special functions
# ---------------------------------------------------------------------------

# Lanczos approximation, g=7, 9 terms.  Relative error below 1e-13 for
# positive arguments, comfortably past the 1e-8 kernel target.
_LANCZOS = (
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

_MAX_ITER = 1000
_EPS = 1e-15
_TINY = 1e-300


def log_gamma(x: float) -> float:
    """Natural log of the gamma function for x > 0."""
    if x <= 0.0:
        raise StatsError(f"log_gamma requires x > 0, got {x}")
    if x < 0.5:
        # reflection keeps the series accurate near zero
        return math.log(math.pi / math.sin(math.pi * x)) - log_gamma(1.0 - x)
    x -= 1.0
    acc = _LANCZOS[0]
    for i in range(1, len(_LANCZOS)):
        acc += _LANCZOS[i] / (x + i)
    t = x + 7.5
    return 0.5 * math.log(2.0 * math.pi) + (x + 0.5) * math.log(t) - t + math.log(acc)


def _gamma_p_series(s: float, x: float) -> float:
    """Lower regularized incomplete gamma P(s,x) by power series (x < s+1)."""
    term = 1.0 / s
    total = term
    a = s
    for _ in range(_MAX_ITER):
        a += 1.0
        term *= x / a
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + s * math.log(x) - log_gamma(s))

def _gamma_q_contfrac(s: float, x: float) -> float:
    """Upper regularized incomplete gamma Q(s,x) by continued fraction (x >= s+1)."""
    # modified Lentz algorithm
    b = x + 1.0 - s
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-x + s * math.log(x) - log_gamma(s))


def reg_gamma_q(s: float, x: float) -> float:
    """Regularized upper incomplete gamma function Q(s, x) = Gamma(s,x)/Gamma(s)."""
    if s <= 0.0:
        raise StatsError(f"reg_gamma_q requires s > 0, got {s}")
    if x < 0.0:
        raise StatsError(f"reg_gamma_q requires x >= 0, got {x}")
    if x == 0.0:
        return 1.0
    if x < s + 1.0:
        return min(1.0, max(0.0, 1.0 - _gamma_p_series(s, x)))
    return min(1.0, max(0.0, _gamma_q_contfrac(s, x)))


def _beta_contfrac(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h


def reg_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0.0 or b <= 0.0:
        raise StatsError("reg_beta requires a, b > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    front = math.exp(
        log_gamma(a + b) - log_gamma(a) - log_gamma(b)
        + a * math.log(x) + b * math.log(1.0 - x)
    )
    if x < (a + 1.0) / (a + b + 2.0):
        return min(1.0, max(0.0, front * _beta_contfrac(a, b, x) / a))
    return min(1.0, max(0.0, 1.0 - front * _beta_contfrac(b, a, 1.0 - x) / b))


def kolmogorov_sf(lam: float) -> float:
    """Survival function of the Kolmogorov distribution, 2*sum (-1)^(j-1) exp(-2 j^2 lam^2)."""
    if lam <= 0.0:
        return 1.0
    total = 0.0
    sign = 1.0
    for j in range(1, _MAX_ITER):
        term = math.exp(-2.0 * j * j * lam * lam)
        total += sign * term
        if term < _EPS:
            break
        sign = -sign
    return min(1.0, max(0.0, 2.0 * total))


def student_t_sf(t: float, df: float) -> float:
    """P(T >= t) for Student's t with df degrees of freedom, t >= 0."""
    if df <= 0.0:
        raise StatsError("student_t_sf requires df > 0")
    return 0.5 * reg_beta(df / 2.0, 0.5, df / (df + t * t))


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _sign(x: float, tol: float = 0.0) -> int:
    if x > tol:
        return 1
    if x < -tol:
        return -1
    return 0


def _midranks(values: list[float]) -> list[float]:
    """Ranks 1..n with ties receiving the average of their rank span."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


# ---------------------------------------------------------------------------
# Tests
# ---------------------------------------------------------------------------

def chi_square_2x2(
    a: float, b: float, c: float, d: float, yates: bool = False
) -> TestResult:
    """Pearson chi-square test of independence on the 2x2 table [[a,b],[c,d]].

    One degree of freedom; the p-value comes from the regularized upper
    incomplete gamma function.  direction is the sign of the difference
    in first-column proportions between row 1 and row 2 (for a
    (covered, uncovered) x group layout with the minority group in row
    1, +1 means the minority is covered at the higher rate).

    Yates' continuity correction is off by default and available via
    the flag.
    """
    cells = (a, b, c, d)
    if any(v < 0 for v in cells):
        raise StatsError("counts must be non-negative")
    r1, r2 = a + b, c + d
    c1, c2 = a + c, b + d
    n = r1 + r2
    if min(r1, r2, c1, c2) <= 0:
        raise StatsError("degenerate table: a row or column sums to zero")
    stat = 0.0
    for obs, row, col in ((a, r1, c1), (b, r1, c2), (c, r2, c1), (d, r2, c2)):
        expected = row * col / n
        diff = abs(obs - expected)
        if yates:
            diff = max(0.0, diff - 0.5)
        stat += diff * diff / expected
    p = reg_gamma_q(0.5, stat / 2.0)
    direction = _sign(a / r1 - c / r2, tol=1e-15)
    return TestResult(stat, p, direction, CHI_SQUARE)


def wilcoxon_rank_sum(x: list[float], y: list[float]) -> TestResult:
    """Two-tailed Wilcoxon rank-sum test with midranks for ties.

    The statistic is the rank sum of x over the pooled sample.  The
    p-value uses the normal approximation with tie-corrected variance
    and a continuity correction.  direction is the sign of the rank
    shift of x relative to y (+1: x tends larger).
    """
    n1, n2 = len(x), len(y)
    if n1 < 1 or n2 < 1:
        raise StatsError("both samples must be non-empty")
    pooled = list(x) + list(y)
    ranks = _midranks(pooled)
    w = math.fsum(ranks[:n1])
    big_n = n1 + n2
    expected = n1 * (big_n + 1) / 2.0

    # tie correction: sum over tie groups of (t^3 - t)
    tie_sum = 0.0
    sorted_vals = sorted(pooled)
    i = 0
    while i < big_n:
        j = i
        while j + 1 < big_n and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        t = j - i + 1
        if t > 1:
            tie_sum += t * t * t - t
        i = j + 1
    if big_n > 1:
        var = n1 * n2 / 12.0 * ((big_n + 1) - tie_sum / (big_n * (big_n - 1)))
    else:
        var = 0.0

    shift = w - expected
    direction = _sign(shift, tol=1e-9)
    if var <= 0.0:
        # every pooled value identical: no evidence either way
        return TestResult(w, 1.0, 0, WILCOXON)
    z = max(0.0, abs(shift) - 0.5) / math.sqrt(var)
    p = min(1.0, 2.0 * _normal_sf(z))
    return TestResult(w, p, direction, WILCOXON)


def ks_two_sample(x: list[float], y: list[float]) -> TestResult:
    """Two-sample Kolmogorov-Smirnov test.

    D = sup |F_x - F_y| over the pooled support; the p-value evaluates
    the asymptotic Kolmogorov distribution at sqrt(n*m/(n+m)) * D.
    direction is the sign of (F_y - F_x) at the largest gap, so +1
    means x sits to the right of y there.
    """
    n1, n2 = len(x), len(y)
    if n1 < 1 or n2 < 1:
        raise StatsError("both samples must be non-empty")
    xs = sorted(x)
    ys = sorted(y)
    d = 0.0
    signed_at_max = 0.0
    i = j = 0
    while i < n1 or j < n2:
        if j >= n2 or (i < n1 and xs[i] <= ys[j]):
            v = xs[i]
        else:
            v = ys[j]
        while i < n1 and xs[i] <= v:
            i += 1
        while j < n2 and ys[j] <= v:
            j += 1
        gap = j / n2 - i / n1  # F_y - F_x after the step at v
        if abs(gap) > d:
            d = abs(gap)
            signed_at_max = gap
    if d == 0.0:
        return TestResult(0.0, 1.0, 0, KS)
    effective = n1 * n2 / (n1 + n2)
    p = kolmogorov_sf(math.sqrt(effective) * d)
    return TestResult(d, p, _sign(signed_at_max), KS)


def spearman(x: list[float], y: list[float]) -> TestResult:
    """Spearman rank correlation: Pearson correlation of midranks.

    The p-value uses the t approximation with n-2 degrees of freedom;
    a SmallSampleWarning flags it as unreliable for n < 10.
    """
    n = len(x)
    if n != len(y) or n < 2:
        raise StatsError("inputs must have equal length >= 2")
    rx = _midranks(list(x))
    ry = _midranks(list(y))
    mean = (n + 1) / 2.0
    sxx = math.fsum((r - mean) ** 2 for r in rx)
    syy = math.fsum((r - mean) ** 2 for r in ry)
    if sxx <= 0.0 or syy <= 0.0:
        raise StatsError("no rank variation in input")
    sxy = math.fsum((a - mean) * (b - mean) for a, b in zip(rx, ry))
    rho = max(-1.0, min(1.0, sxy / math.sqrt(sxx * syy)))
    if n < 10:
        warnings.warn(
            f"spearman p-value is unreliable for n={n} < 10",
            SmallSampleWarning,
            stacklevel=2,
        )
    if abs(rho) >= 1.0:
        p = 0.0
    else:
        t = abs(rho) * math.sqrt((n - 2) / (1.0 - rho * rho))
        p = min(1.0, 2.0 * student_t_sf(t, n - 2))
    return TestResult(rho, p, _sign(rho, tol=1e-15), SPEARMAN)


def envelope(samples: list[float], seed: int, n_runs: int) -> MonteCarloEnvelope:
    """Mean and 95% percentile CI of Monte Carlo samples.

    Percentiles interpolate linearly between order statistics at
    h = (n-1)*p.  Requires exactly n_runs samples with n_runs >= 100;
    fewer runs make the interval ends too noisy to report.
    """
    if n_runs < 100:
        raise StatsError(f"n_runs={n_runs} < 100: confidence interval unreliable")
    if len(samples) != n_runs:
        raise StatsError(f"expected {n_runs} samples, got {len(samples)}")
    ordered = sorted(samples)

    def quantile(p: float) -> float:
        h = (n_runs - 1) * p
        lo = math.floor(h)
        frac = h - lo
        if lo + 1 >= n_runs:
            return ordered[-1]
        return ordered[lo] * (1.0 - frac) + ordered[lo + 1] * frac

    mean = math.fsum(ordered) / n_runs
    return MonteCarloEnvelope(mean, quantile(0.025), quantile(0.975), n_runs, seed)
