"""Hypothesis tests and false-discovery-rate control for result tables.

The Student-t tail probability is computed from the regularized incomplete
beta function (continued fraction, Lentz's method), targeting 1e-12
relative accuracy. No statistics library is involved, so the test-suite
reference values stay an independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

_ALTERNATIVES = ("greater", "less", "two-sided")


@dataclass(frozen=True)
class TestOutcome:
    statistic: float
    p: float
    df: int
    alternative: str
    p_adj: float | None = None  # filled by fdr_bh over a collection
    degenerate: bool = False  # zero-variance differences; p by limit convention


# ---------------------------------------------------------------------------
# Regularized incomplete beta and the t distribution


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 400):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            return h
    raise RuntimeError("betainc: continued fraction did not converge")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b), accurate to ~1e-12."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"betainc_reg: x={x} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_bt = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    bt = math.exp(log_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def t_sf(t: float, df: int) -> float:
    """Survival function P(T >= t) of Student's t with ``df`` degrees."""
    if df < 1:
        raise ValueError("t_sf: df must be >= 1")
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    x = df / (df + t * t)
    tail = 0.5 * betainc_reg(df / 2.0, 0.5, x)
    return tail if t >= 0 else 1.0 - tail


def _p_value(t: float, df: int, alternative: str) -> float:
    if alternative == "greater":
        return t_sf(t, df)
    if alternative == "less":
        return 1.0 - t_sf(t, df)
    return min(1.0, 2.0 * t_sf(abs(t), df))


# ---------------------------------------------------------------------------
# Tests


def _t_from_samples(diffs: np.ndarray, alternative: str) -> TestOutcome:
    if alternative not in _ALTERNATIVES:
        raise ValueError(f"alternative must be one of {_ALTERNATIVES}")
    n = diffs.size
    if n < 2:
        raise ValueError("t-test: need at least 2 samples")
    df = n - 1
    mean = float(diffs.mean())
    sd = float(diffs.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            # No evidence in any direction; by convention p = 1.
            return TestOutcome(statistic=0.0, p=1.0, df=df, alternative=alternative, degenerate=True)
        statistic = math.inf if mean > 0 else -math.inf
        if alternative == "two-sided":
            p = 0.0
        elif alternative == "greater":
            p = 0.0 if mean > 0 else 1.0
        else:
            p = 0.0 if mean < 0 else 1.0
        return TestOutcome(statistic=statistic, p=p, df=df, alternative=alternative, degenerate=True)
    statistic = mean / (sd / math.sqrt(n))
    return TestOutcome(statistic=statistic, p=_p_value(statistic, df, alternative), df=df, alternative=alternative)


def paired_ttest(a: Sequence[float], b: Sequence[float], alternative: str = "greater") -> TestOutcome:
    """Paired t-test on a - b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"paired_ttest: lengths {a.shape} and {b.shape} differ")
    return _t_from_samples(a - b, alternative)


def one_sample_ttest(x: Sequence[float], mu: float = 0.0, alternative: str = "greater") -> TestOutcome:
    """One-sample t-test of mean(x) against mu."""
    x = np.asarray(x, dtype=np.float64)
    return _t_from_samples(x - mu, alternative)


def fdr_bh(pvals: Sequence[float]) -> np.ndarray:
    """Benjamini-Hochberg adjusted p-values, in the input order.

    adj_(i) = min over j >= i of min(1, p_(j) * m / j) on the ascending
    order statistics; adjusted values never fall below the raw ones and
    never exceed 1.
    """
    p = np.asarray(pvals, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError("fdr_bh: expected a 1-d array")
    if ((p < 0) | (p > 1)).any() or not np.isfinite(p).all():
        raise ValueError("fdr_bh: p-values must lie in [0, 1]")
    m = p.size
    if m == 0:
        return p.copy()
    order = np.argsort(p, kind="stable")
    scaled = p[order] * m / np.arange(1, m + 1)
    adjusted = np.minimum(1.0, np.minimum.accumulate(scaled[::-1])[::-1])
    out = np.empty(m)
    out[order] = adjusted
    return out


def significant_mask(adjusted: Sequence[float], alpha: float = 0.05) -> np.ndarray:
    """Boolean mask of adjusted p-values at or below alpha."""
    return np.asarray(adjusted, dtype=np.float64) <= alpha
