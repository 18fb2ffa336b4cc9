"""Rank statistics: ROC AUC, Mann-Whitney U and the Wilcoxon signed-rank test.

Exact null distributions are obtained by counting (dynamic programming over
rank sums), which enumerates every rank assignment without materializing
them. Larger or tied samples fall back to a normal approximation with tie
corrected variance and a continuity correction.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr
from scipy.stats import rankdata

MWU_EXACT_MAX_TOTAL = 16
WILCOXON_EXACT_MAX_N = 12


class Alternative(str, enum.Enum):
    TWO_SIDED = "two_sided"
    LESS = "less"
    GREATER = "greater"


class TestMethod(str, enum.Enum):
    MANN_WHITNEY_U = "MannWhitneyU"
    WILCOXON_SIGNED_RANK = "WilcoxonSignedRank"


class UndefinedTestError(ValueError):
    """The test statistic has no null distribution for these inputs."""


@dataclass(frozen=True)
class TestReport:
    __test__ = False  # keep pytest from collecting this

    statistic: float
    p_value: float
    method: TestMethod
    alternative: Alternative
    n1: int
    n2: int
    exact: bool


def _sample(values, name):
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{name} contains non-finite values")
    return values


def _u_statistic(a, b):
    ranks = rankdata(np.concatenate([a, b]))
    n1 = a.size
    return float(ranks[:n1].sum() - n1 * (n1 + 1) / 2.0), ranks


def roc_auc(scores_pos, scores_neg):
    """P(pos > neg) + P(pos == neg) / 2, via midranks."""
    a = _sample(scores_pos, "scores_pos")
    b = _sample(scores_neg, "scores_neg")
    u, _ = _u_statistic(a, b)
    return u / (a.size * b.size)


def _tail_p(p_le, p_ge, alternative):
    if alternative is Alternative.LESS:
        p = p_le
    elif alternative is Alternative.GREATER:
        p = p_ge
    else:
        p = 2.0 * min(p_le, p_ge)
    return float(min(1.0, max(0.0, p)))


def _normal_p(stat, mean, var, alternative):
    if var <= 0.0:
        return 1.0
    sd = math.sqrt(var)
    # continuity-corrected tails
    p_ge = float(ndtr(-(stat - mean - 0.5) / sd))
    p_le = float(ndtr((stat - mean + 0.5) / sd))
    if alternative is Alternative.TWO_SIDED:
        z = max(abs(stat - mean) - 0.5, 0.0) / sd
        return float(min(1.0, 2.0 * ndtr(-z)))
    return _tail_p(p_le, p_ge, alternative)


def _mwu_counts(n1, n2):
    """Number of rank subsets of size n1 (out of n1 + n2) for each U value."""
    # f[k][u]: ways to place k ranks among the first m items giving U = u
    max_u = n1 * n2
    table = np.zeros((n1 + 1, max_u + 1), dtype=object)
    table[0, 0] = 1
    for m in range(1, n1 + n2 + 1):
        new = np.zeros_like(table)
        for k in range(0, min(m, n1) + 1):
            # item m belongs to the second sample: U unchanged
            if m - k <= n2:
                new[k] += table[k]
            # item m belongs to the first sample: it beats (m - k) seconds
            if k >= 1:
                beats = m - k
                if beats <= n2:
                    new[k, beats:] += table[k - 1, : max_u + 1 - beats]
        table = new
    return table[n1]


def _pick_method(method, exact_ok):
    if method not in ("auto", "exact", "normal"):
        raise ValueError(f"method must be 'auto', 'exact' or 'normal', got {method!r}")
    if method == "exact" and not exact_ok:
        raise ValueError("exact p-value not available for these inputs")
    return method == "exact" or (method == "auto" and exact_ok)


def mann_whitney_u(a, b, alternative=Alternative.TWO_SIDED, method="auto"):
    """Mann-Whitney U test; the statistic is U for sample ``a``.

    ``greater`` means ``a`` tends to be larger than ``b``. ``method="auto"``
    enumerates when the samples are small and tie-free; ``"exact"`` enumerates
    at any size (tie-free only) and ``"normal"`` always approximates.
    """
    alternative = Alternative(alternative)
    a = _sample(a, "a")
    b = _sample(b, "b")
    n1, n2 = a.size, b.size
    u, ranks = _u_statistic(a, b)
    has_ties = np.unique(ranks).size < ranks.size
    if method == "auto":
        exact = (n1 + n2) <= MWU_EXACT_MAX_TOTAL and not has_ties
    else:
        exact = _pick_method(method, not has_ties)
    if exact:
        counts = _mwu_counts(n1, n2)
        total = sum(counts)
        k = int(round(u))
        p_le = float(sum(counts[: k + 1]) / total)
        p_ge = float(sum(counts[k:]) / total)
        p = _tail_p(p_le, p_ge, alternative)
    else:
        n = n1 + n2
        _, tie_counts = np.unique(ranks, return_counts=True)
        tie_term = float(np.sum(tie_counts**3 - tie_counts)) / (n * (n - 1)) if n > 1 else 0.0
        var = n1 * n2 / 12.0 * ((n + 1) - tie_term)
        p = _normal_p(u, n1 * n2 / 2.0, var, alternative)
    return TestReport(u, p, TestMethod.MANN_WHITNEY_U, alternative, n1, n2, exact)


def _signed_rank_counts(doubled_ranks):
    """Count sign patterns for each value of twice the positive-rank sum."""
    total = int(sum(doubled_ranks))
    counts = np.zeros(total + 1, dtype=object)
    counts[0] = 1
    for r in doubled_ranks:
        r = int(r)
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    return counts


def wilcoxon_signed_rank(x, y, alternative=Alternative.TWO_SIDED, method="auto"):
    """Paired Wilcoxon signed-rank test on ``x - y``; zero differences dropped.

    The statistic is W+, the rank sum of the positive differences.
    ``greater`` means ``x`` tends to exceed ``y``. ``method`` works as in
    :func:`mann_whitney_u`; exact enumeration handles tied midranks here.
    """
    alternative = Alternative(alternative)
    x = _sample(x, "x")
    y = _sample(y, "y")
    if x.size != y.size:
        raise ValueError(f"paired samples differ in length: {x.size} vs {y.size}")
    if x.size < 2:
        raise ValueError("need at least two pairs")
    d = x - y
    d = d[d != 0.0]
    n = d.size
    if n < 2:
        raise UndefinedTestError(f"only {n} non-zero differences remain after dropping zeros")
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    exact = n <= WILCOXON_EXACT_MAX_N if method == "auto" else _pick_method(method, True)
    if exact:
        # midranks are multiples of 1/2; doubling makes them integers
        doubled = np.rint(2.0 * ranks).astype(int)
        counts = _signed_rank_counts(doubled)
        total = sum(counts)
        k = int(round(2.0 * w_plus))
        p_le = float(sum(counts[: k + 1]) / total)
        p_ge = float(sum(counts[k:]) / total)
        p = _tail_p(p_le, p_ge, alternative)
    else:
        _, tie_counts = np.unique(ranks, return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_counts**3 - tie_counts)) / 48.0
        p = _normal_p(w_plus, n * (n + 1) / 4.0, var, alternative)
    return TestReport(w_plus, p, TestMethod.WILCOXON_SIGNED_RANK, alternative, n, n, exact)
