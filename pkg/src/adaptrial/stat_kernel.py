"""Distribution and rank-statistic primitives shared by every analysis path.

Everything here is pure: plain floats/arrays in, plain floats/arrays out.
The two-sample machinery follows the convention that *smaller outcomes are
better*, so one-sided p-values are small when the treatment sample is
stochastically smaller than control, and a concordance above 0.5 means
treatment benefit.
"""
from __future__ import annotations

from math import comb

import numpy as np
from scipy.stats import norm

# p-values are clamped away from 0/1 before any inverse-normal transform so
# downstream z-scores stay finite.
P_EPS = 1e-15

# Enumerate the exact rank distribution when the pooled sample is this small;
# use the tie-corrected normal approximation above it.
EXACT_ENUMERATION_LIMIT = 20

# Variance floor for degenerate concordance estimates (theta equal to 0 or 1).
VAR_FLOOR = 1e-12

# Preplanned inverse-normal stage weights of the reference design: stage 1
# carries 120 of 200 subjects, so w1^2 = 0.6 and w2^2 = 0.4.
DEFAULT_W1 = float(np.sqrt(0.6))
DEFAULT_W2 = float(np.sqrt(0.4))


def clamp_pvalue(p):
    """Clamp a p-value (scalar or array) into the open unit interval."""
    return np.clip(p, P_EPS, 1.0 - P_EPS)


def norm_cdf(z):
    """Standard normal CDF."""
    return norm.cdf(z)


def norm_quantile(p):
    """Standard normal quantile (inverse CDF).

    Raises ValueError outside (0, 1); the round trip with norm_cdf is exact
    to double-precision information limits (~1e-10 relative up to |z| of
    about 5; beyond that the CDF value itself no longer carries the digits).
    """
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr <= 0.0) | (p_arr >= 1.0)):
        raise ValueError("quantile argument must lie strictly inside (0, 1)")
    out = norm.ppf(p_arr)
    return float(out) if np.isscalar(p) or p_arr.ndim == 0 else out


def _validate_weights(w1: float, w2: float) -> None:
    if w1 < 0.0 or w2 < 0.0:
        raise ValueError("stage weights must be nonnegative")
    if abs(w1 * w1 + w2 * w2 - 1.0) > 1e-8:
        raise ValueError("stage weights must satisfy w1^2 + w2^2 = 1")


def combine_pvalue(p1, p2, w1: float = DEFAULT_W1, w2: float = DEFAULT_W2):
    """Weighted inverse-normal combination of two independent stage p-values.

    Returns 1 - Phi(w1 * Phi^{-1}(1-p1) + w2 * Phi^{-1}(1-p2)). With one
    weight equal to zero the other stage's p-value is returned unchanged
    (up to clamping).
    """
    _validate_weights(w1, w2)
    z1 = norm.ppf(1.0 - clamp_pvalue(np.asarray(p1, dtype=float)))
    z2 = norm.ppf(1.0 - clamp_pvalue(np.asarray(p2, dtype=float)))
    out = norm.sf(w1 * z1 + w2 * z2)
    return float(out) if out.ndim == 0 else out


def partial_conditional_error(p1, gamma: float, w1: float = DEFAULT_W1,
                              w2: float = DEFAULT_W2):
    """Probability that the level-``gamma`` combination test rejects, given
    the first-stage p-value ``p1`` and a still-uniform second stage.

    This is the budget the first stage hands to the second:
    ``1 - Phi((Phi^{-1}(1-gamma) - w1 * Phi^{-1}(1-p1)) / w2)``.
    Vectorizes over ``p1``.
    """
    _validate_weights(w1, w2)
    if w2 <= 0.0:
        raise ValueError("second-stage weight must be positive")
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie strictly inside (0, 1)")
    z1 = norm.ppf(1.0 - clamp_pvalue(np.asarray(p1, dtype=float)))
    out = norm.sf((norm.ppf(1.0 - gamma) - w1 * z1) / w2)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Two-sample rank machinery
# ---------------------------------------------------------------------------

def _midranks_and_ties(pooled: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Midranks (1-based) of a 1-d pooled sample plus tie-group sizes."""
    uniq, inverse, counts = np.unique(pooled, return_inverse=True, return_counts=True)
    starts = np.cumsum(counts) - counts
    mid = starts + (counts + 1) / 2.0
    return mid[inverse], counts


def _rank_sum_u(treat: np.ndarray, control: np.ndarray) -> tuple[float, np.ndarray]:
    """Mann-Whitney count of (control < treat) pairs, ties counted half."""
    m = treat.size
    ranks, counts = _midranks_and_ties(np.concatenate([treat, control]))
    u = float(ranks[:m].sum() - m * (m + 1) / 2.0)
    return u, counts


def _tie_corrected_sigma(m: int, n: int, counts: np.ndarray) -> float:
    size = m + n
    tie_term = float((counts.astype(float) ** 3 - counts).sum()) / (size * (size - 1))
    var = m * n / 12.0 * ((size + 1) - tie_term)
    return float(np.sqrt(max(var, 0.0)))


def _exact_rank_sum_pvalue(treat: np.ndarray, control: np.ndarray) -> float:
    """P(treatment midrank sum <= observed) over all equally likely
    assignments of the pooled midranks to the treatment group."""
    m, n = treat.size, control.size
    pooled = np.concatenate([treat, control])
    ranks, counts = _midranks_and_ties(pooled)
    if counts.max() == pooled.size:
        return 0.5  # every pooled value tied: the statistic is degenerate
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    observed = int(doubled[:m].sum())
    max_sum = int(np.sort(doubled)[-m:].sum())
    # dp[k, s] = number of k-subsets of the pooled doubled midranks summing to s
    dp = np.zeros((m + 1, max_sum + 1))
    dp[0, 0] = 1.0
    for r in doubled:
        dp[1:, r:] += dp[:-1, : max_sum + 1 - r]
    favourable = dp[m, : observed + 1].sum()
    return float(favourable / comb(m + n, m))


def rank_sum_pvalue(treat, control, exact: bool | None = None) -> float:
    """One-sided two-sample rank test; small when treatment values are
    stochastically smaller than control.

    ``exact=None`` enumerates the exact permutation distribution when the
    pooled sample has at most 20 observations and otherwise uses the
    tie-corrected normal approximation with continuity correction. Pass
    ``exact=True``/``False`` to force a path.
    """
    t = np.asarray(treat, dtype=float).ravel()
    c = np.asarray(control, dtype=float).ravel()
    if t.size == 0 or c.size == 0:
        raise ValueError("both samples must be non-empty")
    if exact is None:
        exact = t.size + c.size <= EXACT_ENUMERATION_LIMIT
    if exact:
        return _exact_rank_sum_pvalue(t, c)
    u, counts = _rank_sum_u(t, c)
    sigma = _tie_corrected_sigma(t.size, c.size, counts)
    if sigma == 0.0:
        return 0.5
    z = (u + 0.5 - t.size * c.size / 2.0) / sigma
    return float(clamp_pvalue(norm.cdf(z)))


def concordance(treat, control) -> float:
    """P(treatment < control) + 0.5 * P(tie), estimated over all pairs."""
    t = np.asarray(treat, dtype=float).ravel()
    c = np.asarray(control, dtype=float).ravel()
    if t.size == 0 or c.size == 0:
        raise ValueError("both samples must be non-empty")
    u, _ = _rank_sum_u(t, c)
    return float(1.0 - u / (t.size * c.size))


def concordance_variance(theta: float, m: int, n: int) -> float:
    """Large-sample variance of an estimated concordance.

    Uses the two conditional-probability terms
    Q1 = theta/(2-theta) and Q2 = 2*theta^2/(1+theta) with the symmetric
    effective group size n* = (m+n)/2, floored at 1e-12 so degenerate
    estimates (theta of exactly 0 or 1) keep downstream z-scores finite.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")
    if m < 1 or n < 1:
        raise ValueError("group sizes must be at least 1")
    n_star = (m + n) / 2.0
    q1 = theta / (2.0 - theta)
    q2 = 2.0 * theta * theta / (1.0 + theta)
    var = (theta * (1.0 - theta)
           + (n_star - 1.0) * (q1 - theta * theta)
           + (n_star - 1.0) * (q2 - theta * theta)) / (m * n)
    return float(max(var, VAR_FLOOR))


# ---------------------------------------------------------------------------
# Batched counterparts used by the simulation engine
# ---------------------------------------------------------------------------
#
# The engine's samples are zero-inflated: the only possible tie group is the
# atom at zero, and all other values are continuous (almost surely distinct).
# The batch helpers below exploit that structure; they are not general-tie
# implementations.

def _batch_rank_sum_u(treat: np.ndarray, control: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized Mann-Whitney counts for (B, m) vs (B, n) samples whose only
    ties sit exactly at zero. Returns (u, pooled zero count), both (B,)."""
    b, m = treat.shape
    n = control.shape[1]
    pooled = np.concatenate([treat, control], axis=1)
    order = np.argsort(pooled, axis=1, kind="stable")
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.broadcast_to(np.arange(1, m + n + 1), (b, m + n)), axis=1)
    zt = (treat == 0.0).sum(axis=1)
    z = zt + (control == 0.0).sum(axis=1)
    neg = (treat < 0.0).sum(axis=1) + (control < 0.0).sum(axis=1)
    # non-tied entries keep their ordinal rank; each zero gets the tie-group
    # midrank, whose block starts right above the negative values
    nonzero_rank_sum = np.where(treat != 0.0, ranks[:, :m], 0).sum(axis=1)
    r_t = nonzero_rank_sum + zt * (neg + (z + 1) / 2.0)
    return r_t - m * (m + 1) / 2.0, z


def _batch_rank_sum(treat: np.ndarray, control: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One-sided normal-approximation p-values and concordances per batch row.

    Returns ``(p, theta)`` with the same benefit conventions as the scalar
    functions. Rows whose pooled values are all zero get p = 0.5, theta = 0.5.
    """
    m = treat.shape[1]
    n = control.shape[1]
    size = m + n
    u, z = _batch_rank_sum_u(treat, control)
    tie_term = (z.astype(float) ** 3 - z) / (size * (size - 1))
    var = m * n / 12.0 * ((size + 1) - tie_term)
    degenerate = var <= 0.0
    sigma = np.sqrt(np.where(degenerate, 1.0, var))
    zscore = (u + 0.5 - m * n / 2.0) / sigma
    p = np.where(degenerate, 0.5, clamp_pvalue(norm.cdf(zscore)))
    theta = 1.0 - u / (m * n)
    return p, theta
