"""Concordance estimation across the two stages.

Three estimators are reported per dose:

- ``unconditional``: weighted mean of the stage-wise concordances with the
  per-stage comparison sizes (treated + control subjects) as weights; a dose
  observed in one stage only keeps that stage's value verbatim.
- ``conditional``: the same quantity, but only defined when the dose was
  carried into (or started in) stage 2.
- ``inverse_normal``: the median-unbiased estimate solving the weighted
  inverse-normal score equation across stages.

All lower confidence bounds are one-sided score-type bounds: the variance is
evaluated at the hypothesized concordance, and the bound is the value of
``delta`` where the (combined) z-statistic equals the normal quantile of the
confidence level.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datagen import build_log_params
from .stat_kernel import VAR_FLOOR, _batch_rank_sum_u, norm_quantile
from .trial_model import ScenarioSpec

#: Reference total sample size behind the oracle's "scaled single-stage trial"
#: sampling (four equal arms).
ORACLE_REFERENCE_N = 200


class EstimationError(ValueError):
    """Raised when a confidence bound cannot be bracketed."""


@dataclass(frozen=True)
class Concordance:
    """One stage's concordance estimate with its comparison sizes."""

    theta: float
    m: int  # treated-arm size
    n: int  # control-arm size

    @property
    def weight(self) -> int:
        return self.m + self.n


@dataclass(frozen=True)
class ConcordanceEstimate:
    dose: int
    method: str
    point: float
    ci_lower: float
    stages_used: tuple[int, ...]


def _score_sigma(delta, m, n):
    """Concordance standard error evaluated at a hypothesized value."""
    delta = np.asarray(delta, dtype=float)
    n_star = (m + n) / 2.0
    q1 = delta / (2.0 - delta)
    q2 = 2.0 * delta * delta / (1.0 + delta)
    var = (delta * (1.0 - delta)
           + (n_star - 1.0) * (q1 + q2 - 2.0 * delta * delta)) / (m * n)
    return np.sqrt(np.maximum(var, VAR_FLOOR))


def _bisect_decreasing(func, size: int, iters: int = 80) -> np.ndarray:
    """Roots of a decreasing function of delta on [0, 1], vectorized."""
    lo = np.zeros(size)
    hi = np.ones(size)
    f_lo = func(lo)
    f_hi = func(hi)
    bad = (f_lo < 0.0) | (f_hi > 0.0)
    if np.any(bad):
        raise EstimationError("score equation has no root in [0, 1] (degenerate variance)")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        positive = func(mid) > 0.0
        lo = np.where(positive, mid, lo)
        hi = np.where(positive, hi, mid)
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Batched estimators (the scalar API wraps batches of one)
# ---------------------------------------------------------------------------

def batch_single_stage(theta: np.ndarray, m: int, n: int,
                       level: float = 0.975) -> tuple[np.ndarray, np.ndarray]:
    """Point estimate and one-sided lower score bound for one-stage doses."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    z_target = norm_quantile(level)

    def score(delta):
        return (theta - delta) / _score_sigma(delta, m, n) - z_target

    return theta, _bisect_decreasing(score, theta.size)


def batch_weighted(theta1: np.ndarray, m1: int, n1: int,
                   theta2: np.ndarray, m2: int, n2: int,
                   level: float = 0.975) -> tuple[np.ndarray, np.ndarray]:
    """Sample-size-weighted two-stage estimate with a combined score bound."""
    theta1 = np.atleast_1d(np.asarray(theta1, dtype=float))
    theta2 = np.atleast_1d(np.asarray(theta2, dtype=float))
    w1 = (m1 + n1) / (m1 + n1 + m2 + n2)
    w2 = 1.0 - w1
    point = w1 * theta1 + w2 * theta2
    z_target = norm_quantile(level)

    def score(delta):
        var = (w1 * w1 * _score_sigma(delta, m1, n1) ** 2
               + w2 * w2 * _score_sigma(delta, m2, n2) ** 2)
        return (point - delta) / np.sqrt(var) - z_target

    return point, _bisect_decreasing(score, point.size)


def batch_inverse_normal(theta1: np.ndarray, m1: int, n1: int,
                         theta2: np.ndarray, m2: int, n2: int,
                         w1: float, w2: float, level: float = 0.975,
                         ) -> tuple[np.ndarray, np.ndarray]:
    """Median-unbiased combined estimate and one-sided lower bound.

    The combined statistic is ``w1*Z1(delta) + w2*Z2(delta)`` with stage-wise
    score z-statistics; the point estimate solves it equal to 0 and the lower
    bound equal to the normal quantile of ``level``.
    """
    theta1 = np.atleast_1d(np.asarray(theta1, dtype=float))
    theta2 = np.atleast_1d(np.asarray(theta2, dtype=float))

    def combined(delta, target):
        z1 = (theta1 - delta) / _score_sigma(delta, m1, n1)
        z2 = (theta2 - delta) / _score_sigma(delta, m2, n2)
        return w1 * z1 + w2 * z2 - target

    point = _bisect_decreasing(lambda d: combined(d, 0.0), theta1.size)
    z_target = norm_quantile(level)
    ci = _bisect_decreasing(lambda d: combined(d, z_target), theta1.size)
    return point, ci


# ---------------------------------------------------------------------------
# Scalar API
# ---------------------------------------------------------------------------

def estimate_unconditional(c1: Concordance | None, c2: Concordance | None,
                           dose: int, level: float = 0.975) -> ConcordanceEstimate:
    if c1 is None and c2 is None:
        raise ValueError("at least one stage estimate is required")
    if c1 is not None and c2 is not None:
        point, ci = batch_weighted(c1.theta, c1.m, c1.n, c2.theta, c2.m, c2.n, level)
        return ConcordanceEstimate(dose=dose, method="unconditional",
                                   point=float(point[0]), ci_lower=float(ci[0]),
                                   stages_used=(1, 2))
    present, stage = (c1, (1,)) if c1 is not None else (c2, (2,))
    point, ci = batch_single_stage(present.theta, present.m, present.n, level)
    return ConcordanceEstimate(dose=dose, method="unconditional",
                               point=float(point[0]), ci_lower=float(ci[0]),
                               stages_used=stage)


def estimate_conditional(c1: Concordance | None, c2: Concordance | None,
                         selected: bool, dose: int,
                         level: float = 0.975) -> ConcordanceEstimate | None:
    """As unconditional, but only defined for doses that reached stage 2."""
    if not selected:
        return None
    base = estimate_unconditional(c1, c2, dose, level)
    return ConcordanceEstimate(dose=dose, method="conditional", point=base.point,
                               ci_lower=base.ci_lower, stages_used=base.stages_used)


def estimate_inverse_normal(c1: Concordance, c2: Concordance, w1: float, w2: float,
                            dose: int, level: float = 0.975) -> ConcordanceEstimate:
    if c1 is None or c2 is None:
        raise ValueError("the inverse-normal estimator needs both stages")
    point, ci = batch_inverse_normal(c1.theta, c1.m, c1.n, c2.theta, c2.m, c2.n,
                                     w1, w2, level)
    return ConcordanceEstimate(dose=dose, method="inverse_normal",
                               point=float(point[0]), ci_lower=float(ci[0]),
                               stages_used=(1, 2))


# ---------------------------------------------------------------------------
# Large-sample oracle
# ---------------------------------------------------------------------------

def oracle_true_concordance(scn: ScenarioSpec, dose: int, t: int = 2,
                            n_scale: int = 5000,
                            rng: np.random.Generator | None = None,
                            draws: int = 6) -> float:
    """Monte Carlo ground truth of the dose-vs-placebo concordance at visit
    ``t``, from a single-stage comparison with arm sizes scaled by
    ``n_scale``. Only the visit-``t`` marginal matters for concordance, so
    the draw is the zero-inflated lognormal marginal directly."""
    if n_scale < 1:
        raise ValueError("n_scale must be at least 1")
    if dose not in (1, 2, 3):
        raise ValueError("oracle is defined for active doses only")
    if rng is None:
        rng = np.random.default_rng()
    params = build_log_params(scn)
    arm = (ORACLE_REFERENCE_N // 4) * n_scale

    def draw_arm(d: int) -> np.ndarray:
        x = np.exp(params.mu[d][t] + params.sigma * rng.standard_normal((1, arm)))
        x[rng.random((1, arm)) < scn.pi[d]] = 0.0
        return x

    total = 0.0
    for _ in range(draws):
        u, _ = _batch_rank_sum_u(draw_arm(dose), draw_arm(0))
        total += 1.0 - float(u[0]) / (arm * arm)
    return total / draws
