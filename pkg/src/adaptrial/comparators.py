"""Single-stage benchmark designs.

Two fixed-sample references are implemented:

- ``MA1``: a sequential pair of trials. Study 1 assigns 3/5 of the budget
  equally to placebo/low/medium and tests both doses with Holm at 2/3 of the
  overall level. Study 2 (high dose vs its own placebo, 2/5 of the budget)
  is run only when study 1 rejects nothing, at 1/3 of the overall level.
- ``MA2``: one four-arm trial with a shared placebo, N/4 per arm, all three
  comparisons Holm-adjusted at the full level.

Both test the final endpoint with the same per-comparison methods as the
adaptive design.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import batch_stage_pvalues
from .datagen import build_covariance, build_log_params, sample_arm
from .trial_model import ScenarioSpec, _split_equally

DESIGNS = ("MA1", "MA2")


@dataclass(frozen=True)
class FixedTrialResult:
    design: str
    rejected: frozenset[int]
    raw_p: dict[int, float]
    adjusted_p: dict[int, float]


def batch_holm_adjust(p: np.ndarray) -> np.ndarray:
    """Step-down Holm adjusted p-values, row-wise over an (B, k) array."""
    p = np.asarray(p, dtype=float)
    order = np.argsort(p, axis=1)
    sorted_p = np.take_along_axis(p, order, axis=1)
    mult = np.arange(p.shape[1], 0, -1, dtype=float)
    adj_sorted = np.minimum(np.maximum.accumulate(sorted_p * mult, axis=1), 1.0)
    adjusted = np.empty_like(p)
    np.put_along_axis(adjusted, order, adj_sorted, axis=1)
    return adjusted


def bonferroni_holm(pvalues: dict[int, float], level: float,
                    ) -> tuple[set[int], dict[int, float]]:
    """Holm multiple-test decision over a hypothesis->p map."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    keys = sorted(pvalues)
    adj = batch_holm_adjust(np.array([[pvalues[k] for k in keys]]))[0]
    adjusted = {k: float(a) for k, a in zip(keys, adj)}
    rejected = {k for k in keys if adjusted[k] <= level}
    return rejected, adjusted


def _sample_arms(scn: ScenarioSpec, n_per_arm: dict[int, int], b: int,
                 rng: np.random.Generator) -> dict[int, np.ndarray]:
    params = build_log_params(scn)
    chol = build_covariance(params.sigma, scn.rho).cholesky
    return {dose: sample_arm(b, n, np.asarray(params.mu[dose]), chol,
                             scn.pi[dose], rng)[0]
            for dose, n in sorted(n_per_arm.items())}


@dataclass(frozen=True)
class Ma1Batch:
    """Replicate-stacked MA1 outcomes.

    ``p_high`` is NaN for replicates whose second study never ran.
    """

    rejected: np.ndarray      # (B, 3) bool, columns = doses 1..3
    ran_study2: np.ndarray    # (B,) bool
    p_low_medium: np.ndarray  # (B, 2)
    p_high: np.ndarray        # (B,)


def batch_ma1(scn: ScenarioSpec, n_total: int, alpha: float, method: str,
              rng: np.random.Generator, b: int) -> Ma1Batch:
    study1_total = (3 * n_total) // 5
    arms1 = _split_equally(study1_total, [0, 1, 2])
    arms2 = _split_equally(n_total - study1_total, [0, 3])

    x1 = _sample_arms(scn, arms1, b, rng)
    p1, _ = batch_stage_pvalues(x1, [1, 2], method, endpoint_time=2)
    p_low_medium = np.column_stack([p1[1], p1[2]])
    rej12 = batch_holm_adjust(p_low_medium) <= 2.0 * alpha / 3.0

    ran_study2 = ~rej12.any(axis=1)
    p_high = np.full(b, np.nan)
    rej3 = np.zeros(b, dtype=bool)
    idx = np.flatnonzero(ran_study2)
    if idx.size:
        x2 = _sample_arms(scn, arms2, idx.size, rng)
        p2, _ = batch_stage_pvalues(x2, [3], method, endpoint_time=2)
        p_high[idx] = p2[3]
        rej3[idx] = p2[3] <= alpha / 3.0
    rejected = np.column_stack([rej12, rej3])
    return Ma1Batch(rejected=rejected, ran_study2=ran_study2,
                    p_low_medium=p_low_medium, p_high=p_high)


def batch_ma2(scn: ScenarioSpec, n_total: int, alpha: float, method: str,
              rng: np.random.Generator, b: int,
              ) -> tuple[np.ndarray, np.ndarray]:
    """Returns (rejected (B, 3) bool, raw p (B, 3))."""
    arms = _split_equally(n_total, [0, 1, 2, 3])
    x = _sample_arms(scn, arms, b, rng)
    p, _ = batch_stage_pvalues(x, [1, 2, 3], method, endpoint_time=2)
    p_mat = np.column_stack([p[1], p[2], p[3]])
    rejected = batch_holm_adjust(p_mat) <= alpha
    return rejected, p_mat


def run_ma1(scn: ScenarioSpec, n_total: int, alpha: float, method: str,
            rng: np.random.Generator) -> FixedTrialResult:
    batch = batch_ma1(scn, n_total, alpha, method, rng, b=1)
    raw_p = {1: float(batch.p_low_medium[0, 0]), 2: float(batch.p_low_medium[0, 1])}
    _, adjusted = bonferroni_holm({1: raw_p[1], 2: raw_p[2]}, 2.0 * alpha / 3.0)
    if batch.ran_study2[0]:
        raw_p[3] = float(batch.p_high[0])
        adjusted[3] = raw_p[3]  # single hypothesis: Holm degenerates
    rejected = frozenset(int(d + 1) for d in np.flatnonzero(batch.rejected[0]))
    return FixedTrialResult(design="MA1", rejected=rejected, raw_p=raw_p,
                            adjusted_p=adjusted)


def run_ma2(scn: ScenarioSpec, n_total: int, alpha: float, method: str,
            rng: np.random.Generator) -> FixedTrialResult:
    rejected_mask, p_mat = batch_ma2(scn, n_total, alpha, method, rng, b=1)
    raw_p = {d: float(p_mat[0, d - 1]) for d in (1, 2, 3)}
    _, adjusted = bonferroni_holm(raw_p, alpha)
    rejected = frozenset(int(d + 1) for d in np.flatnonzero(rejected_mask[0]))
    return FixedTrialResult(design="MA2", rejected=rejected, raw_p=raw_p,
                            adjusted_p=adjusted)
