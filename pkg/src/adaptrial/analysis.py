"""Per-stage endpoint analyses: one-sided dose-vs-placebo p-values.

Three analysis methods are supported:

- ``wilcox_c``  — rank test on the raw endpoint values,
- ``wilcox_cc`` — rank test on the change from baseline,
- ``lm``        — linear model on ln(1 + x_t) with ln(1 + x0) as covariate and
  all active doses in one model, one-sided t-test per dose coefficient.

Every p-value is small when the dose looks better than placebo (lower
parasite load). Scalar entry points consume ``SubjectRecord`` lists; the
``batch_*`` variants operate on stacked replicate arrays and are what the
simulation engine calls.
"""
from __future__ import annotations

import numpy as np
from scipy.stats import t as student_t

from .stat_kernel import _batch_rank_sum, clamp_pvalue, concordance, rank_sum_pvalue
from .trial_model import SubjectRecord

#: Column index of each visit inside the (x0, x1, x2) triple.
VISIT_INDEX = {0: 0, 1: 1, 2: 2}


def records_to_arrays(records: list[SubjectRecord]) -> dict[int, np.ndarray]:
    """Group records by dose into (n, 3) arrays of (x0, x1, x2)."""
    by_dose: dict[int, list[tuple[float, float, float]]] = {}
    for rec in records:
        by_dose.setdefault(rec.dose, []).append((rec.x0, rec.x1, rec.x2))
    return {dose: np.asarray(rows, dtype=float) for dose, rows in by_dose.items()}


def endpoint_values(arm: np.ndarray, endpoint_time: int, change: bool) -> np.ndarray:
    t_idx = VISIT_INDEX[endpoint_time]
    values = arm[..., t_idx]
    return values - arm[..., 0] if change else values


def stage_pvalues(records: list[SubjectRecord], method: str,
                  endpoint_time: int) -> dict[int, float]:
    """One-sided p-value per active dose present in ``records``.

    ``endpoint_time`` is 1 for the Month-6 surrogate and 2 for the Month-12
    primary endpoint.
    """
    if endpoint_time not in (1, 2):
        raise ValueError(f"endpoint_time must be 1 or 2, got {endpoint_time}")
    arms = records_to_arrays(records)
    if 0 not in arms:
        raise ValueError("records contain no placebo arm")
    actives = sorted(d for d in arms if d != 0)
    if not actives:
        raise ValueError("records contain no active dose arm")
    if any(arms[d].shape[0] < 2 for d in arms):
        raise ValueError("every arm needs at least two subjects")

    if method == "lm":
        batch_arms = {d: arms[d][None, :, :] for d in arms}
        p = batch_lm_pvalues(batch_arms, actives, endpoint_time)
        return {d: float(p[d][0]) for d in actives}
    if method in ("wilcox_c", "wilcox_cc"):
        change = method == "wilcox_cc"
        placebo = endpoint_values(arms[0], endpoint_time, change)
        return {
            d: rank_sum_pvalue(endpoint_values(arms[d], endpoint_time, change), placebo)
            for d in actives
        }
    raise ValueError(f"unknown method {method!r}")


def stage_concordances(records: list[SubjectRecord], endpoint_time: int = 2,
                       change: bool = False) -> dict[int, tuple[float, int, int]]:
    """Concordance vs placebo per active dose: ``{dose: (theta, m, n)}``."""
    arms = records_to_arrays(records)
    if 0 not in arms:
        raise ValueError("records contain no placebo arm")
    placebo = endpoint_values(arms[0], endpoint_time, change)
    out = {}
    for dose in sorted(d for d in arms if d != 0):
        values = endpoint_values(arms[dose], endpoint_time, change)
        out[dose] = (concordance(values, placebo), values.size, placebo.size)
    return out


# ---------------------------------------------------------------------------
# Batched paths
# ---------------------------------------------------------------------------

def batch_rank_pvalues(x_by_arm: dict[int, np.ndarray], actives: list[int],
                       endpoint_time: int, change: bool,
                       ) -> tuple[dict[int, np.ndarray], dict[int, np.ndarray]]:
    """Vectorized rank tests for stacked replicates.

    ``x_by_arm[dose]`` has shape (B, n_dose, 3). Returns per-dose p-value and
    concordance arrays of shape (B,). The change scores subtract baseline;
    plain values keep the zero atom as the only tie group, which the batched
    rank kernel requires (change scores of responders are strictly negative,
    so they are tie-free either way).
    """
    placebo = endpoint_values(x_by_arm[0], endpoint_time, change)
    pvals, thetas = {}, {}
    for dose in actives:
        values = endpoint_values(x_by_arm[dose], endpoint_time, change)
        pvals[dose], thetas[dose] = _batch_rank_sum(values, placebo)
    return pvals, thetas


def batch_lm_pvalues(x_by_arm: dict[int, np.ndarray], actives: list[int],
                     endpoint_time: int) -> dict[int, np.ndarray]:
    """Vectorized per-replicate OLS of ln(1+x_t) on dose indicators and
    ln(1+x0), returning the one-sided coefficient p-value per active dose."""
    t_idx = VISIT_INDEX[endpoint_time]
    arms = [0] + list(actives)
    y = np.concatenate([np.log1p(x_by_arm[d][:, :, t_idx]) for d in arms], axis=1)
    covariate = np.concatenate([np.log1p(x_by_arm[d][:, :, 0]) for d in arms], axis=1)
    b, n_tot = y.shape
    k = 2 + len(actives)
    design = np.zeros((b, n_tot, k))
    design[:, :, 0] = 1.0
    offset = x_by_arm[0].shape[1]
    for j, dose in enumerate(actives):
        n_d = x_by_arm[dose].shape[1]
        design[:, offset:offset + n_d, 1 + j] = 1.0
        offset += n_d
    design[:, :, -1] = covariate

    xtx = np.einsum("bnk,bnl->bkl", design, design, optimize=True)
    xty = np.einsum("bnk,bn->bk", design, y, optimize=True)
    beta = np.linalg.solve(xtx, xty)
    resid = y - np.einsum("bnk,bk->bn", design, beta, optimize=True)
    dof = n_tot - k
    if dof <= 0:
        raise ValueError("not enough observations for the linear model")
    s2 = (resid * resid).sum(axis=1) / dof
    xtx_inv = np.linalg.inv(xtx)
    out = {}
    for j, dose in enumerate(actives):
        se = np.sqrt(s2 * xtx_inv[:, 1 + j, 1 + j])
        tstat = beta[:, 1 + j] / se
        out[dose] = clamp_pvalue(student_t.cdf(tstat, dof))
    return out


def batch_stage_pvalues(x_by_arm: dict[int, np.ndarray], actives: list[int],
                        method: str, endpoint_time: int,
                        ) -> tuple[dict[int, np.ndarray], dict[int, np.ndarray] | None]:
    """Method dispatch for the engine: returns (p-values, concordances or
    None). Concordances are only produced by the rank paths."""
    if method == "lm":
        return batch_lm_pvalues(x_by_arm, actives, endpoint_time), None
    if method in ("wilcox_c", "wilcox_cc"):
        return batch_rank_pvalues(x_by_arm, actives, endpoint_time,
                                  change=method == "wilcox_cc")
    raise ValueError(f"unknown method {method!r}")
