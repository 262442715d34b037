"""Interim dose selection and the adaptive closed test.

The preplanned analysis combines stage-wise p-values with inverse-normal
weights and tests every intersection hypothesis by an unweighted Bonferroni
rule (level alpha/|J|). After the interim changes the dose set, each
intersection with at least one continued dose is tested against the *partial
conditional error* budget its preplanned test earned from stage 1: dose
``j``'s component contributes ``A_j = partial_conditional_error(p_j^(1),
alpha/|J|)`` (with ``A_3 = alpha/|J|`` for the added dose, which has no
stage-1 data), and the second-stage p-values are compared against per-dose
thresholds carved out of that budget.

Two threshold-allocation modes are implemented:

- ``strict``: dropped doses release budget only through the case where the
  low dose is dropped and the high dose is added — there the high dose's
  threshold becomes ``A_1 + A_3`` whenever both continued doses are in J; a
  lone continued dose in J is tested at its own ``A_j``.
- ``pooled``: every conditional-error component of J is kept in the budget
  ``B_J = sum_{k in J} A_k`` and redistributed over the continued doses of J
  (proportionally, except that with K = {medium, high} the low dose's
  component reallocates to the specific doses listed below).

In both modes an intersection also rejects outright when its budget reaches 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .stat_kernel import partial_conditional_error
from .trial_model import (DOSE_NAMES, DesignConfig, SelectionOutcome,
                          allocate_stage2)

#: All nonempty intersections, largest first (display order).
ALL_INTERSECTIONS: tuple[tuple[int, ...], ...] = tuple(
    sorted((tuple(sorted(c)) for r in (3, 2, 1) for c in combinations((1, 2, 3), r)),
           key=lambda j: (-len(j), j))
)

STATUS_REJECTED = "rejected"
STATUS_ACCEPTED_FINAL = "accepted-final"
STATUS_ACCEPTED_INTERIM = "accepted-at-interim"


def interim_select(p_surrogate: dict[int, float], cfg: DesignConfig) -> SelectionOutcome:
    """Apply the interim rule to the Month-6 p-values of the low and medium
    doses. A p-value exactly equal to alpha1 counts as *not* promising."""
    try:
        p1, p2 = p_surrogate[1], p_surrogate[2]
    except KeyError as exc:
        raise ValueError("interim selection needs surrogate p-values for doses 1 and 2") from exc
    low_ok = p1 < cfg.alpha1
    med_ok = p2 < cfg.alpha1
    if low_ok and med_ok:
        case, selected = "i", frozenset({1, 2})
    elif low_ok:
        case, selected = "ii", frozenset({1, 2})
    elif med_ok:
        case, selected = "iii", frozenset({2, 3})
    else:
        case, selected = "iv", frozenset({3})
    return SelectionOutcome(K=selected, case=case,
                            n2_per_arm=allocate_stage2(cfg.N2, selected))


@dataclass(frozen=True)
class ConditionalErrorTable:
    """Stage-2 budgets ``A[dose][divisor]`` per Bonferroni level alpha/divisor."""

    alpha: float
    A: dict[int, dict[int, object]]

    def at(self, dose: int, n_hypotheses: int):
        return self.A[dose][n_hypotheses]


def conditional_error_table(p_stage1, cfg: DesignConfig) -> ConditionalErrorTable:
    """Build the conditional-error budgets from the stage-1 Month-12
    p-values of the low and medium doses. Values vectorize if the inputs are
    arrays; the added high dose has no stage-1 data, so its component is the
    plain Bonferroni level."""
    table: dict[int, dict[int, object]] = {1: {}, 2: {}, 3: {}}
    for divisor in (1, 2, 3):
        gamma = cfg.alpha / divisor
        for dose in (1, 2):
            table[dose][divisor] = partial_conditional_error(
                p_stage1[dose], gamma, cfg.w1, cfg.w2)
        table[3][divisor] = gamma
    return ConditionalErrorTable(alpha=cfg.alpha, A=table)


def _thresholds(intersection: tuple[int, ...], selected: frozenset[int],
                table: ConditionalErrorTable, mode: str):
    """Per-dose rejection thresholds and the outright-rejection clause value
    for one intersection. Works on floats or aligned numpy arrays.

    Returns ``(thresholds, clause)`` where ``thresholds`` maps each continued
    dose of the intersection to its threshold and ``clause`` is the value
    compared against 1 for the outright rejection.
    """
    size = len(intersection)
    continued = [j for j in intersection if j in selected]
    a = {j: table.at(j, size) for j in (1, 2, 3)}
    if mode == "strict":
        if selected == frozenset({2, 3}) and set(continued) == {2, 3}:
            thresholds = {2: a[2], 3: a[1] + a[3]}
        else:
            thresholds = {j: a[j] for j in continued}
        clause = sum(a[j] for j in continued)
        return thresholds, clause
    if mode == "pooled":
        budget = sum(a[j] for j in intersection)
        if selected == frozenset({2, 3}):
            extra = a[1] if 1 in intersection else 0.0
            if set(continued) == {2, 3}:
                thresholds = {2: a[2], 3: a[3] + extra}
            else:
                thresholds = {continued[0]: a[continued[0]] + extra}
        else:
            denom = sum(a[j] for j in continued)
            if np.ndim(denom) == 0:
                scale = budget / denom if denom > 0 else None
                thresholds = {j: a[j] * scale if scale is not None
                              else budget / len(continued) for j in continued}
            else:
                safe = np.where(denom > 0, denom, 1.0)
                thresholds = {
                    j: np.where(denom > 0, a[j] * budget / safe, budget / len(continued))
                    for j in continued
                }
        return thresholds, budget
    raise ValueError(f"unknown realloc mode {mode!r}")


@dataclass(frozen=True)
class IntersectionResult:
    hypotheses: tuple[int, ...]
    status: str
    level: float                  # Bonferroni level alpha/|J| backing the budgets
    budget: float                 # sum of the per-dose thresholds
    thresholds: dict[int, float]  # continued dose -> stage-2 rejection threshold
    clause: float                 # value compared against 1 for outright rejection


@dataclass(frozen=True)
class ClosedTestReport:
    mode: str
    K: frozenset[int]
    alpha: float
    conditional_errors: ConditionalErrorTable
    intersections: dict[tuple[int, ...], IntersectionResult]
    rejected: frozenset[int]


def run_closed_test(p_stage1: dict[int, float], p_stage2: dict[int, float],
                    selected: frozenset[int], cfg: DesignConfig) -> ClosedTestReport:
    """Closed test over the three elementary hypotheses after adaptation.

    ``p_stage1`` holds the Month-12 stage-1 p-values for doses 1 and 2;
    ``p_stage2`` the stage-2 p-values for every continued dose. Intersections
    without a continued dose were accepted at the interim. An elementary
    hypothesis is rejected when every intersection containing it rejects.
    """
    selected = frozenset(selected)
    missing = [j for j in sorted(selected) if j not in p_stage2]
    if missing:
        raise ValueError(f"missing stage-2 p-values for doses {missing}")
    table = conditional_error_table(p_stage1, cfg)
    results: dict[tuple[int, ...], IntersectionResult] = {}
    for intersection in ALL_INTERSECTIONS:
        continued = [j for j in intersection if j in selected]
        level = cfg.alpha / len(intersection)
        if not continued:
            results[intersection] = IntersectionResult(
                hypotheses=intersection, status=STATUS_ACCEPTED_INTERIM,
                level=level, budget=0.0, thresholds={}, clause=0.0)
            continue
        thresholds, clause = _thresholds(intersection, selected, table, cfg.realloc_mode)
        rejected = clause >= 1.0 or any(p_stage2[j] <= thresholds[j] for j in thresholds)
        results[intersection] = IntersectionResult(
            hypotheses=intersection,
            status=STATUS_REJECTED if rejected else STATUS_ACCEPTED_FINAL,
            level=level,
            budget=float(sum(thresholds.values())),
            thresholds={j: float(t) for j, t in thresholds.items()},
            clause=float(clause),
        )
    rejected_set = frozenset(
        j for j in (1, 2, 3)
        if all(results[ix].status == STATUS_REJECTED for ix in ALL_INTERSECTIONS if j in ix)
    )
    return ClosedTestReport(mode=cfg.realloc_mode, K=selected, alpha=cfg.alpha,
                            conditional_errors=table, intersections=results,
                            rejected=rejected_set)


def batch_closed_test(p_stage1: dict[int, np.ndarray], p_stage2: dict[int, np.ndarray],
                      selected: frozenset[int], cfg: DesignConfig) -> np.ndarray:
    """Vectorized rejection decisions for replicates sharing one selection.

    Inputs are (B,) arrays; returns a (B, 3) boolean array of elementary
    rejections (columns are doses 1..3).
    """
    table = conditional_error_table(p_stage1, cfg)
    some = p_stage2[next(iter(sorted(selected)))]
    b = np.shape(some)[0]
    rejected_elementary = np.ones((b, 3), dtype=bool)
    for intersection in ALL_INTERSECTIONS:
        continued = [j for j in intersection if j in selected]
        if not continued:
            rejected_ix = np.zeros(b, dtype=bool)
        else:
            thresholds, clause = _thresholds(intersection, selected, table, cfg.realloc_mode)
            rejected_ix = np.broadcast_to(np.asarray(clause) >= 1.0, (b,)).copy()
            for j, t in thresholds.items():
                rejected_ix |= p_stage2[j] <= t
        for j in intersection:
            rejected_elementary[:, j - 1] &= rejected_ix
    return rejected_elementary


def render_report(report: ClosedTestReport) -> str:
    """Text rendering of a closed-test report, one line per intersection."""
    lines = []
    name = DOSE_NAMES
    for intersection in ALL_INTERSECTIONS:
        res = report.intersections[intersection]
        label = "H{%s}" % ",".join(str(j) for j in intersection)
        if res.status == STATUS_ACCEPTED_INTERIM:
            lines.append(f"{label:>9}: accepted at interim (no continued dose)")
            continue
        clauses = [f"p({name[j]}) <= {res.thresholds[j]:.4f}"
                   for j in sorted(res.thresholds)]
        clauses.append(f"sum {res.clause:.4f} >= 1")
        lines.append(f"{label:>9}: " + "  OR  ".join(clauses) + f"   -> {res.status}")
    rejected = ", ".join(name[j] for j in sorted(report.rejected)) or "none"
    lines.append(f"rejected doses: {rejected}")
    return "\n".join(lines)
