"""Deterministic cohorts reproducing the published worked-example analyses.

Each arm is laid out on a fixed value grid so the rank statistics — and
therefore every p-value, concordance, and estimate — are exact by
construction: control subjects sit at 10, 20, ..., and each treated subject
is placed between two controls to realize a chosen win count. The resulting
cohorts drive the `analyze` subcommand end to end.
"""
from __future__ import annotations

from adaptrial.trial_model import SubjectRecord

# Per-visit win counts (number of treated-control pairs where the treated
# value is larger, i.e. worse). theta_hat = 1 - wins / (m * n).
TREND_STAGE1 = {"low": {"m6": 771, "m12": 852}, "medium": {"m6": 625, "m12": 635}}
TREND_STAGE2 = {"medium": {"m12": 222}, "high": {"m12": 93}}
ALL_EFFECTIVE_STAGE1 = {"low": {"m6": 500, "m12": 554},
                        "medium": {"m6": 532, "m12": 478}}
ALL_EFFECTIVE_STAGE2 = {"low": {"m12": 266}, "medium": {"m12": 212}}

DOSE_IDS = {"low": 1, "medium": 2, "high": 3}


def control_values(n: int) -> list[float]:
    return [10.0 * (j + 1) for j in range(n)]


def treated_values(wins: int, m: int, n: int, eps: float = 0.001) -> list[float]:
    """Distinct treated values realizing ``wins`` pairwise wins against the
    control grid, spread as evenly as possible."""
    if not 0 <= wins <= m * n:
        raise ValueError(f"wins must lie in [0, {m * n}]")
    base, rem = divmod(wins, m)
    per_subject = [base + 1 if i < rem else base for i in range(m)]
    if any(k > n for k in per_subject):
        raise ValueError("win distribution exceeds the control count")
    return [10.0 * k + 5.0 + i * eps for i, k in enumerate(per_subject)]


def _arm_records(stage: int, dose: int, x1: list[float], x2: list[float],
                 ) -> list[SubjectRecord]:
    return [SubjectRecord(dose=dose, stage=stage, x0=100.0 + i,
                          x1=float(v1), x2=float(v2), responder=False)
            for i, (v1, v2) in enumerate(zip(x1, x2, strict=True))]


def _cohort(stage1_wins: dict, stage2_wins: dict,
            stage2_sizes: dict[str, int]) -> list[SubjectRecord]:
    records: list[SubjectRecord] = []
    grid40 = control_values(40)
    records += _arm_records(1, 0, grid40, grid40)
    for arm, wins in stage1_wins.items():
        records += _arm_records(
            1, DOSE_IDS[arm],
            treated_values(wins["m6"], 40, 40),
            treated_values(wins["m12"], 40, 40, eps=0.002))
    grid27 = control_values(27)
    records += _arm_records(2, 0, grid27, grid27)
    for arm, wins in stage2_wins.items():
        m = stage2_sizes[arm]
        values = treated_values(wins["m12"], m, 27, eps=0.002)
        records += _arm_records(2, DOSE_IDS[arm], values, values)
    return records


def trend_cohort() -> list[SubjectRecord]:
    """Interim case iii (continue medium+high); final rejects medium+high."""
    return _cohort(TREND_STAGE1, TREND_STAGE2, {"medium": 27, "high": 26})


def all_effective_cohort() -> list[SubjectRecord]:
    """Interim case i (continue low+medium); final rejects low+medium."""
    return _cohort(ALL_EFFECTIVE_STAGE1, ALL_EFFECTIVE_STAGE2,
                   {"low": 27, "medium": 26})
