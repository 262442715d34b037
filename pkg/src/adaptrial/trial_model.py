"""Domain model: doses, design configuration, scenarios, and arm allocation.

The trial under study runs two stages. Stage 1 randomizes ``N1`` subjects
equally to placebo, low, and medium dose; an interim look at the Month-6
surrogate endpoint picks the stage-2 dose set ``K`` (one of {low, medium},
{medium, high}, {high}), and stage 2 randomizes the remaining ``N - N1``
subjects equally to placebo plus the doses in ``K``. The final analysis is on
the Month-12 endpoint.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import IntEnum


class DoseId(IntEnum):
    placebo = 0
    low = 1
    medium = 2
    high = 3


ACTIVE_DOSES = (DoseId.low, DoseId.medium, DoseId.high)

DOSE_NAMES = {0: "placebo", 1: "low", 2: "medium", 3: "high"}

#: The only dose sets the interim rule can continue with.
VALID_SELECTIONS = (frozenset({1, 2}), frozenset({2, 3}), frozenset({3}))

METHODS = ("wilcox_c", "wilcox_cc", "lm")
REALLOC_MODES = ("strict", "pooled")

ALPHA1_GRID = (0.1, 0.2, 0.3, 0.4, 0.5)
N1_GRID = (80, 100, 120)
RHO_GRID = (0.4, 0.5, 0.6)

#: Subjects whose Month-12 reduction rate exceeds this margin over placebo
#: clear all parasites with the excess probability, floored at the placebo
#: responder rate.
CONTROL_RESPONDER_RATE = 0.10
RESPONDER_MARGIN = 0.20


@dataclass(frozen=True)
class DesignConfig:
    """Two-stage design parameters.

    ``w1``/``w2`` are the inverse-normal stage weights; they default to the
    preplanned sqrt(N1/N) split and are recomputed whenever left unset.
    """

    N: int = 200
    N1: int = 120
    alpha: float = 0.025
    alpha1: float = 0.3
    method: str = "wilcox_c"
    realloc_mode: str = "strict"
    w1: float = 0.0
    w2: float = 0.0

    def __post_init__(self) -> None:
        if not 0 < self.N1 < self.N:
            raise ValueError(f"need 0 < N1 < N, got N1={self.N1}, N={self.N}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.alpha1 < 1.0:
            raise ValueError(f"alpha1 must lie in (0, 1), got {self.alpha1}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.realloc_mode not in REALLOC_MODES:
            raise ValueError(
                f"unknown realloc_mode {self.realloc_mode!r}; expected one of {REALLOC_MODES}"
            )
        if self.w1 == 0.0 and self.w2 == 0.0:
            object.__setattr__(self, "w1", math.sqrt(self.N1 / self.N))
            object.__setattr__(self, "w2", math.sqrt(1.0 - self.N1 / self.N))
        if abs(self.w1**2 + self.w2**2 - 1.0) > 1e-9 or self.w1 < 0 or self.w2 <= 0:
            raise ValueError("stage weights must be nonnegative with w1^2 + w2^2 = 1")

    @property
    def N2(self) -> int:
        return self.N - self.N1

    def to_json_dict(self) -> dict:
        return {
            "N": self.N,
            "N1": self.N1,
            "alpha": self.alpha,
            "alpha1": self.alpha1,
            "method": self.method,
            "realloc_mode": self.realloc_mode,
            "w1": self.w1,
            "w2": self.w2,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "DesignConfig":
        known = {f: data[f] for f in (
            "N", "N1", "alpha", "alpha1", "method", "realloc_mode", "w1", "w2",
        ) if f in data}
        unknown = set(data) - set(known)
        if unknown:
            raise ValueError(f"unknown design config fields: {sorted(unknown)}")
        return cls(**known)

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)

    @classmethod
    def loads(cls, text: str) -> "DesignConfig":
        return cls.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class ScenarioSpec:
    """Data-generating assumptions for one simulation scenario.

    ``r[j][t]`` is the assumed fractional reduction of the mean parasite load
    for dose ``j`` (0..3, placebo first) at follow-up ``t`` (index 0 = Month 6,
    index 1 = Month 12); ``pi[j]`` is the probability of a total responder
    (both follow-ups exactly zero).
    """

    label: str
    baseline_mean: float
    baseline_sd: float
    rho: float
    r: tuple[tuple[float, float], ...]
    pi: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.baseline_mean <= 0 or self.baseline_sd < 0:
            raise ValueError("baseline mean must be positive and sd nonnegative")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")
        if len(self.r) != 4 or any(len(row) != 2 for row in self.r):
            raise ValueError("r must hold one (Month6, Month12) pair per dose")
        if len(self.pi) != 4:
            raise ValueError("pi must hold one rate per dose")
        if any(not 0.0 <= rate < 1.0 for row in self.r for rate in row):
            raise ValueError("reduction rates must lie in [0, 1)")
        if any(not 0.0 <= p <= 1.0 for p in self.pi):
            raise ValueError("responder rates must lie in [0, 1]")

    def to_json_dict(self) -> dict:
        return {
            "label": self.label,
            "baseline_mean": self.baseline_mean,
            "baseline_sd": self.baseline_sd,
            "rho": self.rho,
            "r": [list(row) for row in self.r],
            "pi": list(self.pi),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ScenarioSpec":
        return cls(
            label=data["label"],
            baseline_mean=data["baseline_mean"],
            baseline_sd=data["baseline_sd"],
            rho=data["rho"],
            r=tuple(tuple(row) for row in data["r"]),
            pi=tuple(data["pi"]),
        )


@dataclass(frozen=True)
class SubjectRecord:
    dose: int
    stage: int
    x0: float
    x1: float
    x2: float
    responder: bool


@dataclass(frozen=True)
class SelectionOutcome:
    """Interim decision: continued dose set, rule case, stage-2 allocation."""

    K: frozenset[int]
    case: str  # "i".."iv"
    n2_per_arm: dict[int, int]


# ---------------------------------------------------------------------------
# Arm allocation
# ---------------------------------------------------------------------------

def _split_equally(total: int, arms: list[int]) -> dict[int, int]:
    base, rem = divmod(total, len(arms))
    if base < 1:
        raise ValueError(f"cannot allocate {total} subjects across {len(arms)} arms")
    return {arm: base + (1 if i < rem else 0) for i, arm in enumerate(arms)}


def allocate_stage1(n1: int) -> dict[int, int]:
    """Equal stage-1 split across placebo/low/medium; any remainder goes one
    subject at a time starting with placebo."""
    return _split_equally(n1, [0, 1, 2])


def allocate_stage2(n2: int, selected: frozenset[int] | set[int]) -> dict[int, int]:
    """Equal stage-2 split across placebo plus the continued doses, remainder
    assigned one per arm starting with placebo then ascending dose."""
    key = frozenset(selected)
    if key not in VALID_SELECTIONS:
        raise ValueError(f"invalid continued dose set {sorted(key)}")
    return _split_equally(n2, [0] + sorted(key))


# ---------------------------------------------------------------------------
# Built-in scenarios
# ---------------------------------------------------------------------------

DISEASES = ("mansonellosis", "onchocerciasis", "loiasis")

#: (arithmetic mean, sd) of the raw baseline parasite load.
BASELINE_TABLE: dict[str, dict[str, tuple[float, float]]] = {
    "mansonellosis": {"standard": (1838.0, 2565.0), "modified": (1000.0, 3500.0)},
    "onchocerciasis": {"standard": (19.0, 30.0), "modified": (15.0, 40.0)},
    "loiasis": {"standard": (5000.0, 4000.0), "modified": (4000.0, 5000.0)},
}

#: label, Month-6 reductions (low, medium, high), Month-12 reductions,
#: and the weakened Month-6 reductions used by the surrogate-misspecification
#: sensitivity runs. Month-12 is never modified.
SCENARIO_TABLE: tuple[tuple[str, tuple[float, float, float], tuple[float, float, float], tuple[float, float, float]], ...] = (
    ("No effect", (0.0, 0.0, 0.0), (0.0, 0.0, 0.0), (0.0, 0.0, 0.0)),
    ("Efficacy only in high dose", (0.0, 0.0, 0.5), (0.0, 0.0, 0.6), (0.0, 0.0, 0.4)),
    ("Trend (a)", (0.0, 0.3, 0.5), (0.0, 0.4, 0.6), (0.0, 0.2, 0.4)),
    ("Trend (b)", (0.0, 0.4, 0.5), (0.0, 0.5, 0.6), (0.0, 0.3, 0.4)),
    ("All doses effective", (0.4, 0.4, 0.4), (0.5, 0.5, 0.5), (0.3, 0.3, 0.3)),
)

SCENARIO_LABELS = tuple(row[0] for row in SCENARIO_TABLE)

VARIANTS = ("standard", "modified_rates", "modified_baseline")


def responder_rate(r_month12: float) -> float:
    """Total-responder probability for an active dose, floored at the
    placebo rate."""
    return max(r_month12 - RESPONDER_MARGIN, CONTROL_RESPONDER_RATE)


def build_scenario(label: str, disease: str, rho: float = 0.5,
                   variant: str = "standard") -> ScenarioSpec:
    if disease not in BASELINE_TABLE:
        raise ValueError(f"unknown disease {disease!r}; expected one of {DISEASES}")
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    for row_label, m6, m12, m6_mod in SCENARIO_TABLE:
        if row_label == label:
            break
    else:
        raise ValueError(f"unknown scenario {label!r}; expected one of {SCENARIO_LABELS}")
    baseline_kind = "modified" if variant == "modified_baseline" else "standard"
    mean, sd = BASELINE_TABLE[disease][baseline_kind]
    month6 = m6_mod if variant == "modified_rates" else m6
    r = ((0.0, 0.0),) + tuple((month6[j], m12[j]) for j in range(3))
    pi = (CONTROL_RESPONDER_RATE,) + tuple(responder_rate(m12[j]) for j in range(3))
    return ScenarioSpec(label=label, baseline_mean=mean, baseline_sd=sd,
                        rho=rho, r=r, pi=pi)


def builtin_scenarios(disease: str, rho: float = 0.5,
                      variant: str = "standard") -> list[ScenarioSpec]:
    """All five benchmark scenarios for one disease."""
    return [build_scenario(label, disease, rho=rho, variant=variant)
            for label in SCENARIO_LABELS]
