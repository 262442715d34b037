"""Zero-inflated lognormal cohort generation.

Raw parasite loads are lognormal: baseline moments (arithmetic mean and sd)
are converted to log-scale parameters, dose effects act as log-scale mean
shifts ln(1 - r), and the three visits (baseline, Month 6, Month 12) share an
AR(1) correlation structure on the log scale. Total responders are an
independent atom: with probability pi both follow-up values are exactly zero
while the baseline is never zeroed.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .trial_model import ScenarioSpec, SubjectRecord

COHORT_CSV_HEADER = ("subject_id", "stage", "dose", "x0", "x1", "x2", "responder")


def lognormal_params(mean_raw: float, sd_raw: float) -> tuple[float, float]:
    """Log-scale (mu, sigma) of a lognormal with the given raw-scale moments.

    mu = ln(mean^2 / sqrt(mean^2 + sd^2)), sigma = sqrt(ln(1 + sd^2/mean^2)).
    """
    if mean_raw <= 0:
        raise ValueError(f"raw mean must be positive, got {mean_raw}")
    m2 = mean_raw * mean_raw
    s2 = sd_raw * sd_raw
    mu = math.log(m2 / math.sqrt(m2 + s2))
    sigma = math.sqrt(math.log(1.0 + s2 / m2))
    return mu, sigma


@dataclass(frozen=True)
class LogScaleParams:
    """Per-dose, per-visit log-scale means plus the common sigma."""

    mu0: float
    sigma: float
    mu: tuple[tuple[float, float, float], ...]  # [dose][visit], visit 0 = baseline


def build_log_params(scn: ScenarioSpec) -> LogScaleParams:
    mu0, sigma = lognormal_params(scn.baseline_mean, scn.baseline_sd)
    rows = []
    for dose in range(4):
        shifts = []
        for t in range(2):
            r = scn.r[dose][t]
            if r >= 1.0:
                raise ValueError("reduction rate 1 is modeled through the responder atom, not r")
            shifts.append(mu0 + math.log(1.0 - r))
        rows.append((mu0, shifts[0], shifts[1]))
    return LogScaleParams(mu0=mu0, sigma=sigma, mu=tuple(rows))


@dataclass(frozen=True)
class Ar1Covariance:
    sigma: float
    rho: float
    matrix: np.ndarray
    cholesky: np.ndarray


def build_covariance(sigma: float, rho: float) -> Ar1Covariance:
    """AR(1) covariance of the three log-scale visits: equal variances,
    correlation rho between adjacent visits and rho^2 between baseline and
    Month 12."""
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    corr = np.array([
        [1.0, rho, rho * rho],
        [rho, 1.0, rho],
        [rho * rho, rho, 1.0],
    ])
    matrix = sigma * sigma * corr
    return Ar1Covariance(sigma=sigma, rho=rho, matrix=matrix,
                         cholesky=np.linalg.cholesky(matrix))


def sample_arm(b: int, n: int, mu_vec: np.ndarray, chol: np.ndarray, pi: float,
               rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``b`` independent arms of ``n`` subjects each.

    Returns ``(x, responder)`` with ``x`` of shape (b, n, 3) on the raw scale
    and the responder zeroing already applied to the two follow-up visits.
    """
    y = rng.standard_normal((b, n, 3)) @ chol.T + mu_vec
    x = np.exp(y)
    responder = rng.random((b, n)) < pi
    x[:, :, 1][responder] = 0.0
    x[:, :, 2][responder] = 0.0
    return x, responder


def sample_cohort(n_per_arm: dict[int, int], scn: ScenarioSpec, stage: int,
                  rng: np.random.Generator) -> list[SubjectRecord]:
    """Sample one cohort as a flat record list, arms in ascending dose order."""
    if any(n < 0 for n in n_per_arm.values()):
        raise ValueError("arm sizes must be nonnegative")
    params = build_log_params(scn)
    cov = build_covariance(params.sigma, scn.rho)
    records: list[SubjectRecord] = []
    for dose in sorted(n_per_arm):
        n = n_per_arm[dose]
        if n == 0:
            continue
        x, responder = sample_arm(1, n, np.asarray(params.mu[dose]), cov.cholesky,
                                  scn.pi[dose], rng)
        for i in range(n):
            records.append(SubjectRecord(
                dose=int(dose), stage=stage,
                x0=float(x[0, i, 0]), x1=float(x[0, i, 1]), x2=float(x[0, i, 2]),
                responder=bool(responder[0, i]),
            ))
    return records


# ---------------------------------------------------------------------------
# Cohort CSV round trip (the `analyze` ingestion format)
# ---------------------------------------------------------------------------

def write_cohort_csv(records: list[SubjectRecord], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COHORT_CSV_HEADER)
        for i, rec in enumerate(records):
            writer.writerow([i, rec.stage, rec.dose,
                             f"{rec.x0:.10g}", f"{rec.x1:.10g}", f"{rec.x2:.10g}",
                             int(rec.responder)])


def read_cohort_csv(path: str) -> list[SubjectRecord]:
    """Parse a cohort CSV, validating the schema and basic invariants."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"empty data file: {path}") from None
        missing = [c for c in COHORT_CSV_HEADER if c not in header]
        extra = [c for c in header if c not in COHORT_CSV_HEADER]
        if missing or extra:
            raise ValueError(
                f"cohort CSV schema mismatch: missing columns {missing}, unexpected columns {extra}"
            )
        col = {name: header.index(name) for name in COHORT_CSV_HEADER}
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rec = SubjectRecord(
                    dose=int(row[col["dose"]]),
                    stage=int(row[col["stage"]]),
                    x0=float(row[col["x0"]]),
                    x1=float(row[col["x1"]]),
                    x2=float(row[col["x2"]]),
                    responder=bool(int(row[col["responder"]])),
                )
            except (ValueError, IndexError) as exc:
                raise ValueError(f"bad cohort row at line {lineno}: {exc}") from None
            if rec.dose not in (0, 1, 2, 3) or rec.stage not in (1, 2):
                raise ValueError(f"bad dose/stage at line {lineno}")
            if min(rec.x0, rec.x1, rec.x2) < 0:
                raise ValueError(f"negative parasite load at line {lineno}")
            records.append(rec)
    if not records:
        raise ValueError(f"empty data file: {path}")
    return records
