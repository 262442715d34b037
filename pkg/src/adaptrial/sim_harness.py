"""Scenario-evaluation campaigns and operating-characteristic aggregation.

A campaign (S1..S5) sweeps one design axis while holding the others at their
defaults, crossing it with the five effect scenarios and the requested test
methods. Each cell simulates the full two-stage pipeline ``runs`` times and
reduces the replicates to operating characteristics.

Randomness is counter-based: every (cell, chunk) pair derives its own
generator from ``SeedSequence((master_seed, cell_index, chunk_index))``, so
results are byte-identical for a given spec regardless of thread count or
execution order. Replicates are processed in fixed-size chunks; within a
chunk the whole pipeline is vectorized across replicates.
"""
from __future__ import annotations

import csv
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .adaptive_engine import batch_closed_test
from .analysis import batch_stage_pvalues
from .comparators import batch_ma1, batch_ma2
from .datagen import build_covariance, build_log_params, sample_arm
from .estimation import (batch_inverse_normal, batch_single_stage,
                         batch_weighted, oracle_true_concordance)
from .trial_model import (ALPHA1_GRID, METHODS, N1_GRID, RHO_GRID,
                          SCENARIO_LABELS, DesignConfig, ScenarioSpec,
                          allocate_stage1, allocate_stage2, build_scenario)

CHUNK = 2048
#: Stream tags keeping oracle and comparator draws disjoint from cell streams.
ORACLE_STREAM_TAG = 0x0AC1E
COMPARATOR_STREAM_TAG = 0xC03412
DEFAULT_RUNS = 50000
DEFAULT_MASTER_SEED = 90823

CASE_NAMES = ("i", "ii", "iii", "iv")
CASE_SELECTION = {1: frozenset({1, 2}), 2: frozenset({1, 2}),
                  3: frozenset({2, 3}), 4: frozenset({3})}
ESTIMATORS = ("unconditional", "conditional", "inverse_normal")

#: sim id -> (axis name, scenario variant, default grid)
SIM_DESIGNS: dict[str, tuple[str, str, tuple]] = {
    "S1": ("alpha1", "standard", ALPHA1_GRID),
    "S2": ("alpha1", "modified_rates", ALPHA1_GRID),
    "S3": ("alpha1", "modified_baseline", ALPHA1_GRID),
    "S4": ("rho", "standard", RHO_GRID),
    "S5": ("n1", "standard", N1_GRID),
}

CSV_HEADER = "disease,sim_id,scenario,method,alpha1,n1,rho,dose,metric,value,mc_se"
COMPARATOR_CSV_HEADER = "disease,sim_id,scenario,method,design,dose,metric,value,mc_se"


@dataclass(frozen=True)
class SimulationSpec:
    """One campaign: a design axis sweep crossed with scenarios and methods."""

    disease: str
    sim_id: str
    grid: tuple = ()            # empty -> the full default axis grid
    scenarios: tuple[str, ...] = SCENARIO_LABELS
    methods: tuple[str, ...] = ("wilcox_c",)
    runs: int = DEFAULT_RUNS
    master_seed: int = DEFAULT_MASTER_SEED
    realloc_mode: str = "strict"
    allow_offgrid: bool = False
    #: Estimation roughly doubles a cell's cost; campaigns that only need
    #: rejection rates can turn it off. Rank methods only either way.
    estimates: bool = True

    def __post_init__(self) -> None:
        if self.sim_id not in SIM_DESIGNS:
            raise ValueError(f"unknown sim id {self.sim_id!r}; expected one of "
                             f"{sorted(SIM_DESIGNS)}")
        axis, _, default = SIM_DESIGNS[self.sim_id]
        if not self.grid:
            object.__setattr__(self, "grid", default)
        elif not self.allow_offgrid:
            bad = [v for v in self.grid if v not in default]
            if bad:
                raise ValueError(
                    f"{axis} values {bad} are outside the studied grid "
                    f"{default}; pass allow_offgrid to run them anyway")
        unknown = [s for s in self.scenarios if s not in SCENARIO_LABELS]
        if unknown:
            raise ValueError(f"unknown scenarios {unknown}")
        bad_methods = [m for m in self.methods if m not in METHODS]
        if bad_methods:
            raise ValueError(f"unknown methods {bad_methods}")
        if self.runs < 1:
            raise ValueError("runs must be positive")

    @property
    def axis(self) -> str:
        return SIM_DESIGNS[self.sim_id][0]

    @property
    def variant(self) -> str:
        return SIM_DESIGNS[self.sim_id][1]


@dataclass(frozen=True)
class CellSpec:
    index: int
    axis: str
    axis_value: float
    scenario: ScenarioSpec
    cfg: DesignConfig


def campaign_cells(spec: SimulationSpec) -> list[CellSpec]:
    """Fixed cell enumeration: grid value x scenario x method."""
    cells = []
    for value in spec.grid:
        for label in spec.scenarios:
            for method in spec.methods:
                kwargs = dict(N=200, N1=120, alpha=0.025, alpha1=0.3,
                              method=method, realloc_mode=spec.realloc_mode)
                rho = 0.5
                if spec.axis == "alpha1":
                    kwargs["alpha1"] = float(value)
                elif spec.axis == "n1":
                    kwargs["N1"] = int(value)
                else:
                    rho = float(value)
                scn = build_scenario(label, spec.disease, rho=rho,
                                     variant=spec.variant)
                cells.append(CellSpec(index=len(cells), axis=spec.axis,
                                      axis_value=float(value),
                                      scenario=scn, cfg=DesignConfig(**kwargs)))
    return cells


# ---------------------------------------------------------------------------
# Vectorized replicate pipeline
# ---------------------------------------------------------------------------

@dataclass
class ChunkData:
    """Replicate-stacked outcomes of one simulated batch."""

    case: np.ndarray                  # (B,) int, 1..4
    selected: np.ndarray              # (B, 3) bool
    rejected: np.ndarray              # (B, 3) bool
    p_surrogate: dict[int, np.ndarray]
    p_stage1: dict[int, np.ndarray]
    p_stage2: dict[int, np.ndarray]   # NaN where the dose was not continued
    est_point: dict[tuple[str, int], np.ndarray]  # NaN where absent
    est_ci: dict[tuple[str, int], np.ndarray]


def _simulate_batch(cfg: DesignConfig, scn: ScenarioSpec,
                    rng: np.random.Generator, b: int,
                    want_estimates: bool) -> ChunkData:
    params = build_log_params(scn)
    chol = build_covariance(params.sigma, scn.rho).cholesky
    arms1 = allocate_stage1(cfg.N1)

    x1 = {dose: sample_arm(b, arms1[dose], np.asarray(params.mu[dose]), chol,
                           scn.pi[dose], rng)[0]
          for dose in (0, 1, 2)}
    p_m6, _ = batch_stage_pvalues(x1, [1, 2], cfg.method, endpoint_time=1)
    p12, th1 = batch_stage_pvalues(x1, [1, 2], cfg.method, endpoint_time=2)

    low_ok = p_m6[1] < cfg.alpha1
    med_ok = p_m6[2] < cfg.alpha1
    case = np.where(low_ok & med_ok, 1,
                    np.where(low_ok, 2, np.where(med_ok, 3, 4)))

    selected = np.zeros((b, 3), dtype=bool)
    rejected = np.zeros((b, 3), dtype=bool)
    p2 = {d: np.full(b, np.nan) for d in (1, 2, 3)}
    est_point = {(e, d): np.full(b, np.nan) for e in ESTIMATORS for d in (1, 2, 3)}
    est_ci = {(e, d): np.full(b, np.nan) for e in ESTIMATORS for d in (1, 2, 3)}

    def fill(estimator: str, dose: int, idx: np.ndarray,
             point: np.ndarray, ci: np.ndarray) -> None:
        est_point[(estimator, dose)][idx] = point
        est_ci[(estimator, dose)][idx] = ci

    # Stage 2, one group per selection outcome, in fixed order so the random
    # stream is consumed identically however the cases fall.
    for code, k_set in ((1, frozenset({1, 2})), (3, frozenset({2, 3})),
                        (4, frozenset({3}))):
        mask = (case == code) | ((case == 2) if code == 1 else False)
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            continue
        for dose in sorted(k_set):
            selected[idx, dose - 1] = True
        arms2 = allocate_stage2(cfg.N2, k_set)
        x2 = {dose: sample_arm(idx.size, arms2[dose], np.asarray(params.mu[dose]),
                               chol, scn.pi[dose], rng)[0]
              for dose in sorted(arms2)}
        actives = sorted(k_set)
        p2_g, th2 = batch_stage_pvalues(x2, actives, cfg.method, endpoint_time=2)
        for dose in actives:
            p2[dose][idx] = p2_g[dose]
        p1_g = {1: p12[1][idx], 2: p12[2][idx]}
        rejected[idx] = batch_closed_test(p1_g, p2_g, k_set, cfg)

        if not want_estimates:
            continue
        n1c, n2c = arms1[0], arms2[0]
        for dose in (1, 2):
            if dose in k_set:
                th1_g, th2_g = th1[dose][idx], th2[dose]
                m1, m2 = arms1[dose], arms2[dose]
                point, ci = batch_weighted(th1_g, m1, n1c, th2_g, m2, n2c)
                fill("unconditional", dose, idx, point, ci)
                fill("conditional", dose, idx, point, ci)
                point, ci = batch_inverse_normal(th1_g, m1, n1c, th2_g, m2, n2c,
                                                 cfg.w1, cfg.w2)
                fill("inverse_normal", dose, idx, point, ci)
            else:
                point, ci = batch_single_stage(th1[dose][idx], arms1[dose], n1c)
                fill("unconditional", dose, idx, point, ci)
        if 3 in k_set:
            # The added dose has one stage of data, so every estimator
            # reduces to the same single-stage score estimate.
            point, ci = batch_single_stage(th2[3], arms2[3], n2c)
            for estimator in ESTIMATORS:
                fill(estimator, 3, idx, point, ci)

    return ChunkData(case=case, selected=selected, rejected=rejected,
                     p_surrogate=p_m6, p_stage1=p12, p_stage2=p2,
                     est_point=est_point, est_ci=est_ci)

@dataclass(frozen=True)
class ReplicateRecord:
    """One replicate's outcomes in scalar form."""

    case: str
    selected: frozenset[int]
    rejected: frozenset[int]
    p_surrogate: dict[int, float]
    p_stage1: dict[int, float]
    p_stage2: dict[int, float]
    estimates: dict[tuple[str, int], tuple[float, float]]  # (point, ci_lower)


def run_replicate(cfg: DesignConfig, scn: ScenarioSpec,
                  rng: np.random.Generator) -> ReplicateRecord:
    """Run the full two-stage pipeline once. The campaign path runs the same
    pipeline on replicate batches; this scalar form exists for fixtures and
    spot checks."""
    data = _simulate_batch(cfg, scn, rng, b=1,
                           want_estimates=cfg.method == "wilcox_c")
    case = int(data.case[0])
    estimates = {}
    for key, points in data.est_point.items():
        if not np.isnan(points[0]):
            estimates[key] = (float(points[0]), float(data.est_ci[key][0]))
    return ReplicateRecord(
        case=CASE_NAMES[case - 1],
        selected=CASE_SELECTION[case],
        rejected=frozenset(int(d) for d in (1, 2, 3) if data.rejected[0, d - 1]),
        p_surrogate={d: float(p[0]) for d, p in data.p_surrogate.items()},
        p_stage1={d: float(p[0]) for d, p in data.p_stage1.items()},
        p_stage2={d: float(p[0]) for d, p in data.p_stage2.items()
                  if not np.isnan(p[0])},
        estimates=estimates,
    )


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OperatingCharacteristics:
    runs: int
    disjunctive_power: float
    case_probs: tuple[float, float, float, float]
    selection_prob: tuple[float, float, float]
    marginal_power: tuple[float, float, float]
    conditional_power: tuple[float, float, float]   # NaN when never selected
    oracle: dict[int, float] | None
    # estimator -> dose -> (value, mc_se); empty when estimates were not run
    bias: dict[str, dict[int, tuple[float, float]]]
    mean_ci_lower: dict[str, dict[int, tuple[float, float]]]
    coverage: dict[str, dict[int, tuple[float, float]]]

    def proportion_se(self, p: float) -> float:
        return float(np.sqrt(p * (1.0 - p) / self.runs))

    def metric_rows(self):
        """Yield (dose, metric, value, mc_se) in a fixed order."""
        yield "", "disjunctive_power", self.disjunctive_power, \
            self.proportion_se(self.disjunctive_power)
        for name, p in zip(CASE_NAMES, self.case_probs):
            yield "", f"case_prob_{name}", p, self.proportion_se(p)
        for dose in (1, 2, 3):
            yield str(dose), "selection_prob", self.selection_prob[dose - 1], \
                self.proportion_se(self.selection_prob[dose - 1])
            yield str(dose), "marginal_power", self.marginal_power[dose - 1], \
                self.proportion_se(self.marginal_power[dose - 1])
            n_sel = self.selection_prob[dose - 1] * self.runs
            cond = self.conditional_power[dose - 1]
            cond_se = float(np.sqrt(cond * (1.0 - cond) / n_sel)) if n_sel else float("nan")
            yield str(dose), "conditional_power", cond, cond_se
        if self.oracle is not None:
            for dose in (1, 2, 3):
                yield str(dose), "oracle_concordance", self.oracle[dose], 0.0
            for estimator in ESTIMATORS:
                for dose in (1, 2, 3):
                    for metric, table in (("bias", self.bias),
                                          ("mean_ci_lower", self.mean_ci_lower),
                                          ("coverage", self.coverage)):
                        value, se = table[estimator][dose]
                        yield str(dose), f"{metric}_{estimator}", value, se


def _aggregate_arrays(case: np.ndarray, selected: np.ndarray,
                      rejected: np.ndarray,
                      est_point: dict[tuple[str, int], np.ndarray],
                      est_ci: dict[tuple[str, int], np.ndarray],
                      oracle: dict[int, float] | None,
                      ) -> OperatingCharacteristics:
    runs = case.shape[0]
    if runs == 0:
        raise ValueError("cannot aggregate zero replicates")
    disjunctive = float(rejected.any(axis=1).mean())
    case_probs = tuple(float((case == c).mean()) for c in (1, 2, 3, 4))
    selection = tuple(float(selected[:, d].mean()) for d in range(3))
    marginal = tuple(float(rejected[:, d].mean()) for d in range(3))
    conditional = tuple(
        float(rejected[sel, d].mean()) if (sel := selected[:, d]).any() else float("nan")
        for d in range(3))

    bias: dict[str, dict[int, tuple[float, float]]] = {}
    mean_ci: dict[str, dict[int, tuple[float, float]]] = {}
    coverage: dict[str, dict[int, tuple[float, float]]] = {}
    if oracle is not None:
        for estimator in ESTIMATORS:
            bias[estimator], mean_ci[estimator], coverage[estimator] = {}, {}, {}
            for dose in (1, 2, 3):
                points = est_point[(estimator, dose)]
                cis = est_ci[(estimator, dose)]
                mask = ~np.isnan(points)
                n = int(mask.sum())
                if n == 0:
                    nan = (float("nan"), float("nan"))
                    bias[estimator][dose] = nan
                    mean_ci[estimator][dose] = nan
                    coverage[estimator][dose] = nan
                    continue
                pts, cls = points[mask], cis[mask]
                sd = float(pts.std(ddof=1)) if n > 1 else 0.0
                bias[estimator][dose] = (float(pts.mean()) - oracle[dose],
                                         sd / float(np.sqrt(n)))
                sd_ci = float(cls.std(ddof=1)) if n > 1 else 0.0
                mean_ci[estimator][dose] = (float(cls.mean()),
                                            sd_ci / float(np.sqrt(n)))
                cov = float((cls <= oracle[dose]).mean())
                coverage[estimator][dose] = (
                    cov, float(np.sqrt(cov * (1.0 - cov) / n)))

    return OperatingCharacteristics(
        runs=runs, disjunctive_power=disjunctive, case_probs=case_probs,
        selection_prob=selection, marginal_power=marginal,
        conditional_power=conditional, oracle=oracle, bias=bias,
        mean_ci_lower=mean_ci, coverage=coverage)


def aggregate(replicates, oracle: dict[int, float] | None = None,
              ) -> OperatingCharacteristics:
    """Reduce a list of ReplicateRecord to operating characteristics.

    This is the reference reduction; the campaign applies the same math to
    replicate-stacked arrays.
    """
    replicates = list(replicates)
    if not replicates:
        raise ValueError("cannot aggregate zero replicates")
    b = len(replicates)
    case = np.array([CASE_NAMES.index(r.case) + 1 for r in replicates])
    selected = np.zeros((b, 3), dtype=bool)
    rejected = np.zeros((b, 3), dtype=bool)
    est_point = {(e, d): np.full(b, np.nan) for e in ESTIMATORS for d in (1, 2, 3)}
    est_ci = {(e, d): np.full(b, np.nan) for e in ESTIMATORS for d in (1, 2, 3)}
    for i, rec in enumerate(replicates):
        for dose in rec.selected:
            selected[i, dose - 1] = True
        for dose in rec.rejected:
            rejected[i, dose - 1] = True
        for key, (point, ci) in rec.estimates.items():
            est_point[key][i] = point
            est_ci[key][i] = ci
    return _aggregate_arrays(case, selected, rejected, est_point, est_ci, oracle)


# ---------------------------------------------------------------------------
# Oracle cache
# ---------------------------------------------------------------------------

def _oracle_key(scn: ScenarioSpec, dose: int, t: int) -> tuple:
    # The between-visit correlation does not move the single-visit marginal,
    # so it is deliberately absent: cells along the rho axis share oracles.
    return (scn.baseline_mean, scn.baseline_sd, scn.r, scn.pi, dose, t)


def _oracle_rng(master_seed: int, key: tuple) -> np.random.Generator:
    digest = zlib.crc32(repr(key).encode())
    ss = np.random.SeedSequence((master_seed, ORACLE_STREAM_TAG, digest))
    return np.random.Generator(np.random.Philox(ss))


def precompute_oracles(cells: list[CellSpec], master_seed: int,
                       n_scale: int = 5000,
                       cache: dict | None = None) -> dict:
    """Resolve every (scenario marginal, dose) oracle a campaign will need."""
    cache = {} if cache is None else cache
    for cell in cells:
        if cell.cfg.method != "wilcox_c":
            continue
        for dose in (1, 2, 3):
            key = _oracle_key(cell.scenario, dose, 2)
            if key not in cache:
                cache[key] = oracle_true_concordance(
                    cell.scenario, dose, t=2, n_scale=n_scale,
                    rng=_oracle_rng(master_seed, key))
    return cache


# ---------------------------------------------------------------------------
# Campaign runner
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CellResult:
    spec: SimulationSpec
    cell: CellSpec
    oc: OperatingCharacteristics | None
    status: str  # "ok" or "error: ..."


def _run_cell(spec: SimulationSpec, cell: CellSpec,
              oracle_cache: dict, n_scale: int) -> CellResult:
    try:
        want_est = cell.cfg.method == "wilcox_c" and spec.estimates
        chunks = []
        done = 0
        chunk_index = 0
        while done < spec.runs:
            b = min(CHUNK, spec.runs - done)
            ss = np.random.SeedSequence((spec.master_seed, cell.index, chunk_index))
            rng = np.random.Generator(np.random.Philox(ss))
            chunks.append(_simulate_batch(cell.cfg, cell.scenario, rng, b, want_est))
            done += b
            chunk_index += 1
        case = np.concatenate([c.case for c in chunks])
        selected = np.concatenate([c.selected for c in chunks])
        rejected = np.concatenate([c.rejected for c in chunks])
        keys = [(e, d) for e in ESTIMATORS for d in (1, 2, 3)]
        est_point = {k: np.concatenate([c.est_point[k] for c in chunks]) for k in keys}
        est_ci = {k: np.concatenate([c.est_ci[k] for c in chunks]) for k in keys}
        oracle = None
        if want_est:
            oracle = {dose: oracle_cache[_oracle_key(cell.scenario, dose, 2)]
                      for dose in (1, 2, 3)}
        oc = _aggregate_arrays(case, selected, rejected, est_point, est_ci, oracle)
        return CellResult(spec=spec, cell=cell, oc=oc, status="ok")
    except Exception as exc:  # partial failures must not kill the campaign
        return CellResult(spec=spec, cell=cell, oc=None,
                          status=f"error: {type(exc).__name__}: {exc}")


def run_campaign(spec: SimulationSpec, threads: int = 1,
                 oracle_n_scale: int = 5000) -> list[CellResult]:
    cells = campaign_cells(spec)
    oracle_cache = (precompute_oracles(cells, spec.master_seed, oracle_n_scale)
                    if spec.estimates else {})
    if threads <= 1:
        return [_run_cell(spec, cell, oracle_cache, oracle_n_scale)
                for cell in cells]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(
            lambda cell: _run_cell(spec, cell, oracle_cache, oracle_n_scale),
            cells))


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return "%.10g" % float(x)


def write_csv(results: list[CellResult], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER.split(","))
        for res in results:
            spec, cell = res.spec, res.cell
            prefix = [spec.disease, spec.sim_id, cell.scenario.label,
                      cell.cfg.method, _fmt(cell.cfg.alpha1),
                      str(cell.cfg.N1), _fmt(cell.scenario.rho)]
            if res.oc is None:
                writer.writerow(prefix + ["", "error", "nan", "nan"])
                continue
            for dose, metric, value, se in res.oc.metric_rows():
                writer.writerow(prefix + [dose, metric, _fmt(value), _fmt(se)])


def write_plotdata(results: list[CellResult], stem: str) -> list[str]:
    """Tidy per-figure CSVs: rejection probabilities and selection
    probabilities against the campaign's varied axis."""
    power_path = f"{stem}_power.csv"
    selection_path = f"{stem}_selection.csv"
    header = ["disease", "sim_id", "scenario", "method", "axis", "axis_value",
              "dose", "metric", "value"]
    with open(power_path, "w", newline="") as power_fh, \
            open(selection_path, "w", newline="") as sel_fh:
        power = csv.writer(power_fh, lineterminator="\n")
        sel = csv.writer(sel_fh, lineterminator="\n")
        power.writerow(header)
        sel.writerow(header)
        for res in results:
            if res.oc is None:
                continue
            spec, cell = res.spec, res.cell
            prefix = [spec.disease, spec.sim_id, cell.scenario.label,
                      cell.cfg.method, cell.axis, _fmt(cell.axis_value)]
            power.writerow(prefix + ["", "disjunctive_power",
                                     _fmt(res.oc.disjunctive_power)])
            for dose in (1, 2, 3):
                power.writerow(prefix + [str(dose), "marginal_power",
                                         _fmt(res.oc.marginal_power[dose - 1])])
                sel.writerow(prefix + [str(dose), "selection_prob",
                                       _fmt(res.oc.selection_prob[dose - 1])])
            for name, p in zip(CASE_NAMES, res.oc.case_probs):
                sel.writerow(prefix + ["", f"case_prob_{name}", _fmt(p)])
    return [power_path, selection_path]


# ---------------------------------------------------------------------------
# Benchmark-design campaign
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComparatorCellResult:
    disease: str
    sim_id: str
    scenario: str
    method: str
    design: str
    runs: int
    marginal_power: tuple[float, float, float]
    disjunctive_power: float
    study2_run_prob: float  # NaN for designs without a gated second study


def run_comparator_campaign(disease: str, scenarios=SCENARIO_LABELS,
                            methods=("wilcox_c",), runs: int = DEFAULT_RUNS,
                            master_seed: int = DEFAULT_MASTER_SEED,
                            n_total: int = 200, alpha: float = 0.025,
                            rho: float = 0.5, sim_id: str = "S1",
                            threads: int = 1) -> list[ComparatorCellResult]:
    cells = [(label, method, design)
             for label in scenarios for method in methods
             for design in ("MA1", "MA2")]

    def _run(args: tuple[int, tuple[str, str, str]]) -> ComparatorCellResult:
        index, (label, method, design) = args
        scn = build_scenario(label, disease, rho=rho)
        rejected = np.zeros((0, 3), dtype=bool)
        ran2 = []
        done = 0
        chunk_index = 0
        parts = []
        while done < runs:
            b = min(CHUNK, runs - done)
            ss = np.random.SeedSequence(
                (master_seed, COMPARATOR_STREAM_TAG, index, chunk_index))
            rng = np.random.Generator(np.random.Philox(ss))
            if design == "MA1":
                batch = batch_ma1(scn, n_total, alpha, method, rng, b)
                parts.append(batch.rejected)
                ran2.append(batch.ran_study2)
            else:
                rej, _ = batch_ma2(scn, n_total, alpha, method, rng, b)
                parts.append(rej)
            done += b
            chunk_index += 1
        rejected = np.concatenate(parts)
        study2 = float(np.concatenate(ran2).mean()) if ran2 else float("nan")
        return ComparatorCellResult(
            disease=disease, sim_id=sim_id, scenario=label, method=method,
            design=design, runs=runs,
            marginal_power=tuple(float(rejected[:, d].mean()) for d in range(3)),
            disjunctive_power=float(rejected.any(axis=1).mean()),
            study2_run_prob=study2)

    indexed = list(enumerate(cells))
    if threads <= 1:
        return [_run(item) for item in indexed]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_run, indexed))


def write_comparator_csv(results: list[ComparatorCellResult], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COMPARATOR_CSV_HEADER.split(","))
        for res in results:
            prefix = [res.disease, res.sim_id, res.scenario, res.method, res.design]

            def se(p: float) -> str:
                return _fmt(np.sqrt(p * (1.0 - p) / res.runs))

            writer.writerow(prefix + ["", "disjunctive_power",
                                      _fmt(res.disjunctive_power),
                                      se(res.disjunctive_power)])
            for dose in (1, 2, 3):
                p = res.marginal_power[dose - 1]
                writer.writerow(prefix + [str(dose), "marginal_power", _fmt(p), se(p)])
            if res.design == "MA1":
                writer.writerow(prefix + ["", "study2_run_prob",
                                          _fmt(res.study2_run_prob),
                                          se(res.study2_run_prob)])
