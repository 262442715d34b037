"""Two-stage adaptive dose-selection trial: design engine and simulation lab.

The package implements a three-arm-plus-placebo two-stage design where an
interim look at a surrogate endpoint drops or keeps the low/medium doses and
adds a high dose, the final analysis runs a closed test on partial
conditional error thresholds, and a Monte Carlo harness evaluates the
operating characteristics against single-stage benchmark designs.
"""
from .adaptive_engine import (ClosedTestReport, batch_closed_test,
                              conditional_error_table, interim_select,
                              render_report, run_closed_test)
from .analysis import stage_concordances, stage_pvalues
from .comparators import FixedTrialResult, bonferroni_holm, run_ma1, run_ma2
from .datagen import (build_covariance, build_log_params, lognormal_params,
                      read_cohort_csv, sample_cohort, write_cohort_csv)
from .estimation import (Concordance, ConcordanceEstimate, EstimationError,
                         estimate_conditional, estimate_inverse_normal,
                         estimate_unconditional, oracle_true_concordance)
from .sim_harness import (OperatingCharacteristics, SimulationSpec, aggregate,
                          run_campaign, run_comparator_campaign,
                          run_replicate, write_csv)
from .stat_kernel import (combine_pvalue, concordance, concordance_variance,
                          norm_cdf, norm_quantile, partial_conditional_error,
                          rank_sum_pvalue)
from .trial_model import (DesignConfig, ScenarioSpec, SelectionOutcome,
                          allocate_stage1, allocate_stage2, build_scenario,
                          builtin_scenarios)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
