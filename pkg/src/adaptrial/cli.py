"""Command-line surface.

Subcommands:

- ``simulate``: run a scenario-evaluation campaign and write the long-format
  operating-characteristics CSV.
- ``analyze``: run the interim or final analysis on an ingested cohort CSV.
- ``example``: regenerate a worked replicate and print its closed-test
  threshold lines.
- ``scenarios``: list the built-in effect scenarios for a disease.

Exit codes: 0 success, 1 validation error (bad flags, bad grid values, bad
input files), 2 unexpected runtime error.
"""
from __future__ import annotations

import json
import sys

import click
import numpy as np

from .adaptive_engine import interim_select, render_report, run_closed_test
from .analysis import stage_concordances, stage_pvalues
from .datagen import read_cohort_csv
from .estimation import (Concordance, estimate_conditional,
                         estimate_inverse_normal, estimate_unconditional)
from .sim_harness import (DEFAULT_MASTER_SEED, DEFAULT_RUNS, SIM_DESIGNS,
                          SimulationSpec, run_campaign,
                          run_comparator_campaign, run_replicate,
                          write_comparator_csv, write_csv, write_plotdata)
from .trial_model import (DOSE_NAMES, METHODS, REALLOC_MODES, SCENARIO_LABELS,
                          VALID_SELECTIONS, VARIANTS, DesignConfig,
                          build_scenario)

DISEASE_ALIASES = {"mans": "mansonellosis", "oncho": "onchocerciasis",
                   "loa": "loiasis"}


def _json_safe(value: float):
    """NaN is not valid JSON; emit null instead."""
    if isinstance(value, float) and np.isnan(value):
        return None
    return value
EXAMPLE_SEED = 1905
EXAMPLE_SCENARIOS = {"trend": ("Trend (b)", "iii"),
                     "all-effective": ("All doses effective", "i")}


def _resolve_disease(value: str) -> str:
    full = DISEASE_ALIASES.get(value, value)
    if full not in DISEASE_ALIASES.values():
        raise click.UsageError(
            f"--disease: unknown disease {value!r}; expected one of "
            f"{sorted(DISEASE_ALIASES)} or a full name")
    return full


@click.group()
def cli() -> None:
    """Two-stage adaptive dose-selection trial: simulation and analysis."""


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

@cli.command()
@click.option("--disease", required=True,
              help="mans | oncho | loa (or full names)")
@click.option("--sim", "sim_id", required=True,
              type=click.Choice(sorted(SIM_DESIGNS)),
              help="campaign id; fixes the varied design axis")
@click.option("--runs", default=DEFAULT_RUNS, show_default=True, type=int)
@click.option("--seed", default=DEFAULT_MASTER_SEED, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="operating-characteristics CSV path")
@click.option("--method", "methods", multiple=True,
              type=click.Choice(METHODS),
              help="repeatable; default: all three methods")
@click.option("--alpha1", "alpha1_values", multiple=True, type=float,
              help="interim promise threshold grid (S1-S3)")
@click.option("--n1", "n1_values", multiple=True, type=int,
              help="stage-1 size grid (S5)")
@click.option("--rho", "rho_values", multiple=True, type=float,
              help="between-visit correlation grid (S4)")
@click.option("--scenario", "scenario_labels", multiple=True,
              type=click.Choice(SCENARIO_LABELS),
              help="repeatable; default: all five scenarios")
@click.option("--realloc", default="strict", show_default=True,
              type=click.Choice(REALLOC_MODES))
@click.option("--allow-offgrid", is_flag=True,
              help="permit grid values outside the studied design grids")
@click.option("--plotdata", is_flag=True,
              help="also write tidy per-figure CSVs next to --out")
@click.option("--comparators", "with_comparators", is_flag=True,
              help="also run the single-stage benchmark designs")
@click.option("--no-estimates", is_flag=True,
              help="skip estimator metrics (faster; rejection rates only)")
@click.option("--threads", default=1, show_default=True, type=int,
              envvar="ADAPTRIAL_THREADS")
@click.option("--format", "fmt", default="text",
              type=click.Choice(("text", "json")))
def simulate(disease, sim_id, runs, seed, out, methods, alpha1_values,
             n1_values, rho_values, scenario_labels, realloc, allow_offgrid,
             plotdata, with_comparators, no_estimates, threads, fmt):
    """Run one campaign and write its operating characteristics."""
    disease = _resolve_disease(disease)
    axis = SIM_DESIGNS[sim_id][0]
    grid_flags = {"alpha1": tuple(alpha1_values), "n1": tuple(n1_values),
                  "rho": tuple(rho_values)}
    for name, values in grid_flags.items():
        if values and name != axis:
            raise click.UsageError(
                f"--{name}: {sim_id} varies {axis}, not {name}")
    try:
        spec = SimulationSpec(
            disease=disease, sim_id=sim_id, grid=grid_flags[axis],
            scenarios=tuple(scenario_labels) or SCENARIO_LABELS,
            methods=tuple(methods) or METHODS, runs=runs, master_seed=seed,
            realloc_mode=realloc, allow_offgrid=allow_offgrid,
            estimates=not no_estimates)
    except ValueError as exc:
        raise click.UsageError(f"--{axis}: {exc}") from exc

    results = run_campaign(spec, threads=threads)
    write_csv(results, out)
    written = [out]
    stem = out[:-4] if out.endswith(".csv") else out
    if plotdata:
        written += write_plotdata(results, stem)
    comparator_results = []
    if with_comparators:
        comparator_results = run_comparator_campaign(
            disease, scenarios=spec.scenarios, methods=spec.methods,
            runs=runs, master_seed=seed, sim_id=sim_id, threads=threads)
        comparator_path = f"{stem}_comparators.csv"
        write_comparator_csv(comparator_results, comparator_path)
        written.append(comparator_path)

    if fmt == "json":
        payload = {"files": written, "cells": []}
        for res in results:
            rows = ([{"dose": dose, "metric": metric,
                      "value": _json_safe(value), "mc_se": _json_safe(se)}
                     for dose, metric, value, se
                     in res.oc.metric_rows()] if res.oc else [])
            payload["cells"].append({
                "axis": res.cell.axis, "axis_value": res.cell.axis_value,
                "scenario": res.cell.scenario.label,
                "method": res.cell.cfg.method, "status": res.status,
                "metrics": rows})
        payload["comparators"] = [
            {"design": c.design, "scenario": c.scenario, "method": c.method,
             "marginal_power": list(c.marginal_power),
             "disjunctive_power": c.disjunctive_power}
            for c in comparator_results]
        click.echo(json.dumps(payload))
        return

    click.echo(f"campaign {sim_id} ({disease}): {len(results)} cells, "
               f"{runs} runs each -> {out}")
    for res in results:
        cell = res.cell
        if res.oc is None:
            click.echo(f"  {cell.axis}={cell.axis_value:g} | "
                       f"{cell.scenario.label:<27} | {cell.cfg.method:<9} | "
                       f"{res.status}")
            continue
        marg = "/".join(f"{p:.3f}" for p in res.oc.marginal_power)
        click.echo(f"  {cell.axis}={cell.axis_value:g} | "
                   f"{cell.scenario.label:<27} | {cell.cfg.method:<9} | "
                   f"disjunctive {res.oc.disjunctive_power:.4f} | "
                   f"marginal {marg}")
    for comp in comparator_results:
        marg = "/".join(f"{p:.3f}" for p in comp.marginal_power)
        click.echo(f"  {comp.design} | {comp.scenario:<27} | "
                   f"{comp.method:<9} | disjunctive "
                   f"{comp.disjunctive_power:.4f} | marginal {marg}")


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def _final_estimates(stage1, stage2, selected, cfg):
    """Rows of (dose, estimator, point, ci_lower) for the final report."""
    th1 = stage_concordances(stage1, endpoint_time=2)
    th2 = stage_concordances(stage2, endpoint_time=2)
    rows = []
    for dose in (1, 2, 3):
        c1 = Concordance(*th1[dose]) if dose in th1 else None
        c2 = Concordance(*th2[dose]) if dose in th2 else None
        if c1 is None and c2 is None:
            continue
        unconditional = estimate_unconditional(c1, c2, dose)
        rows.append((dose, "unconditional", unconditional.point,
                     unconditional.ci_lower))
        conditional = estimate_conditional(c1, c2, dose in selected, dose)
        if conditional is not None:
            rows.append((dose, "conditional", conditional.point,
                         conditional.ci_lower))
        if c1 is not None and c2 is not None:
            invn = estimate_inverse_normal(c1, c2, cfg.w1, cfg.w2, dose)
            rows.append((dose, "inverse_normal", invn.point, invn.ci_lower))
        elif c2 is not None and dose in selected:
            # one stage of data: the combined estimator reduces to the
            # single-stage score estimate
            rows.append((dose, "inverse_normal", unconditional.point,
                         unconditional.ci_lower))
    return rows


@cli.command()
@click.option("--stage", required=True, type=click.Choice(("interim", "final")))
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--format", "fmt", default="text",
              type=click.Choice(("text", "json")))
def analyze(stage, data_path, config_path, fmt):
    """Interim selection or final closed-test analysis of a cohort CSV."""
    with open(config_path) as fh:
        cfg = DesignConfig.loads(fh.read())
    records = read_cohort_csv(data_path)
    stage1 = [r for r in records if r.stage == 1]
    if not stage1:
        raise ValueError("no stage-1 records in the data file")

    if stage == "interim":
        p6 = stage_pvalues(stage1, cfg.method, endpoint_time=1)
        outcome = interim_select(p6, cfg)
        if fmt == "json":
            click.echo(json.dumps({
                "stage": "interim",
                "p_surrogate": {str(d): p6[d] for d in sorted(p6)},
                "case": outcome.case,
                "selected": sorted(outcome.K),
                "n2_per_arm": {str(d): n for d, n in
                               sorted(outcome.n2_per_arm.items())}}))
            return
        click.echo("interim analysis (Month-6 surrogate)")
        for dose in sorted(p6):
            click.echo(f"  p({DOSE_NAMES[dose]}) = {p6[dose]:.4f}")
        continued = " and ".join(DOSE_NAMES[d] for d in sorted(outcome.K))
        click.echo(f"case {outcome.case}: continue with the {continued} dose arms")
        alloc = ", ".join(f"{DOSE_NAMES[d]}={n}" for d, n in
                          sorted(outcome.n2_per_arm.items()))
        click.echo(f"stage-2 allocation: {alloc}")
        return

    stage2 = [r for r in records if r.stage == 2]
    if not stage2:
        raise ValueError("final analysis needs stage-2 records in the data file")
    selected = frozenset(r.dose for r in stage2 if r.dose != 0)
    if selected not in VALID_SELECTIONS:
        raise ValueError(f"stage-2 doses {sorted(selected)} do not form a "
                         "valid continued dose set")
    p1 = stage_pvalues(stage1, cfg.method, endpoint_time=2)
    p2 = stage_pvalues(stage2, cfg.method, endpoint_time=2)
    report = run_closed_test(p1, p2, selected, cfg)
    estimates = (_final_estimates(stage1, stage2, selected, cfg)
                 if cfg.method == "wilcox_c" else [])

    if fmt == "json":
        click.echo(json.dumps({
            "stage": "final", "mode": report.mode,
            "selected": sorted(selected),
            "rejected": sorted(report.rejected),
            "p_stage1": {str(d): p1[d] for d in sorted(p1)},
            "p_stage2": {str(d): p2[d] for d in sorted(p2)},
            "intersections": [
                {"hypotheses": list(r.hypotheses), "status": r.status,
                 "budget": r.budget,
                 "thresholds": {str(d): t for d, t in
                                sorted(r.thresholds.items())}}
                for r in report.intersections],
            "estimates": [{"dose": d, "estimator": e, "point": p,
                           "ci_lower": c} for d, e, p, c in estimates]}))
        return

    click.echo(render_report(report))
    if estimates:
        click.echo("")
        click.echo("estimates (one-sided 97.5% lower bounds):")
        click.echo(f"  {'dose':<8} {'estimator':<15} value")
        for dose, estimator, point, ci in estimates:
            click.echo(f"  {DOSE_NAMES[dose]:<8} {estimator:<15} "
                       f"{point:.2f} ({ci:.2f})")


# ---------------------------------------------------------------------------
# example
# ---------------------------------------------------------------------------

@cli.command()
@click.option("--scenario", "scenario_key", required=True,
              type=click.Choice(sorted(EXAMPLE_SCENARIOS)))
@click.option("--realloc", default="strict", show_default=True,
              type=click.Choice(REALLOC_MODES))
@click.option("--format", "fmt", default="text",
              type=click.Choice(("text", "json")))
def example(scenario_key, realloc, fmt):
    """Regenerate a worked replicate and print its threshold lines."""
    label, want_case = EXAMPLE_SCENARIOS[scenario_key]
    cfg = DesignConfig(method="wilcox_c", realloc_mode=realloc)
    scn = build_scenario(label, "mansonellosis", rho=0.5)
    rec = None
    for attempt in range(500):
        ss = np.random.SeedSequence((EXAMPLE_SEED, attempt))
        rng = np.random.Generator(np.random.Philox(ss))
        candidate = run_replicate(cfg, scn, rng)
        if candidate.case == want_case:
            rec = candidate
            break
    if rec is None:
        raise RuntimeError(f"no replicate with interim case {want_case} "
                           "found in 500 attempts")

    report = run_closed_test(rec.p_stage1, rec.p_stage2, rec.selected, cfg)
    if fmt == "json":
        click.echo(json.dumps({
            "scenario": label, "case": rec.case,
            "selected": sorted(rec.selected),
            "rejected": sorted(report.rejected),
            "p_surrogate": {str(d): p for d, p in sorted(rec.p_surrogate.items())},
            "p_stage1": {str(d): p for d, p in sorted(rec.p_stage1.items())},
            "p_stage2": {str(d): p for d, p in sorted(rec.p_stage2.items())},
            "conditional_errors": {
                str(d): {str(k): float(v) for k, v in table.items()}
                for d, table in report.conditional_errors.A.items()},
            "intersections": [
                {"hypotheses": list(r.hypotheses), "status": r.status,
                 "budget": r.budget,
                 "thresholds": {str(d): float(t) for d, t in
                                sorted(r.thresholds.items())}}
                for r in report.intersections]}))
        return
    click.echo(f"scenario: {label} (interim case {rec.case}, "
               f"continued doses {sorted(rec.selected)})")
    for dose in sorted(rec.p_surrogate):
        click.echo(f"  Month-6 p({DOSE_NAMES[dose]}) = {rec.p_surrogate[dose]:.4f}")
    click.echo("")
    click.echo(render_report(report))


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

@cli.command()
@click.option("--disease", required=True)
@click.option("--rho", default=0.5, show_default=True, type=float)
@click.option("--variant", default="standard", type=click.Choice(VARIANTS),
              show_default=True)
@click.option("--format", "fmt", default="text",
              type=click.Choice(("text", "json")))
def scenarios(disease, rho, variant, fmt):
    """List the built-in effect scenarios for a disease."""
    disease = _resolve_disease(disease)
    specs = [build_scenario(label, disease, rho=rho, variant=variant)
             for label in SCENARIO_LABELS]
    if fmt == "json":
        click.echo(json.dumps([s.to_json_dict() for s in specs]))
        return
    first = specs[0]
    click.echo(f"{disease} ({variant}): baseline mean {first.baseline_mean:g}, "
               f"sd {first.baseline_sd:g}, rho {rho:g}")
    click.echo(f"  {'scenario':<27} {'Month-6 reductions':<22} "
               f"{'Month-12 reductions':<22} responder rates")
    for s in specs:
        r6 = "/".join(f"{s.r[d][0]:.1f}" for d in (1, 2, 3))
        r12 = "/".join(f"{s.r[d][1]:.1f}" for d in (1, 2, 3))
        pi = "/".join(f"{p:.2f}" for p in s.pi)
        click.echo(f"  {s.label:<27} {r6:<22} {r12:<22} {pi}")


def main(argv=None) -> int:
    """Entry point with the declared exit-code mapping."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.ClickException as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 1
    except (ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        click.echo(f"runtime error: {type(exc).__name__}: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
