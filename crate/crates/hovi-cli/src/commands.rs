//! Implementations of the five experiment modes.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde_json::json;

use hovi::analysis::{
    theorem_rho_bound, verify_comonotone, verify_monotone, verify_weak_mvi, TheoremBounds,
};
use hovi::continuous::{integrate_re_ds, min_norm_rate, ContinuousConfig};
use hovi::oracle::{estimate_lipschitz, Operator, Region};
use hovi::problems::{make_competitive, make_problem, ProblemCatalogEntry};
use hovi::solvers::{run, Algorithm, Trace};
use hovi::Error;

use crate::config::{
    ExperimentConfig, Mode, ProblemSpec, RegionSpec, SolverSpec, VerifySpec,
};
use crate::output;
use crate::{CliError, Invocation};

type CliResult<T> = Result<T, CliError>;

/// Instantiate the catalog problem, applying `alpha_override` (a compare
/// entry's preconditioning) over the problem-level `alpha` when present.
fn build_problem(
    spec: &ProblemSpec,
    alpha_override: Option<f64>,
) -> hovi::Result<ProblemCatalogEntry> {
    match alpha_override.or(spec.alpha) {
        Some(alpha) => make_competitive(&spec.name, alpha),
        None => make_problem(&spec.name),
    }
}

fn resolve_z0(config: &ExperimentConfig, dim: usize) -> CliResult<DVector<f64>> {
    let z0 = config.z0.as_ref().ok_or_else(|| {
        CliError::Usage(format!(
            "mode '{}' requires a 'z0' starting point",
            config.mode.name()
        ))
    })?;
    if z0.len() != dim {
        return Err(CliError::Usage(format!(
            "z0 has {} coordinates but the problem has dimension {dim}",
            z0.len()
        )));
    }
    Ok(DVector::from_column_slice(z0))
}

fn output_dir(config: &ExperimentConfig, inv: &Invocation) -> CliResult<PathBuf> {
    let dir = match &inv.out_dir {
        Some(d) => d.clone(),
        None => config
            .outputs
            .dir
            .as_ref()
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str, inv: &Invocation) -> CliResult<()> {
    fs::write(path, text)?;
    if !inv.quiet {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn solver_config(spec: &SolverSpec, inv: &Invocation) -> CliResult<hovi::solvers::SolverConfig> {
    let mut config = spec.to_config()?;
    if let Some(seed) = inv.seed_override {
        config.seed = seed;
    }
    Ok(config)
}

fn run_one(
    problem: &ProblemCatalogEntry,
    z0: &DVector<f64>,
    spec: &SolverSpec,
    inv: &Invocation,
) -> CliResult<Trace> {
    let config = solver_config(spec, inv)?;
    Ok(run(problem.oracle.as_ref(), z0, &config)?)
}

/// `run` mode: one solver, one trace CSV, one JSON summary.
pub fn cmd_run(config: &ExperimentConfig, inv: &Invocation) -> CliResult<()> {
    let spec = config
        .solver
        .as_ref()
        .ok_or_else(|| CliError::Usage("run mode requires a 'solver' section".into()))?;
    let problem = build_problem(&config.problem, None)?;
    let z0 = resolve_z0(config, problem.oracle.dim())?;
    let trace = run_one(&problem, &z0, spec, inv)?;
    let dir = output_dir(config, inv)?;
    let prefix = &config.outputs.prefix;
    write_text(&dir.join(format!("{prefix}.csv")), &output::trace_csv(&trace), inv)?;
    write_text(
        &dir.join(format!("{prefix}.json")),
        &output::to_stable_string(&output::run_summary(&trace)),
        inv,
    )?;
    Ok(())
}

/// `compare` mode: the listed solvers from the same starting point, one CSV
/// per entry plus a summary table with best norms at the matched iteration
/// count (the shortest run's length).
pub fn cmd_compare(config: &ExperimentConfig, inv: &Invocation) -> CliResult<()> {
    let entries = match &config.entries {
        Some(entries) if !entries.is_empty() => entries,
        _ => {
            return Err(CliError::Usage(
                "compare mode requires a non-empty 'entries' list".into(),
            ))
        }
    };
    let dir = output_dir(config, inv)?;
    let prefix = &config.outputs.prefix;
    let mut results = Vec::with_capacity(entries.len());
    for entry in entries {
        let problem = build_problem(&config.problem, entry.alpha)?;
        let z0 = resolve_z0(config, problem.oracle.dim())?;
        let trace = run_one(&problem, &z0, &entry.solver, inv)?;
        write_text(
            &dir.join(format!("{prefix}_{}.csv", entry.label)),
            &output::trace_csv(&trace),
            inv,
        )?;
        results.push((entry, trace));
    }
    let matched = results
        .iter()
        .map(|(_, t)| t.records.len())
        .min()
        .unwrap_or(0);
    let table: Vec<serde_json::Value> = results
        .iter()
        .map(|(entry, trace)| {
            output::compare_entry_summary(&entry.label, entry.alpha, trace, matched)
        })
        .collect();
    let summary = json!({
        "problem": config.problem.name,
        "matched_iterations": matched,
        "entries": table,
    });
    write_text(
        &dir.join(format!("{prefix}.json")),
        &output::to_stable_string(&summary),
        inv,
    )?;
    Ok(())
}

fn resolve_region(spec: &VerifySpec, op: &dyn Operator) -> CliResult<Region> {
    let dim = op.dim();
    match &spec.region {
        Some(RegionSpec::HalfWidth { half_width }) => {
            Ok(Region::cube_around(&DVector::zeros(dim), *half_width)?)
        }
        Some(RegionSpec::Bounds { lo, hi }) => Ok(Region::new(
            DVector::from_column_slice(lo),
            DVector::from_column_slice(hi),
        )?),
        None => match &op.metadata().reference_box {
            Some((lo, hi)) => Ok(Region::new(lo.clone(), hi.clone())?),
            None => Err(CliError::Usage(
                "verify mode needs a 'region' (the operator declares no reference box)".into(),
            )),
        },
    }
}

fn bound_algorithm(p: f64) -> Algorithm {
    if p == 2.0 {
        Algorithm::HoegPlusL2
    } else {
        Algorithm::LpHoegPlus
    }
}

/// Run the requested verifier against an instantiated problem and build the
/// JSON report (split from [`cmd_verify`] so error paths are unit-testable).
pub fn verify_entry(
    problem: &ProblemCatalogEntry,
    spec: &VerifySpec,
    seed: u64,
) -> CliResult<serde_json::Value> {
    let op = problem.oracle.as_ref();
    let region = resolve_region(spec, op)?;

    let mut z_star_used: Option<DVector<f64>> = None;
    let mut bounds_used: Option<TheoremBounds> = None;
    let report = match spec.condition.as_str() {
        "monotone" => verify_monotone(op, &region, spec.samples, seed)?,
        "comonotone" => verify_comonotone(op, &region, spec.samples, seed)?,
        "weak_mvi" => {
            let z_star = problem.known_stationary_points.first().ok_or_else(|| {
                CliError::Hovi(Error::Precondition(format!(
                    "problem '{}' has no catalogued stationary point; the weak Minty \
                     verifier needs one",
                    problem.name
                )))
            })?;
            let s = spec.s_for_bound;
            let q = spec.q.unwrap_or((s as f64 + 1.0) / s as f64);
            let report = verify_weak_mvi(op, z_star, q, spec.p, &region, spec.samples, seed)?;
            let l = match spec.l_for_bound {
                Some(l) => l,
                None => estimate_lipschitz(op, s, spec.p, &region, 10_000, seed)?,
            };
            let bounds = theorem_rho_bound(s, spec.p, l, bound_algorithm(spec.p))?;
            let rho_max = if spec.p == 2.0 {
                bounds.rho_max_balanced
            } else {
                bounds.rho_max_lp
            };
            z_star_used = Some(z_star.clone());
            bounds_used = Some(bounds);
            report.with_verdict_against(rho_max)
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown verify condition '{other}' (expected monotone, comonotone, or weak_mvi)"
            )))
        }
    };
    Ok(output::condition_report_json(
        &problem.name,
        &report,
        z_star_used.as_ref(),
        bounds_used.as_ref(),
    ))
}

/// `verify` mode: estimate a condition coefficient by sampling and report it
/// against the theorem's admissible range.
pub fn cmd_verify(config: &ExperimentConfig, inv: &Invocation) -> CliResult<()> {
    let spec = config
        .verify
        .as_ref()
        .ok_or_else(|| CliError::Usage("verify mode requires a 'verify' section".into()))?;
    let problem = build_problem(&config.problem, None)?;
    let seed = inv.seed_override.unwrap_or(spec.seed);
    let value = verify_entry(&problem, spec, seed)?;
    let dir = output_dir(config, inv)?;
    write_text(
        &dir.join(format!("{}.json", config.outputs.prefix)),
        &output::to_stable_string(&value),
        inv,
    )?;
    Ok(())
}

/// `continuous` mode: integrate the rescaled dynamics and write the
/// trajectory CSV plus a rate summary.
pub fn cmd_continuous(config: &ExperimentConfig, inv: &Invocation) -> CliResult<()> {
    let spec = config
        .continuous
        .as_ref()
        .ok_or_else(|| CliError::Usage("continuous mode requires a 'continuous' section".into()))?;
    let problem = build_problem(&config.problem, None)?;
    let z0 = resolve_z0(config, problem.oracle.dim())?;
    let mut cc = ContinuousConfig::new(spec.s, spec.t_end, spec.dt);
    if let Some(tol) = spec.algebraic_tolerance {
        cc.algebraic_tolerance = tol;
    }
    if let Some(floor) = spec.norm_floor {
        cc.norm_floor = floor;
    }
    let traj = integrate_re_ds(problem.oracle.as_ref(), &z0, &cc)?;
    let dir = output_dir(config, inv)?;
    let prefix = &config.outputs.prefix;
    write_text(&dir.join(format!("{prefix}.csv")), &output::trajectory_csv(&traj), inv)?;
    let last = traj.samples.last();
    let summary = json!({
        "rate_slope": min_norm_rate(&traj).ok(),
        "samples": traj.samples.len(),
        "final_t": last.map(|s| s.t),
        "final_norm": last.map(|s| s.norm_f),
        "final_min_norm": traj.running_min_norm.last().map(|(_, m)| *m),
        "s": spec.s,
    });
    write_text(
        &dir.join(format!("{prefix}.json")),
        &output::to_stable_string(&summary),
        inv,
    )?;
    Ok(())
}

fn apply_sweep_value(
    spec: &SolverSpec,
    parameter: &str,
    value: f64,
) -> CliResult<(SolverSpec, Option<f64>)> {
    let mut spec = spec.clone();
    let mut alpha = None;
    let as_integer = |value: f64, what: &str| -> CliResult<u64> {
        if value.fract() != 0.0 || value < 0.0 {
            return Err(CliError::Usage(format!(
                "sweep value {value} is not a valid {what} (non-negative integer required)"
            )));
        }
        Ok(value as u64)
    };
    match parameter {
        "s" => spec.s = as_integer(value, "order s")? as u32,
        "l" => spec.l = Some(value),
        "k" => spec.k = as_integer(value, "budget k")? as usize,
        "seed" => spec.seed = as_integer(value, "seed")?,
        "alpha" => alpha = Some(value),
        "target_eps" => spec.target_eps = value,
        other => {
            return Err(CliError::Usage(format!(
                "unknown sweep parameter '{other}'"
            )))
        }
    }
    Ok((spec, alpha))
}

fn format_sweep_value(value: f64) -> String {
    if value.fract() == 0.0 && value.abs() < 1e15 {
        format!("{}", value as i64)
    } else {
        format!("{value}")
    }
}

/// `sweep` mode: one run per value of the swept parameter.  Runs execute
/// concurrently; each writes `<prefix>_<parameter>=<value>.{csv,json}`.
pub fn cmd_sweep(config: &ExperimentConfig, inv: &Invocation) -> CliResult<()> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Usage("sweep mode requires a 'sweep' section".into()))?;
    let base = config
        .solver
        .as_ref()
        .ok_or_else(|| CliError::Usage("sweep mode requires a 'solver' section".into()))?;
    let dir = output_dir(config, inv)?;
    let prefix = &config.outputs.prefix;

    // Prepare every run up front so config errors surface before any output.
    let mut planned = Vec::with_capacity(sweep.values.len());
    for &value in &sweep.values {
        let (spec, alpha) = apply_sweep_value(base, &sweep.parameter, value)?;
        let label = format!("{}={}", sweep.parameter, format_sweep_value(value));
        planned.push((label, spec, alpha));
    }

    let dir_ref = &dir;
    let outcomes: Vec<CliResult<String>> = std::thread::scope(|scope| {
        let handles: Vec<_> = planned
            .iter()
            .map(|(label, spec, alpha)| {
                scope.spawn(move || -> CliResult<String> {
                    let problem = build_problem(&config.problem, *alpha)?;
                    let z0 = resolve_z0(config, problem.oracle.dim())?;
                    let trace = run_one(&problem, &z0, spec, inv)?;
                    let stem = dir_ref.join(format!("{prefix}_{label}"));
                    fs::write(stem.with_extension("csv"), output::trace_csv(&trace))?;
                    fs::write(
                        stem.with_extension("json"),
                        output::to_stable_string(&output::run_summary(&trace)),
                    )?;
                    Ok(label.clone())
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    for outcome in outcomes {
        let label = outcome?;
        if !inv.quiet {
            println!(
                "wrote {} and {}",
                dir.join(format!("{prefix}_{label}.csv")).display(),
                dir.join(format!("{prefix}_{label}.json")).display()
            );
        }
    }
    Ok(())
}

/// Load, validate, and dispatch a config against the requested mode.
pub fn execute_mode(requested: Mode, config: &ExperimentConfig, inv: &Invocation) -> CliResult<()> {
    if config.mode != requested {
        return Err(CliError::Usage(format!(
            "config declares mode '{}' but was passed to subcommand '{}'",
            config.mode.name(),
            requested.name()
        )));
    }
    match requested {
        Mode::Run => cmd_run(config, inv),
        Mode::Sweep => cmd_sweep(config, inv),
        Mode::Verify => cmd_verify(config, inv),
        Mode::Continuous => cmd_continuous(config, inv),
        Mode::Compare => cmd_compare(config, inv),
    }
}
