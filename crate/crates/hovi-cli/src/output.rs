//! CSV and JSON serialization of run results.
//!
//! Floating-point CSV cells use `{:.16e}` (17 significant digits) so a
//! repeated run with the same seed writes byte-identical files.

use serde_json::{json, Value};

use hovi::analysis::{rate_fit, ConditionReport, TheoremBounds, Witness};
use hovi::continuous::Trajectory;
use hovi::solvers::Trace;

/// Render a solver trace as CSV.  `best_so_far` is the running minimum of
/// `norm_F_half`.
pub fn trace_csv(trace: &Trace) -> String {
    let mut out = String::from("k,lambda,norm_F_half,norm_F_full,displacement,best_so_far\n");
    let mut best = f64::INFINITY;
    for r in &trace.records {
        best = best.min(r.norm_f_half);
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.k, r.lambda, r.norm_f_half, r.norm_f_full, r.displacement, best
        ));
    }
    out
}

/// Render a trajectory as CSV with columns `t,norm_F,min_norm`.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,norm_F,min_norm\n");
    for (sample, (_, min)) in traj.samples.iter().zip(&traj.running_min_norm) {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e}\n",
            sample.t, sample.norm_f, min
        ));
    }
    out
}

/// Log-log decay slope of the running-min squared half-step norm, when the
/// trace has enough positive points to fit.
pub fn trace_rate_slope(trace: &Trace) -> Option<f64> {
    let series: Vec<(usize, f64)> = trace
        .records
        .iter()
        .map(|r| (r.k, r.norm_f_half * r.norm_f_half))
        .collect();
    rate_fit(&series).ok()
}

fn vector_json(v: &nalgebra::DVector<f64>) -> Value {
    Value::Array(v.iter().map(|x| json!(x)).collect())
}

/// JSON summary of a single run.
pub fn run_summary(trace: &Trace) -> Value {
    json!({
        "final_norm": trace.final_full_norm(),
        "best_norm": trace.best_half_norm(),
        "iterations": trace.records.len(),
        "stop_reason": trace.stop_reason.name(),
        "rate_slope": trace_rate_slope(trace),
        "output_point": vector_json(&trace.output),
        "output_rule": trace.output_rule.name(),
        "algorithm": trace.meta.algorithm.name(),
        "s": trace.meta.s,
        "p": trace.meta.p,
        "l": trace.meta.l,
        "left_domain_box": trace.meta.left_domain_box,
    })
}

/// Count of iterations whose half-step norm increased over the previous one;
/// 0 for a monotone norm sequence.
pub fn norm_increase_count(trace: &Trace) -> usize {
    trace
        .records
        .windows(2)
        .filter(|w| w[1].norm_f_half > w[0].norm_f_half)
        .count()
}

/// One row of a comparison table.
pub fn compare_entry_summary(label: &str, alpha: Option<f64>, trace: &Trace, matched: usize) -> Value {
    let best_at_matched = trace.records[..matched.min(trace.records.len())]
        .iter()
        .map(|r| r.norm_f_half)
        .fold(f64::INFINITY, f64::min);
    let best_at_matched = if best_at_matched.is_finite() {
        Some(best_at_matched)
    } else {
        None
    };
    json!({
        "label": label,
        "algorithm": trace.meta.algorithm.name(),
        "s": trace.meta.s,
        "p": trace.meta.p,
        "alpha": alpha,
        "iterations": trace.records.len(),
        "stop_reason": trace.stop_reason.name(),
        "final_norm": trace.final_full_norm(),
        "best_norm": trace.best_half_norm(),
        "best_norm_at_matched": best_at_matched,
        "norm_increases": norm_increase_count(trace),
        "output_point": vector_json(&trace.output),
    })
}

fn witness_json(witness: &Option<Witness>) -> Value {
    match witness {
        Some(Witness::Pair { z_a, z_b }) => json!({
            "z_a": vector_json(z_a),
            "z_b": vector_json(z_b),
        }),
        Some(Witness::Point { z }) => json!({ "z": vector_json(z) }),
        None => Value::Null,
    }
}

/// JSON form of the theorem constants.
pub fn bounds_json(b: &TheoremBounds) -> Value {
    json!({
        "s": b.s,
        "p": b.p,
        "l": b.l,
        "nu": b.nu,
        "rho_max_balanced": b.rho_max_balanced,
        "rho_max_lp": b.rho_max_lp,
        "rho_max_first_order": b.rho_max_first_order,
        "c1": b.c1,
        "c2": b.c2,
        "c_sp": b.c_sp,
        "c_sprho": b.c_sprho,
        "m_p": b.m_p,
        "m_s": b.m_s,
    })
}

/// JSON form of a verifier report, with optional theorem-range context.
pub fn condition_report_json(
    problem: &str,
    report: &ConditionReport,
    z_star: Option<&nalgebra::DVector<f64>>,
    bounds: Option<&TheoremBounds>,
) -> Value {
    json!({
        "problem": problem,
        "condition": report.condition.name(),
        "estimated_rho": report.estimated_rho,
        "samples": report.samples,
        "exponent_q": report.exponent_q,
        "verdict_against_bound": report.verdict_against_bound,
        "worst_witness": witness_json(&report.worst_witness),
        "z_star": z_star.map(vector_json),
        "bounds": bounds.map(bounds_json),
    })
}

/// Serialize a JSON value with a stable layout (pretty, sorted keys, final
/// newline) for byte-exact reruns.
pub fn to_stable_string(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("JSON serialization cannot fail");
    text.push('\n');
    text
}
