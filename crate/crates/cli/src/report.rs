//! Trace and report serialization, plus the human summaries.
//!
//! Physical values (design parameters, impedance, loss) are written with
//! six significant digits; objective columns keep full round-trip
//! precision so a re-parsed trace reproduces them exactly.

use std::fmt::Write as _;

use anyhow::Result;
use pibo_core::{
    line_metrics, BenchReport, CompareReport, DesignPoint, ObjectiveSpec, Phase, RunTrace,
    SearchSpace, SeedOutcome, AXIS_NAMES,
};

pub const TRACE_HEADER: &str =
    "eval_index,worker_id,phase,W,S,T,H1,H2,er,z_diff,loss,objective,best_value";

/// Six significant digits, plain decimal notation.
pub fn sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let decimals = (5 - v.abs().log10().floor() as i32).max(0) as usize;
    format!("{v:.decimals$}")
}

pub fn phase_name(phase: Phase) -> &'static str {
    match phase {
        Phase::Init => "init",
        Phase::Acquire => "acquire",
        Phase::Final => "final",
    }
}

/// Renders a run trace as CSV. The impedance and loss columns are
/// recomputed from each row's design values.
pub fn trace_csv(trace: &RunTrace, spec: &ObjectiveSpec) -> Result<String> {
    let mut out = String::with_capacity(TRACE_HEADER.len() + 1 + trace.len() * 96);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for record in trace.records() {
        let metrics = line_metrics(&record.point, spec)?;
        let v = record.point.values();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            record.eval_index,
            record.worker_id,
            phase_name(record.phase),
            sig6(v[0]),
            sig6(v[1]),
            sig6(v[2]),
            sig6(v[3]),
            sig6(v[4]),
            sig6(v[5]),
            sig6(metrics.z_diff),
            sig6(metrics.loss),
            record.objective_value,
            record.incumbent_best_value,
        )
        .expect("writing to a String cannot fail");
    }
    Ok(out)
}

/// One line describing an optimum: design values, line metrics, objective.
pub fn best_line(point: &DesignPoint, value: f64, spec: &ObjectiveSpec) -> Result<String> {
    let metrics = line_metrics(point, spec)?;
    let mut out = String::from("best:");
    for (name, v) in AXIS_NAMES.iter().zip(point.values()) {
        write!(out, " {name}={}", sig6(*v)).expect("writing to a String cannot fail");
    }
    write!(
        out,
        " | z_diff={} ohm, loss={} dB/in, objective={value}",
        sig6(metrics.z_diff),
        sig6(metrics.loss)
    )
    .expect("writing to a String cannot fail");
    Ok(out)
}

/// Full enumeration table as CSV, one row per grid point in row-major order.
pub fn brute_csv(space: &SearchSpace, table: &[f64], spec: &ObjectiveSpec) -> Result<String> {
    let mut out = String::with_capacity(table.len() * 72);
    out.push_str("linear_index,W,S,T,H1,H2,er,z_diff,loss,objective\n");
    for (linear, objective) in table.iter().enumerate() {
        let point = space.point_from_linear(linear as u64);
        let metrics = line_metrics(&point, spec)?;
        let v = point.values();
        writeln!(
            out,
            "{linear},{},{},{},{},{},{},{},{},{objective}",
            sig6(v[0]),
            sig6(v[1]),
            sig6(v[2]),
            sig6(v[3]),
            sig6(v[4]),
            sig6(v[5]),
            sig6(metrics.z_diff),
            sig6(metrics.loss),
        )
        .expect("writing to a String cannot fail");
    }
    Ok(out)
}

/// Per-seed benchmark rows as CSV.
pub fn bench_csv(report: &BenchReport) -> String {
    let mut out = String::from(
        "seed,status,total_evaluations,best_value,evals_to_within_tol,first_hit_index,hit_global,phase1_best\n",
    );
    let opt = |v: Option<usize>| v.map(|n| n.to_string()).unwrap_or_default();
    for record in &report.records {
        match &record.outcome {
            SeedOutcome::Completed {
                total_evaluations,
                best_value,
                evals_to_within_tol,
                first_hit_index,
                hit_global,
                phase1_best,
                ..
            } => {
                writeln!(
                    out,
                    "{},completed,{total_evaluations},{best_value},{},{},{hit_global},{phase1_best}",
                    record.seed,
                    opt(*evals_to_within_tol),
                    opt(*first_hit_index),
                )
                .expect("writing to a String cannot fail");
            }
            SeedOutcome::Failed { .. } => {
                writeln!(out, "{},failed,,,,,,", record.seed)
                    .expect("writing to a String cannot fail");
            }
        }
    }
    out
}

/// Multi-line human summary of a benchmark report.
pub fn bench_summary(report: &BenchReport) -> String {
    let completed =
        report.records.iter().filter(|r| matches!(r.outcome, SeedOutcome::Completed { .. })).count();
    let mut out = format!(
        "benchmark: {} seeds, {completed} completed, oracle best {} at {:?}\n",
        report.records.len(),
        report.oracle_value,
        report.oracle_point.values().map(sig6),
    );
    match &report.aggregates {
        Some(agg) => {
            writeln!(out, "within-1% rate: {:.3}", agg.within_tol_rate)
                .expect("writing to a String cannot fail");
            writeln!(out, "exact-hit rate: {:.3}", agg.exact_hit_rate)
                .expect("writing to a String cannot fail");
            match agg.median_evals_to_tol {
                Some(m) => writeln!(out, "median evaluations to within-1%: {m}"),
                None => writeln!(out, "median evaluations to within-1%: n/a"),
            }
            .expect("writing to a String cannot fail");
            write!(
                out,
                "best-value quartiles: {} / {} / {}",
                agg.best_value_quartiles[0], agg.best_value_quartiles[1], agg.best_value_quartiles[2]
            )
            .expect("writing to a String cannot fail");
        }
        None => {
            write!(out, "no completed runs; aggregates unavailable")
                .expect("writing to a String cannot fail");
        }
    }
    out
}

/// Per-seed comparison rows as CSV.
pub fn compare_csv(report: &CompareReport) -> String {
    let mut out = String::from("seed,solo_best,pibo_best\n");
    for record in &report.records {
        writeln!(out, "{},{},{}", record.seed, record.solo_best, record.pibo_best)
            .expect("writing to a String cannot fail");
    }
    out
}

/// Multi-line human summary of a solo-vs-parallel comparison.
pub fn compare_summary(report: &CompareReport) -> String {
    format!(
        "solo: mean {} variance {}\nparallel: mean {} variance {}\nparallel wins {}, ties {}, solo wins {}",
        report.solo_mean,
        report.solo_variance,
        report.pibo_mean,
        report.pibo_variance,
        report.pibo_wins,
        report.ties,
        report.solo_wins
    )
}
