//! CSV output.
//!
//! All files are UTF-8 with `,` separators, `.` decimals and a fixed header
//! row. Floats use Rust's shortest round-trip formatting.

use std::io::Write;

use crate::error::Result;
use crate::estimators::VarianceDiagnostics;
use crate::meanest::MeanEstimate;
use crate::oracle::{ExactSummary, Spectral};
use crate::pipelines::EstimateReport;
use crate::tpa::Schedule;

pub const ESTIMATE_HEADER: [&str; 12] = [
    "method",
    "model",
    "beta_max",
    "eps",
    "delta",
    "seed",
    "Z_hat",
    "Q_hat",
    "steps",
    "schedule_len",
    "cap_hit",
    "wall_ms",
];

pub const SCHEDULE_HEADER: [&str; 3] = ["index", "beta", "delta"];

pub const EXACT_HEADER: [&str; 7] = ["beta", "Z", "z", "E_H", "lambda", "tau_rx", "pi_min"];

pub const ITERATION_HEADER: [&str; 11] = [
    "run", "i", "m", "mu_hat", "v_hat", "u", "eps_add", "mu_clamped", "eps_rel", "steps", "cap_hit",
];

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(out)
}

pub fn write_estimates<W: Write>(out: W, model: &str, reports: &[EstimateReport]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(ESTIMATE_HEADER)?;
    for r in reports {
        w.write_record([
            r.method.to_string(),
            model.to_string(),
            r.beta_max.to_string(),
            r.eps.to_string(),
            r.delta.to_string(),
            r.seed.to_string(),
            r.z_hat.to_string(),
            r.q_hat.to_string(),
            r.steps.to_string(),
            r.schedule.len().to_string(),
            r.cap_hit.to_string(),
            format!("{:.3}", r.wall_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per inverse temperature; `delta` is the width of the interval
/// starting there (empty on the last row).
pub fn write_schedule<W: Write>(out: W, schedule: &Schedule) -> Result<()> {
    let mut w = writer(out);
    w.write_record(SCHEDULE_HEADER)?;
    let betas = schedule.betas();
    for (i, b) in betas.iter().enumerate() {
        let delta = betas.get(i + 1).map(|next| (next - b).to_string()).unwrap_or_default();
        w.write_record([i.to_string(), b.to_string(), delta])?;
    }
    w.flush()?;
    Ok(())
}

/// Spectral columns are left empty when the chain is too large to analyse.
pub fn write_exact<W: Write>(out: W, rows: &[(ExactSummary, Option<Spectral>)]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(EXACT_HEADER)?;
    for (s, spec) in rows {
        let (lambda, tau, pi_min) = match spec {
            Some(sp) => (sp.lambda.to_string(), sp.tau_rx.to_string(), sp.pi_min.to_string()),
            None => Default::default(),
        };
        w.write_record([
            s.beta.to_string(),
            s.z.to_string(),
            s.log_z.to_string(),
            s.mean_energy.to_string(),
            lambda,
            tau,
            pi_min,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_iterations<W: Write>(out: W, runs: &[MeanEstimate]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(ITERATION_HEADER)?;
    for (run, est) in runs.iter().enumerate() {
        for it in &est.iterations {
            w.write_record([
                run.to_string(),
                it.i.to_string(),
                it.m.to_string(),
                it.mean.to_string(),
                it.trace_var.to_string(),
                it.var_bound.to_string(),
                it.additive.to_string(),
                it.estimate.to_string(),
                it.rel_err.to_string(),
                it.steps.to_string(),
                est.cap_hit.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub const DIAGNOSTICS_HEADER: [&str; 7] = ["interval", "beta_lo", "beta_hi", "vrel_f", "vrel_g", "alpha0", "reltrv_f"];

/// Per-interval rows followed by `#`-prefixed summary lines.
pub fn write_diagnostics<W: Write>(mut out: W, schedule: &Schedule, diag: &VarianceDiagnostics) -> Result<()> {
    {
        let mut w = writer(&mut out);
        w.write_record(DIAGNOSTICS_HEADER)?;
        let betas = schedule.betas();
        for i in 0..diag.vrel_f.len() {
            let reltrv = diag.reltrv_f.as_ref().map(|r| r[i].to_string()).unwrap_or_default();
            w.write_record([
                i.to_string(),
                betas[i].to_string(),
                betas[i + 1].to_string(),
                diag.vrel_f[i].to_string(),
                diag.vrel_g[i].to_string(),
                diag.alpha0[i].to_string(),
                reltrv,
            ])?;
        }
        w.flush()?;
    }
    writeln!(out, "# vrel_tensor_f,{}", diag.vrel_tensor_f)?;
    writeln!(out, "# vrel_tensor_g,{}", diag.vrel_tensor_g)?;
    writeln!(out, "# q,{}", diag.q)?;
    writeln!(out, "# rel_range,{}", diag.rel_range)?;
    writeln!(out, "# alpha1,{}", diag.alpha1)?;
    Ok(())
}
