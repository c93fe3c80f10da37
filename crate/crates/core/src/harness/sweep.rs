use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::run::{coverage_curve, execute, TraceRow};
use crate::learners::gcaci::sq_norm_envelope;
use crate::pinball::Rate;
use crate::transcript::{fmt_float, Transcript};
use crate::{Error, Result};

/// Earliest within-group step `s` (1-based) such that the cumulative
/// within-group coverage stays within `epsilon` of `q` at `s` and every later
/// group step. `None` when even the final value is outside the band or the
/// group is empty.
pub fn convergence_time(tr: &Transcript, weights: &[f64], epsilon: f64) -> Option<u64> {
    let q = tr.q().get();
    let curve = coverage_curve(tr, weights);
    let last_bad = curve.iter().rposition(|&(_, c)| (c - q).abs() > epsilon);
    match last_bad {
        None if curve.is_empty() => None,
        None => Some(1),
        Some(i) if i + 1 == curve.len() => None,
        Some(i) => Some(i as u64 + 2),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub eta: f64,
    pub group: String,
    pub convergence_step: Option<u64>,
}

/// One run per step size (same seed), in parallel; convergence time per group.
pub fn sweep_eta(cfg: &RunConfig, etas: &[f64], epsilon: f64) -> Result<Vec<ConvergenceRow>> {
    if !(epsilon > 0.0) {
        return Err(Error::config("convergence epsilon must be positive"));
    }
    let runs = etas
        .par_iter()
        .map(|&eta| {
            let mut c = cfg.clone();
            c.learner.algorithm.set_eta(eta)?;
            let out = execute(&c)?;
            let rows: Vec<ConvergenceRow> = out
                .groups
                .iter()
                .enumerate()
                .map(|(i, g)| ConvergenceRow {
                    eta,
                    group: g.name.clone(),
                    convergence_step: convergence_time(&out.transcript, &out.transcript.group_column(i), epsilon),
                })
                .collect();
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(runs.into_iter().flatten().collect())
}

/// CSV `eta,group,convergence_step`, with `never` for groups that do not converge.
pub fn write_convergence<W: Write>(rows: &[ConvergenceRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["eta", "group", "convergence_step"])?;
    for r in rows {
        let step = r.convergence_step.map_or_else(|| "never".to_string(), |s| s.to_string());
        w.write_record([fmt_float(r.eta), r.group.clone(), step])?;
    }
    w.flush().map_err(|e| Error::io("<convergence>", e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub t: u64,
    pub theta_inf: f64,
    /// `sqrt(t eta (eta k max{q, 1-q}^2 + 2q))`, which bounds `||theta_{t+1}||_2`
    /// and so also the sup norm.
    pub envelope: f64,
}

pub fn trace_norms(trace: &[TraceRow], eta: f64, k: usize, q: Rate) -> Vec<NormRow> {
    trace
        .iter()
        .map(|row| NormRow {
            t: row.t,
            theta_inf: row.sup_norm(),
            envelope: sq_norm_envelope(row.t, eta, k, q).sqrt(),
        })
        .collect()
}

pub fn write_norms<W: Write>(rows: &[NormRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "theta_inf", "envelope"])?;
    for r in rows {
        w.write_record([r.t.to_string(), fmt_float(r.theta_inf), fmt_float(r.envelope)])?;
    }
    w.flush().map_err(|e| Error::io("<norms>", e))
}
