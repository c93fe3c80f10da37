use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::AuditConfig;
use super::run::{write_json, LearnerState};
use crate::auditors::{
    check_theorem_bounds, coverage, external_regret, group_conditional_regret, group_coverage,
    multivalid_coverage, swap_regret, threshold_calibrated_coverage, write_flat_csv, BoundCheck,
    BoundInputs, CoverageReport, FlatRow, Membership, RegretKind, RegretReport, Status, Theorem,
    ToFlatRows,
};
use crate::grid::Grid;
use crate::transcript::Transcript;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub rounds: usize,
    pub q: f64,
    pub marginal_coverage: f64,
    pub group_coverage: CoverageReport,
    pub threshold_coverage: CoverageReport,
    pub multivalid_coverage: CoverageReport,
    pub external_regret: RegretReport,
    pub swap_regret: RegretReport,
    pub group_external_regret: RegretReport,
    /// Only computed when every group is binary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_swap_regret: Option<RegretReport>,
    pub bounds: Vec<BoundCheck>,
}

impl AuditReport {
    pub fn failed_checks(&self) -> Vec<Theorem> {
        self.bounds
            .iter()
            .filter(|b| b.status() == Status::Fail)
            .map(|b| b.theorem)
            .collect()
    }
}

/// Identity check matching the learner that produced the state.
fn default_theorems(state: Option<&LearnerState>) -> Vec<Theorem> {
    match state {
        Some(s) if s.dual.is_some() => vec![Theorem::FtrlCoverage],
        Some(s) if s.theta.is_some() && s.eta.is_some() => vec![Theorem::GcaciCoverage],
        _ => Vec::new(),
    }
}

/// Coverage, regret and bound reports for a finished transcript.
pub fn audit(
    tr: &Transcript,
    groups: &Membership,
    cfg: &AuditConfig,
    state: Option<&LearnerState>,
) -> Result<AuditReport> {
    cfg.validate()?;
    if tr.is_empty() {
        return Err(Error::EmptyTranscript);
    }
    let grid = Grid::new(cfg.grid)?;
    let inputs = BoundInputs {
        r: cfg.r,
        min_size: cfg.min_size,
        final_dual: state.and_then(|s| s.dual.clone()),
        final_theta: state.and_then(|s| s.theta.clone()),
        eta: state.and_then(|s| s.eta),
        epsilon: cfg.epsilon,
    };
    let theorems = if cfg.theorems.is_empty() {
        default_theorems(state)
    } else {
        cfg.theorems.clone()
    };
    let bounds = theorems
        .iter()
        .map(|&t| check_theorem_bounds(tr, groups, grid, t, &inputs))
        .collect::<Result<Vec<_>>>()?;
    let all_binary = groups.columns().iter().all(|c| c.is_binary());
    Ok(AuditReport {
        rounds: tr.len(),
        q: tr.q().get(),
        marginal_coverage: coverage(tr)?,
        group_coverage: group_coverage(tr, groups)?,
        threshold_coverage: threshold_calibrated_coverage(tr, grid)?,
        multivalid_coverage: multivalid_coverage(tr, groups, grid)?,
        external_regret: external_regret(tr, grid)?,
        swap_regret: swap_regret(tr, grid)?,
        group_external_regret: group_conditional_regret(tr, groups, grid, RegretKind::External)?,
        group_swap_regret: if all_binary {
            Some(group_conditional_regret(tr, groups, grid, RegretKind::Swap)?)
        } else {
            None
        },
        bounds,
    })
}

fn write_rows(path: &Path, rows: &[FlatRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_flat_csv(rows, BufWriter::new(file))
}

fn prefixed(prefix: &str, rows: Vec<FlatRow>) -> Vec<FlatRow> {
    rows.into_iter()
        .map(|mut r| {
            r.entity = format!("{prefix}:{}", r.entity);
            r
        })
        .collect()
}

/// Write `report.json` plus flat CSVs for coverage, regret and bounds.
pub fn write_audit(report: &AuditReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(&dir.join("report.json"), report)?;
    let mut cov = prefixed("group", report.group_coverage.flat_rows());
    cov.extend(prefixed("level", report.threshold_coverage.flat_rows()));
    cov.extend(prefixed("cell", report.multivalid_coverage.flat_rows()));
    write_rows(&dir.join("coverage.csv"), &cov)?;
    let mut reg = prefixed("external", report.external_regret.flat_rows());
    reg.extend(prefixed("swap", report.swap_regret.flat_rows()));
    reg.extend(prefixed("group_external", report.group_external_regret.flat_rows()));
    if let Some(r) = &report.group_swap_regret {
        reg.extend(prefixed("group_swap", r.flat_rows()));
    }
    write_rows(&dir.join("regret.csv"), &reg)?;
    let bounds: Vec<FlatRow> = report
        .bounds
        .iter()
        .flat_map(|b| prefixed(b.theorem.name(), b.flat_rows()))
        .collect();
    write_rows(&dir.join("bounds.csv"), &bounds)
}
