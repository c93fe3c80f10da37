//! Marginal, group-conditional, threshold-calibrated and multivalid coverage.

use serde::{Deserialize, Serialize};

use super::{level_partition, Membership};
use crate::grid::Grid;
use crate::transcript::Transcript;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageKind {
    Group,
    ThresholdCalibrated,
    Multivalid,
}

/// Coverage of one entity. `coverage` and `deviation` are `None` when the
/// entity has zero size, so an empty entity is never mistaken for 0% coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageEntry {
    pub entity: String,
    pub size: f64,
    pub coverage: Option<f64>,
    pub deviation: Option<f64>,
}

impl CoverageEntry {
    fn new(entity: String, covered: f64, size: f64, q: f64) -> Self {
        let coverage = (size > 0.0).then(|| covered / size);
        CoverageEntry {
            entity,
            size,
            coverage,
            deviation: coverage.map(|c| (c - q).abs()),
        }
    }

    pub fn is_defined(&self) -> bool {
        self.coverage.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub kind: CoverageKind,
    pub q: f64,
    pub entries: Vec<CoverageEntry>,
}

impl CoverageReport {
    pub fn entry(&self, entity: &str) -> Option<&CoverageEntry> {
        self.entries.iter().find(|e| e.entity == entity)
    }

    /// Largest deviation among defined entities.
    pub fn max_deviation(&self) -> Option<f64> {
        self.entries
            .iter()
            .filter_map(|e| e.deviation)
            .fold(None, |m, d| Some(m.map_or(d, |m: f64| m.max(d))))
    }

    /// Largest deviation among entities of at least `min_size`.
    pub fn max_deviation_at_least(&self, min_size: f64) -> Option<f64> {
        self.entries
            .iter()
            .filter(|e| e.size >= min_size)
            .filter_map(|e| e.deviation)
            .fold(None, |m, d| Some(m.map_or(d, |m: f64| m.max(d))))
    }
}

/// Fraction of rounds with `tau_hat >= tau`.
pub fn coverage(tr: &Transcript) -> Result<f64> {
    if tr.is_empty() {
        return Err(Error::EmptyTranscript);
    }
    let hits = tr.rounds().iter().filter(|r| r.covered()).count();
    Ok(hits as f64 / tr.len() as f64)
}

/// Weighted coverage of each group, with `T_G = Σ_t G_t`.
pub fn group_coverage(tr: &Transcript, groups: &Membership) -> Result<CoverageReport> {
    groups.check_rounds(tr)?;
    let q = tr.q().get();
    let entries = groups
        .columns()
        .iter()
        .map(|col| {
            let (mut covered, mut size) = (0.0, 0.0);
            for (r, &w) in tr.rounds().iter().zip(&col.weights) {
                size += w;
                if r.covered() {
                    covered += w;
                }
            }
            CoverageEntry::new(col.name.clone(), covered, size, q)
        })
        .collect();
    Ok(CoverageReport {
        kind: CoverageKind::Group,
        q,
        entries,
    })
}

/// Coverage conditional on the (binned) predicted level.
pub fn threshold_calibrated_coverage(tr: &Transcript, grid: Grid) -> Result<CoverageReport> {
    let q = tr.q().get();
    let rounds = tr.rounds();
    let entries = level_partition(tr, grid)
        .into_iter()
        .enumerate()
        .map(|(level, idx)| {
            let covered = idx.iter().filter(|&&i| rounds[i].covered()).count();
            CoverageEntry::new(grid.label(level), covered as f64, idx.len() as f64, q)
        })
        .collect();
    Ok(CoverageReport {
        kind: CoverageKind::ThresholdCalibrated,
        q,
        entries,
    })
}

/// Coverage of every `group@level` cell.
pub fn multivalid_coverage(tr: &Transcript, groups: &Membership, grid: Grid) -> Result<CoverageReport> {
    groups.check_rounds(tr)?;
    let q = tr.q().get();
    let rounds = tr.rounds();
    let parts = level_partition(tr, grid);
    let mut entries = Vec::with_capacity(groups.len() * grid.len());
    for col in groups.columns() {
        for (level, idx) in parts.iter().enumerate() {
            let (mut covered, mut size) = (0.0, 0.0);
            for &i in idx {
                let w = col.weights[i];
                size += w;
                if rounds[i].covered() {
                    covered += w;
                }
            }
            let entity = format!("{}@{}", col.name, grid.label(level));
            entries.push(CoverageEntry::new(entity, covered, size, q));
        }
    }
    Ok(CoverageReport {
        kind: CoverageKind::Multivalid,
        q,
        entries,
    })
}
