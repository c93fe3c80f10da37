//! External, swap and group-conditional regret with respect to the pinball loss.
//!
//! Regret is realized loss minus comparator loss (equivalently, regret of the
//! payoff `-p_q`). Realized losses always use the prediction as played;
//! comparators range over the grid. For swap regret, rounds are partitioned by
//! the level their prediction bins to and each part gets its own best response,
//! so swap regret is at least external regret on every transcript.

use serde::{Deserialize, Serialize};

use super::{level_partition, Membership};
use crate::grid::Grid;
use crate::pinball::{pinball_loss, Rate};
use crate::transcript::Transcript;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegretKind {
    External,
    Swap,
}

/// The comparator attaining the reported regret.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    /// Constant modification rule `phi(x) = level`.
    Fixed { level: f64 },
    /// Level-to-level table; `map[i]` is the replacement for level `i / n`.
    Swap { map: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretEntry {
    pub entity: String,
    pub size: f64,
    pub realized_loss: f64,
    pub comparator_loss: f64,
    pub regret: f64,
    pub comparator: Comparator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub n: usize,
    pub kind: RegretKind,
    pub grouped: bool,
    pub entries: Vec<RegretEntry>,
}

impl RegretReport {
    pub fn entry(&self, entity: &str) -> Option<&RegretEntry> {
        self.entries.iter().find(|e| e.entity == entity)
    }

    /// Largest regret across entities.
    pub fn max_regret(&self) -> f64 {
        self.entries.iter().map(|e| e.regret).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Best fixed grid action for weighted rounds `(w_t, tau_hat_t, tau_t)`.
/// Ties prefer `prefer` (the identity for swap maps), then the lowest level.
fn best_response(
    rounds: impl Iterator<Item = (f64, f64, f64)> + Clone,
    grid: Grid,
    q: Rate,
    prefer: Option<usize>,
) -> (f64, usize, f64) {
    let realized: f64 = rounds.clone().map(|(w, th, t)| w * pinball_loss(th, t, q)).sum();
    let mut losses = vec![0.0; grid.len()];
    for (w, _, tau) in rounds {
        if w == 0.0 {
            continue;
        }
        for (b, l) in losses.iter_mut().enumerate() {
            *l += w * pinball_loss(grid.level(b), tau, q);
        }
    }
    let mut best = prefer.unwrap_or(0);
    for (b, &l) in losses.iter().enumerate() {
        if l < losses[best] {
            best = b;
        }
    }
    (realized, best, losses[best])
}

fn external_entry(tr: &Transcript, weights: Option<&[f64]>, name: String, grid: Grid) -> RegretEntry {
    let rounds = tr.rounds();
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let it = rounds.iter().enumerate().map(move |(i, r)| (w(i), r.tau_hat, r.tau));
    let (realized, best, best_loss) = best_response(it, grid, tr.q(), None);
    RegretEntry {
        entity: name,
        size: weights.map_or(tr.len() as f64, |w| w.iter().sum()),
        realized_loss: realized,
        comparator_loss: best_loss,
        regret: realized - best_loss,
        comparator: Comparator::Fixed {
            level: grid.level(best),
        },
    }
}

fn swap_entry(
    tr: &Transcript,
    weights: Option<&[f64]>,
    parts: &[Vec<usize>],
    name: String,
    grid: Grid,
) -> RegretEntry {
    let rounds = tr.rounds();
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let mut map = Vec::with_capacity(grid.len());
    let (mut realized, mut comparator, mut regret) = (0.0, 0.0, 0.0);
    for (level, idx) in parts.iter().enumerate() {
        let it = idx.iter().map(|&i| (w(i), rounds[i].tau_hat, rounds[i].tau));
        let (r, best, l) = best_response(it, grid, tr.q(), Some(level));
        realized += r;
        comparator += l;
        regret += r - l;
        map.push(grid.level(best));
    }
    RegretEntry {
        entity: name,
        size: weights.map_or(tr.len() as f64, |w| w.iter().sum()),
        realized_loss: realized,
        comparator_loss: comparator,
        regret,
        comparator: Comparator::Swap { map },
    }
}

/// Realized loss minus the loss of the best fixed grid action.
pub fn external_regret(tr: &Transcript, grid: Grid) -> Result<RegretReport> {
    if tr.is_empty() {
        return Err(Error::EmptyTranscript);
    }
    Ok(RegretReport {
        n: grid.n(),
        kind: RegretKind::External,
        grouped: false,
        entries: vec![external_entry(tr, None, "all".into(), grid)],
    })
}

/// Realized loss minus the loss after the best level-to-level relabeling.
pub fn swap_regret(tr: &Transcript, grid: Grid) -> Result<RegretReport> {
    if tr.is_empty() {
        return Err(Error::EmptyTranscript);
    }
    let parts = level_partition(tr, grid);
    Ok(RegretReport {
        n: grid.n(),
        kind: RegretKind::Swap,
        grouped: false,
        entries: vec![swap_entry(tr, None, &parts, "all".into(), grid)],
    })
}

/// Per-group regret on each group's weighted subsequence. Swap regret is only
/// defined here for binary groups.
pub fn group_conditional_regret(
    tr: &Transcript,
    groups: &Membership,
    grid: Grid,
    kind: RegretKind,
) -> Result<RegretReport> {
    groups.check_rounds(tr)?;
    if tr.is_empty() {
        return Err(Error::EmptyTranscript);
    }
    let entries = match kind {
        RegretKind::External => groups
            .columns()
            .iter()
            .map(|c| external_entry(tr, Some(&c.weights), c.name.clone(), grid))
            .collect(),
        RegretKind::Swap => {
            if let Some(c) = groups.columns().iter().find(|c| !c.is_binary()) {
                return Err(Error::config(format!(
                    "group-conditional swap regret needs binary groups; `{}` has fractional weights",
                    c.name
                )));
            }
            let parts = level_partition(tr, grid);
            groups
                .columns()
                .iter()
                .map(|c| swap_entry(tr, Some(&c.weights), &parts, c.name.clone(), grid))
                .collect()
        }
    };
    Ok(RegretReport {
        n: grid.n(),
        kind,
        grouped: true,
        entries,
    })
}
