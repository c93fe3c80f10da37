//! Pure audits over completed transcripts.
//!
//! Every function here takes a finished [`Transcript`] (plus group
//! memberships and a grid where relevant) and returns a report; nothing is
//! learned or mutated.

mod bounds;
mod coverage;
mod membership;
mod regret;
mod report;
mod smoothness;

pub use bounds::{
    check_theorem_bounds, quantile_loss_gap, BoundCheck, BoundEntry, BoundInputs, Status, Theorem,
};
pub use coverage::{
    coverage, group_coverage, multivalid_coverage, threshold_calibrated_coverage, CoverageEntry,
    CoverageKind, CoverageReport,
};
pub use membership::{GroupColumn, Membership};
pub use regret::{
    external_regret, group_conditional_regret, swap_regret, Comparator, RegretEntry, RegretKind,
    RegretReport,
};
pub use report::{write_flat_csv, FlatRow, ToFlatRows};
pub use smoothness::smoothness_estimate;

use crate::grid::Grid;
use crate::transcript::Transcript;

/// Round indices grouped by the grid level their prediction bins to.
pub(crate) fn level_partition(tr: &Transcript, grid: Grid) -> Vec<Vec<usize>> {
    let mut parts = vec![Vec::new(); grid.len()];
    for (i, r) in tr.rounds().iter().enumerate() {
        parts[grid.bin(r.tau_hat)].push(i);
    }
    parts
}
