//! Online conformal prediction through the lens of regret.
//!
//! The crate is organised around the *transcript*: the realized sequence of
//! group-membership vectors, scores and predicted thresholds produced by an
//! online learner. Learners produce transcripts, auditors consume them.
//!
//! - [`pinball`], [`transcript`], [`groups`], [`grid`]: the shared vocabulary.
//! - [`learners`]: GCACI, generic FTRL, 1-D ACI and a swap-regret meta-learner.
//! - [`auditors`]: coverage, regret and smoothness audits plus executable bound checks.
//! - [`environments`]: score streams, including the adversarial constructions.
//! - [`harness`]: config-driven runs, audits, learning-rate sweeps and norm traces.

pub mod auditors;
pub mod environments;
mod error;
pub mod grid;
pub mod groups;
pub mod harness;
pub mod learners;
pub mod pinball;
pub mod transcript;

pub use error::{Error, Result};
pub use grid::{Grid, SmoothnessProfile};
pub use groups::{GroupGenerator, GroupKind, GroupSpec};
pub use pinball::{pinball_loss, pinball_subgradient, Rate};
pub use transcript::{Round, Transcript};

/// Absolute tolerance used for exact-identity comparisons.
pub const IDENTITY_TOL: f64 = 1e-9;
