//! Score streams: i.i.d. draws, scripted adversaries, the square-root growth
//! construction, a two-phase shift and CSV ingestion.
//!
//! A stream emits, per round, the score `tau_t` and a context vector. Groups
//! read the context through [`crate::groups::GroupGenerator::Context`]; streams that carry
//! structure of their own (the contextual example, the growth construction,
//! CSV files) expose it there and suggest matching groups via
//! [`StreamSpec::default_groups`].

mod distribution;

use std::fs::File;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use distribution::{Distribution, Sampler};

use crate::groups::{GroupKind, GroupSpec};
use crate::transcript::CsvTable;
use crate::{Error, Result};

/// One round as revealed by a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamRound {
    pub t: u64,
    pub context: Vec<f64>,
    pub tau: f64,
    /// A recorded prediction, present only for ingested transcripts.
    pub tau_hat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StreamSpec {
    Iid {
        horizon: u64,
        distribution: Distribution,
        seed: u64,
    },
    /// Round `t` draws from `distributions[d - 1]`, where `d` is the largest
    /// `i <= distributions.len()` dividing `t`. Pairs with the modular groups
    /// to give each group its own score distribution.
    GroupedIid {
        horizon: u64,
        distributions: Vec<Distribution>,
        seed: u64,
    },
    /// Scores alternate 0.5 (odd rounds) and 1.0 (even rounds).
    Example1 { horizon: u64 },
    /// Context `[1, 0]` (A, score 0.5) or `[0, 1]` (B, score 1.0), each with
    /// probability one half.
    Example2 { horizon: u64, seed: u64 },
    /// Score 1 every round; context `[g_t]` with `g_1 = 0` and
    /// `g_t = 1 / (2 sqrt(t - 1))` afterwards.
    LowerBound { horizon: u64 },
    /// The first `ceil(split * horizon)` rounds from `first`, the rest from `second`.
    TwoPhaseShift {
        horizon: u64,
        split: f64,
        first: Distribution,
        second: Distribution,
        seed: u64,
    },
    /// Rounds read from a CSV file; the `g_i` columns become the context.
    Csv { path: PathBuf },
}

impl StreamSpec {
    pub fn validate(&self) -> Result<()> {
        let horizon = |h: u64| {
            if h == 0 {
                Err(Error::config("stream horizon must be at least 1"))
            } else {
                Ok(())
            }
        };
        match self {
            StreamSpec::Iid { horizon: h, distribution, .. } => {
                horizon(*h)?;
                distribution.validate()
            }
            StreamSpec::GroupedIid { horizon: h, distributions, .. } => {
                horizon(*h)?;
                if distributions.is_empty() {
                    return Err(Error::config("grouped_iid needs at least one distribution"));
                }
                distributions.iter().try_for_each(Distribution::validate)
            }
            StreamSpec::Example1 { horizon: h } | StreamSpec::Example2 { horizon: h, .. } => horizon(*h),
            StreamSpec::LowerBound { horizon: h } => {
                if *h < 2 {
                    return Err(Error::config("lower_bound stream needs horizon >= 2"));
                }
                Ok(())
            }
            StreamSpec::TwoPhaseShift { horizon: h, split, first, second, .. } => {
                horizon(*h)?;
                if !(*split > 0.0 && *split < 1.0) {
                    return Err(Error::config(format!("split {split} must lie in (0, 1)")));
                }
                first.validate()?;
                second.validate()
            }
            StreamSpec::Csv { .. } => Ok(()),
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            StreamSpec::Iid { seed, .. }
            | StreamSpec::GroupedIid { seed, .. }
            | StreamSpec::Example2 { seed, .. }
            | StreamSpec::TwoPhaseShift { seed, .. } => Some(*seed),
            _ => None,
        }
    }

    /// Replace the seed of a stochastic stream; deterministic kinds are unchanged.
    pub fn set_seed(&mut self, new: u64) {
        match self {
            StreamSpec::Iid { seed, .. }
            | StreamSpec::GroupedIid { seed, .. }
            | StreamSpec::Example2 { seed, .. }
            | StreamSpec::TwoPhaseShift { seed, .. } => *seed = new,
            _ => {}
        }
    }

    /// Groups that expose the stream's own structure. CSV streams need the
    /// file to know their width, so they are opened here.
    pub fn default_groups(&self) -> Result<Vec<GroupSpec>> {
        Ok(match self {
            StreamSpec::Example2 { .. } => vec![
                GroupSpec::all("all"),
                GroupSpec::context("A", GroupKind::Binary, 0),
                GroupSpec::context("B", GroupKind::Binary, 1),
            ],
            StreamSpec::LowerBound { .. } => vec![GroupSpec::context("g", GroupKind::Weighted, 0)],
            StreamSpec::Csv { path } => {
                let table = csv_ingest(path)?;
                (0..table.k)
                    .map(|i| GroupSpec::context(format!("g_{}", i + 1), GroupKind::Weighted, i))
                    .collect()
            }
            _ => vec![GroupSpec::all("all")],
        })
    }

    pub fn open(&self) -> Result<Stream> {
        self.validate()?;
        let inner = match self {
            StreamSpec::Iid { horizon, distribution, seed } => Inner::Iid {
                horizon: *horizon,
                sampler: distribution.sampler()?,
                rng: ChaCha8Rng::seed_from_u64(*seed),
            },
            StreamSpec::GroupedIid { horizon, distributions, seed } => Inner::Grouped {
                horizon: *horizon,
                samplers: distributions.iter().map(Distribution::sampler).collect::<Result<_>>()?,
                rng: ChaCha8Rng::seed_from_u64(*seed),
            },
            StreamSpec::Example1 { horizon } => Inner::Example1 { horizon: *horizon },
            StreamSpec::Example2 { horizon, seed } => Inner::Example2 {
                horizon: *horizon,
                rng: ChaCha8Rng::seed_from_u64(*seed),
            },
            StreamSpec::LowerBound { horizon } => Inner::LowerBound { horizon: *horizon },
            StreamSpec::TwoPhaseShift { horizon, split, first, second, seed } => Inner::TwoPhase {
                horizon: *horizon,
                switch: (split * *horizon as f64).ceil() as u64,
                first: first.sampler()?,
                second: second.sampler()?,
                rng: ChaCha8Rng::seed_from_u64(*seed),
            },
            StreamSpec::Csv { path } => {
                let table = csv_ingest(path)?;
                Inner::Table {
                    rows: table.rows.into_iter(),
                }
            }
        };
        Ok(Stream { inner, t: 0 })
    }
}

enum Inner {
    Iid { horizon: u64, sampler: Sampler, rng: ChaCha8Rng },
    Grouped { horizon: u64, samplers: Vec<Sampler>, rng: ChaCha8Rng },
    Example1 { horizon: u64 },
    Example2 { horizon: u64, rng: ChaCha8Rng },
    LowerBound { horizon: u64 },
    TwoPhase { horizon: u64, switch: u64, first: Sampler, second: Sampler, rng: ChaCha8Rng },
    Table { rows: std::vec::IntoIter<crate::transcript::CsvRow> },
}

/// An opened stream; iterate it to receive rounds in order.
pub struct Stream {
    inner: Inner,
    t: u64,
}

impl Iterator for Stream {
    type Item = StreamRound;

    fn next(&mut self) -> Option<StreamRound> {
        let t = self.t + 1;
        let plain = |tau: f64| StreamRound {
            t,
            context: Vec::new(),
            tau,
            tau_hat: None,
        };
        let round = match &mut self.inner {
            Inner::Table { rows } => {
                let row = rows.next()?;
                self.t = row.t;
                return Some(StreamRound {
                    t: row.t,
                    context: row.g,
                    tau: row.tau,
                    tau_hat: row.tau_hat,
                });
            }
            Inner::Iid { horizon, sampler, rng } => {
                if t > *horizon {
                    return None;
                }
                plain(sampler.sample(rng))
            }
            Inner::Grouped { horizon, samplers, rng } => {
                if t > *horizon {
                    return None;
                }
                let d = (1..=samplers.len() as u64).rev().find(|i| t % i == 0).unwrap_or(1);
                plain(samplers[d as usize - 1].sample(rng))
            }
            Inner::Example1 { horizon } => {
                if t > *horizon {
                    return None;
                }
                plain(if t % 2 == 1 { 0.5 } else { 1.0 })
            }
            Inner::Example2 { horizon, rng } => {
                if t > *horizon {
                    return None;
                }
                let a = rng.random_bool(0.5);
                StreamRound {
                    t,
                    context: if a { vec![1.0, 0.0] } else { vec![0.0, 1.0] },
                    tau: if a { 0.5 } else { 1.0 },
                    tau_hat: None,
                }
            }
            Inner::LowerBound { horizon } => {
                if t > *horizon {
                    return None;
                }
                let g = if t == 1 { 0.0 } else { 1.0 / (2.0 * ((t - 1) as f64).sqrt()) };
                StreamRound {
                    t,
                    context: vec![g],
                    tau: 1.0,
                    tau_hat: None,
                }
            }
            Inner::TwoPhase { horizon, switch, first, second, rng } => {
                if t > *horizon {
                    return None;
                }
                plain(if t <= *switch { first.sample(rng) } else { second.sample(rng) })
            }
        };
        self.t = t;
        Some(round)
    }
}

pub fn iid_stream(horizon: u64, distribution: Distribution, seed: u64) -> Result<Stream> {
    StreamSpec::Iid { horizon, distribution, seed }.open()
}

pub fn example1_stream(horizon: u64) -> Result<Stream> {
    StreamSpec::Example1 { horizon }.open()
}

pub fn example2_stream(horizon: u64, seed: u64) -> Result<Stream> {
    StreamSpec::Example2 { horizon, seed }.open()
}

pub fn lower_bound_stream(horizon: u64) -> Result<Stream> {
    StreamSpec::LowerBound { horizon }.open()
}

pub fn two_phase_shift_stream(
    horizon: u64,
    split: f64,
    first: Distribution,
    second: Distribution,
    seed: u64,
) -> Result<Stream> {
    StreamSpec::TwoPhaseShift { horizon, split, first, second, seed }.open()
}

/// Binary groups `mod_1 ..= mod_k`; `mod_i` is active when `i` divides `t`.
pub fn modular_groups(k: u64) -> Result<Vec<GroupSpec>> {
    if k == 0 {
        return Err(Error::config("need at least one modular group"));
    }
    Ok((1..=k).map(GroupSpec::modular).collect())
}

/// Read a stream or transcript CSV file.
pub fn csv_ingest(path: impl AsRef<Path>) -> Result<CsvTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    CsvTable::read(std::io::BufReader::new(file))
}

/// Fixed prediction rules that reproduce the two counterexamples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Script {
    /// 0.4 on odd rounds, 0.9 on even rounds.
    Example1,
    /// 0.4 when the context says A, 0.9 when it says B.
    Example2,
}

impl Script {
    pub fn predict(self, t: u64, context: &[f64]) -> Result<f64> {
        match self {
            Script::Example1 => Ok(if t % 2 == 1 { 0.4 } else { 0.9 }),
            Script::Example2 => match context {
                [a, _] => Ok(if *a > 0.5 { 0.4 } else { 0.9 }),
                _ => Err(Error::config(format!(
                    "the example2 script needs a two-column A/B context, got {} columns",
                    context.len()
                ))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn taus(s: Stream) -> Vec<f64> {
        s.map(|r| r.tau).collect()
    }

    #[test]
    fn example1_scores() {
        assert_eq!(taus(example1_stream(4).unwrap()), vec![0.5, 1.0, 0.5, 1.0]);
    }

    #[test]
    fn example2_contexts_match_scores() {
        let rounds: Vec<_> = example2_stream(10_000, 5).unwrap().collect();
        let mut a = 0usize;
        for r in &rounds {
            let is_a = r.context == [1.0, 0.0];
            assert!(is_a || r.context == [0.0, 1.0]);
            assert_eq!(r.tau, if is_a { 0.5 } else { 1.0 });
            a += usize::from(is_a);
        }
        let t = rounds.len() as f64;
        assert!((a as f64 / t - 0.5).abs() <= 3.0 / t.sqrt());
    }

    #[test]
    fn lower_bound_weights() {
        let rounds: Vec<_> = lower_bound_stream(5).unwrap().collect();
        assert_eq!(rounds[0].context, vec![0.0]);
        assert_eq!(rounds[1].context, vec![0.5]);
        assert!((rounds[4].context[0] - 0.25).abs() < 1e-15);
        assert!(rounds.iter().all(|r| r.tau == 1.0));
        assert!(lower_bound_stream(1).is_err());
    }

    #[test]
    fn two_phase_switches_at_ceiling() {
        let first = Distribution::uniform(0.0, 0.5).unwrap();
        let second = Distribution::uniform(0.5, 1.0).unwrap();
        let xs = taus(two_phase_shift_stream(7, 0.5, first, second, 1).unwrap());
        assert_eq!(xs.len(), 7);
        assert!(xs[..4].iter().all(|&x| x < 0.5));
        assert!(xs[4..].iter().all(|&x| x >= 0.5));
        let bad = two_phase_shift_stream(7, 1.0, Distribution::atom(0.1).unwrap(), Distribution::atom(0.2).unwrap(), 1);
        assert!(bad.is_err());
    }

    #[test]
    fn two_phase_quantiles_jump() {
        let first = Distribution::uniform(0.0, 0.5).unwrap();
        let second = Distribution::uniform(0.5, 1.0).unwrap();
        let xs = taus(two_phase_shift_stream(100_000, 0.5, first, second, 2).unwrap());
        let q = |s: &[f64]| {
            let mut v = s.to_vec();
            v.sort_by(f64::total_cmp);
            v[(0.9 * v.len() as f64).ceil() as usize - 1]
        };
        assert!((q(&xs[..50_000]) - 0.45).abs() < 0.01);
        assert!((q(&xs[50_000..]) - 0.95).abs() < 0.01);
    }

    #[test]
    fn same_seed_same_stream() {
        let d = Distribution::Beta { alpha: 2.0, beta: 5.0 };
        let a = taus(iid_stream(1000, d.clone(), 9).unwrap());
        let b = taus(iid_stream(1000, d.clone(), 9).unwrap());
        let c = taus(iid_stream(1000, d, 10).unwrap());
        assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        assert_ne!(a, c);
    }

    #[test]
    fn grouped_iid_uses_largest_divisor() {
        let spec = StreamSpec::GroupedIid {
            horizon: 12,
            distributions: vec![Distribution::atom(0.1).unwrap(), Distribution::atom(0.2).unwrap(), Distribution::atom(0.3).unwrap()],
            seed: 0,
        };
        let xs = taus(spec.open().unwrap());
        assert_eq!(xs, vec![0.1, 0.2, 0.3, 0.2, 0.1, 0.3, 0.1, 0.2, 0.3, 0.2, 0.1, 0.3]);
    }

    #[test]
    fn modular_group_sizes() {
        let groups = modular_groups(20).unwrap();
        let size = |i: usize| (1..=100u64).filter(|&t| groups[i].weight(t, &[], &[]).unwrap() == 1.0).count();
        assert_eq!(size(0), 100);
        assert_eq!(size(3), 25);
        assert_eq!(groups[1].weight(4, &[], &[]).unwrap(), 1.0);
        assert_eq!(groups[1].weight(5, &[], &[]).unwrap(), 0.0);
        assert!(modular_groups(0).is_err());
    }

    #[test]
    fn scripts() {
        assert_eq!(Script::Example1.predict(1, &[]).unwrap(), 0.4);
        assert_eq!(Script::Example1.predict(2, &[]).unwrap(), 0.9);
        assert_eq!(Script::Example2.predict(3, &[1.0, 0.0]).unwrap(), 0.4);
        assert_eq!(Script::Example2.predict(3, &[0.0, 1.0]).unwrap(), 0.9);
        assert!(Script::Example2.predict(3, &[]).is_err());
    }

    #[test]
    fn csv_rejects_out_of_range_score_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "t,tau,g_1\n1,0.5,1\n2,1.5,1\n").unwrap();
        match csv_ingest(&path) {
            Err(Error::Data { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected a data error, got {other:?}"),
        }
    }

    #[test]
    fn csv_stream_exposes_groups_as_context() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "t,tau,g_1,g_2\n1,0.5,1,0\n3,0.25,0.5,1\n").unwrap();
        let spec = StreamSpec::Csv { path };
        assert_eq!(spec.default_groups().unwrap().len(), 2);
        let rounds: Vec<_> = spec.open().unwrap().collect();
        assert_eq!(rounds[1].t, 3);
        assert_eq!(rounds[1].context, vec![0.5, 1.0]);
        assert_eq!(rounds[1].tau_hat, None);
    }
}
