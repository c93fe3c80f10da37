//! Prediction-independent group specifications.
//!
//! A group assigns each round a membership weight in `[0, 1]` from the round
//! index, the transcript so far and the context the stream reveals for the
//! round. The current prediction is never visible to a generator.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::transcript::Round;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKind {
    Binary,
    Weighted,
}

type CustomFn = dyn Fn(u64, &[Round], &[f64]) -> f64 + Send + Sync;

/// A user-supplied membership function of `(t, past rounds, context)`.
#[derive(Clone)]
pub struct CustomGenerator(Arc<CustomFn>);

impl CustomGenerator {
    pub fn new(f: impl Fn(u64, &[Round], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        CustomGenerator(Arc::new(f))
    }
}

impl fmt::Debug for CustomGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomGenerator(..)")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GroupGenerator {
    /// Every round, weight 1.
    All,
    /// A fixed weight every round.
    Constant { weight: f64 },
    /// Active at rounds `t` with `t ≡ 0 (mod modulus)`.
    Modular { modulus: u64 },
    /// Weight read from column `index` of the context the stream emits.
    Context { index: usize },
    /// Deterministic pseudo-random weight from `(seed, t)`: uniform on `[0, 1)`,
    /// or a Bernoulli(`p`) indicator when `p` is given.
    Hashed {
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<f64>,
    },
    /// Active when the previous round was not covered.
    AfterMiss,
    #[serde(skip)]
    Custom(CustomGenerator),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupSpec {
    pub name: String,
    pub kind: GroupKind,
    pub generator: GroupGenerator,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn unit_hash(seed: u64, t: u64) -> f64 {
    let h = splitmix64(splitmix64(seed) ^ t);
    (h >> 11) as f64 / (1u64 << 53) as f64
}

impl GroupSpec {
    pub fn new(name: impl Into<String>, kind: GroupKind, generator: GroupGenerator) -> Self {
        GroupSpec {
            name: name.into(),
            kind,
            generator,
        }
    }

    pub fn all(name: impl Into<String>) -> Self {
        GroupSpec::new(name, GroupKind::Binary, GroupGenerator::All)
    }

    pub fn modular(modulus: u64) -> Self {
        GroupSpec::new(
            format!("mod_{modulus}"),
            GroupKind::Binary,
            GroupGenerator::Modular { modulus },
        )
    }

    pub fn context(name: impl Into<String>, kind: GroupKind, index: usize) -> Self {
        GroupSpec::new(name, kind, GroupGenerator::Context { index })
    }

    pub fn validate(&self) -> Result<()> {
        match &self.generator {
            GroupGenerator::Modular { modulus: 0 } => {
                Err(Error::config(format!("group `{}`: modulus must be positive", self.name)))
            }
            GroupGenerator::Constant { weight } if !(0.0..=1.0).contains(weight) => Err(
                Error::config(format!("group `{}`: weight {weight} outside [0, 1]", self.name)),
            ),
            GroupGenerator::Constant { weight }
                if self.kind == GroupKind::Binary && *weight != 0.0 && *weight != 1.0 =>
            {
                Err(Error::config(format!(
                    "group `{}`: binary group with fractional constant weight",
                    self.name
                )))
            }
            GroupGenerator::Hashed { p: Some(p), .. } if !(0.0..=1.0).contains(p) => Err(
                Error::config(format!("group `{}`: probability {p} outside [0, 1]", self.name)),
            ),
            GroupGenerator::Hashed { p: None, .. } if self.kind == GroupKind::Binary => {
                Err(Error::config(format!(
                    "group `{}`: hashed weights without `p` are not binary",
                    self.name
                )))
            }
            _ => Ok(()),
        }
    }

    /// Membership weight at round `t` given the rounds before it.
    pub fn weight(&self, t: u64, past: &[Round], context: &[f64]) -> Result<f64> {
        let w = match &self.generator {
            GroupGenerator::All => 1.0,
            GroupGenerator::Constant { weight } => *weight,
            GroupGenerator::Modular { modulus } => {
                if *modulus != 0 && t % modulus == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            GroupGenerator::Context { index } => *context.get(*index).ok_or_else(|| {
                Error::config(format!(
                    "group `{}` reads context column {index} but the stream provides {}",
                    self.name,
                    context.len()
                ))
            })?,
            GroupGenerator::Hashed { seed, p } => {
                let u = unit_hash(*seed, t);
                match p {
                    Some(p) => f64::from(u8::from(u < *p)),
                    None => u,
                }
            }
            GroupGenerator::AfterMiss => match past.last() {
                Some(prev) if !prev.covered() => 1.0,
                _ => 0.0,
            },
            GroupGenerator::Custom(f) => (f.0)(t, past, context),
        };
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::OutOfRange {
                what: "group weight",
                value: w,
                range: "[0, 1]",
            });
        }
        if self.kind == GroupKind::Binary && w != 0.0 && w != 1.0 {
            return Err(Error::config(format!(
                "binary group `{}` produced weight {w} at round {t}",
                self.name
            )));
        }
        Ok(w)
    }
}

/// Evaluate every group for one round.
pub fn weights(specs: &[GroupSpec], t: u64, past: &[Round], context: &[f64]) -> Result<Vec<f64>> {
    specs.iter().map(|s| s.weight(t, past, context)).collect()
}
