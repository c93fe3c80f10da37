//! Score distributions on `[0, 1]`.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Beta, Distribution as _, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Rejections allowed before a truncated draw gives up and clamps.
const MAX_REJECTIONS: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Distribution {
    /// Uniform on `[a, b)` with `0 <= a < b <= 1`.
    Uniform { a: f64, b: f64 },
    Beta { alpha: f64, beta: f64 },
    /// Finitely many values with positive (unnormalized) weights.
    Atoms { values: Vec<f64>, weights: Vec<f64> },
    /// Normal restricted to `[0, 1]` by rejection; the mean must lie in `[0, 1]`
    /// and `sd` in `(0, 10]` so the accepted mass stays reasonable.
    TruncatedNormal { mean: f64, sd: f64 },
}

impl Distribution {
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        let d = Distribution::Uniform { a, b };
        d.validate()?;
        Ok(d)
    }

    pub fn atom(x: f64) -> Result<Self> {
        let d = Distribution::Atoms {
            values: vec![x],
            weights: vec![1.0],
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config(m));
        match self {
            Distribution::Uniform { a, b } => {
                if !(0.0 <= *a && a < b && *b <= 1.0) {
                    return bad(format!("uniform({a}, {b}) needs 0 <= a < b <= 1"));
                }
            }
            Distribution::Beta { alpha, beta } => {
                if !(*alpha > 0.0 && *beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
                    return bad(format!("beta({alpha}, {beta}) needs positive finite shapes"));
                }
            }
            Distribution::Atoms { values, weights } => {
                if values.is_empty() || values.len() != weights.len() {
                    return bad("atoms need matching, nonempty `values` and `weights`".into());
                }
                if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                    return bad(format!("atom {v} outside [0, 1]"));
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || weights.iter().all(|w| *w == 0.0) {
                    return bad("atom weights must be nonnegative with a positive total".into());
                }
            }
            Distribution::TruncatedNormal { mean, sd } => {
                if !(0.0..=1.0).contains(mean) || !(*sd > 0.0 && *sd <= 10.0) {
                    return bad(format!("truncated normal({mean}, {sd}) needs mean in [0, 1] and sd in (0, 10]"));
                }
            }
        }
        Ok(())
    }

    /// Build a sampler; validates first.
    pub fn sampler(&self) -> Result<Sampler> {
        self.validate()?;
        Ok(match self {
            Distribution::Uniform { a, b } => Sampler::Uniform(*a, *b),
            Distribution::Beta { alpha, beta } => {
                Sampler::Beta(Beta::new(*alpha, *beta).map_err(|e| Error::config(e.to_string()))?)
            }
            Distribution::Atoms { values, weights } => Sampler::Atoms(
                values.clone(),
                WeightedIndex::new(weights).map_err(|e| Error::config(e.to_string()))?,
            ),
            Distribution::TruncatedNormal { mean, sd } => {
                Sampler::TruncatedNormal(Normal::new(*mean, *sd).map_err(|e| Error::config(e.to_string()))?)
            }
        })
    }
}

#[derive(Debug, Clone)]
pub enum Sampler {
    Uniform(f64, f64),
    Beta(Beta<f64>),
    Atoms(Vec<f64>, WeightedIndex<f64>),
    TruncatedNormal(Normal<f64>),
}

impl Sampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Uniform(a, b) => a + (b - a) * rng.random::<f64>(),
            // Beta already lives on [0, 1]; the clamp only absorbs rounding.
            Sampler::Beta(d) => d.sample(rng).clamp(0.0, 1.0),
            Sampler::Atoms(values, idx) => values[idx.sample(rng)],
            Sampler::TruncatedNormal(d) => {
                for _ in 0..MAX_REJECTIONS {
                    let x = d.sample(rng);
                    if (0.0..=1.0).contains(&x) {
                        return x;
                    }
                }
                d.mean().clamp(0.0, 1.0)
            }
        }
    }
}
