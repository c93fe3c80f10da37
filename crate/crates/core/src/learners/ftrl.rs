//! Follow-the-regularized-leader over linearized pinball losses.
//!
//! The leader is computed through the mirror map: `theta_t = (∇R)^{-1}(-G)`
//! where `G` is the running sum of loss gradients, so the first-order
//! condition `∇R(theta_t) = Σ_{s<t} g_s (q - 1[tau_s <= tau_hat_s])` holds by
//! construction.

use std::fmt::Debug;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::learners::gcaci::{check_eta, dot};
use crate::pinball::{covers, Rate};
use crate::transcript::{check_unit, check_weights};
use crate::{Error, Result};

/// A strictly convex regularizer with an invertible gradient map.
pub trait Regularizer: Debug + Send + Sync {
    fn name(&self) -> &str;
    fn value(&self, theta: &[f64]) -> f64;
    fn gradient(&self, theta: &[f64]) -> Vec<f64>;
    /// Inverse of [`Regularizer::gradient`] (the mirror map).
    fn inverse_gradient(&self, dual: &[f64]) -> Vec<f64>;
}

/// `R(theta) = |theta|^2 / (2 eta)`; FTRL with it is online gradient descent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Euclidean {
    pub eta: f64,
}

impl Regularizer for Euclidean {
    fn name(&self) -> &str {
        "euclidean"
    }

    fn value(&self, theta: &[f64]) -> f64 {
        dot(theta, theta) / (2.0 * self.eta)
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().map(|x| x / self.eta).collect()
    }

    fn inverse_gradient(&self, dual: &[f64]) -> Vec<f64> {
        dual.iter().map(|u| self.eta * u).collect()
    }
}

/// `R(theta) = Σ |theta_i|^p / (p eta)` for `p > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PNorm {
    pub p: f64,
    pub eta: f64,
}

impl Regularizer for PNorm {
    fn name(&self) -> &str {
        "pnorm"
    }

    fn value(&self, theta: &[f64]) -> f64 {
        theta.iter().map(|x| x.abs().powf(self.p)).sum::<f64>() / (self.p * self.eta)
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .map(|x| x.signum() * x.abs().powf(self.p - 1.0) / self.eta)
            .collect()
    }

    fn inverse_gradient(&self, dual: &[f64]) -> Vec<f64> {
        dual.iter()
            .map(|u| u.signum() * (self.eta * u.abs()).powf(1.0 / (self.p - 1.0)))
            .collect()
    }
}

/// Serializable regularizer choice for config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum RegularizerConfig {
    Euclidean { eta: f64 },
    Pnorm { p: f64, eta: f64 },
}

impl RegularizerConfig {
    pub fn build(self) -> Result<Box<dyn Regularizer>> {
        match self {
            RegularizerConfig::Euclidean { eta } => Ok(Box::new(Euclidean { eta: check_eta(eta)? })),
            RegularizerConfig::Pnorm { p, eta } => {
                if !(p > 1.0 && p.is_finite()) {
                    return Err(Error::config(format!("p-norm regularizer needs p > 1, got {p}")));
                }
                Ok(Box::new(PNorm { p, eta: check_eta(eta)? }))
            }
        }
    }

    /// Step size when the regularizer is Euclidean.
    pub fn euclidean_eta(&self) -> Option<f64> {
        match self {
            RegularizerConfig::Euclidean { eta } => Some(*eta),
            RegularizerConfig::Pnorm { .. } => None,
        }
    }
}

const ROUND_TRIP_PROBES: usize = 16;
const ROUND_TRIP_TOL: f64 = 1e-9;

/// Check `(∇R)^{-1}(∇R(theta)) = theta` on random points.
pub fn check_mirror_map(reg: &dyn Regularizer, k: usize) -> Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..ROUND_TRIP_PROBES {
        let theta: Vec<f64> = (0..k).map(|_| rng.random_range(-5.0..5.0)).collect();
        let back = reg.inverse_gradient(&reg.gradient(&theta));
        let err = theta
            .iter()
            .zip(&back)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if back.len() != k || !(err <= ROUND_TRIP_TOL) {
            return Err(Error::config(format!(
                "regularizer `{}` does not have an invertible gradient map (round-trip error {err:e})",
                reg.name()
            )));
        }
    }
    Ok(())
}

#[derive(Debug)]
pub struct Ftrl {
    reg: Box<dyn Regularizer>,
    q: Rate,
    /// `-Σ ∇ℓ_s = Σ g_s (q - 1[tau_s <= tau_hat_s])`, which equals `∇R(theta_t)`.
    dual: Vec<f64>,
    theta: Vec<f64>,
    t: u64,
}

impl Ftrl {
    pub fn new(k: usize, q: f64, reg: Box<dyn Regularizer>) -> Result<Self> {
        if k == 0 {
            return Err(Error::config("FTRL needs at least one group"));
        }
        let q = Rate::new(q)?;
        check_mirror_map(reg.as_ref(), k)?;
        let dual = vec![0.0; k];
        let theta = reg.inverse_gradient(&dual);
        Ok(Ftrl {
            reg,
            q,
            dual,
            theta,
            t: 1,
        })
    }

    pub fn k(&self) -> usize {
        self.dual.len()
    }

    pub fn q(&self) -> Rate {
        self.q
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn regularizer(&self) -> &dyn Regularizer {
        self.reg.as_ref()
    }

    /// `∇R(theta_t)` as accumulated from the observed gradients.
    pub fn dual(&self) -> &[f64] {
        &self.dual
    }

    pub fn round(&self) -> u64 {
        self.t
    }

    pub fn predict(&self, g: &[f64]) -> Result<f64> {
        check_weights(g, self.k())?;
        Ok(dot(&self.theta, g))
    }

    pub fn update(&mut self, g: &[f64], tau: f64) -> Result<()> {
        check_weights(g, self.k())?;
        check_unit("tau", tau)?;
        let pred = dot(&self.theta, g);
        let coef = self.q.get() - if covers(pred, tau) { 1.0 } else { 0.0 };
        for (d, &gi) in self.dual.iter_mut().zip(g) {
            *d += coef * gi;
        }
        self.theta = self.reg.inverse_gradient(&self.dual);
        self.t += 1;
        Ok(())
    }

    /// Predict then update; returns the prediction made this round.
    pub fn step(&mut self, g: &[f64], tau: f64) -> Result<f64> {
        let pred = self.predict(g)?;
        self.update(g, tau)?;
        Ok(pred)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::gcaci::ThetaState;

    #[derive(Debug)]
    struct Constant;

    impl Regularizer for Constant {
        fn name(&self) -> &str {
            "constant"
        }
        fn value(&self, _: &[f64]) -> f64 {
            1.0
        }
        fn gradient(&self, theta: &[f64]) -> Vec<f64> {
            vec![0.0; theta.len()]
        }
        fn inverse_gradient(&self, dual: &[f64]) -> Vec<f64> {
            vec![0.0; dual.len()]
        }
    }

    #[test]
    fn euclidean_starts_at_zero() {
        let f = Ftrl::new(3, 0.9, Box::new(Euclidean { eta: 0.5 })).unwrap();
        assert_eq!(f.theta(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn constant_regularizer_is_rejected() {
        assert!(matches!(Ftrl::new(2, 0.9, Box::new(Constant)), Err(Error::Config(_))));
    }

    #[test]
    fn pnorm_round_trips() {
        for p in [1.5, 2.0, 3.0] {
            let reg = PNorm { p, eta: 0.7 };
            check_mirror_map(&reg, 5).unwrap();
        }
        assert!(RegularizerConfig::Pnorm { p: 1.0, eta: 1.0 }.build().is_err());
    }

    #[test]
    fn one_dimensional_euclidean_matches_gcaci() {
        use rand::{Rng, SeedableRng};
        for seed in 0..10u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut f = Ftrl::new(1, 0.9, Box::new(Euclidean { eta: 1.0 })).unwrap();
            let mut g = ThetaState::new(1, 0.9, 1.0).unwrap();
            for _ in 0..500 {
                let tau: f64 = rng.random();
                let a = f.step(&[1.0], tau).unwrap();
                let b = g.step(&[1.0], tau).unwrap();
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn first_order_condition_holds_for_pnorm() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let reg = PNorm { p: 3.0, eta: 0.5 };
        let mut f = Ftrl::new(3, 0.8, Box::new(reg)).unwrap();
        let mut sums = [0.0; 3];
        for _ in 0..1000 {
            let g: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
            let tau: f64 = rng.random();
            let pred = f.step(&g, tau).unwrap();
            let ind = if pred >= tau { 1.0 } else { 0.0 };
            for i in 0..3 {
                sums[i] += g[i] * (0.8 - ind);
            }
        }
        let grad = reg.gradient(f.theta());
        for i in 0..3 {
            assert!((grad[i] - sums[i]).abs() < 1e-9 * (1.0 + sums[i].abs()));
        }
    }
}
