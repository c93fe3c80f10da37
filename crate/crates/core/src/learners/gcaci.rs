//! Group-conditional ACI: online gradient descent on the pinball loss of
//! `<theta, g>` with additive updates.

use serde::{Deserialize, Serialize};

use crate::pinball::Rate;
use crate::transcript::{check_unit, check_weights};
use crate::{Error, Result};

/// Which branch an update took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Update {
    /// Prediction fell below the score: `theta += eta * q * g`.
    A,
    /// Prediction covered the score: `theta -= eta * (1 - q) * g`.
    B,
}

pub(crate) fn check_eta(eta: f64) -> Result<f64> {
    if eta > 0.0 && eta <= 1.0 {
        Ok(eta)
    } else {
        Err(Error::OutOfRange {
            what: "eta",
            value: eta,
            range: "(0, 1]",
        })
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Parameter vector plus configuration. `t` is the index of the round the
/// current `theta` will predict for.
///
/// The state keeps `s = Σ g (q - 1[tau <= pred])` and sets `theta = eta * s`,
/// which is the additive update without drift between `theta` and its closed
/// form, and rounds exactly like Euclidean FTRL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaState {
    theta: Vec<f64>,
    sum: Vec<f64>,
    eta: f64,
    q: Rate,
    t: u64,
}

impl ThetaState {
    /// `theta_1 = 0`.
    pub fn new(k: usize, q: f64, eta: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::config("GCACI needs at least one group"));
        }
        let q = Rate::new(q)?;
        let eta = check_eta(eta)?;
        Ok(ThetaState {
            theta: vec![0.0; k],
            sum: vec![0.0; k],
            eta,
            q,
            t: 1,
        })
    }

    pub fn k(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn q(&self) -> Rate {
        self.q
    }

    pub fn round(&self) -> u64 {
        self.t
    }

    /// `<theta_t, g_t>`.
    pub fn predict(&self, g: &[f64]) -> Result<f64> {
        check_weights(g, self.k())?;
        Ok(dot(&self.theta, g))
    }

    pub fn update(&mut self, g: &[f64], tau: f64) -> Result<Update> {
        check_weights(g, self.k())?;
        check_unit("tau", tau)?;
        let pred = dot(&self.theta, g);
        let (branch, coef) = if pred < tau {
            (Update::A, self.q.get())
        } else {
            (Update::B, self.q.get() - 1.0)
        };
        for ((th, s), &gi) in self.theta.iter_mut().zip(&mut self.sum).zip(g) {
            *s += coef * gi;
            *th = self.eta * *s;
        }
        self.t += 1;
        Ok(branch)
    }

    /// Predict then update; returns the prediction made this round.
    pub fn step(&mut self, g: &[f64], tau: f64) -> Result<f64> {
        let pred = self.predict(g)?;
        self.update(g, tau)?;
        Ok(pred)
    }

    pub fn sup_norm(&self) -> f64 {
        self.theta.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn sq_norm(&self) -> f64 {
        dot(&self.theta, &self.theta)
    }

    /// Squared-norm envelope after `rounds` updates:
    /// `rounds * eta * (eta * k * max{q, 1-q}^2 + 2q)`.
    pub fn sq_norm_envelope(&self, rounds: u64) -> f64 {
        sq_norm_envelope(rounds, self.eta, self.k(), self.q)
    }
}

pub fn sq_norm_envelope(rounds: u64, eta: f64, k: usize, q: Rate) -> f64 {
    let m = q.max_side();
    rounds as f64 * eta * (eta * k as f64 * m * m + 2.0 * q.get())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pinball::covers;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn init_examples() {
        assert_eq!(ThetaState::new(1, 0.9, 1.0).unwrap().theta(), &[0.0]);
        assert_eq!(ThetaState::new(20, 0.9, 1.0).unwrap().theta(), &[0.0; 20]);
        assert!(ThetaState::new(3, 1.2, 1.0).is_err());
        assert!(ThetaState::new(3, 0.9, 0.0).is_err());
        assert!(ThetaState::new(3, 0.9, 1.5).is_err());
        assert!(ThetaState::new(0, 0.9, 1.0).is_err());
    }

    #[test]
    fn predict_examples() {
        let s = ThetaState::new(2, 0.9, 1.0).unwrap();
        assert_eq!(s.predict(&[1.0, 1.0]).unwrap(), 0.0);
        let mut s = ThetaState::new(2, 0.9, 1.0).unwrap();
        s.theta = vec![0.5, 0.2];
        assert!((s.predict(&[1.0, 0.5]).unwrap() - 0.6).abs() < 1e-12);
        assert!(s.predict(&[1.0]).is_err());
        let mut s = ThetaState::new(1, 0.9, 1.0).unwrap();
        s.theta = vec![0.9];
        assert_eq!(s.predict(&[1.0]).unwrap(), 0.9);
    }

    #[test]
    fn update_examples() {
        let mut s = ThetaState::new(1, 0.9, 1.0).unwrap();
        assert_eq!(s.update(&[1.0], 0.5).unwrap(), Update::A);
        assert!((s.theta()[0] - 0.9).abs() < 1e-12);
        assert_eq!(s.update(&[1.0], 0.5).unwrap(), Update::B);
        assert!((s.theta()[0] - 0.8).abs() < 1e-12);
        assert_eq!(s.round(), 3);
        assert!(s.update(&[1.0], 1.5).is_err());
        assert!(s.update(&[1.0, 0.0], 0.5).is_err());
    }

    #[test]
    fn tie_triggers_update_b() {
        let mut s = ThetaState::new(1, 0.5, 1.0).unwrap();
        assert_eq!(s.update(&[1.0], 0.0).unwrap(), Update::B);
    }

    proptest! {
        #[test]
        fn closed_form_and_envelope(seed in any::<u64>(), k in 1usize..8, q in 0.05f64..0.95, eta in 0.01f64..=1.0) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut s = ThetaState::new(k, q, eta).unwrap();
            let mut sums = vec![0.0; k];
            for t in 1..=300u64 {
                let g: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
                let tau: f64 = rng.random();
                let pred = s.step(&g, tau).unwrap();
                let ind = if covers(pred, tau) { 1.0 } else { 0.0 };
                for i in 0..k {
                    sums[i] += g[i] * (q - ind);
                }
                prop_assert!(s.sq_norm() <= s.sq_norm_envelope(t) + 1e-9);
            }
            for i in 0..k {
                prop_assert!((s.theta()[i] - eta * sums[i]).abs() < 1e-9);
            }
        }
    }
}
