//! Adaptive conformal inference: the one-dimensional, context-free case of GCACI.

use crate::learners::gcaci::ThetaState;
use crate::Result;

const UNIT: [f64; 1] = [1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct Aci {
    state: ThetaState,
}

impl Aci {
    pub fn new(q: f64, eta: f64) -> Result<Self> {
        Ok(Aci {
            state: ThetaState::new(1, q, eta)?,
        })
    }

    /// Current threshold.
    pub fn threshold(&self) -> f64 {
        self.state.theta()[0]
    }

    /// Predict for this round, then learn from the realized score.
    pub fn step(&mut self, tau: f64) -> Result<f64> {
        self.state.step(&UNIT, tau)
    }

    pub fn state(&self) -> &ThetaState {
        &self.state
    }
}
