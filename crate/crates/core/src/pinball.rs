//! Pinball (quantile) loss and its subgradient.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A target coverage rate `q`, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Rate(f64);

impl Rate {
    pub fn new(q: f64) -> Result<Self> {
        if q > 0.0 && q < 1.0 {
            Ok(Rate(q))
        } else {
            Err(Error::OutOfRange {
                what: "q",
                value: q,
                range: "(0, 1)",
            })
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// `max{q, 1 - q}`, the largest per-round subgradient magnitude.
    #[inline]
    pub fn max_side(self) -> f64 {
        self.0.max(1.0 - self.0)
    }
}

impl TryFrom<f64> for Rate {
    type Error = Error;

    fn try_from(q: f64) -> Result<Self> {
        Rate::new(q)
    }
}

impl From<Rate> for f64 {
    fn from(q: Rate) -> f64 {
        q.0
    }
}

/// Pinball loss of predicting `tau_hat` when the realized score is `tau`.
///
/// `q (tau - tau_hat)` when `tau >= tau_hat`, otherwise `(q - 1)(tau - tau_hat)`.
#[inline]
pub fn pinball_loss(tau_hat: f64, tau: f64, q: Rate) -> f64 {
    let q = q.get();
    let diff = tau - tau_hat;
    if diff >= 0.0 {
        q * diff
    } else {
        (q - 1.0) * diff
    }
}

/// Subgradient of [`pinball_loss`] in `tau_hat`.
///
/// A tie (`tau == tau_hat`) counts as covered and takes the `1 - q` branch.
#[inline]
pub fn pinball_subgradient(tau_hat: f64, tau: f64, q: Rate) -> f64 {
    if tau > tau_hat {
        -q.get()
    } else {
        1.0 - q.get()
    }
}

/// Coverage indicator `1[tau_hat >= tau]`.
#[inline]
pub fn covers(tau_hat: f64, tau: f64) -> bool {
    tau_hat >= tau
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rate(q: f64) -> Rate {
        Rate::new(q).unwrap()
    }

    #[test]
    fn loss_examples() {
        assert_eq!(pinball_loss(0.5, 0.5, rate(0.9)), 0.0);
        assert!((pinball_loss(0.4, 0.5, rate(0.5)) - 0.05).abs() < 1e-12);
        assert!((pinball_loss(0.9, 0.5, rate(0.9)) - 0.04).abs() < 1e-12);
    }

    #[test]
    fn subgradient_examples() {
        assert!((pinball_subgradient(0.3, 0.7, rate(0.9)) + 0.9).abs() < 1e-12);
        assert!((pinball_subgradient(0.7, 0.3, rate(0.9)) - 0.1).abs() < 1e-12);
        assert_eq!(pinball_subgradient(0.5, 0.5, rate(0.5)), 0.5);
    }

    #[test]
    fn rate_rejects_boundary() {
        for q in [0.0, 1.0, -0.1, 1.2, f64::NAN] {
            assert!(Rate::new(q).is_err(), "q = {q}");
        }
        assert!(serde_json::from_str::<Rate>("1.5").is_err());
        assert_eq!(serde_json::from_str::<Rate>("0.9").unwrap().get(), 0.9);
    }

    #[test]
    fn grid_minimizer_tracks_empirical_quantile() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for &q in &[0.1, 0.5, 0.9] {
            let q = rate(q);
            let mut xs: Vec<f64> = (0..257).map(|_| rng.random::<f64>()).collect();
            let n = 1000;
            let step = 1.0 / n as f64;
            let (best, _) = (0..=n)
                .map(|i| {
                    let a = i as f64 * step;
                    (a, xs.iter().map(|&x| pinball_loss(a, x, q)).sum::<f64>())
                })
                .fold((0.0, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });
            xs.sort_by(f64::total_cmp);
            let idx = ((q.get() * xs.len() as f64).ceil() as usize).saturating_sub(1);
            let quantile = xs[idx];
            assert!((best - quantile).abs() <= step + 1e-12, "{best} vs {quantile}");
        }
    }

    proptest! {
        #[test]
        fn loss_is_nonnegative_and_zero_only_on_diagonal(a in -2.0f64..3.0, t in 0.0f64..1.0, q in 0.01f64..0.99) {
            let l = pinball_loss(a, t, rate(q));
            prop_assert!(l >= 0.0);
            if a != t { prop_assert!(l > 0.0); }
        }

        #[test]
        fn loss_is_convex(a in -2.0f64..3.0, b in -2.0f64..3.0, t in 0.0f64..1.0, q in 0.01f64..0.99, lam in 0.0f64..=1.0) {
            let q = rate(q);
            let mid = pinball_loss(lam * a + (1.0 - lam) * b, t, q);
            let chord = lam * pinball_loss(a, t, q) + (1.0 - lam) * pinball_loss(b, t, q);
            prop_assert!(mid <= chord + 1e-12);
        }

        #[test]
        fn subgradient_inequality(a in -2.0f64..3.0, b in -2.0f64..3.0, t in 0.0f64..1.0, q in 0.01f64..0.99) {
            let q = rate(q);
            let lhs = pinball_loss(b, t, q);
            let rhs = pinball_loss(a, t, q) + pinball_subgradient(a, t, q) * (b - a);
            prop_assert!(lhs >= rhs - 1e-12);
        }
    }
}
