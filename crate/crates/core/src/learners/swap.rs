//! Swap-regret meta-learner over a prediction grid.
//!
//! Full-information external-to-swap reduction: one multiplicative-weights
//! sub-learner per grid level. Row `a` of the matrix `Q` is sub-learner `a`'s
//! distribution over levels; the learner plays from the stationary
//! distribution `p = pQ` and charges sub-learner `a` the loss vector scaled by
//! `p[a]`. Pinball losses are divided by `max{q, 1-q}` so every sub-learner
//! sees losses spanning `[0, 1]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::Grid;
use crate::pinball::{pinball_loss, Rate};
use crate::transcript::check_unit;
use crate::{Error, Result};

pub const FIXED_POINT_MAX_ITER: usize = 10_000;
pub const FIXED_POINT_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SwapLearner {
    grid: Grid,
    q: Rate,
    horizon: Option<u64>,
    /// Per sub-learner cumulative scaled loss of each level.
    cum_loss: Vec<Vec<f64>>,
    /// Row-stochastic matrix, one row per sub-learner.
    rows: Vec<Vec<f64>>,
    p: Vec<f64>,
    rng: ChaCha8Rng,
    rounds: u64,
    drawn: Option<usize>,
    last_iterations: usize,
}

impl SwapLearner {
    /// `horizon` fixes the sub-learner rate at `sqrt(ln(n+1)/T)`; without it the
    /// anytime rate `sqrt(ln(n+1)/t)` is used.
    pub fn new(grid: Grid, q: f64, seed: u64, horizon: Option<u64>) -> Result<Self> {
        let q = Rate::new(q)?;
        if horizon == Some(0) {
            return Err(Error::config("swap learner horizon must be positive"));
        }
        let m = grid.len();
        // A separate ChaCha stream keeps draws independent of any score
        // stream opened with the same seed.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let uniform = vec![1.0 / m as f64; m];
        Ok(SwapLearner {
            grid,
            q,
            horizon,
            cum_loss: vec![vec![0.0; m]; m],
            rows: vec![uniform.clone(); m],
            p: uniform,
            rng,
            rounds: 0,
            drawn: None,
            last_iterations: 0,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn q(&self) -> Rate {
        self.q
    }

    /// Stationary distribution the next prediction is drawn from.
    pub fn distribution(&self) -> &[f64] {
        &self.p
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    /// Power iterations used by the last fixed-point solve.
    pub fn last_iterations(&self) -> usize {
        self.last_iterations
    }

    pub fn learning_rate(&self) -> f64 {
        let ln_m = (self.grid.len() as f64).ln();
        let denom = self.horizon.unwrap_or(self.rounds.max(1)) as f64;
        (ln_m / denom).sqrt()
    }

    /// `|p - pQ|_1`.
    pub fn stationarity_residual(&self) -> f64 {
        l1_diff(&self.p, &mul_left(&self.p, &self.rows))
    }

    /// Draw a level index from `p`.
    pub fn predict_index(&mut self) -> usize {
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        let mut pick = self.p.len() - 1;
        for (i, &w) in self.p.iter().enumerate() {
            acc += w;
            if u < acc {
                pick = i;
                break;
            }
        }
        self.drawn = Some(pick);
        pick
    }

    /// Draw a level and return its value.
    pub fn predict(&mut self) -> f64 {
        let i = self.predict_index();
        self.grid.level(i)
    }

    pub fn update(&mut self, tau: f64) -> Result<()> {
        check_unit("tau", tau)?;
        if self.drawn.take().is_none() {
            return Err(Error::config("swap learner updated without a prediction this round"));
        }
        let scale = 1.0 / self.q.max_side();
        let losses: Vec<f64> = self
            .grid
            .levels()
            .map(|a| scale * pinball_loss(a, tau, self.q))
            .collect();
        for (row_loss, &mass) in self.cum_loss.iter_mut().zip(&self.p) {
            for (c, l) in row_loss.iter_mut().zip(&losses) {
                *c += mass * l;
            }
        }
        self.rounds += 1;
        let eta = self.learning_rate();
        for (row, cum) in self.rows.iter_mut().zip(&self.cum_loss) {
            softmin_into(row, cum, eta);
        }
        self.solve_fixed_point()
    }

    /// Pinball loss of every level for score `tau`, before normalization and
    /// before scaling by `p`.
    pub fn loss_vector(&self, tau: f64) -> Vec<f64> {
        self.grid.levels().map(|a| pinball_loss(a, tau, self.q)).collect()
    }

    fn solve_fixed_point(&mut self) -> Result<()> {
        let mut p = self.p.clone();
        for it in 1..=FIXED_POINT_MAX_ITER {
            let mut next = mul_left(&p, &self.rows);
            let s: f64 = next.iter().sum();
            next.iter_mut().for_each(|x| *x /= s);
            let diff = l1_diff(&next, &p);
            p = next;
            if diff <= FIXED_POINT_TOL {
                self.p = p;
                self.last_iterations = it;
                return Ok(());
            }
        }
        let residual = l1_diff(&p, &mul_left(&p, &self.rows));
        Err(Error::Numerical {
            message: format!("swap learner fixed point did not converge at round {}", self.rounds),
            iterations: FIXED_POINT_MAX_ITER,
            residual,
        })
    }
}

fn softmin_into(out: &mut [f64], cum: &[f64], eta: f64) {
    let min = cum.iter().copied().fold(f64::INFINITY, f64::min);
    let mut total = 0.0;
    for (o, &c) in out.iter_mut().zip(cum) {
        *o = (-eta * (c - min)).exp();
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
}

/// Row vector times matrix: `(pQ)_j = Σ_i p_i Q_ij`.
fn mul_left(p: &[f64], rows: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; p.len()];
    for (&pi, row) in p.iter().zip(rows) {
        for (o, &q) in out.iter_mut().zip(row) {
            *o += pi * q;
        }
    }
    out
}

fn l1_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_simplex(v: &[f64]) {
        assert!(v.iter().all(|&x| x >= 0.0));
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn uniform_start() {
        let s = SwapLearner::new(Grid::new(4).unwrap(), 0.9, 1, None).unwrap();
        assert_eq!(s.distribution(), &[0.2; 5]);
        let s = SwapLearner::new(Grid::new(1).unwrap(), 0.9, 1, None).unwrap();
        assert_eq!(s.distribution().len(), 2);
    }

    #[test]
    fn degenerate_grid_plays_all_or_nothing() {
        let mut s = SwapLearner::new(Grid::new(1).unwrap(), 0.5, 9, None).unwrap();
        for _ in 0..50 {
            let a = s.predict();
            assert!(a == 0.0 || a == 1.0);
            s.update(0.3).unwrap();
        }
    }

    #[test]
    fn loss_vector_example() {
        let s = SwapLearner::new(Grid::new(2).unwrap(), 0.9, 0, None).unwrap();
        let l = s.loss_vector(1.0);
        let expect = [0.9, 0.45, 0.0];
        for (a, b) in l.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn update_requires_prediction() {
        let mut s = SwapLearner::new(Grid::new(3).unwrap(), 0.5, 0, None).unwrap();
        assert!(s.update(0.5).is_err());
        s.predict();
        assert!(s.update(0.5).is_ok());
        assert!(s.update(0.5).is_err());
    }

    #[test]
    fn distributions_stay_normalized_and_stationary() {
        let mut s = SwapLearner::new(Grid::new(10).unwrap(), 0.7, 3, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            s.predict();
            s.update(rng.random()).unwrap();
            assert_simplex(s.distribution());
            s.rows().iter().for_each(|r| assert_simplex(r));
            assert!(s.stationarity_residual() <= 1e-8);
        }
    }

    #[test]
    fn concentrates_on_constant_score() {
        let mut s = SwapLearner::new(Grid::new(10).unwrap(), 0.5, 17, None).unwrap();
        for _ in 0..10_000 {
            s.predict();
            s.update(0.5).unwrap();
        }
        let mass = s.distribution()[5];
        assert!(mass > 0.9, "mass at 0.5 = {mass}");
    }

    #[test]
    fn seeded_runs_are_identical() {
        let run = || {
            let mut s = SwapLearner::new(Grid::new(8).unwrap(), 0.9, 42, Some(200)).unwrap();
            (0..200)
                .map(|i| {
                    let a = s.predict();
                    s.update((i % 7) as f64 / 7.0).unwrap();
                    a.to_bits()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
