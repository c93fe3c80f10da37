//! The discretized action set `{0, 1/n, ..., 1}` and the smoothness profile type.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Evenly spaced prediction levels `{0, 1/n, ..., 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("grid resolution n must be positive"));
        }
        Ok(Grid { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of levels, `n + 1`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n + 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn level(&self, i: usize) -> f64 {
        debug_assert!(i <= self.n);
        i as f64 / self.n as f64
    }

    pub fn levels(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n + 1).map(move |i| self.level(i))
    }

    /// Index of the nearest level to `x`. Values outside `[0, 1]` clamp to the
    /// end levels; exact midpoints round down.
    pub fn bin(&self, x: f64) -> usize {
        let scaled = (x * self.n as f64 - 0.5).ceil();
        if scaled.is_nan() || scaled <= 0.0 {
            0
        } else if scaled >= self.n as f64 {
            self.n
        } else {
            scaled as usize
        }
    }

    /// Format a level for entity names, e.g. `0.25`.
    pub fn label(&self, i: usize) -> String {
        format!("{}", self.level(i))
    }
}

impl TryFrom<usize> for Grid {
    type Error = Error;

    fn try_from(n: usize) -> Result<Self> {
        Grid::new(n)
    }
}

impl From<Grid> for usize {
    fn from(g: Grid) -> usize {
        g.n
    }
}

/// Empirical `(alpha, rho, r)`-smoothness: every width-`1/r` interval carries
/// between `alpha` and `rho` of the mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessProfile {
    pub r: usize,
    pub alpha: f64,
    pub rho: f64,
}

impl SmoothnessProfile {
    pub fn new(r: usize, alpha: f64, rho: f64) -> Result<Self> {
        if r == 0 {
            return Err(Error::config("smoothness resolution r must be positive"));
        }
        if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&rho) || alpha > rho {
            return Err(Error::config(format!(
                "smoothness requires 0 <= alpha <= rho <= 1 (alpha = {alpha}, rho = {rho})"
            )));
        }
        if alpha * r as f64 > 1.0 + 1e-12 {
            return Err(Error::config(format!(
                "smoothness requires alpha * r <= 1 (alpha = {alpha}, r = {r})"
            )));
        }
        Ok(SmoothnessProfile { r, alpha, rho })
    }

    /// `alpha == 0` makes every bound that divides by it vacuous.
    pub fn is_degenerate(&self) -> bool {
        self.alpha <= 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels_are_evenly_spaced() {
        let g = Grid::new(4).unwrap();
        let levels: Vec<f64> = g.levels().collect();
        assert_eq!(levels, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(Grid::new(1).unwrap().levels().count(), 2);
        assert!(Grid::new(0).is_err());
    }

    #[test]
    fn binning_rounds_to_nearest_with_ties_down() {
        let g = Grid::new(4).unwrap();
        assert_eq!(g.bin(0.1), 0);
        assert_eq!(g.bin(0.125), 0);
        assert_eq!(g.bin(0.13), 1);
        assert_eq!(g.bin(0.375), 1);
        assert_eq!(g.bin(-3.0), 0);
        assert_eq!(g.bin(7.0), 4);
        let g = Grid::new(10).unwrap();
        for i in 0..=10 {
            assert_eq!(g.bin(g.level(i)), i);
            assert_eq!(g.bin(i as f64 * 0.1), i);
        }
        let g = Grid::new(20).unwrap();
        assert_eq!(g.bin(0.4), 8);
        assert_eq!(g.bin(0.9), 18);
    }

    #[test]
    fn profile_invariants() {
        assert!(SmoothnessProfile::new(10, 0.1, 0.2).is_ok());
        assert!(SmoothnessProfile::new(10, 0.3, 0.2).is_err());
        assert!(SmoothnessProfile::new(10, 0.2, 0.5).is_err());
        assert!(SmoothnessProfile::new(0, 0.0, 0.0).is_err());
    }
}
