//! Empirical `(alpha, rho, r)`-smoothness of a sample of scores.

use crate::grid::SmoothnessProfile;
use crate::{Error, Result};

/// Slack for floating-point interval endpoints such as `0.35 + 0.1`.
const EDGE_EPS: f64 = 1e-12;

/// Estimate `(alpha, rho)` at resolution `r` for the empirical distribution of
/// `samples`.
///
/// `rho` is the largest mass of a closed interval of width `1/r`; `alpha` is
/// the smallest mass of a closed interval of width exactly `1/r` inside
/// `[0, 1]`. Wider intervals only gain mass, so the width-`1/r` intervals
/// settle both sides of the definition.
pub fn smoothness_estimate(samples: &[f64], r: usize) -> Result<SmoothnessProfile> {
    if samples.is_empty() {
        return Err(Error::config("smoothness estimate needs a nonempty sample"));
    }
    if r == 0 {
        return Err(Error::config("smoothness resolution r must be positive"));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let width = 1.0 / r as f64;

    // number of samples <= x
    let upto = |x: f64| xs.partition_point(|&s| s <= x + EDGE_EPS);
    // number of samples < x
    let below = |x: f64| xs.partition_point(|&s| s < x - EDGE_EPS);

    // an interval can always slide right until it starts at a sample
    let max_count = (0..xs.len())
        .map(|i| upto(xs[i] + width) - i)
        .max()
        .unwrap_or(0);

    // mass of [p, p + width] only drops just after p passes a sample, so the
    // minimum over p in [0, 1 - width] is attained at p = 0, p = 1 - width,
    // or just to the right of a sample
    let last_start = 1.0 - width;
    let mut min_count = upto(width) - below(0.0);
    min_count = min_count.min(upto(1.0) - below(last_start));
    for &s in &xs {
        if s >= 0.0 && s < last_start {
            min_count = min_count.min(upto(s + width) - upto(s));
        }
    }

    // Closed windows share endpoints, so an atom on a boundary is counted by
    // both neighbours and the raw minimum can exceed 1/r. Any smaller alpha is
    // still a valid lower mass, so cap it to keep alpha * r <= 1.
    let rho = max_count as f64 / n;
    let alpha = (min_count as f64 / n).min(rho).min(width);
    SmoothnessProfile::new(r, alpha, rho)
}
