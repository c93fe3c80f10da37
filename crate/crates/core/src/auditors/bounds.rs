//! Executable checks of the coverage/regret bounds.
//!
//! Every check measures both sides of an inequality from the transcript and
//! reports the slack. Slack is oriented so that `slack >= 0` means the
//! inequality holds, whichever side is the bound. Entities whose smoothness
//! estimate has `alpha == 0`, or whose size is below `min_size`, are reported
//! as vacuous rather than passing.

use serde::{Deserialize, Serialize};

use super::{
    coverage, external_regret, group_conditional_regret, level_partition, multivalid_coverage,
    smoothness_estimate, swap_regret, threshold_calibrated_coverage, Membership, RegretKind,
};
use crate::grid::{Grid, SmoothnessProfile};
use crate::pinball::{pinball_loss, Rate};
use crate::transcript::Transcript;
use crate::{Error, Result, IDENTITY_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    /// Marginal coverage from external regret under i.i.d. scores.
    StochasticCoverage,
    /// Threshold-calibrated coverage from swap regret.
    ThresholdCalibrated,
    /// Swap regret from threshold-calibrated coverage.
    SwapFromCalibration,
    /// Multivalid coverage from group-conditional swap regret.
    Multivalid,
    /// Group-conditional swap regret from multivalid coverage.
    GroupSwapFromMultivalid,
    /// `|Cov(G_i) - q| <= ||grad R(theta_{T+1})||_inf / T_i` for FTRL.
    FtrlCoverage,
    /// `|Cov(G_i) - q| <= ||theta_{T+1}||_inf / (eta T_i)` for GCACI.
    GcaciCoverage,
    /// Expected pinball-loss gap to the quantile grows quadratically.
    QuantileLossGap,
}

impl Theorem {
    pub const ALL: [Theorem; 8] = [
        Theorem::StochasticCoverage,
        Theorem::ThresholdCalibrated,
        Theorem::SwapFromCalibration,
        Theorem::Multivalid,
        Theorem::GroupSwapFromMultivalid,
        Theorem::FtrlCoverage,
        Theorem::GcaciCoverage,
        Theorem::QuantileLossGap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Theorem::StochasticCoverage => "stochastic_coverage",
            Theorem::ThresholdCalibrated => "threshold_calibrated",
            Theorem::SwapFromCalibration => "swap_from_calibration",
            Theorem::Multivalid => "multivalid",
            Theorem::GroupSwapFromMultivalid => "group_swap_from_multivalid",
            Theorem::FtrlCoverage => "ftrl_coverage",
            Theorem::GcaciCoverage => "gcaci_coverage",
            Theorem::QuantileLossGap => "quantile_loss_gap",
        }
    }
}

impl std::str::FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Theorem::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::config(format!("unknown theorem check `{s}`")))
    }
}

impl std::fmt::Display for Theorem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Vacuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub entity: String,
    pub size: f64,
    pub value: f64,
    pub bound: Option<f64>,
    pub slack: Option<f64>,
    pub status: Status,
    /// For identity-backed checks, the value the identity predicts.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub identity_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<SmoothnessProfile>,
}

impl BoundEntry {
    fn vacuous(entity: String, size: f64, value: f64, smoothness: Option<SmoothnessProfile>) -> Self {
        BoundEntry {
            entity,
            size,
            value,
            bound: None,
            slack: None,
            status: Status::Vacuous,
            identity_value: None,
            smoothness,
        }
    }

    fn upper(entity: String, size: f64, value: f64, bound: f64) -> Self {
        Self::judged(entity, size, value, bound, bound - value)
    }

    fn lower(entity: String, size: f64, value: f64, bound: f64) -> Self {
        Self::judged(entity, size, value, bound, value - bound)
    }

    fn judged(entity: String, size: f64, value: f64, bound: f64, slack: f64) -> Self {
        let status = if slack >= -IDENTITY_TOL {
            Status::Pass
        } else {
            Status::Fail
        };
        BoundEntry {
            entity,
            size,
            value,
            bound: Some(bound),
            slack: Some(slack),
            status,
            identity_value: None,
            smoothness: None,
        }
    }

    fn with_smoothness(mut self, s: SmoothnessProfile) -> Self {
        self.smoothness = Some(s);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub theorem: Theorem,
    /// The audited regret or coverage error fed into the bound, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub entries: Vec<BoundEntry>,
}

impl BoundCheck {
    /// `Fail` if any entry fails, `Vacuous` if none was decidable, else `Pass`.
    pub fn status(&self) -> Status {
        if self.entries.iter().any(|e| e.status == Status::Fail) {
            Status::Fail
        } else if self.entries.iter().any(|e| e.status == Status::Pass) {
            Status::Pass
        } else {
            Status::Vacuous
        }
    }

    pub fn min_slack(&self) -> Option<f64> {
        self.entries
            .iter()
            .filter_map(|e| e.slack)
            .fold(None, |m, s| Some(m.map_or(s, |m: f64| m.min(s))))
    }

    pub fn entry(&self, entity: &str) -> Option<&BoundEntry> {
        self.entries.iter().find(|e| e.entity == entity)
    }
}

/// Extra quantities some checks need beyond the transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundInputs {
    /// Smoothness resolution.
    pub r: usize,
    /// Entities smaller than this are reported as vacuous.
    pub min_size: f64,
    /// `grad R(theta_{T+1})` of an FTRL run.
    pub final_dual: Option<Vec<f64>>,
    /// `theta_{T+1}` of a GCACI run.
    pub final_theta: Option<Vec<f64>>,
    pub eta: Option<f64>,
    /// Slack added to the realized regret in the stochastic check.
    pub epsilon: f64,
}

impl Default for BoundInputs {
    fn default() -> Self {
        BoundInputs {
            r: 10,
            min_size: 1.0,
            final_dual: None,
            final_theta: None,
            eta: None,
            epsilon: 0.0,
        }
    }
}

/// Evaluate the chosen bound on a completed transcript.
pub fn check_theorem_bounds(
    tr: &Transcript,
    groups: &Membership,
    grid: Grid,
    which: Theorem,
    inputs: &BoundInputs,
) -> Result<BoundCheck> {
    if tr.is_empty() {
        return Err(Error::EmptyTranscript);
    }
    if inputs.r == 0 {
        return Err(Error::config("smoothness resolution r must be at least 1"));
    }
    match which {
        Theorem::StochasticCoverage => stochastic(tr, grid, inputs),
        Theorem::ThresholdCalibrated => calibrated(tr, grid, inputs),
        Theorem::SwapFromCalibration => swap_from_calibration(tr, grid, inputs),
        Theorem::Multivalid => multivalid(tr, groups, grid, inputs),
        Theorem::GroupSwapFromMultivalid => group_swap_from_multivalid(tr, groups, grid, inputs),
        Theorem::FtrlCoverage => {
            let dual = inputs
                .final_dual
                .as_deref()
                .ok_or_else(|| Error::config("the FTRL coverage check needs the final dual vector"))?;
            identity_check(tr, groups, Theorem::FtrlCoverage, dual, 1.0)
        }
        Theorem::GcaciCoverage => {
            let theta = inputs
                .final_theta
                .as_deref()
                .ok_or_else(|| Error::config("the GCACI coverage check needs the final theta"))?;
            let eta = inputs
                .eta
                .ok_or_else(|| Error::config("the GCACI coverage check needs eta"))?;
            identity_check(tr, groups, Theorem::GcaciCoverage, theta, eta)
        }
        Theorem::QuantileLossGap => {
            let taus: Vec<f64> = tr.rounds().iter().map(|r| r.tau).collect();
            let points: Vec<f64> = grid.levels().collect();
            quantile_loss_gap(&taus, tr.q(), inputs.r, &points)
        }
    }
}

fn taus_of(tr: &Transcript, idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| tr.rounds()[i].tau).collect()
}

fn stochastic(tr: &Transcript, grid: Grid, inputs: &BoundInputs) -> Result<BoundCheck> {
    let t = tr.len() as f64;
    let gamma = external_regret(tr, grid)?.max_regret().max(0.0);
    let taus: Vec<f64> = tr.rounds().iter().map(|r| r.tau).collect();
    let s = smoothness_estimate(&taus, inputs.r)?;
    let value = (coverage(tr)? - tr.q().get()).abs();
    let entry = if s.is_degenerate() {
        BoundEntry::vacuous("all".into(), t, value, Some(s))
    } else {
        let eps = inputs.epsilon;
        let bound = (2.0 * s.rho * (gamma + eps) / (t * s.alpha)).sqrt() + eps / t;
        BoundEntry::upper("all".into(), t, value, bound).with_smoothness(s)
    };
    Ok(BoundCheck {
        theorem: Theorem::StochasticCoverage,
        gamma: Some(gamma),
        entries: vec![entry],
    })
}

/// Per-cell coverage bound `rho/2 + rho r/n + sqrt(2 gamma / (T alpha r))`.
fn coverage_from_regret(
    entity: String,
    taus: &[f64],
    deviation: f64,
    gamma: f64,
    grid: Grid,
    inputs: &BoundInputs,
) -> Result<BoundEntry> {
    let size = taus.len() as f64;
    if taus.is_empty() {
        return Ok(BoundEntry::vacuous(entity, 0.0, deviation, None));
    }
    let s = smoothness_estimate(taus, inputs.r)?;
    if size < inputs.min_size || s.is_degenerate() {
        return Ok(BoundEntry::vacuous(entity, size, deviation, Some(s)));
    }
    let r = inputs.r as f64;
    let bound = s.rho / 2.0 + s.rho * r / grid.n() as f64 + (2.0 * gamma / (size * s.alpha * r)).sqrt();
    Ok(BoundEntry::upper(entity, size, deviation, bound).with_smoothness(s))
}

fn calibrated(tr: &Transcript, grid: Grid, inputs: &BoundInputs) -> Result<BoundCheck> {
    let gamma = swap_regret(tr, grid)?.max_regret().max(0.0);
    let report = threshold_calibrated_coverage(tr, grid)?;
    let parts = level_partition(tr, grid);
    let mut entries = Vec::new();
    for (idx, e) in parts.iter().zip(&report.entries) {
        if let Some(dev) = e.deviation {
            let taus = taus_of(tr, idx);
            entries.push(coverage_from_regret(e.entity.clone(), &taus, dev, gamma, grid, inputs)?);
        }
    }
    Ok(BoundCheck {
        theorem: Theorem::ThresholdCalibrated,
        gamma: Some(gamma),
        entries,
    })
}

fn binary_only(groups: &Membership) -> Result<()> {
    match groups.columns().iter().find(|c| !c.is_binary()) {
        Some(c) => Err(Error::config(format!(
            "multivalid bound checks need binary groups; `{}` has fractional weights",
            c.name
        ))),
        None => Ok(()),
    }
}

fn multivalid(tr: &Transcript, groups: &Membership, grid: Grid, inputs: &BoundInputs) -> Result<BoundCheck> {
    binary_only(groups)?;
    let regret = group_conditional_regret(tr, groups, grid, RegretKind::Swap)?;
    let report = multivalid_coverage(tr, groups, grid)?;
    let parts = level_partition(tr, grid);
    let mut entries = Vec::new();
    let mut cells = report.entries.iter();
    for (col, reg) in groups.columns().iter().zip(&regret.entries) {
        let gamma = reg.regret.max(0.0);
        for idx in &parts {
            let e = cells.next().expect("one coverage cell per group and level");
            let Some(dev) = e.deviation else { continue };
            let members: Vec<usize> = idx.iter().copied().filter(|&i| col.weights[i] > 0.0).collect();
            let taus = taus_of(tr, &members);
            entries.push(coverage_from_regret(e.entity.clone(), &taus, dev, gamma, grid, inputs)?);
        }
    }
    Ok(BoundCheck {
        theorem: Theorem::Multivalid,
        gamma: Some(regret.max_regret().max(0.0)),
        entries,
    })
}

/// `sum over cells of T_cell gamma^2 rho / (alpha^2 r)`, or `None` if any
/// populated cell is too small or degenerate.
fn regret_from_coverage<'a>(
    cells: impl Iterator<Item = &'a [f64]>,
    gamma: f64,
    inputs: &BoundInputs,
) -> Result<Option<f64>> {
    let r = inputs.r as f64;
    let mut total = 0.0;
    for taus in cells {
        if taus.is_empty() {
            continue;
        }
        let s = smoothness_estimate(taus, inputs.r)?;
        if (taus.len() as f64) < inputs.min_size || s.is_degenerate() {
            return Ok(None);
        }
        total += taus.len() as f64 * gamma * gamma * s.rho / (s.alpha * s.alpha * r);
    }
    Ok(Some(total))
}

fn swap_from_calibration(tr: &Transcript, grid: Grid, inputs: &BoundInputs) -> Result<BoundCheck> {
    let gamma = threshold_calibrated_coverage(tr, grid)?.max_deviation().unwrap_or(0.0);
    let regret = swap_regret(tr, grid)?.max_regret();
    let cells: Vec<Vec<f64>> = level_partition(tr, grid).iter().map(|idx| taus_of(tr, idx)).collect();
    let size = tr.len() as f64;
    let entry = match regret_from_coverage(cells.iter().map(Vec::as_slice), gamma, inputs)? {
        Some(bound) => BoundEntry::upper("all".into(), size, regret, bound),
        None => BoundEntry::vacuous("all".into(), size, regret, None),
    };
    Ok(BoundCheck {
        theorem: Theorem::SwapFromCalibration,
        gamma: Some(gamma),
        entries: vec![entry],
    })
}

fn group_swap_from_multivalid(
    tr: &Transcript,
    groups: &Membership,
    grid: Grid,
    inputs: &BoundInputs,
) -> Result<BoundCheck> {
    binary_only(groups)?;
    let gamma = multivalid_coverage(tr, groups, grid)?.max_deviation().unwrap_or(0.0);
    let regret = group_conditional_regret(tr, groups, grid, RegretKind::Swap)?;
    let parts = level_partition(tr, grid);
    let mut entries = Vec::new();
    for (col, reg) in groups.columns().iter().zip(&regret.entries) {
        let cells: Vec<Vec<f64>> = parts
            .iter()
            .map(|idx| {
                let members: Vec<usize> = idx.iter().copied().filter(|&i| col.weights[i] > 0.0).collect();
                taus_of(tr, &members)
            })
            .collect();
        entries.push(match regret_from_coverage(cells.iter().map(Vec::as_slice), gamma, inputs)? {
            Some(bound) => BoundEntry::upper(col.name.clone(), reg.size, reg.regret, bound),
            None => BoundEntry::vacuous(col.name.clone(), reg.size, reg.regret, None),
        });
    }
    Ok(BoundCheck {
        theorem: Theorem::GroupSwapFromMultivalid,
        gamma: Some(gamma),
        entries,
    })
}

/// `|Cov(G_i) - q| <= ||v||_inf / (scale T_i)`; the identity predicts the
/// deviation is exactly `|v_i| / (scale T_i)`, and a mismatch is a failure.
fn identity_check(
    tr: &Transcript,
    groups: &Membership,
    theorem: Theorem,
    v: &[f64],
    scale: f64,
) -> Result<BoundCheck> {
    if v.len() != groups.len() {
        return Err(Error::Dimension {
            expected: groups.len(),
            got: v.len(),
        });
    }
    let report = super::group_coverage(tr, groups)?;
    let sup = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let mut entries = Vec::with_capacity(v.len());
    for (e, vi) in report.entries.iter().zip(v) {
        let Some(dev) = e.deviation else {
            entries.push(BoundEntry::vacuous(e.entity.clone(), e.size, f64::NAN, None));
            continue;
        };
        let bound = sup / (scale * e.size);
        let identity = vi.abs() / (scale * e.size);
        let mut entry = BoundEntry::upper(e.entity.clone(), e.size, dev, bound);
        entry.identity_value = Some(identity);
        if (dev - identity).abs() > IDENTITY_TOL {
            entry.status = Status::Fail;
        }
        entries.push(entry);
    }
    Ok(BoundCheck {
        theorem,
        gamma: None,
        entries,
    })
}

fn mean_loss(samples: &[f64], x: f64, q: Rate) -> f64 {
    samples.iter().map(|&t| pinball_loss(x, t, q)).sum::<f64>() / samples.len() as f64
}

/// Empirical q-quantile: the smallest sample with at least a q fraction of
/// samples at or below it.
fn empirical_quantile(samples: &[f64], q: Rate) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let k = ((q.get() * s.len() as f64).ceil() as usize).clamp(1, s.len());
    s[k - 1]
}

/// For each point `x`, compare the empirical pinball-loss gap
/// `E p_q(x) - E p_q(tau*)` against `alpha r (tau* - x)^2 / 2`, where `tau*`
/// is the empirical q-quantile and `alpha` is estimated at resolution `r`.
/// Points closer than `1/r` to `tau*` are vacuous: smoothness says nothing
/// about the mass of intervals that short.
pub fn quantile_loss_gap(samples: &[f64], q: Rate, r: usize, points: &[f64]) -> Result<BoundCheck> {
    let s = smoothness_estimate(samples, r)?;
    let star = empirical_quantile(samples, q);
    let base = mean_loss(samples, star, q);
    let n = samples.len() as f64;
    let entries = points
        .iter()
        .map(|&x| {
            let gap = mean_loss(samples, x, q) - base;
            let entity = format!("{x}");
            if s.is_degenerate() || (star - x).abs() < 1.0 / r as f64 {
                BoundEntry::vacuous(entity, n, gap, Some(s))
            } else {
                let bound = s.alpha * r as f64 * (star - x).powi(2) / 2.0;
                BoundEntry::lower(entity, n, gap, bound).with_smoothness(s)
            }
        })
        .collect();
    Ok(BoundCheck {
        theorem: Theorem::QuantileLossGap,
        gamma: None,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::ThetaState;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gcaci_run(k: usize, q: f64, eta: f64, t: usize, binary: bool, seed: u64) -> (Transcript, ThetaState) {
        let q = Rate::new(q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut st = ThetaState::new(k, q.get(), eta).unwrap();
        let mut tr = Transcript::new(k, q);
        for _ in 0..t {
            let g: Vec<f64> = (0..k)
                .map(|_| if binary { f64::from(rng.random_bool(0.5)) } else { rng.random() })
                .collect();
            let tau: f64 = rng.random();
            let pred = st.step(&g, tau).unwrap();
            tr.append(g, tau, pred).unwrap();
        }
        (tr, st)
    }

    #[test]
    fn names_round_trip() {
        for t in Theorem::ALL {
            assert_eq!(t.name().parse::<Theorem>().unwrap(), t);
            let js = serde_json::to_string(&t).unwrap();
            assert_eq!(js, format!("\"{}\"", t.name()));
        }
        assert!("nope".parse::<Theorem>().is_err());
    }

    #[test]
    fn gcaci_deviation_matches_theta_on_binary_groups() {
        let (tr, st) = gcaci_run(4, 0.9, 0.5, 3000, true, 7);
        let groups = Membership::from_transcript(&tr, None).unwrap();
        let inputs = BoundInputs {
            final_theta: Some(st.theta().to_vec()),
            eta: Some(0.5),
            ..BoundInputs::default()
        };
        let check = check_theorem_bounds(&tr, &groups, Grid::new(10).unwrap(), Theorem::GcaciCoverage, &inputs).unwrap();
        assert_eq!(check.status(), Status::Pass);
        for e in &check.entries {
            assert!((e.value - e.identity_value.unwrap()).abs() < 1e-9);
            assert!(e.slack.unwrap() >= -1e-12);
        }
    }

    #[test]
    fn gcaci_bound_holds_on_weighted_groups() {
        let (tr, st) = gcaci_run(3, 0.5, 1.0, 2000, false, 8);
        let groups = Membership::from_transcript(&tr, None).unwrap();
        let inputs = BoundInputs {
            final_theta: Some(st.theta().to_vec()),
            eta: Some(1.0),
            ..BoundInputs::default()
        };
        let check = check_theorem_bounds(&tr, &groups, Grid::new(10).unwrap(), Theorem::GcaciCoverage, &inputs).unwrap();
        assert_eq!(check.status(), Status::Pass);
    }

    #[test]
    fn tampered_theta_fails() {
        let (tr, st) = gcaci_run(2, 0.9, 1.0, 500, true, 9);
        let groups = Membership::from_transcript(&tr, None).unwrap();
        let mut theta = st.theta().to_vec();
        theta[0] += 10.0;
        let inputs = BoundInputs {
            final_theta: Some(theta),
            eta: Some(1.0),
            ..BoundInputs::default()
        };
        let check = check_theorem_bounds(&tr, &groups, Grid::new(10).unwrap(), Theorem::GcaciCoverage, &inputs).unwrap();
        assert_eq!(check.status(), Status::Fail);
    }

    #[test]
    fn missing_state_is_a_config_error() {
        let (tr, _) = gcaci_run(1, 0.9, 1.0, 10, true, 1);
        let groups = Membership::from_transcript(&tr, None).unwrap();
        let err = check_theorem_bounds(&tr, &groups, Grid::new(10).unwrap(), Theorem::FtrlCoverage, &BoundInputs::default());
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn atom_scores_are_vacuous() {
        let q = Rate::new(0.5).unwrap();
        let mut tr = Transcript::new(1, q);
        for _ in 0..50 {
            tr.append(vec![1.0], 0.3, 0.3).unwrap();
        }
        let groups = Membership::all_rounds(tr.len());
        let check = check_theorem_bounds(&tr, &groups, Grid::new(10).unwrap(), Theorem::StochasticCoverage, &BoundInputs::default()).unwrap();
        assert_eq!(check.status(), Status::Vacuous);
    }

    #[test]
    fn quantile_gap_on_uniform_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<f64> = (0..20_000).map(|_| rng.random()).collect();
        let points: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let check = quantile_loss_gap(&samples, Rate::new(0.5).unwrap(), 10, &points).unwrap();
        assert_eq!(check.status(), Status::Pass);
        assert_eq!(check.entry("0.5").unwrap().status, Status::Vacuous);
        assert!(check.entries.iter().filter(|e| e.status == Status::Pass).count() >= 8);
    }

    #[test]
    fn weighted_groups_rejected_for_multivalid() {
        let (tr, _) = gcaci_run(2, 0.9, 1.0, 100, false, 3);
        let groups = Membership::from_transcript(&tr, None).unwrap();
        let err = check_theorem_bounds(&tr, &groups, Grid::new(10).unwrap(), Theorem::Multivalid, &BoundInputs::default());
        assert!(matches!(err, Err(Error::Config(_))));
    }
}
