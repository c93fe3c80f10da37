use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{Algorithm, RunConfig};
use crate::environments::Script;
use crate::grid::Grid;
use crate::groups::{weights, GroupSpec};
use crate::learners::{Aci, Ftrl, SwapLearner, ThetaState};
use crate::pinball::Rate;
use crate::transcript::{fmt_float, Transcript};
use crate::{Error, Result};

enum Learner {
    Gcaci(ThetaState),
    Aci(Aci),
    Ftrl(Ftrl),
    Swap(SwapLearner),
    Scripted(Script),
}

impl Learner {
    fn build(cfg: &RunConfig) -> Result<Self> {
        let (k, q) = (cfg.learner.k, cfg.learner.q);
        Ok(match &cfg.learner.algorithm {
            Algorithm::Gcaci { eta } => Learner::Gcaci(ThetaState::new(k, q, *eta)?),
            Algorithm::Aci { eta } => Learner::Aci(Aci::new(q, *eta)?),
            Algorithm::Ftrl { regularizer } => Learner::Ftrl(Ftrl::new(k, q, regularizer.build()?)?),
            Algorithm::Swap { n, seed, horizon } => {
                Learner::Swap(SwapLearner::new(Grid::new(*n)?, q, *seed, *horizon)?)
            }
            Algorithm::Scripted { script } => Learner::Scripted(*script),
        })
    }

    /// Predict from `(t, g, context)`, then learn from `tau`. Returns the prediction.
    fn step(&mut self, t: u64, g: &[f64], context: &[f64], tau: f64) -> Result<f64> {
        match self {
            Learner::Gcaci(s) => s.step(g, tau),
            Learner::Aci(a) => a.step(tau),
            Learner::Ftrl(f) => f.step(g, tau),
            Learner::Swap(s) => {
                let pred = s.predict();
                s.update(tau)?;
                Ok(pred)
            }
            Learner::Scripted(s) => s.predict(t, context),
        }
    }

    fn theta(&self) -> Option<&[f64]> {
        match self {
            Learner::Gcaci(s) => Some(s.theta()),
            Learner::Aci(a) => Some(a.state().theta()),
            Learner::Ftrl(f) => Some(f.theta()),
            _ => None,
        }
    }

    fn state(&self, cfg: &RunConfig, rounds: u64) -> LearnerState {
        let mut st = LearnerState {
            algorithm: cfg.learner.algorithm.name().into(),
            k: cfg.learner.k,
            q: cfg.learner.q,
            rounds,
            eta: None,
            theta: self.theta().map(<[f64]>::to_vec),
            dual: None,
            distribution: None,
        };
        match self {
            Learner::Gcaci(s) => st.eta = Some(s.eta()),
            Learner::Aci(a) => st.eta = Some(a.state().eta()),
            Learner::Ftrl(f) => {
                st.eta = cfg.learner.algorithm.eta();
                st.dual = Some(f.dual().to_vec());
            }
            Learner::Swap(s) => st.distribution = Some(s.distribution().to_vec()),
            Learner::Scripted(_) => {}
        }
        st
    }
}

/// Final learner state, enough to re-check the identity-backed bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerState {
    pub algorithm: String,
    pub k: usize,
    pub q: f64,
    pub rounds: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    /// `grad R(theta_{T+1})` for FTRL.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual: Option<Vec<f64>>,
    /// Mixed strategy of the swap learner.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<Vec<f64>>,
}

impl LearnerState {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// `theta_{t+1}`, the iterate after round `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: u64,
    pub theta: Vec<f64>,
}

impl TraceRow {
    pub fn sup_norm(&self) -> f64 {
        self.theta.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn sq_norm(&self) -> f64 {
        self.theta.iter().map(|x| x * x).sum()
    }
}

/// In-loop per-group counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCounter {
    pub name: String,
    pub size: f64,
    pub covered: f64,
    pub coverage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: String,
    pub rounds: u64,
    pub covered: u64,
    pub marginal_coverage: f64,
    pub groups: Vec<GroupCounter>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_theta_inf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_theta_inf: Option<f64>,
}

pub struct RunOutput {
    pub groups: Vec<GroupSpec>,
    pub transcript: Transcript,
    pub trace: Vec<TraceRow>,
    pub summary: RunSummary,
    pub state: LearnerState,
}

/// Run the online loop in memory: reveal context, predict, reveal score, update.
pub fn execute(cfg: &RunConfig) -> Result<RunOutput> {
    let groups = cfg.validate()?;
    let mut learner = Learner::build(cfg)?;
    let q = Rate::new(cfg.learner.q)?;
    let mut tr = Transcript::new(groups.len(), q);
    let mut trace = Vec::new();
    let mut counters: Vec<GroupCounter> = groups
        .iter()
        .map(|g| GroupCounter {
            name: g.name.clone(),
            size: 0.0,
            covered: 0.0,
            coverage: None,
        })
        .collect();
    let mut covered = 0u64;

    for round in cfg.stream.open()? {
        let g = weights(&groups, round.t, tr.rounds(), &round.context)?;
        let pred = learner.step(round.t, &g, &round.context, round.tau)?;
        let hit = pred >= round.tau;
        covered += u64::from(hit);
        for (c, w) in counters.iter_mut().zip(&g) {
            c.size += w;
            if hit {
                c.covered += w;
            }
        }
        tr.push_indexed(round.t, g, round.tau, pred)?;
        if let Some(theta) = learner.theta() {
            trace.push(TraceRow {
                t: round.t,
                theta: theta.to_vec(),
            });
        }
    }
    if tr.is_empty() {
        return Err(Error::EmptyTranscript);
    }
    for c in &mut counters {
        c.coverage = (c.size > 0.0).then(|| c.covered / c.size);
    }
    let rounds = tr.len() as u64;
    let summary = RunSummary {
        algorithm: cfg.learner.algorithm.name().into(),
        rounds,
        covered,
        marginal_coverage: covered as f64 / rounds as f64,
        groups: counters,
        final_theta_inf: trace.last().map(TraceRow::sup_norm),
        max_theta_inf: trace.iter().map(TraceRow::sup_norm).reduce(f64::max),
    };
    let state = learner.state(cfg, rounds);
    Ok(RunOutput {
        groups,
        transcript: tr,
        trace,
        summary,
        state,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn write_trace<W: Write>(trace: &[TraceRow], k: usize, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string(), "theta_inf".into(), "theta_l2sq".into()];
    header.extend((1..=k).map(|i| format!("theta_{i}")));
    w.write_record(&header)?;
    for row in trace {
        let mut rec = vec![row.t.to_string(), fmt_float(row.sup_norm()), fmt_float(row.sq_norm())];
        rec.extend(row.theta.iter().map(|&x| fmt_float(x)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<trace>", e))
}

/// Read back a trace written by [`write_trace`].
pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRow>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |cell: &str| Error::Data {
            line,
            message: format!("not a number: `{cell}`"),
        };
        let t = rec.get(0).unwrap_or("").parse().map_err(|_| bad(rec.get(0).unwrap_or("")))?;
        let theta = rec
            .iter()
            .skip(3)
            .map(|c| c.parse::<f64>().map_err(|_| bad(c)))
            .collect::<Result<_>>()?;
        out.push(TraceRow { t, theta });
    }
    Ok(out)
}

/// Cumulative within-group coverage after each of the group's rounds.
pub fn coverage_curve(tr: &Transcript, weights: &[f64]) -> Vec<(u64, f64)> {
    let (mut size, mut covered) = (0.0, 0.0);
    let mut out = Vec::new();
    for (r, &w) in tr.rounds().iter().zip(weights) {
        if w <= 0.0 {
            continue;
        }
        size += w;
        if r.covered() {
            covered += w;
        }
        out.push((r.t, covered / size));
    }
    out
}

/// Run and write `transcript.csv`, `trace.csv` (learners with a parameter
/// vector), `state.json`, `summary.json` and `config.json` into `dir`.
pub fn run(cfg: &RunConfig, dir: &Path) -> Result<RunOutput> {
    let out = execute(cfg)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    out.transcript.write_csv(create(&dir.join("transcript.csv"))?)?;
    if !out.trace.is_empty() {
        write_trace(&out.trace, cfg.learner.k, create(&dir.join("trace.csv"))?)?;
    }
    write_json(&dir.join("state.json"), &out.state)?;
    write_json(&dir.join("summary.json"), &out.summary)?;
    write_json(&dir.join("config.json"), cfg)?;
    if cfg.output.coverage_curves {
        let mut w = csv::Writer::from_writer(create(&dir.join("coverage_curves.csv"))?);
        w.write_record(["group", "step", "t", "coverage"])?;
        for (i, g) in out.groups.iter().enumerate() {
            let col = out.transcript.group_column(i);
            for (step, (t, c)) in coverage_curve(&out.transcript, &col).into_iter().enumerate() {
                w.write_record([g.name.clone(), (step + 1).to_string(), t.to_string(), fmt_float(c)])?;
            }
        }
        w.flush().map_err(|e| Error::io(dir, e))?;
    }
    Ok(out)
}
