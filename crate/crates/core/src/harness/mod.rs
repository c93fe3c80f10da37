//! Config-driven experiments: run a learner on a stream, audit the transcript,
//! sweep step sizes and trace iterate norms.

mod audit;
mod config;
mod run;
mod sweep;

pub use audit::{audit, write_audit, AuditReport};
pub use config::{Algorithm, AuditConfig, LearnerConfig, OutputConfig, RunConfig};
pub use run::{
    coverage_curve, execute, read_trace, run, write_trace, GroupCounter, LearnerState, RunOutput,
    RunSummary, TraceRow,
};
pub use sweep::{
    convergence_time, sweep_eta, trace_norms, write_convergence, write_norms, ConvergenceRow,
    NormRow,
};

use std::path::Path;

use crate::auditors::Membership;
use crate::pinball::Rate;
use crate::transcript::{CsvTable, Transcript};
use crate::{Error, Result};

/// Load an audit-only transcript file (one with a `tau_hat` column).
pub fn load_transcript(path: impl AsRef<Path>, q: Rate) -> Result<Transcript> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    CsvTable::read(std::io::BufReader::new(file))?.into_transcript(q)
}

/// Membership columns for a transcript, named after `names` when the count matches.
pub fn membership_for(tr: &Transcript, names: Option<&[String]>) -> Result<Membership> {
    let names = names.filter(|n| n.len() == tr.k());
    Membership::from_transcript(tr, names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auditors::{Status, Theorem};
    use crate::environments::{Distribution, Script, StreamSpec};
    use crate::groups::GroupSpec;

    fn iid_config(horizon: u64, eta: f64) -> RunConfig {
        RunConfig {
            stream: StreamSpec::Iid {
                horizon,
                distribution: Distribution::Uniform { a: 0.0, b: 1.0 },
                seed: 3,
            },
            groups: vec![GroupSpec::all("all"), GroupSpec::modular(2), GroupSpec::modular(3)],
            learner: LearnerConfig {
                k: 3,
                q: 0.9,
                algorithm: Algorithm::Gcaci { eta },
            },
            audit: AuditConfig::default(),
            output: OutputConfig::default(),
        }
    }

    #[test]
    fn example1_script_never_covers() {
        let cfg = RunConfig {
            stream: StreamSpec::Example1 { horizon: 100 },
            groups: vec![],
            learner: LearnerConfig {
                k: 1,
                q: 0.5,
                algorithm: Algorithm::Scripted { script: Script::Example1 },
            },
            audit: AuditConfig::default(),
            output: OutputConfig::default(),
        };
        let out = execute(&cfg).unwrap();
        assert_eq!(out.summary.marginal_coverage, 0.0);
        assert!(out.trace.is_empty());
    }

    #[test]
    fn lower_bound_final_theta() {
        let cfg = RunConfig {
            stream: StreamSpec::LowerBound { horizon: 101 },
            groups: vec![],
            learner: LearnerConfig {
                k: 1,
                q: 0.9,
                algorithm: Algorithm::Gcaci { eta: 1.0 },
            },
            audit: AuditConfig::default(),
            output: OutputConfig::default(),
        };
        let out = execute(&cfg).unwrap();
        let oracle: f64 = 0.9 * (1..=100).map(|k| 0.5 / (k as f64).sqrt()).sum::<f64>();
        let got = out.summary.final_theta_inf.unwrap();
        assert!((got - oracle).abs() < 1e-9);
        assert!((got - 8.3653).abs() < 0.01);
    }

    #[test]
    fn audit_matches_in_loop_counters() {
        let cfg = iid_config(5000, 0.5);
        let out = execute(&cfg).unwrap();
        let m = membership_for(&out.transcript, None).unwrap();
        let rep = audit(&out.transcript, &m, &cfg.audit, Some(&out.state)).unwrap();
        assert_eq!(rep.marginal_coverage, out.summary.marginal_coverage);
        for (c, e) in out.summary.groups.iter().zip(&rep.group_coverage.entries) {
            assert_eq!(c.size, e.size);
            assert_eq!(c.coverage, e.coverage);
        }
        assert_eq!(rep.bounds.len(), 1);
        assert_eq!(rep.bounds[0].theorem, Theorem::GcaciCoverage);
        assert_eq!(rep.bounds[0].status(), Status::Pass);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = iid_config(2000, 0.1);
        let a = execute(&cfg).unwrap();
        let b = execute(&cfg).unwrap();
        let bits = |o: &RunOutput| -> Vec<u64> { o.transcript.rounds().iter().map(|r| r.tau_hat.to_bits()).collect() };
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn files_round_trip_through_audit() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = iid_config(1000, 1.0);
        let out = run(&cfg, dir.path()).unwrap();
        let tr = load_transcript(dir.path().join("transcript.csv"), Rate::new(0.9).unwrap()).unwrap();
        assert_eq!(tr, out.transcript);
        let state = LearnerState::load(dir.path().join("state.json")).unwrap();
        assert_eq!(state, out.state);
        let trace = read_trace(dir.path().join("trace.csv")).unwrap();
        assert_eq!(trace, out.trace);
        let m = membership_for(&tr, None).unwrap();
        let rep = audit(&tr, &m, &cfg.audit, Some(&state)).unwrap();
        write_audit(&rep, dir.path()).unwrap();
        for f in ["report.json", "coverage.csv", "regret.csv", "bounds.csv", "summary.json", "config.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }

    #[test]
    fn convergence_time_backward_scan() {
        let q = Rate::new(0.5).unwrap();
        let mut tr = Transcript::new(1, q);
        // Coverage path: 1, 0.5, 0.667, 0.5, 0.6, 0.5
        for hit in [true, false, true, false, true, false] {
            tr.append(vec![1.0], 0.5, if hit { 0.5 } else { 0.0 }).unwrap();
        }
        let w = vec![1.0; 6];
        assert_eq!(convergence_time(&tr, &w, 0.2), Some(2));
        assert_eq!(convergence_time(&tr, &w, 0.1), Some(4));
        assert_eq!(convergence_time(&tr, &w, 0.6), Some(1));
        assert_eq!(convergence_time(&tr, &[0.0; 6], 0.1), None);
        tr.append(vec![1.0], 0.9, 0.0).unwrap();
        let w = vec![1.0; 7];
        assert_eq!(convergence_time(&tr, &w, 0.01), None);
    }

    #[test]
    fn sweep_emits_one_row_per_group_and_eta() {
        let cfg = iid_config(3000, 1.0);
        let rows = sweep_eta(&cfg, &[1.0, 0.1], 0.05).unwrap();
        assert_eq!(rows.len(), 6);
        let mut buf = Vec::new();
        write_convergence(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("eta,group,convergence_step\n1,all,"));
    }

    #[test]
    fn envelope_dominates_trace() {
        let cfg = iid_config(5000, 1.0);
        let out = execute(&cfg).unwrap();
        let norms = trace_norms(&out.trace, 1.0, 3, Rate::new(0.9).unwrap());
        assert!(norms.iter().all(|n| n.theta_inf <= n.envelope));
    }

    #[test]
    fn config_errors_before_any_round() {
        let mut cfg = iid_config(10, 1.0);
        cfg.learner.k = 5;
        assert!(matches!(execute(&cfg), Err(Error::Config(_))));
        let mut cfg = iid_config(10, 1.0);
        cfg.learner.algorithm = Algorithm::Scripted { script: Script::Example2 };
        assert!(matches!(execute(&cfg), Err(Error::Config(_))));
    }
}
