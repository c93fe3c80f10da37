use serde::{Deserialize, Serialize};

use crate::groups::GroupSpec;
use crate::transcript::{check_unit, Transcript};
use crate::{Error, Result};

/// Materialized per-round weights of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupColumn {
    pub name: String,
    pub weights: Vec<f64>,
}

impl GroupColumn {
    pub fn is_binary(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0 || w == 1.0)
    }

    /// `T_G`, the summed membership weight.
    pub fn size(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Group memberships for every round of a transcript.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Membership {
    rounds: usize,
    columns: Vec<GroupColumn>,
}

impl Membership {
    pub fn new(rounds: usize) -> Self {
        Membership {
            rounds,
            columns: Vec::new(),
        }
    }

    /// One group containing every round.
    pub fn all_rounds(rounds: usize) -> Self {
        let mut m = Membership::new(rounds);
        m.columns.push(GroupColumn {
            name: "all".into(),
            weights: vec![1.0; rounds],
        });
        m
    }

    /// The transcript's own group columns, named `names[i]` or `g_{i+1}`.
    pub fn from_transcript(tr: &Transcript, names: Option<&[String]>) -> Result<Self> {
        if let Some(names) = names {
            if names.len() != tr.k() {
                return Err(Error::Dimension {
                    expected: tr.k(),
                    got: names.len(),
                });
            }
        }
        let mut m = Membership::new(tr.len());
        for i in 0..tr.k() {
            let name = names.map_or_else(|| format!("g_{}", i + 1), |n| n[i].clone());
            m.columns.push(GroupColumn {
                name,
                weights: tr.group_column(i),
            });
        }
        Ok(m)
    }

    /// Evaluate group specs over a finished transcript. A round's own group
    /// weights act as the context for `Context` generators.
    pub fn from_specs(tr: &Transcript, specs: &[GroupSpec]) -> Result<Self> {
        let mut m = Membership::new(tr.len());
        let rounds = tr.rounds();
        for spec in specs {
            spec.validate()?;
            let weights = rounds
                .iter()
                .enumerate()
                .map(|(i, r)| spec.weight(r.t, &rounds[..i], &r.g))
                .collect::<Result<Vec<_>>>()?;
            m.columns.push(GroupColumn {
                name: spec.name.clone(),
                weights,
            });
        }
        Ok(m)
    }

    pub fn push(&mut self, name: impl Into<String>, weights: Vec<f64>) -> Result<()> {
        if weights.len() != self.rounds {
            return Err(Error::Dimension {
                expected: self.rounds,
                got: weights.len(),
            });
        }
        for &w in &weights {
            check_unit("group weight", w)?;
        }
        self.columns.push(GroupColumn {
            name: name.into(),
            weights,
        });
        Ok(())
    }

    pub fn extend(&mut self, other: Membership) -> Result<()> {
        if other.rounds != self.rounds {
            return Err(Error::Dimension {
                expected: self.rounds,
                got: other.rounds,
            });
        }
        self.columns.extend(other.columns);
        Ok(())
    }

    pub fn columns(&self) -> &[GroupColumn] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub(crate) fn check_rounds(&self, tr: &Transcript) -> Result<()> {
        if self.rounds != tr.len() {
            return Err(Error::Dimension {
                expected: tr.len(),
                got: self.rounds,
            });
        }
        Ok(())
    }
}
