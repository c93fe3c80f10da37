//! Flat CSV emission (`entity,size,value,bound,slack`) shared by all reports.

use std::io::Write;

use super::{BoundCheck, CoverageReport, RegretReport};
use crate::transcript::fmt_float;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FlatRow {
    pub entity: String,
    pub size: f64,
    pub value: Option<f64>,
    pub bound: Option<f64>,
    pub slack: Option<f64>,
}

pub trait ToFlatRows {
    fn flat_rows(&self) -> Vec<FlatRow>;
}

impl ToFlatRows for CoverageReport {
    fn flat_rows(&self) -> Vec<FlatRow> {
        self.entries
            .iter()
            .map(|e| FlatRow {
                entity: e.entity.clone(),
                size: e.size,
                value: e.coverage,
                bound: None,
                slack: None,
            })
            .collect()
    }
}

impl ToFlatRows for RegretReport {
    fn flat_rows(&self) -> Vec<FlatRow> {
        self.entries
            .iter()
            .map(|e| FlatRow {
                entity: e.entity.clone(),
                size: e.size,
                value: Some(e.regret),
                bound: None,
                slack: None,
            })
            .collect()
    }
}

impl ToFlatRows for BoundCheck {
    fn flat_rows(&self) -> Vec<FlatRow> {
        self.entries
            .iter()
            .map(|e| FlatRow {
                entity: e.entity.clone(),
                size: e.size,
                value: Some(e.value),
                bound: e.bound,
                slack: e.slack,
            })
            .collect()
    }
}

pub fn write_flat_csv<W: Write>(rows: &[FlatRow], writer: W) -> Result<()> {
    let opt = |x: Option<f64>| x.map(fmt_float).unwrap_or_default();
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["entity", "size", "value", "bound", "slack"])?;
    for r in rows {
        w.write_record([
            r.entity.clone(),
            fmt_float(r.size),
            opt(r.value),
            opt(r.bound),
            opt(r.slack),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auditors::{CoverageEntry, CoverageKind};

    #[test]
    fn undefined_entities_leave_blank_cells() {
        let rep = CoverageReport {
            kind: CoverageKind::Group,
            q: 0.9,
            entries: vec![
                CoverageEntry { entity: "a".into(), size: 2.0, coverage: Some(0.5), deviation: Some(0.4) },
                CoverageEntry { entity: "b".into(), size: 0.0, coverage: None, deviation: None },
            ],
        };
        let mut buf = Vec::new();
        write_flat_csv(&rep.flat_rows(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "entity,size,value,bound,slack\na,2,0.5,,\nb,0,,,\n");
    }
}
