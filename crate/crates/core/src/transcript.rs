//! Rounds, transcripts and the transcript CSV format.
//!
//! CSV layout: header `t,tau,tau_hat,g_1,...,g_k`, one row per round. The
//! `tau_hat` column may be absent on ingest, in which case the file describes
//! a stream still to be predicted rather than a finished transcript.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::pinball::{covers, Rate};
use crate::{Error, Result};

/// One realized round: group weights, score, and predicted threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub t: u64,
    pub g: Vec<f64>,
    pub tau: f64,
    pub tau_hat: f64,
}

impl Round {
    #[inline]
    pub fn covered(&self) -> bool {
        covers(self.tau_hat, self.tau)
    }
}

/// An append-only sequence of rounds sharing a group count `k` and rate `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    k: usize,
    q: Rate,
    rounds: Vec<Round>,
}

pub(crate) fn check_weights(g: &[f64], k: usize) -> Result<()> {
    if g.len() != k {
        return Err(Error::Dimension {
            expected: k,
            got: g.len(),
        });
    }
    for &w in g {
        check_unit("group weight", w)?;
    }
    Ok(())
}

pub(crate) fn check_unit(what: &'static str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            what,
            value: x,
            range: "[0, 1]",
        })
    }
}

impl Transcript {
    pub fn new(k: usize, q: Rate) -> Self {
        Transcript {
            k,
            q,
            rounds: Vec::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn q(&self) -> Rate {
        self.q
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    /// Index the next appended round will receive.
    pub fn next_index(&self) -> u64 {
        self.rounds.last().map_or(1, |r| r.t + 1)
    }

    /// Append a round with the next index.
    pub fn append(&mut self, g: Vec<f64>, tau: f64, tau_hat: f64) -> Result<&Round> {
        let t = self.next_index();
        self.push_indexed(t, g, tau, tau_hat)
    }

    /// Append a round carrying an explicit index, which must exceed the last one.
    pub fn push_indexed(&mut self, t: u64, g: Vec<f64>, tau: f64, tau_hat: f64) -> Result<&Round> {
        check_weights(&g, self.k)?;
        check_unit("tau", tau)?;
        if !tau_hat.is_finite() {
            return Err(Error::OutOfRange {
                what: "tau_hat",
                value: tau_hat,
                range: "finite reals",
            });
        }
        if let Some(last) = self.rounds.last() {
            if t <= last.t {
                return Err(Error::config(format!(
                    "round index {t} does not exceed previous index {}",
                    last.t
                )));
            }
        }
        self.rounds.push(Round { t, g, tau, tau_hat });
        Ok(self.rounds.last().expect("just pushed"))
    }

    /// Column `i` of the group weights, one entry per round.
    pub fn group_column(&self, i: usize) -> Vec<f64> {
        self.rounds.iter().map(|r| r.g[i]).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(header(self.k, true))?;
        let mut row = Vec::with_capacity(3 + self.k);
        for r in &self.rounds {
            row.clear();
            row.push(r.t.to_string());
            row.push(fmt_float(r.tau));
            row.push(fmt_float(r.tau_hat));
            row.extend(r.g.iter().map(|&x| fmt_float(x)));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Shortest representation that parses back to the identical `f64`.
pub(crate) fn fmt_float(x: f64) -> String {
    format!("{x}")
}

fn header(k: usize, with_prediction: bool) -> Vec<String> {
    let mut h = vec!["t".to_string(), "tau".to_string()];
    if with_prediction {
        h.push("tau_hat".to_string());
    }
    h.extend((1..=k).map(|i| format!("g_{i}")));
    h
}

/// One parsed CSV row; `tau_hat` is `None` when the file has no prediction column.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub t: u64,
    pub tau: f64,
    pub tau_hat: Option<f64>,
    pub g: Vec<f64>,
}

/// Parsed rows of a transcript or stream CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub k: usize,
    pub has_prediction: bool,
    pub rows: Vec<CsvRow>,
}

impl CsvTable {
    /// Parse a CSV document, rejecting malformed rows with their line numbers.
    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let head_err = |message: String| Error::Data { line: 1, message };

        if headers.first().map(String::as_str) != Some("t") {
            return Err(head_err("first column must be `t`".into()));
        }
        if headers.get(1).map(String::as_str) != Some("tau") {
            return Err(head_err("second column must be `tau`".into()));
        }
        let has_prediction = headers.get(2).map(String::as_str) == Some("tau_hat");
        let g_start = if has_prediction { 3 } else { 2 };
        let k = headers.len() - g_start;
        for (i, name) in headers[g_start..].iter().enumerate() {
            if *name != format!("g_{}", i + 1) {
                return Err(head_err(format!(
                    "expected column `g_{}`, found `{name}`",
                    i + 1
                )));
            }
        }

        let mut rows = Vec::new();
        let mut last_t: Option<u64> = None;
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let data = |message: String| Error::Data { line, message };
            if record.len() != headers.len() {
                return Err(data(format!(
                    "expected {} columns, found {}",
                    headers.len(),
                    record.len()
                )));
            }
            let t: u64 = record[0]
                .parse()
                .map_err(|_| data(format!("`t` is not a positive integer: `{}`", &record[0])))?;
            if t == 0 || last_t.is_some_and(|prev| t <= prev) {
                return Err(data(format!("round index {t} is not strictly increasing")));
            }
            last_t = Some(t);
            let num = |col: usize| -> Result<f64> {
                let cell = &record[col];
                cell.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| data(format!("column `{}` is not a finite number: `{cell}`", headers[col])))
            };
            let tau = num(1)?;
            if !(0.0..=1.0).contains(&tau) {
                return Err(data(format!("tau = {tau} is outside [0, 1]")));
            }
            let tau_hat = if has_prediction { Some(num(2)?) } else { None };
            let mut g = Vec::with_capacity(k);
            for col in g_start..headers.len() {
                let w = num(col)?;
                if !(0.0..=1.0).contains(&w) {
                    return Err(data(format!("{} = {w} is outside [0, 1]", headers[col])));
                }
                g.push(w);
            }
            rows.push(CsvRow { t, tau, tau_hat, g });
        }
        Ok(CsvTable {
            k,
            has_prediction,
            rows,
        })
    }

    /// Turn an audit-only file (with predictions) into a transcript.
    pub fn into_transcript(self, q: Rate) -> Result<Transcript> {
        if !self.has_prediction {
            return Err(Error::Data {
                line: 1,
                message: "file has no `tau_hat` column; it is a stream, not a transcript".into(),
            });
        }
        let mut tr = Transcript::new(self.k, q);
        tr.rounds.reserve(self.rows.len());
        for row in self.rows {
            let tau_hat = row.tau_hat.expect("prediction column present");
            tr.push_indexed(row.t, row.g, row.tau, tau_hat)?;
        }
        Ok(tr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(x: f64) -> Rate {
        Rate::new(x).unwrap()
    }

    #[test]
    fn append_assigns_consecutive_indices() {
        let mut tr = Transcript::new(1, q(0.9));
        tr.append(vec![1.0], 0.5, 0.0).unwrap();
        assert_eq!(tr.len(), 1);
        for _ in 0..5 {
            tr.append(vec![1.0], 0.3, 0.2).unwrap();
        }
        let idx: Vec<u64> = tr.rounds().iter().map(|r| r.t).collect();
        assert_eq!(idx, vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn append_rejects_bad_rounds() {
        let mut tr = Transcript::new(2, q(0.9));
        assert!(matches!(
            tr.append(vec![1.0, 0.0, 1.0], 0.5, 0.5),
            Err(Error::Dimension { expected: 2, got: 3 })
        ));
        assert!(tr.append(vec![1.0, 0.0], 1.5, 0.5).is_err());
        assert!(tr.append(vec![1.0, -0.1], 0.5, 0.5).is_err());
        assert!(tr.append(vec![1.0, 0.0], 0.5, f64::NAN).is_err());
        // predictions outside [0, 1] are allowed
        assert!(tr.append(vec![1.0, 0.0], 0.5, -3.0).is_ok());
        assert!(tr.push_indexed(1, vec![1.0, 0.0], 0.5, 0.5).is_err());
    }

    #[test]
    fn csv_rejects_out_of_range_tau_with_line() {
        let doc = "t,tau,tau_hat,g_1\n1,0.5,0.4,1\n2,1.5,0.4,1\n";
        match CsvTable::read(doc.as_bytes()) {
            Err(Error::Data { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_rejects_malformed_cells() {
        let doc = "t,tau,tau_hat,g_1\n1,0.5,abc,1\n";
        assert!(matches!(CsvTable::read(doc.as_bytes()), Err(Error::Data { line: 2, .. })));
        let doc = "t,tau,g_2\n1,0.5,1\n";
        assert!(matches!(CsvTable::read(doc.as_bytes()), Err(Error::Data { line: 1, .. })));
        let doc = "t,tau,g_1\n2,0.5,1\n2,0.5,1\n";
        assert!(matches!(CsvTable::read(doc.as_bytes()), Err(Error::Data { line: 3, .. })));
    }

    #[test]
    fn stream_file_without_predictions() {
        let doc = "t,tau,g_1,g_2\n1,0.5,1,0\n2,0.25,0,1\n";
        let table = CsvTable::read(doc.as_bytes()).unwrap();
        assert!(!table.has_prediction);
        assert_eq!(table.k, 2);
        assert_eq!(table.rows[1].g, vec![0.0, 1.0]);
        assert!(table.into_transcript(q(0.5)).is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_identical(
            rows in prop::collection::vec((prop::collection::vec(0.0f64..=1.0, 3), 0.0f64..=1.0, -5.0f64..5.0), 0..40)
        ) {
            let mut tr = Transcript::new(3, q(0.9));
            for (g, tau, tau_hat) in rows {
                tr.append(g, tau, tau_hat).unwrap();
            }
            let mut buf = Vec::new();
            tr.write_csv(&mut buf).unwrap();
            let back = CsvTable::read(buf.as_slice()).unwrap().into_transcript(q(0.9)).unwrap();
            prop_assert_eq!(back, tr);
        }
    }
}
