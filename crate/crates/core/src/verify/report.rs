//! Verification reports: one record per check, serialized as JSON and as a
//! flat CSV.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::coverage::{self, Op};
use crate::error::{Error, Result};

/// Outcome of a single check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub id: String,
    /// The property being checked, in words.
    pub anchor: String,
    /// Named empirical constants.
    pub constants: BTreeMap<String, f64>,
    /// Ratio series the check is decided on (plot-ready).
    pub ratios: Vec<f64>,
    pub pass: bool,
    pub runtime_ms: f64,
    #[serde(default)]
    pub note: String,
}

impl CheckRecord {
    pub fn new(id: impl Into<String>, anchor: impl Into<String>) -> Self {
        CheckRecord {
            id: id.into(),
            anchor: anchor.into(),
            constants: BTreeMap::new(),
            ratios: Vec::new(),
            pass: false,
            runtime_ms: 0.0,
            note: String::new(),
        }
    }

    pub fn constant(&mut self, name: impl Into<String>, value: f64) -> &mut Self {
        self.constants.insert(name.into(), value);
        self
    }

    pub fn ratios(&mut self, values: impl IntoIterator<Item = f64>) -> &mut Self {
        self.ratios = values.into_iter().collect();
        self
    }

    pub fn note(&mut self, text: impl Into<String>) -> &mut Self {
        self.note = text.into();
        self
    }

    /// Sets the verdict; the check passes only if every call was `true`.
    pub fn require(&mut self, ok: bool) -> &mut Self {
        self.pass = ok;
        self
    }
}

/// Where and how a report was produced. Excluded from determinism
/// comparisons.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub crate_version: String,
    pub threads: usize,
    pub os: String,
    pub arch: String,
}

impl Environment {
    pub fn current() -> Self {
        Environment {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            threads: rayon::current_num_threads(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub experiment: String,
    pub seed: u64,
    pub checks: Vec<CheckRecord>,
    pub pass: bool,
    pub environment: Environment,
}

impl VerificationReport {
    pub fn new(experiment: impl Into<String>, seed: u64) -> Self {
        VerificationReport {
            experiment: experiment.into(),
            seed,
            checks: Vec::new(),
            pass: true,
            environment: Environment::current(),
        }
    }

    /// Runs `body` as check `id`, timing it. An error inside the check is
    /// recorded as a failure with the message in the note.
    pub fn check(&mut self, id: &str, anchor: &str, body: impl FnOnce(&mut CheckRecord) -> Result<()>) {
        let mut rec = CheckRecord::new(id, anchor);
        let start = Instant::now();
        if let Err(e) = body(&mut rec) {
            rec.pass = false;
            rec.note = format!("error: {e}");
        }
        rec.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
        self.push(rec);
    }

    pub fn push(&mut self, rec: CheckRecord) {
        self.pass &= rec.pass;
        self.checks.push(rec);
    }

    pub fn extend(&mut self, other: VerificationReport) {
        for rec in other.checks {
            self.push(rec);
        }
    }

    pub fn get(&self, id: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.id == id)
    }

    /// The report with runtimes and environment blanked, for comparing runs.
    pub fn without_timing(&self) -> VerificationReport {
        let mut r = self.clone();
        for c in &mut r.checks {
            c.runtime_ms = 0.0;
        }
        r.environment = Environment {
            crate_version: String::new(),
            threads: 0,
            os: String::new(),
            arch: String::new(),
        };
        r
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

pub const CSV_HEADER: [&str; 7] = ["id", "anchor", "pass", "constants", "ratios", "runtime_ms", "note"];

fn format_constants(c: &BTreeMap<String, f64>) -> String {
    c.iter().map(|(k, v)| format!("{k}={v:e}")).collect::<Vec<_>>().join(";")
}

fn format_ratios(r: &[f64]) -> String {
    r.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(";")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse {
        line: e.position().map(|p| p.line() as usize).unwrap_or(0),
        message: e.to_string(),
    }
}

pub fn report_to_csv_string(report: &VerificationReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for c in &report.checks {
        w.write_record([
            c.id.as_str(),
            c.anchor.as_str(),
            if c.pass { "true" } else { "false" },
            &format_constants(&c.constants),
            &format_ratios(&c.ratios),
            &format!("{:e}", c.runtime_ms),
            c.note.as_str(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes one row per check. Floats use the shortest representation that
/// reads back to the same value.
pub fn report_to_csv(report: &VerificationReport, path: impl AsRef<Path>) -> Result<()> {
    coverage::touch(Op::ReportToCsv);
    let path = path.as_ref();
    fs::write(path, report_to_csv_string(report)?).map_err(|e| Error::io(path, e))
}

fn parse_f64(line: usize, s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad number `{s}`"),
    })
}

/// Reads the records written by [`report_to_csv`].
pub fn read_report_csv(text: &str) -> Result<Vec<CheckRecord>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: format!("unexpected header {header:?}"),
        });
    }
    let mut out = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let line = i + 2;
        let field = |k: usize| row.get(k).unwrap_or("");
        let mut constants = BTreeMap::new();
        for kv in field(3).split(';').filter(|s| !s.is_empty()) {
            let (k, v) = kv.rsplit_once('=').ok_or_else(|| Error::Parse {
                line,
                message: format!("bad constant `{kv}`"),
            })?;
            constants.insert(k.to_string(), parse_f64(line, v)?);
        }
        let ratios = field(4)
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|v| parse_f64(line, v))
            .collect::<Result<_>>()?;
        out.push(CheckRecord {
            id: field(0).to_string(),
            anchor: field(1).to_string(),
            pass: match field(2) {
                "true" => true,
                "false" => false,
                other => {
                    return Err(Error::Parse {
                        line,
                        message: format!("bad pass flag `{other}`"),
                    })
                }
            },
            constants,
            ratios,
            runtime_ms: parse_f64(line, field(5))?,
            note: field(6).to_string(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_is_header_only() {
        let r = VerificationReport::new("x", 1);
        let s = report_to_csv_string(&r).unwrap();
        assert_eq!(s.lines().count(), 1);
        assert!(read_report_csv(&s).unwrap().is_empty());
    }

    #[test]
    fn round_trip() {
        let mut r = VerificationReport::new("x", 1);
        for i in 0..10 {
            r.check(&format!("c{i}"), "a, \"quoted\" property", |c| {
                c.constant("k", 0.1 * i as f64 + 1e-300)
                    .constant("inf", f64::INFINITY)
                    .constant("s=1:coarse", -2.5)
                    .ratios([1.0 / 3.0, -2.5e17])
                    .note("line\nbreak, comma")
                    .require(i % 2 == 0);
                Ok(())
            });
        }
        r.check("err", "fails", |_| Err(Error::invalid("boom")));
        let s = report_to_csv_string(&r).unwrap();
        let back = read_report_csv(&s).unwrap();
        assert_eq!(back, r.checks);
        assert_eq!(back.len(), 11);
        assert!(!r.pass);
        assert!(back[10].note.contains("boom"));
    }
}
