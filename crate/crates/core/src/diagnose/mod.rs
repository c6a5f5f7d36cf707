//! Diagnostics that compare discrete operators, semigroups and distances
//! against the bounds they should satisfy.
//!
//! Every check returns a [`CheckOutcome`]: one or more [`CheckRecord`]s with
//! a status and a margin, plus tables that land as CSV. Checks that use
//! random test functions take an explicit seed.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::evolve::{heat_evolve, HeatBackend};
use crate::grid::DiscreteOperator;

mod bounds;
mod scaling;
mod separation;

pub use bounds::{
    conservation_defect, euclidean_offdiagonal_check, offdiagonal_gaussian_check, structure_check, wave_speed_check, Ball,
    WaveSpeedConfig,
};
pub use scaling::{largetime_floor_check, ondiagonal_lower_check, resolvent_volume_scaling, smalltime_decay_fit, FloorMode};
pub use separation::{
    form_additivity_defect, invariance_defect, separation_probe, LeakageRow, SeparationConfig, SeparationProbe,
    SeparationVerdict,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Status {
    Holds,
    Violated,
    Fitted,
    Inconclusive,
}

/// Where a violation happened.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub indices: Vec<usize>,
    pub t: Option<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    /// Check instance that produced the record.
    pub check: String,
    pub name: String,
    /// The statement being tested, in words.
    pub anchor: String,
    pub status: Status,
    pub value: Option<f64>,
    pub stderr: Option<f64>,
    /// Signed distance to failure; positive means the bound holds.
    pub margin: Option<f64>,
    /// Number of individual comparisons folded into the record.
    pub count: usize,
    pub witness: Option<Witness>,
    pub note: String,
    #[serde(skip)]
    pub runtime: f64,
}

impl CheckRecord {
    pub fn new(name: &str, anchor: &str, status: Status) -> Self {
        CheckRecord {
            check: name.to_string(),
            name: name.to_string(),
            anchor: anchor.to_string(),
            status,
            value: None,
            stderr: None,
            margin: None,
            count: 1,
            witness: None,
            note: String::new(),
            runtime: 0.0,
        }
    }

    /// `Holds` when `ok`, otherwise `Violated` carrying `witness`.
    pub fn verdict(name: &str, anchor: &str, ok: bool, witness: Witness) -> Self {
        let mut r = CheckRecord::new(name, anchor, if ok { Status::Holds } else { Status::Violated });
        if !ok {
            r.witness = Some(witness);
        }
        r
    }

    pub fn value(mut self, v: f64) -> Self {
        self.value = Some(v);
        self
    }

    pub fn stderr(mut self, v: f64) -> Self {
        self.stderr = Some(v);
        self
    }

    pub fn margin(mut self, v: f64) -> Self {
        self.margin = Some(v);
        self
    }

    pub fn count(mut self, n: usize) -> Self {
        self.count = n;
        self
    }

    pub fn note(mut self, s: impl Into<String>) -> Self {
        self.note = s.into();
        self
    }

    /// Nonempty anchor, and a witness on every violation.
    pub fn is_well_formed(&self) -> bool {
        !self.anchor.trim().is_empty() && (self.status != Status::Violated || self.witness.is_some())
    }
}

/// A numeric table; lands as one CSV file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.to_string(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| crate::grid::csv_io(path, e))?;
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| fmt_num(*v)))?;
        }
        w.flush().map_err(|e| LabError::io(path, e))
    }
}

/// Shared number formatting for CSV bodies and the markdown report.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.0}")
    } else {
        format!("{v:.9e}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub records: Vec<CheckRecord>,
    pub tables: Vec<Table>,
}

impl CheckOutcome {
    pub fn new(records: Vec<CheckRecord>, tables: Vec<Table>) -> Self {
        CheckOutcome { records, tables }
    }

    pub fn record(&self, name: &str) -> Option<&CheckRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn all_hold(&self) -> bool {
        self.records.iter().all(|r| r.status == Status::Holds)
    }

    pub fn any_violated(&self) -> bool {
        self.records.iter().any(|r| r.status == Status::Violated)
    }

    /// Tags every record with the check instance id and a runtime.
    pub fn stamp(mut self, check: &str, started: Instant) -> Self {
        let secs = started.elapsed().as_secs_f64();
        for r in &mut self.records {
            r.check = check.to_string();
            r.runtime = secs;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Environment {
    pub dimension: usize,
    pub n: usize,
    pub bbox: Vec<[f64; 2]>,
    pub epsilons: Vec<f64>,
    pub t_small: Vec<f64>,
    pub t_large: Vec<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub scenario: String,
    pub environment: Environment,
    pub records: Vec<CheckRecord>,
}

impl DiagnosticsReport {
    /// Records are sorted by `(check, name)`, so the result does not depend on
    /// the order in which checks finished.
    pub fn new(scenario: &str, environment: Environment, mut records: Vec<CheckRecord>) -> Self {
        records.sort_by(|a, b| (&a.check, &a.name).cmp(&(&b.check, &b.name)));
        DiagnosticsReport { scenario: scenario.to_string(), environment, records }
    }

    pub fn any_violated(&self) -> bool {
        self.records.iter().any(|r| r.status == Status::Violated)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Summary table of every record; the markdown report prints only values
    /// that also appear here.
    pub fn records_table(&self) -> Vec<Vec<String>> {
        let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
        let mut rows = vec![["check", "name", "status", "value", "stderr", "margin", "count", "anchor", "note"]
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()];
        for r in &self.records {
            rows.push(vec![
                r.check.clone(),
                r.name.clone(),
                format!("{:?}", r.status),
                opt(r.value),
                opt(r.stderr),
                opt(r.margin),
                r.count.to_string(),
                r.anchor.clone(),
                r.note.clone(),
            ]);
        }
        rows
    }

    pub fn write_records_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| crate::grid::csv_io(path, e))?;
        for row in self.records_table() {
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| LabError::io(path, e))
    }

    pub fn to_markdown(&self) -> String {
        let table = self.records_table();
        let mut out = format!("# Scenario `{}`\n\n", self.scenario);
        let violated = self.records.iter().filter(|r| r.status == Status::Violated).count();
        out.push_str(&format!(
            "{} records, {} violated. Numbers below are copied from `records.csv`.\n\n",
            self.records.len(),
            violated
        ));
        out.push_str(&format!("| {} |\n", table[0].join(" | ")));
        out.push_str(&format!("|{}\n", "---|".repeat(table[0].len())));
        for row in &table[1..] {
            out.push_str(&format!("| {} |\n", row.iter().map(|c| c.replace('|', "\\|")).collect::<Vec<_>>().join(" | ")));
        }
        out
    }
}

/// `Σ aᵢ bᵢ · vol`.
pub(crate) fn inner(a: &[f64], b: &[f64], vol: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * vol
}

pub(crate) fn norm2(a: &[f64], vol: f64) -> f64 {
    inner(a, a, vol).sqrt()
}

/// `e^{-tA} φ` at every time in `times`, chaining through the sorted times.
pub(crate) fn evolve_series(a: &DiscreteOperator, phi: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&i, &j| times[i].total_cmp(&times[j]));
    let mut out = vec![Vec::new(); times.len()];
    let mut u = phi.to_vec();
    let mut now = 0.0;
    for k in order {
        u = heat_evolve(a, &u, times[k] - now, HeatBackend::ChebyshevExp)?.values;
        now = times[k];
        out[k] = u.clone();
    }
    Ok(out)
}

/// Reproducible test functions: a positive offset plus smooth random modes,
/// so both the cross-interface values and the energy stay moderate.
pub(crate) fn smooth_random_fields(a: &DiscreteOperator, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mesh = a.mesh();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bbox = mesh.bbox().to_vec();
    (0..count)
        .map(|_| {
            let modes: Vec<([f64; 2], f64, f64)> = (0..4)
                .map(|_| ([rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0)], rng.gen_range(-0.5..0.5), rng.gen_range(0.0..6.3)))
                .collect();
            let offset = rng.gen_range(0.5..1.5);
            (0..mesh.len())
                .map(|i| {
                    let p = mesh.point(i);
                    let mut v = offset;
                    for (k, amp, phase) in &modes {
                        let mut arg = *phase;
                        for (ax, [lo, hi]) in bbox.iter().enumerate() {
                            arg += std::f64::consts::PI * k[ax] * (p[ax] - lo) / (hi - lo);
                        }
                        v += amp * arg.cos();
                    }
                    v
                })
                .collect()
        })
        .collect()
}

/// Independent uniform entries in `range`.
pub(crate) fn random_fields(n: usize, count: usize, range: std::ops::Range<f64>, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..n).map(|_| rng.gen_range(range.clone())).collect()).collect()
}

/// `exp(1 − 1/(1 − r²))` inside the ball of radius `radius` (Euclidean), 0
/// outside.
pub fn bump(mesh: &crate::grid::Mesh, center: &[f64], radius: f64) -> Vec<f64> {
    (0..mesh.len())
        .map(|i| {
            let p = mesh.point(i);
            let r2 = (0..mesh.dimension()).map(|k| (p[k] - center[k]).powi(2)).sum::<f64>() / (radius * radius);
            if r2 < 1.0 {
                (1.0 - 1.0 / (1.0 - r2)).exp()
            } else {
                0.0
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_invariants_and_ordering() {
        let ok = CheckRecord::verdict("b", "bound", true, Witness { indices: vec![], t: None, values: vec![] });
        assert!(ok.is_well_formed() && ok.witness.is_none());
        let bad = CheckRecord::verdict("a", "bound", false, Witness { indices: vec![3], t: Some(0.1), values: vec![2.0] });
        assert!(bad.is_well_formed());
        assert!(!CheckRecord::new("x", " ", Status::Holds).is_well_formed());
        assert!(!CheckRecord::new("x", "y", Status::Violated).is_well_formed());
        let rep = DiagnosticsReport::new("s", Environment::default(), vec![ok, bad]);
        assert_eq!(rep.records[0].name, "a");
        assert!(rep.any_violated());
        let md = rep.to_markdown();
        assert!(md.contains("| a | a | Violated"));
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(3.0), "3");
        assert_eq!(fmt_num(f64::INFINITY), "inf");
        assert_eq!(fmt_num(0.1), "1.000000000e-1");
    }
}
