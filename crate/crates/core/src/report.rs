//! Shared tabular report format for diagnostic runs.
//!
//! Every quantitative check in the suite (type-frequency drift, witness
//! coverage, small-type decay, density spot checks) reduces to rows of the
//! same shape: an estimated quantity, its standard error, the bound it is
//! compared against, and whether the comparison passed.

use serde::{Deserialize, Serialize};

/// Kind of quantity a report row carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    /// Drift between type frequencies at consecutive stages.
    Delta,
    /// Witness-coverage probability for a scheduled one-point extension.
    Gamma,
    /// Full homomorphism density (or other direct probability estimate).
    Density,
    /// Probability that a fresh tuple realizes a designated small type.
    Eta,
    /// Mass / bookkeeping verification quantity.
    Mass,
    /// Agreement of a type frequency across disjoint position pairs.
    Exch,
    /// Fraction of sampled anchor matches whose demands are witnessed.
    AsModel,
}

impl Quantity {
    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::Delta => "delta",
            Quantity::Gamma => "gamma",
            Quantity::Density => "density",
            Quantity::Eta => "eta",
            Quantity::Mass => "mass",
            Quantity::Exch => "exch",
            Quantity::AsModel => "asmodel",
        }
    }
}

/// One row of a diagnostic report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvRow {
    pub run_id: String,
    pub n: u64,
    pub quantity: Quantity,
    pub type_id: String,
    pub estimate: f64,
    pub sigma: f64,
    pub bound: f64,
    pub pass: bool,
}

impl CsvRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.run_id,
            self.n,
            self.quantity.as_str(),
            self.type_id,
            self.estimate,
            self.sigma,
            self.bound,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

/// A report: rows plus free-form metadata notes (policy identifiers,
/// schedule descriptions, unassigned mass, and similar provenance).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<CsvRow>,
    pub metadata: Vec<(String, String)>,
}

pub const CSV_HEADER: &str = "run_id,n,quantity,type_id,estimate,sigma,bound,pass";

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn note(&mut self, key: &str, value: impl Into<String>) {
        self.metadata.push((key.to_string(), value.into()));
    }

    pub fn push(&mut self, row: CsvRow) {
        self.rows.push(row);
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// Render the rows as a CSV document with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.to_csv_line());
            out.push('\n');
        }
        out
    }

    pub fn extend(&mut self, other: Report) {
        self.rows.extend(other.rows);
        self.metadata.extend(other.metadata);
    }
}
