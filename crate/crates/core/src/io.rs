//! JSON documents for lattice functions, parameters and run reports.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ckn::CknSpec;
use crate::error::{Error, Result};
use crate::funcspace::LatticeFunction;
use crate::lattice::LatticePoint;
use crate::scalar::{lit, to_f64, Scalar};
use crate::varmin::{BoxSummary, Problem, SolverConfig};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub x: Vec<i64>,
    pub v: f64,
}

/// `{"dim": N, "entries": [{"x": [..], "v": ..}, ..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionDocument {
    pub dim: usize,
    pub entries: Vec<Entry>,
}

impl FunctionDocument {
    pub fn from_function<T: Scalar>(u: &LatticeFunction<T>) -> Self {
        Self {
            dim: u.dim(),
            entries: u.iter().map(|(x, v)| Entry { x: x.coords().to_vec(), v: to_f64(v) }).collect(),
        }
    }

    pub fn to_function<T: Scalar>(&self) -> Result<LatticeFunction<T>> {
        let mut seen = BTreeSet::new();
        for (index, e) in self.entries.iter().enumerate() {
            if e.x.len() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, got: e.x.len() });
            }
            if e.v == 0.0 {
                return Err(Error::DuplicateOrZero { index, reason: "zero value".into() });
            }
            if !e.v.is_finite() {
                return Err(Error::DuplicateOrZero { index, reason: "non-finite value".into() });
            }
            if !seen.insert(&e.x) {
                return Err(Error::DuplicateOrZero { index, reason: format!("duplicate point {:?}", e.x) });
            }
        }
        LatticeFunction::from_entries(self.dim, self.entries.iter().map(|e| (LatticePoint::new(e.x.clone()), lit(e.v))))
    }
}

pub fn function_to_string<T: Scalar>(u: &LatticeFunction<T>) -> Result<String> {
    Ok(serde_json::to_string_pretty(&FunctionDocument::from_function(u))?)
}

pub fn function_from_str<T: Scalar>(text: &str) -> Result<LatticeFunction<T>> {
    serde_json::from_str::<FunctionDocument>(text)?.to_function()
}

pub fn write_function<T: Scalar>(path: impl AsRef<Path>, u: &LatticeFunction<T>) -> Result<()> {
    fs::write(path, function_to_string(u)?)?;
    Ok(())
}

pub fn read_function<T: Scalar>(path: impl AsRef<Path>) -> Result<LatticeFunction<T>> {
    function_from_str(&fs::read_to_string(path)?)
}

/// Flat `{"N", "p", "q", "r", "a", "b", "c", "theta"}` document.
pub fn read_params(path: impl AsRef<Path>) -> Result<CknSpec> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn write_params(path: impl AsRef<Path>, spec: &CknSpec) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(spec)?)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub l2: f64,
    pub rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunParameters {
    pub problem: Problem,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    pub parameters: RunParameters,
    pub per_box: Vec<BoxSummary>,
    pub energy: f64,
    pub converged: bool,
    pub final_box_converged: bool,
    pub residual: Option<ResidualSummary>,
    /// Path of the minimizer document, as given on the command line.
    pub minimizer: Option<String>,
    pub timings: Timings,
}

impl RunReport {
    /// sha256 of the report without its timings, as lowercase hex.
    pub fn fingerprint(&self) -> Result<String> {
        let mut stable = self.clone();
        stable.timings = Timings::default();
        let digest = Sha256::digest(serde_json::to_vec(&stable)?);
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}
