//! Named residuals with tolerance verdicts.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::grid::Grid;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualEntry {
    pub name: String,
    pub value: f64,
    pub tolerance: Option<f64>,
    /// `None` for informational entries without a tolerance.
    pub pass: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridMeta {
    pub counts: Vec<usize>,
    pub ranges: Vec<(f64, f64)>,
    pub periodic: Vec<bool>,
}

impl<T: Real> From<&Grid<T>> for GridMeta {
    fn from(g: &Grid<T>) -> Self {
        GridMeta {
            counts: g.counts.clone(),
            ranges: g.ranges.iter().map(|(a, b)| (a.as_f64(), b.as_f64())).collect(),
            periodic: g.periodic.clone(),
        }
    }
}

/// Ordered collection of residual norms.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ResidualReport {
    pub residuals: Vec<ResidualEntry>,
    pub grid: Option<GridMeta>,
    pub provenance: BTreeMap<String, String>,
}

impl ResidualReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_grid<T: Real>(mut self, grid: &Grid<T>) -> Self {
        self.grid = Some(grid.into());
        self
    }

    pub fn provenance(mut self, key: &str, value: impl Into<String>) -> Self {
        self.provenance.insert(key.to_string(), value.into());
        self
    }

    /// Records a value compared against `tolerance`; non-finite values fail.
    pub fn check(&mut self, name: &str, value: f64, tolerance: f64) -> &mut Self {
        let pass = value.is_finite() && value <= tolerance;
        self.residuals.push(ResidualEntry { name: name.to_string(), value, tolerance: Some(tolerance), pass: Some(pass) });
        self
    }

    /// Records an informational value with no verdict.
    pub fn record(&mut self, name: &str, value: f64) -> &mut Self {
        self.residuals.push(ResidualEntry { name: name.to_string(), value, tolerance: None, pass: None });
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.residuals.iter().find(|e| e.name == name).map(|e| e.value)
    }

    pub fn all_pass(&self) -> bool {
        self.residuals.iter().all(|e| e.pass != Some(false))
    }

    pub fn failures(&self) -> Vec<&ResidualEntry> {
        self.residuals.iter().filter(|e| e.pass == Some(false)).collect()
    }

    pub fn merge(&mut self, other: ResidualReport) {
        self.residuals.extend(other.residuals);
        if self.grid.is_none() {
            self.grid = other.grid;
        }
        self.provenance.extend(other.provenance);
    }
}
