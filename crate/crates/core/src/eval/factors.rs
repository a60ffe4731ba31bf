//! Factors JSON: `{ "rank", "weights", "factors": [per mode, list of columns], "report" }`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::report::DecompositionReport;
use crate::tensor::{KruskalForm, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorsFile {
    pub rank: usize,
    pub weights: Vec<f64>,
    /// `factors[mode][j]` is column `j` of that mode's factor.
    pub factors: Vec<Vec<Vec<f64>>>,
    pub report: DecompositionReport,
}

impl FactorsFile {
    /// Stores the form with positive weights, signs folded into the first factor.
    pub fn from_kruskal(form: &KruskalForm, report: DecompositionReport) -> Self {
        let pos = form.with_positive_weights();
        Self {
            rank: pos.rank(),
            weights: pos.weights.clone(),
            factors: pos.factors.iter().map(|f| f.columns()).collect(),
            report,
        }
    }

    pub fn to_kruskal(&self) -> Result<KruskalForm> {
        ensure!(self.weights.len() == self.rank, Format, "rank {} but {} weights", self.rank, self.weights.len());
        let mats = self
            .factors
            .iter()
            .map(|cols| {
                ensure!(cols.len() == self.rank, Format, "factor with {} columns for rank {}", cols.len(), self.rank);
                Matrix::from_cols(cols).map_err(|e| Error::Format(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        KruskalForm::new(self.weights.clone(), mats)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Format(format!("factors JSON: {}", e)))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
