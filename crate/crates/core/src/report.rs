use serde::{Deserialize, Serialize};

/// Diagnostics attached to every decomposition.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub method: String,
    pub rank: usize,
    /// `‖T(I,θ,θ) − λθ‖` per extracted pair, measured on the tensor it came from.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eigen_residuals: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub iterations: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    /// Relative reconstruction error after each ALS sweep.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep_errors: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstruction_residual: Option<f64>,
    /// Residual tracked through deflation, for comparison with the direct one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deflation_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral_residual_estimate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_min_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutation: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vector_errors: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weight_errors: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl DecompositionReport {
    pub fn new(method: &str, rank: usize) -> Self {
        Self { method: method.to_string(), rank, ..Default::default() }
    }
}
