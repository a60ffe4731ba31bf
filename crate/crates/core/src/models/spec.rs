//! Generative model parameters, one struct per family. Matrices are stored as
//! lists of columns so each component reads as one JSON array.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::tensor::Matrix;

const SUM_TOL: f64 = 1e-12;

fn default_words() -> usize {
    3
}

fn check_prob(p: &[f64], what: &str) -> Result<()> {
    ensure!(!p.is_empty(), Validation, "{} is empty", what);
    ensure!(p.iter().all(|&x| x.is_finite() && x >= 0.0), Validation, "{} has negative or non-finite entries", what);
    let s: f64 = p.iter().sum();
    ensure!((s - 1.0).abs() <= SUM_TOL, Validation, "{} sums to {} instead of 1", what, s);
    Ok(())
}

fn check_cols(cols: &[Vec<f64>], k: usize, what: &str) -> Result<usize> {
    ensure!(cols.len() == k, Validation, "{} has {} columns, expected {}", what, cols.len(), k);
    let d = cols[0].len();
    ensure!(d >= 1, Validation, "{} columns are empty", what);
    ensure!(cols.iter().all(|c| c.len() == d), Validation, "{} columns have unequal lengths", what);
    ensure!(cols.iter().flatten().all(|x| x.is_finite()), Validation, "{} has non-finite entries", what);
    Ok(d)
}

fn check_stochastic(cols: &[Vec<f64>], k: usize, what: &str) -> Result<usize> {
    let d = check_cols(cols, k, what)?;
    for (j, c) in cols.iter().enumerate() {
        check_prob(c, &format!("{} column {}", what, j))?;
    }
    Ok(d)
}

fn cols_matrix(cols: &[Vec<f64>]) -> Matrix {
    Matrix::from_cols(cols).expect("validated columns")
}

/// Single topic model: pick topic `j ~ w`, then draw every word from `μ_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSpec {
    pub weights: Vec<f64>,
    pub topics: Vec<Vec<f64>>,
    #[serde(default = "default_words")]
    pub words: usize,
}

impl TopicSpec {
    pub fn validate(&self) -> Result<()> {
        check_prob(&self.weights, "topic weights")?;
        check_stochastic(&self.topics, self.weights.len(), "topics")?;
        ensure!(self.words >= 3, Validation, "documents need at least 3 words, got {}", self.words);
        Ok(())
    }
    pub fn k(&self) -> usize {
        self.weights.len()
    }
    pub fn d(&self) -> usize {
        self.topics[0].len()
    }
    pub fn topic_matrix(&self) -> Matrix {
        cols_matrix(&self.topics)
    }
}

/// Spherical Gaussian mixture. `sigma` holds one shared value or one per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmSpec {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub sigma: Vec<f64>,
}

impl GmmSpec {
    pub fn validate(&self) -> Result<()> {
        check_prob(&self.weights, "mixing weights")?;
        check_cols(&self.means, self.weights.len(), "means")?;
        ensure!(
            self.sigma.len() == 1 || self.sigma.len() == self.k(),
            Validation,
            "sigma needs 1 or {} entries, got {}",
            self.k(),
            self.sigma.len()
        );
        ensure!(self.sigma.iter().all(|&s| s.is_finite() && s >= 0.0), Validation, "sigma must be nonnegative");
        Ok(())
    }
    pub fn k(&self) -> usize {
        self.weights.len()
    }
    pub fn d(&self) -> usize {
        self.means[0].len()
    }
    pub fn sigma_of(&self, j: usize) -> f64 {
        if self.sigma.len() == 1 {
            self.sigma[0]
        } else {
            self.sigma[j]
        }
    }
    pub fn mean_matrix(&self) -> Matrix {
        cols_matrix(&self.means)
    }
}

/// Latent Dirichlet allocation with Dirichlet(α) topic proportions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaSpec {
    pub alpha: Vec<f64>,
    pub topics: Vec<Vec<f64>>,
    #[serde(default = "default_words")]
    pub words: usize,
}

impl LdaSpec {
    pub fn validate(&self) -> Result<()> {
        ensure!(!self.alpha.is_empty(), Validation, "alpha is empty");
        ensure!(self.alpha.iter().all(|&a| a.is_finite() && a > 0.0), Validation, "alpha entries must be positive");
        check_stochastic(&self.topics, self.alpha.len(), "topics")?;
        ensure!(self.words >= 3, Validation, "documents need at least 3 words, got {}", self.words);
        Ok(())
    }
    pub fn alpha0(&self) -> f64 {
        self.alpha.iter().sum()
    }
    pub fn k(&self) -> usize {
        self.alpha.len()
    }
    pub fn d(&self) -> usize {
        self.topics[0].len()
    }
    pub fn topic_matrix(&self) -> Matrix {
        cols_matrix(&self.topics)
    }
}

/// Three conditionally independent views: `x_t = μ_{t,h} + N(0, σ²I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiviewSpec {
    pub weights: Vec<f64>,
    pub views: [Vec<Vec<f64>>; 3],
    #[serde(default)]
    pub noise: f64,
}

impl MultiviewSpec {
    pub fn validate(&self) -> Result<()> {
        check_prob(&self.weights, "mixing weights")?;
        for (t, v) in self.views.iter().enumerate() {
            check_cols(v, self.weights.len(), &format!("view {} means", t))?;
        }
        ensure!(self.noise.is_finite() && self.noise >= 0.0, Validation, "noise must be nonnegative");
        Ok(())
    }
    pub fn k(&self) -> usize {
        self.weights.len()
    }
    pub fn view_means(&self, t: usize) -> Matrix {
        cols_matrix(&self.views[t])
    }
}

/// Hidden Markov model with discrete emissions. `transition[j]` is the
/// distribution of the next state given state `j`; `emission[j]` the
/// observation distribution in state `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmSpec {
    pub initial: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
    pub emission: Vec<Vec<f64>>,
    #[serde(default = "default_words")]
    pub length: usize,
}

impl HmmSpec {
    pub fn validate(&self) -> Result<()> {
        check_prob(&self.initial, "initial distribution")?;
        let k = self.k();
        let kk = check_stochastic(&self.transition, k, "transition")?;
        ensure!(kk == k, Validation, "transition must be {}x{}", k, k);
        check_stochastic(&self.emission, k, "emission")?;
        ensure!(self.length >= 3, Validation, "sequences need length at least 3, got {}", self.length);
        Ok(())
    }
    pub fn k(&self) -> usize {
        self.initial.len()
    }
    pub fn d(&self) -> usize {
        self.emission[0].len()
    }
    pub fn transition_matrix(&self) -> Matrix {
        cols_matrix(&self.transition)
    }
    pub fn emission_matrix(&self) -> Matrix {
        cols_matrix(&self.emission)
    }
    /// Distribution of the second hidden state, `Tπ`.
    pub fn hidden_weights(&self) -> Vec<f64> {
        self.transition_matrix().matvec(&self.initial).expect("k×k times k")
    }
}

/// Zero-mean, unit-variance source distributions for ICA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Rademacher,
    Uniform,
    Laplace,
    Gaussian,
}

impl Source {
    /// Excess kurtosis `E[h⁴] − 3`.
    pub fn kurtosis(self) -> f64 {
        match self {
            Source::Rademacher => -2.0,
            Source::Uniform => -1.2,
            Source::Laplace => 3.0,
            Source::Gaussian => 0.0,
        }
    }
}

/// `x = A h + z` with independent sources `h_j` and Gaussian noise `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcaSpec {
    pub mixing: Vec<Vec<f64>>,
    pub sources: Vec<Source>,
    #[serde(default)]
    pub noise: f64,
}

impl IcaSpec {
    pub fn validate(&self) -> Result<()> {
        ensure!(!self.sources.is_empty(), Validation, "no sources");
        check_cols(&self.mixing, self.sources.len(), "mixing")?;
        ensure!(self.noise.is_finite() && self.noise >= 0.0, Validation, "noise must be nonnegative");
        Ok(())
    }
    pub fn k(&self) -> usize {
        self.sources.len()
    }
    pub fn d(&self) -> usize {
        self.mixing[0].len()
    }
    pub fn mixing_matrix(&self) -> Matrix {
        cols_matrix(&self.mixing)
    }
    pub fn kurtoses(&self) -> Vec<f64> {
        self.sources.iter().map(|s| s.kurtosis()).collect()
    }
}

/// Noisy-or network: hidden `h_j ~ Bernoulli(ρ)`, then
/// `Pr[x_i = 0 | h] = exp(−⟨W_i, h⟩)` independently. `weights[j]` is column `j` of W.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyOrSpec {
    pub rho: f64,
    pub weights: Vec<Vec<f64>>,
}

impl NoisyOrSpec {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.rho > 0.0 && self.rho < 1.0, Validation, "rho must lie in (0, 1), got {}", self.rho);
        ensure!(!self.weights.is_empty(), Validation, "no hidden units");
        check_cols(&self.weights, self.weights.len(), "weights")?;
        ensure!(self.weights.iter().flatten().all(|&x| x >= 0.0), Validation, "weights must be nonnegative");
        Ok(())
    }
    pub fn k(&self) -> usize {
        self.weights.len()
    }
    pub fn d(&self) -> usize {
        self.weights[0].len()
    }
    pub fn weight_matrix(&self) -> Matrix {
        cols_matrix(&self.weights)
    }
}
