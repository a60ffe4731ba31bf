//! Method-of-moments builders for latent variable models, with seeded
//! samplers for each family.
//!
//! Every family has a population builder that returns the target moments
//! (`Σ w_j μ_j^{⊗2}`, `Σ w_j μ_j^{⊗3}` and relatives) straight from the
//! parameters, plus a `*_from_raw` reduction that forms the same moments from
//! raw expectations. Empirical builders feed sample averages to the reduction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::stream::{empirical_tensor, TripleSampleBatch};
use crate::tensor::{DenseTensor, Matrix};

mod gaussian;
mod multiview;
mod noisyor;
pub mod sample;
pub mod spec;
mod topic;

pub use gaussian::*;
pub use multiview::*;
pub use noisyor::*;
pub use sample::*;
pub use spec::*;
pub use topic::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Topic,
    Gmm,
    GmmDiff,
    Lda,
    Multiview,
    Hmm,
    Ica,
    NoisyOr,
}

impl Family {
    pub const ALL: [Family; 8] =
        [Family::Topic, Family::Gmm, Family::GmmDiff, Family::Lda, Family::Multiview, Family::Hmm, Family::Ica, Family::NoisyOr];

    pub fn name(self) -> &'static str {
        match self {
            Family::Topic => "topic",
            Family::Gmm => "gmm",
            Family::GmmDiff => "gmm-diff",
            Family::Lda => "lda",
            Family::Multiview => "multiview",
            Family::Hmm => "hmm",
            Family::Ica => "ica",
            Family::NoisyOr => "noisyor",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown family {:?}", s)))
    }
}

/// Moments ready for a decomposition pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    pub family: Family,
    pub d: usize,
    pub k: Option<usize>,
    pub m1: Option<Vec<f64>>,
    pub m2: Matrix,
    pub m3: Option<DenseTensor>,
    pub m4: Option<DenseTensor>,
    pub alpha0: Option<f64>,
    pub sigma2: Option<f64>,
}

impl MomentSet {
    fn new(family: Family, m2: Matrix) -> Self {
        Self { family, d: m2.rows(), k: None, m1: None, m2, m3: None, m4: None, alpha0: None, sigma2: None }
    }

    /// `(M₂, M₃)` projected onto symmetric matrices and tensors.
    ///
    /// Empirical estimates built from ordered positions are only symmetric in
    /// expectation; the projection averages out the ordering.
    pub fn symmetric_pair(&self) -> Result<(Matrix, DenseTensor)> {
        let m3 = self
            .m3
            .as_ref()
            .ok_or_else(|| Error::Validation(format!("{} moments carry no third-order tensor", self.family)))?;
        Ok((self.m2.symmetrized(), m3.symmetrized()?))
    }
}

/// Raw moments `E[x]`, `E[x⊗x]`, `E[x⊗x⊗x]` of a single observation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMoments {
    pub m1: Vec<f64>,
    pub m2: Matrix,
    pub m3: DenseTensor,
}

impl RawMoments {
    /// Sample averages over the rows of `x`.
    pub fn from_samples(x: &Matrix) -> Result<Self> {
        ensure!(x.rows() >= 1, Validation, "no samples");
        let m1 = crate::matrix_methods::column_mean(x);
        let m2 = crate::matrix_methods::second_moment(x);
        let m3 = empirical_tensor(&TripleSampleBatch::symmetric(x.clone())?);
        Ok(Self { m1, m2, m3 })
    }

    pub fn d(&self) -> usize {
        self.m1.len()
    }

    pub fn covariance(&self) -> Matrix {
        let m = &self.m1;
        Matrix::from_fn(self.d(), self.d(), |i, j| self.m2.get(i, j) - m[i] * m[j])
    }
}

/// `Σ_i (v⊗e_i⊗e_i + e_i⊗v⊗e_i + e_i⊗e_i⊗v)`.
pub fn identity_correction(v: &[f64]) -> DenseTensor {
    let d = v.len();
    let mut t = DenseTensor::zeros(&[d, d, d]);
    for a in 0..d {
        for i in 0..d {
            for (idx, val) in [([a, i, i], v[a]), ([i, a, i], v[a]), ([i, i, a], v[a])] {
                let cur = t.get(&idx);
                t.set(&idx, cur + val);
            }
        }
    }
    t
}

/// `Σ_j w_j a_j⊗a_j` for the columns of `a`.
pub(crate) fn weighted_gram(w: &[f64], a: &Matrix) -> Matrix {
    a.scale_cols(w).matmul(&a.transpose()).expect("same shape")
}
