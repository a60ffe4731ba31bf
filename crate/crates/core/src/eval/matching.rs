//! Optimal component alignment up to permutation and sign.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::tensor::{dot, norm, Matrix};

/// Minimum-cost perfect assignment on a square cost matrix (Hungarian
/// algorithm with row/column potentials). Returns `assign[row] = col`.
pub fn hungarian(cost: &Matrix) -> Vec<usize> {
    let n = cost.rows();
    assert_eq!(n, cost.cols(), "assignment needs a square cost matrix");
    // 1-based arrays with a sentinel column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

/// Alignment of estimated columns to true ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// `permutation[j]` is the estimated column matched to true column `j`.
    pub permutation: Vec<usize>,
    pub signs: Vec<f64>,
    /// `‖v_j − s_j v̂_{π(j)}‖₂`.
    pub errors: Vec<f64>,
}

impl MatchResult {
    pub fn max_error(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }

    /// Estimated columns reordered and sign-corrected to line up with the truth.
    pub fn aligned(&self, est: &Matrix) -> Matrix {
        let cols: Vec<Vec<f64>> = self
            .permutation
            .iter()
            .zip(&self.signs)
            .map(|(&p, &s)| est.col(p).iter().map(|x| s * x).collect())
            .collect();
        Matrix::from_cols(&cols).expect("same column length")
    }

    /// Applies the permutation to per-component values of the estimate.
    pub fn permute<T: Copy>(&self, values: &[T]) -> Vec<T> {
        self.permutation.iter().map(|&p| values[p]).collect()
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let den = norm(a) * norm(b);
    if den == 0.0 {
        0.0
    } else {
        dot(a, b) / den
    }
}

/// Minimizes `Σ_j (1 − |cos(v_j, v̂_{π(j)})|)` and picks signs that make the
/// matched inner products nonnegative.
pub fn match_components(truth: &Matrix, est: &Matrix) -> Result<MatchResult> {
    ensure!(truth.shape() == est.shape(), Dimension, "truth {:?} vs estimate {:?}", truth.shape(), est.shape());
    let k = truth.cols();
    let tc = truth.columns();
    let ec = est.columns();
    let cos = Matrix::from_fn(k, k, |i, j| cosine(&tc[i], &ec[j]));
    let cost = Matrix::from_fn(k, k, |i, j| 1.0 - cos.get(i, j).abs());
    let permutation = hungarian(&cost);
    let signs: Vec<f64> = (0..k).map(|j| if cos.get(j, permutation[j]) < 0.0 { -1.0 } else { 1.0 }).collect();
    let errors = (0..k)
        .map(|j| {
            let e = &ec[permutation[j]];
            tc[j].iter().zip(e).map(|(a, b)| (a - signs[j] * b).powi(2)).sum::<f64>().sqrt()
        })
        .collect();
    Ok(MatchResult { permutation, signs, errors })
}

/// `‖a_j − b_j‖₁` for matching columns.
pub fn l1_column_errors(a: &Matrix, b: &Matrix) -> Vec<f64> {
    (0..a.cols()).map(|j| a.col(j).iter().zip(b.col(j)).map(|(x, y)| (x - y).abs()).sum()).collect()
}
