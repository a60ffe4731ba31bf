//! Implicit moment tensors over sample batches: empirical third moments,
//! tensor-free contractions, online power iteration and stochastic ALS
//! gradients.

use std::path::Path;

use crate::error::{ensure, Result};
use crate::power::{decompose_operator, deflated_entry, EigenPair, PowerConfig, SlabOperator};
use crate::report::DecompositionReport;
use crate::tensor::{dot, pairwise_sum_by, DenseTensor, KruskalForm, Matrix};

/// Three aligned views, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleSampleBatch {
    views: [Matrix; 3],
}

impl TripleSampleBatch {
    pub fn new(x1: Matrix, x2: Matrix, x3: Matrix) -> Result<Self> {
        ensure!(
            x1.rows() == x2.rows() && x2.rows() == x3.rows(),
            Dimension,
            "view sample counts differ: {}, {}, {}",
            x1.rows(),
            x2.rows(),
            x3.rows()
        );
        ensure!(x1.rows() >= 1, Validation, "batch needs at least one sample");
        Ok(Self { views: [x1, x2, x3] })
    }

    /// The same samples in all three views.
    pub fn symmetric(x: Matrix) -> Result<Self> {
        Self::new(x.clone(), x.clone(), x)
    }

    /// Views stored as order-2 DTEN files (n × d each).
    pub fn read(paths: [&Path; 3]) -> Result<Self> {
        let [a, b, c] = paths.map(crate::dten::read_matrix);
        Self::new(a?, b?, c?)
    }

    pub fn n(&self) -> usize {
        self.views[0].rows()
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.views[0].cols(), self.views[1].cols(), self.views[2].cols()]
    }

    pub fn view(&self, m: usize) -> &Matrix {
        &self.views[m]
    }

    pub fn sample(&self, i: usize) -> [&[f64]; 3] {
        [self.views[0].row(i), self.views[1].row(i), self.views[2].row(i)]
    }

    pub fn is_symmetric(&self) -> bool {
        self.views[0] == self.views[1] && self.views[1] == self.views[2]
    }

    /// Views stored feature-major so each coordinate is contiguous over samples.
    fn columns(&self) -> [Matrix; 3] {
        [self.views[0].transpose(), self.views[1].transpose(), self.views[2].transpose()]
    }
}

/// Fills `row[c] = (1/n) Σ_i x₁[a] x₂[b] x₃[c]` for all `c`, summed over
/// samples in a fixed pairwise tree. `prod` is scratch of length n.
fn moment_fiber(cols: &[Matrix; 3], a: usize, b: usize, prod: &mut [f64], row: &mut [f64]) {
    let n = prod.len();
    let (ra, rb) = (cols[0].row(a), cols[1].row(b));
    for i in 0..n {
        prod[i] = ra[i] * rb[i];
    }
    for (c, out) in row.iter_mut().enumerate() {
        let rc = cols[2].row(c);
        *out = pairwise_sum_by(0, n, &|i| prod[i] * rc[i]) / n as f64;
    }
}

/// `(1/n) Σ x₁⁽ⁱ⁾⊗x₂⁽ⁱ⁾⊗x₃⁽ⁱ⁾`.
pub fn empirical_tensor(batch: &TripleSampleBatch) -> DenseTensor {
    let [d1, d2, d3] = batch.dims();
    let cols = batch.columns();
    let mut prod = vec![0.0; batch.n()];
    let mut data = vec![0.0; d1 * d2 * d3];
    for (ab, row) in data.chunks_exact_mut(d3).enumerate() {
        moment_fiber(&cols, ab / d2, ab % d2, &mut prod, row);
    }
    DenseTensor::new(vec![d1, d2, d3], data).expect("shape matches data")
}

/// `T̂(u, v, I)` from two inner products per sample.
pub fn implicit_apply(batch: &TripleSampleBatch, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let [d1, d2, d3] = batch.dims();
    ensure!(u.len() == d1 && v.len() == d2, Dimension, "vectors of length ({}, {}) vs dims ({}, {})", u.len(), v.len(), d1, d2);
    let coef: Vec<f64> = (0..batch.n())
        .map(|i| {
            let [x1, x2, _] = batch.sample(i);
            dot(x1, u) * dot(x2, v)
        })
        .collect();
    let x3 = batch.view(2);
    let n = batch.n() as f64;
    Ok((0..d3).map(|c| pairwise_sum_by(0, batch.n(), &|i| coef[i] * x3.get(i, c)) / n).collect())
}

/// Symmetric empirical moment with deflations, rebuilt one slab at a time.
#[derive(Debug, Clone)]
pub struct StreamOperator {
    cols: [Matrix; 3],
    n: usize,
    deflations: Vec<EigenPair>,
}

impl StreamOperator {
    pub fn new(batch: &TripleSampleBatch) -> Result<Self> {
        let [d1, d2, d3] = batch.dims();
        ensure!(d1 == d2 && d2 == d3, Dimension, "online power iteration needs equal view dims, got {:?}", batch.dims());
        ensure!(
            batch.is_symmetric(),
            Validation,
            "online power iteration needs identical views; symmetrize the batch first"
        );
        Ok(Self { cols: batch.columns(), n: batch.n(), deflations: Vec::new() })
    }
}

impl SlabOperator for StreamOperator {
    fn dim(&self) -> usize {
        self.cols[0].rows()
    }

    fn for_each_slab(&self, f: &mut dyn FnMut(usize, &[f64])) {
        let d = self.dim();
        let mut slab = vec![0.0; d * d];
        let mut prod = vec![0.0; self.n];
        for a in 0..d {
            for (b, row) in slab.chunks_exact_mut(d).enumerate() {
                moment_fiber(&self.cols, a, b, &mut prod, row);
                for p in &self.deflations {
                    for (c, t) in row.iter_mut().enumerate() {
                        *t = deflated_entry(*t, p, a, b, c);
                    }
                }
            }
            f(a, &slab);
        }
    }

    fn deflate(&mut self, pair: &EigenPair) {
        self.deflations.push(pair.clone());
    }
}

/// Robust power method on the empirical third moment of a symmetric batch
/// without materializing it. Matches the dense path bit for bit.
pub fn online_power_decompose(
    batch: &TripleSampleBatch,
    k: usize,
    cfg: &PowerConfig,
) -> Result<(KruskalForm, DecompositionReport)> {
    let mut op = StreamOperator::new(batch)?;
    let (form, mut report, _) = decompose_operator(&mut op, k, cfg)?;
    report.method = "online-power".into();
    Ok((form, report))
}

fn check_factors(c: &Matrix, sample: [&[f64]; 3], a: &Matrix, b: &Matrix, lambda: &[f64]) -> Result<()> {
    let k = lambda.len();
    ensure!(a.cols() == k && b.cols() == k && c.cols() == k, Dimension, "factor column counts must equal {}", k);
    ensure!(
        sample[0].len() == a.rows() && sample[1].len() == b.rows() && sample[2].len() == c.rows(),
        Dimension,
        "sample dims ({}, {}, {}) vs factor rows ({}, {}, {})",
        sample[0].len(),
        sample[1].len(),
        sample[2].len(),
        a.rows(),
        b.rows(),
        c.rows()
    );
    Ok(())
}

/// Per-sample loss `f(C, x) = ‖Σ_j λ_j a_j⊗b_j⊗c_j − x₁⊗x₂⊗x₃‖²_F`.
pub fn sample_objective(c: &Matrix, sample: [&[f64]; 3], a: &Matrix, b: &Matrix, lambda: &[f64]) -> Result<f64> {
    check_factors(c, sample, a, b, lambda)?;
    let k = lambda.len();
    let (ga, gb, gc) = (a.t_matmul(a)?, b.t_matmul(b)?, c.t_matmul(c)?);
    let mut model = 0.0;
    for j in 0..k {
        for l in 0..k {
            model += lambda[j] * lambda[l] * ga.get(j, l) * gb.get(j, l) * gc.get(j, l);
        }
    }
    let pa = a.t_matvec(sample[0])?;
    let pb = b.t_matvec(sample[1])?;
    let pc = c.t_matvec(sample[2])?;
    let cross: f64 = (0..k).map(|j| lambda[j] * pa[j] * pb[j] * pc[j]).sum();
    let data = dot(sample[0], sample[0]) * dot(sample[1], sample[1]) * dot(sample[2], sample[2]);
    Ok(model - 2.0 * cross + data)
}

/// `∂f/∂c_t = 2λ_t Σ_j λ_j⟨a_j,a_t⟩⟨b_j,b_t⟩c_j − 2λ_t⟨x₁,a_t⟩⟨x₂,b_t⟩x₃`, column by column.
pub fn stochastic_als_gradient(
    c: &Matrix,
    sample: [&[f64]; 3],
    a: &Matrix,
    b: &Matrix,
    lambda: &[f64],
) -> Result<Matrix> {
    check_factors(c, sample, a, b, lambda)?;
    let k = lambda.len();
    let d3 = c.rows();
    let (ga, gb) = (a.t_matmul(a)?, b.t_matmul(b)?);
    let pa = a.t_matvec(sample[0])?;
    let pb = b.t_matvec(sample[1])?;
    let mut grad = Matrix::zeros(d3, k);
    for t in 0..k {
        let w: Vec<f64> = (0..k).map(|j| lambda[j] * ga.get(j, t) * gb.get(j, t)).collect();
        let s = pa[t] * pb[t];
        for m in 0..d3 {
            let model = dot(&w, c.row(m));
            grad.set(m, t, 2.0 * lambda[t] * (model - s * sample[2][m]));
        }
    }
    Ok(grad)
}
