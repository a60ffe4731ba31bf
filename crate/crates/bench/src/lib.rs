//! Fixtures shared by the kernel benchmarks.

use tensorlab::rng::{normal, stream};
use tensorlab::stream::TripleSampleBatch;
use tensorlab::tensor::{kruskal_to_tensor, DenseTensor, KruskalForm, Matrix};

pub fn gaussian(seed: u64, rows: usize, cols: usize) -> Matrix {
    let mut g = stream(seed, 0, 0);
    Matrix::from_fn(rows, cols, |_, _| normal(&mut g))
}

/// Random rank-`k` tensor with Gaussian factors and unit weights.
pub fn low_rank(seed: u64, dims: [usize; 3], k: usize) -> DenseTensor {
    let f = dims.iter().enumerate().map(|(m, &d)| gaussian(seed * 3 + m as u64, d, k)).collect();
    kruskal_to_tensor(&KruskalForm::new(vec![1.0; k], f).unwrap()).unwrap()
}

pub fn symmetric_batch(seed: u64, n: usize, d: usize) -> TripleSampleBatch {
    TripleSampleBatch::symmetric(gaussian(seed, n, d)).unwrap()
}
