//! Dense tensors, matrices, and the multilinear kernels built on them.
//!
//! Layout is row-major throughout: the last index varies fastest.

use crate::error::{ensure, Result};
use crate::rng;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        ensure!(
            data.len() == rows * cols,
            Dimension,
            "matrix {}x{} needs {} entries, got {}",
            rows,
            cols,
            rows * cols,
            data.len()
        );
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        ensure!(rows.iter().all(|x| x.len() == c), Dimension, "ragged rows");
        Self::new(r, c, rows.concat())
    }

    pub fn from_cols(cols: &[Vec<f64>]) -> Result<Self> {
        let c = cols.len();
        let r = cols.first().map_or(0, |x| x.len());
        ensure!(cols.iter().all(|x| x.len() == r), Dimension, "ragged columns");
        Ok(Self::from_fn(r, c, |i, j| cols[j][i]))
    }

    pub fn diag(d: &[f64]) -> Self {
        Self::from_fn(d.len(), d.len(), |i, j| if i == j { d[i] } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }
    pub fn set_col(&mut self, j: usize, v: &[f64]) {
        for (i, &x) in v.iter().enumerate() {
            self.set(i, j, x);
        }
    }
    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|j| self.col(j)).collect()
    }

    /// Leading `k` columns.
    pub fn take_cols(&self, k: usize) -> Matrix {
        Matrix::from_fn(self.rows, k, |i, j| self.get(i, j))
    }

    pub fn select_cols(&self, idx: &[usize]) -> Matrix {
        Matrix::from_fn(self.rows, idx.len(), |i, j| self.get(i, idx[j]))
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        ensure!(
            self.cols == other.rows,
            Dimension,
            "matmul {}x{} by {}x{}",
            self.rows,
            self.cols,
            other.rows,
            other.cols
        );
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for l in 0..self.cols {
                let a = self.data[i * self.cols + l];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[l * other.cols..(l + 1) * other.cols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other` without forming the transpose.
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        ensure!(self.rows == other.rows, Dimension, "t_matmul row mismatch");
        let mut out = Matrix::zeros(self.cols, other.cols);
        for l in 0..self.rows {
            let arow = self.row(l);
            let brow = other.row(l);
            for (i, &a) in arow.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        ensure!(v.len() == self.cols, Dimension, "matvec length {} vs {}", v.len(), self.cols);
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// `selfᵀ v`.
    pub fn t_matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        ensure!(v.len() == self.rows, Dimension, "t_matvec length {} vs {}", v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        ensure!(self.shape() == other.shape(), Dimension, "shape {:?} vs {:?}", self.shape(), other.shape());
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Scale column `j` by `s[j]`.
    pub fn scale_cols(&self, s: &[f64]) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j) * s[j])
    }

    pub fn frobenius(&self) -> f64 {
        norm(&self.data)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Largest `|M - Mᵀ|` entry relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let scale = self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    pub fn symmetrized(&self) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| 0.5 * (self.get(i, j) + self.get(j, i)))
    }

    pub fn column_norms(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (acc, x) in s.iter_mut().zip(self.row(i)) {
                *acc += x * x;
            }
        }
        s.into_iter().map(f64::sqrt).collect()
    }

    pub fn to_tensor(&self) -> DenseTensor {
        DenseTensor { dims: vec![self.rows, self.cols], data: self.data.clone() }
    }
}

/// Order-p dense tensor with canonical last-index-fastest layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        ensure!(!dims.is_empty(), Dimension, "tensor order must be positive");
        ensure!(dims.iter().all(|&d| d > 0), Dimension, "zero-length mode in {:?}", dims);
        let n: usize = dims.iter().product();
        ensure!(data.len() == n, Dimension, "dims {:?} need {} entries, got {}", dims, n, data.len());
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Self { dims: dims.to_vec(), data: vec![0.0; dims.iter().product()] }
    }

    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut t = Self::zeros(dims);
        let mut idx = vec![0usize; dims.len()];
        for off in 0..t.data.len() {
            t.data[off] = f(&idx);
            increment(&mut idx, dims);
        }
        t
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
    pub fn len(&self) -> usize {
        self.data.len()
    }
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        idx.iter().zip(&self.dims).fold(0, |acc, (&i, &d)| {
            debug_assert!(i < d);
            acc * d + i
        })
    }

    pub fn index_of(&self, mut off: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims.len()];
        for t in (0..self.dims.len()).rev() {
            idx[t] = off % self.dims[t];
            off /= self.dims[t];
        }
        idx
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    pub fn is_cubical(&self) -> bool {
        self.dims.iter().all(|&d| d == self.dims[0])
    }

    pub fn reshape(&self, dims: &[usize]) -> Result<DenseTensor> {
        DenseTensor::new(dims.to_vec(), self.data.clone())
    }

    pub fn scale(&self, s: f64) -> DenseTensor {
        DenseTensor { dims: self.dims.clone(), data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn add(&self, other: &DenseTensor) -> Result<DenseTensor> {
        ensure!(self.dims == other.dims, Dimension, "dims {:?} vs {:?}", self.dims, other.dims);
        Ok(DenseTensor {
            dims: self.dims.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.add(&other.scale(-1.0))
    }

    pub fn max_abs_diff(&self, other: &DenseTensor) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Largest deviation under any index permutation, relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_cubical() {
            return f64::INFINITY;
        }
        let scale = self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        let p = self.order();
        let mut idx = vec![0usize; p];
        for off in 0..self.data.len() {
            let mut sorted = idx.clone();
            sorted.sort_unstable();
            worst = worst.max((self.data[off] - self.get(&sorted)).abs());
            increment(&mut idx, &self.dims);
        }
        worst / scale
    }

    /// Average over all index permutations.
    pub fn symmetrized(&self) -> Result<DenseTensor> {
        ensure!(self.is_cubical(), Dimension, "symmetrization needs a cubical tensor");
        let perms = permutations(self.order());
        let n = perms.len() as f64;
        Ok(DenseTensor::from_fn(&self.dims, |idx| {
            let mut s = 0.0;
            let mut j = vec![0; idx.len()];
            for p in &perms {
                for (t, &pt) in p.iter().enumerate() {
                    j[t] = idx[pt];
                }
                s += self.get(&j);
            }
            s / n
        }))
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        ensure!(self.order() == 2, Dimension, "order {} tensor is not a matrix", self.order());
        Matrix::new(self.dims[0], self.dims[1], self.data.clone())
    }
}

fn increment(idx: &mut [usize], dims: &[usize]) {
    for t in (0..dims.len()).rev() {
        idx[t] += 1;
        if idx[t] < dims[t] {
            return;
        }
        idx[t] = 0;
    }
}

fn permutations(p: usize) -> Vec<Vec<usize>> {
    if p == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(p - 1) {
        for pos in 0..p {
            let mut v = rest.clone();
            v.insert(pos, p - 1);
            out.push(v);
        }
    }
    out
}

/// Weighted sum of rank-1 terms; each factor is `dims[t] × k` with unit columns.
#[derive(Debug, Clone, PartialEq)]
pub struct KruskalForm {
    pub weights: Vec<f64>,
    pub factors: Vec<Matrix>,
}

impl KruskalForm {
    pub fn new(weights: Vec<f64>, factors: Vec<Matrix>) -> Result<Self> {
        let k = weights.len();
        ensure!(!factors.is_empty(), Dimension, "kruskal form needs at least one factor");
        ensure!(
            factors.iter().all(|f| f.cols() == k),
            Dimension,
            "every factor needs {} columns",
            k
        );
        Ok(Self { weights, factors })
    }

    /// Symmetric order-`p` form sharing one factor across modes.
    pub fn symmetric(weights: Vec<f64>, factor: Matrix, p: usize) -> Result<Self> {
        Self::new(weights, vec![factor; p])
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }
    pub fn order(&self) -> usize {
        self.factors.len()
    }
    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.rows()).collect()
    }

    /// Rescale columns to unit norm, folding scales into the weights.
    /// Zero columns stay zero and zero out their weight.
    pub fn normalized(&self) -> KruskalForm {
        let mut w = self.weights.clone();
        let factors = self
            .factors
            .iter()
            .map(|f| {
                let n = f.column_norms();
                for (wj, &nj) in w.iter_mut().zip(&n) {
                    *wj *= nj;
                }
                f.scale_cols(&n.iter().map(|&x| if x > 0.0 { 1.0 / x } else { 0.0 }).collect::<Vec<_>>())
            })
            .collect();
        KruskalForm { weights: w, factors }
    }

    /// Flip signs so every weight is nonnegative; odd orders flip a whole column set.
    pub fn with_positive_weights(&self) -> KruskalForm {
        let mut out = self.clone();
        for j in 0..self.rank() {
            if out.weights[j] < 0.0 {
                out.weights[j] = -out.weights[j];
                let f = &mut out.factors[0];
                for i in 0..f.rows() {
                    let v = f.get(i, j);
                    f.set(i, j, -v);
                }
            }
        }
        out
    }

    pub fn max_column_norm_defect(&self) -> f64 {
        self.factors
            .iter()
            .flat_map(|f| f.column_norms())
            .map(|n| if n == 0.0 { 0.0 } else { (n - 1.0).abs() })
            .fold(0.0, f64::max)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalize(a: &[f64]) -> Vec<f64> {
    let n = norm(a);
    a.iter().map(|x| x / n).collect()
}

/// Pairwise (tree) summation with a fixed split order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

/// [`pairwise_sum`] over `f(lo..hi)` without materializing the terms.
pub fn pairwise_sum_by(lo: usize, hi: usize, f: &impl Fn(usize) -> f64) -> f64 {
    match hi - lo {
        0 => 0.0,
        1 => f(lo),
        n if n <= 8 => (lo..hi).map(f).sum(),
        n => pairwise_sum_by(lo, lo + n / 2, f) + pairwise_sum_by(lo + n / 2, hi, f),
    }
}

/// `weight · v₁ ⊗ … ⊗ v_p`.
pub fn outer_rank1(weight: f64, vectors: &[&[f64]]) -> Result<DenseTensor> {
    ensure!(!vectors.is_empty(), Dimension, "need at least one vector");
    ensure!(vectors.iter().all(|v| !v.is_empty()), Dimension, "empty vector");
    let dims: Vec<usize> = vectors.iter().map(|v| v.len()).collect();
    // build incrementally: data for the first t modes times the next vector
    let mut data = vec![weight];
    for v in vectors {
        let mut next = Vec::with_capacity(data.len() * v.len());
        for &a in &data {
            next.extend(v.iter().map(|&b| a * b));
        }
        data = next;
    }
    DenseTensor::new(dims, data)
}

/// Mode-`mode` matricization: `dims[mode] × ∏ others`, remaining indices in
/// their original order with the last fastest.
pub fn unfold(t: &DenseTensor, mode: usize) -> Result<Matrix> {
    ensure!(mode < t.order(), Dimension, "mode {} out of range for order {}", mode, t.order());
    let dims = t.dims();
    let before: usize = dims[..mode].iter().product();
    let after: usize = dims[mode + 1..].iter().product();
    let dm = dims[mode];
    let mut out = vec![0.0; t.len()];
    let cols = before * after;
    for b in 0..before {
        for i in 0..dm {
            let src = &t.data[(b * dm + i) * after..(b * dm + i + 1) * after];
            out[i * cols + b * after..i * cols + (b + 1) * after].copy_from_slice(src);
        }
    }
    Matrix::new(dm, cols, out)
}

/// Inverse of [`unfold`].
pub fn fold(m: &Matrix, mode: usize, shape: &[usize]) -> Result<DenseTensor> {
    ensure!(mode < shape.len(), Dimension, "mode {} out of range", mode);
    let total: usize = shape.iter().product();
    ensure!(
        m.rows() == shape[mode] && m.rows() * m.cols() == total,
        Dimension,
        "matrix {:?} does not fold into {:?} along mode {}",
        m.shape(),
        shape,
        mode
    );
    let before: usize = shape[..mode].iter().product();
    let after: usize = shape[mode + 1..].iter().product();
    let dm = shape[mode];
    let cols = before * after;
    let mut out = vec![0.0; total];
    for b in 0..before {
        for i in 0..dm {
            out[(b * dm + i) * after..(b * dm + i + 1) * after]
                .copy_from_slice(&m.data()[i * cols + b * after..i * cols + (b + 1) * after]);
        }
    }
    DenseTensor::new(shape.to_vec(), out)
}

/// Contract mode `mode` of `t` with the rows of `m`; that mode becomes `cols(m)`.
pub fn mode_product(t: &DenseTensor, m: &Matrix, mode: usize) -> Result<DenseTensor> {
    ensure!(mode < t.order(), Dimension, "mode {} out of range", mode);
    ensure!(
        m.rows() == t.dims()[mode],
        Dimension,
        "mode {} has length {} but matrix has {} rows",
        mode,
        t.dims()[mode],
        m.rows()
    );
    let u = unfold(t, mode)?;
    let prod = m.t_matmul(&u)?;
    let mut shape = t.dims().to_vec();
    shape[mode] = m.cols();
    fold(&prod, mode, &shape)
}

/// `T(A, B, C)` for an order-3 tensor.
pub fn multilinear(t: &DenseTensor, a: &Matrix, b: &Matrix, c: &Matrix) -> Result<DenseTensor> {
    ensure!(t.order() == 3, Dimension, "multilinear form needs an order-3 tensor");
    let t = mode_product(t, c, 2)?;
    let t = mode_product(&t, b, 1)?;
    mode_product(&t, a, 0)
}

/// Result of contracting some slots of an order-3 tensor with vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum Applied {
    Scalar(f64),
    Vector(Vec<f64>),
    Matrix(Matrix),
    Tensor(DenseTensor),
}

/// Contract the slots given as `Some(v)`; `None` stands for the identity.
pub fn apply_vectors(t: &DenseTensor, slots: [Option<&[f64]>; 3]) -> Result<Applied> {
    ensure!(t.order() == 3, Dimension, "apply_vectors needs an order-3 tensor");
    let mut cur = t.clone();
    for (mode, s) in slots.iter().enumerate().rev() {
        if let Some(v) = s {
            ensure!(
                v.len() == t.dims()[mode],
                Dimension,
                "slot {} length {} vs {}",
                mode,
                v.len(),
                t.dims()[mode]
            );
            let m = Matrix::new(v.len(), 1, v.to_vec())?;
            cur = mode_product(&cur, &m, mode)?;
        }
    }
    let free: Vec<usize> = (0..3).filter(|&m| slots[m].is_none()).map(|m| t.dims()[m]).collect();
    Ok(match free.len() {
        0 => Applied::Scalar(cur.data[0]),
        1 => Applied::Vector(cur.data),
        2 => Applied::Matrix(Matrix::new(free[0], free[1], cur.data)?),
        _ => Applied::Tensor(cur),
    })
}

fn check3(t: &DenseTensor) -> Result<(usize, usize, usize)> {
    ensure!(t.order() == 3, Dimension, "expected an order-3 tensor, got order {}", t.order());
    Ok((t.dims[0], t.dims[1], t.dims[2]))
}

/// `T(I, v, w) = Σ_{j,l} v_j w_l T(:, j, l)`.
pub fn contract_ivw(t: &DenseTensor, v: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    let (d1, d2, d3) = check3(t)?;
    ensure!(v.len() == d2 && w.len() == d3, Dimension, "contract_ivw lengths");
    Ok((0..d1)
        .map(|i| {
            let slab = &t.data[i * d2 * d3..(i + 1) * d2 * d3];
            (0..d2).map(|j| v[j] * dot(&slab[j * d3..(j + 1) * d3], w)).sum()
        })
        .collect())
}

/// `T(u, I, w)`.
pub fn contract_uiw(t: &DenseTensor, u: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    let (d1, d2, d3) = check3(t)?;
    ensure!(u.len() == d1 && w.len() == d3, Dimension, "contract_uiw lengths");
    let mut out = vec![0.0; d2];
    for i in 0..d1 {
        for (j, o) in out.iter_mut().enumerate() {
            let off = (i * d2 + j) * d3;
            *o += u[i] * dot(&t.data[off..off + d3], w);
        }
    }
    Ok(out)
}

/// `T(u, v, I)`.
pub fn contract_uvi(t: &DenseTensor, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let (d1, d2, d3) = check3(t)?;
    ensure!(u.len() == d1 && v.len() == d2, Dimension, "contract_uvi lengths");
    let mut out = vec![0.0; d3];
    for i in 0..d1 {
        for j in 0..d2 {
            let s = u[i] * v[j];
            if s == 0.0 {
                continue;
            }
            let off = (i * d2 + j) * d3;
            for (o, &x) in out.iter_mut().zip(&t.data[off..off + d3]) {
                *o += s * x;
            }
        }
    }
    Ok(out)
}

/// `T(I, I, w)`.
pub fn contract_iiw(t: &DenseTensor, w: &[f64]) -> Result<Matrix> {
    let (d1, d2, d3) = check3(t)?;
    ensure!(w.len() == d3, Dimension, "contract_iiw length {} vs {}", w.len(), d3);
    Matrix::new(d1, d2, (0..d1 * d2).map(|r| dot(&t.data[r * d3..(r + 1) * d3], w)).collect())
}

/// `T(u, v, w)`.
pub fn contract_uvw(t: &DenseTensor, u: &[f64], v: &[f64], w: &[f64]) -> Result<f64> {
    Ok(dot(&contract_ivw(t, v, w)?, u))
}

/// Column-wise Kronecker product; column j is `a_j ⊗ b_j`, A's index slower.
pub fn khatri_rao(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    ensure!(a.cols() == b.cols(), Dimension, "khatri-rao needs equal column counts ({} vs {})", a.cols(), b.cols());
    let (ra, rb, k) = (a.rows(), b.rows(), a.cols());
    let mut out = Matrix::zeros(ra * rb, k);
    for i in 0..ra {
        for l in 0..rb {
            let row = i * rb + l;
            for j in 0..k {
                out.data[row * k + j] = a.get(i, j) * b.get(l, j);
            }
        }
    }
    Ok(out)
}

/// Entry-wise product.
pub fn hadamard(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    ensure!(a.shape() == b.shape(), Dimension, "hadamard shape {:?} vs {:?}", a.shape(), b.shape());
    a.zip(b, |x, y| x * y)
}

pub fn frobenius_norm(t: &DenseTensor) -> f64 {
    norm(&t.data)
}

/// Lower bound on the spectral norm of an order-3 tensor: best `|T(u,v,w)|`
/// over seeded restarts of alternating rank-1 power updates.
pub fn spectral_norm_estimate(t: &DenseTensor, restarts: usize, iters: usize, seed: u64) -> Result<f64> {
    let (d1, d2, d3) = check3(t)?;
    ensure!(restarts >= 1, Validation, "restarts must be at least 1");
    let mut best = 0.0f64;
    for r in 0..restarts {
        let mut g = rng::stream(seed, 0, r as u32);
        let mut u = rng::unit_sphere(&mut g, d1);
        let mut v = rng::unit_sphere(&mut g, d2);
        let mut w = rng::unit_sphere(&mut g, d3);
        let mut val = contract_uvw(t, &u, &v, &w)?.abs();
        for _ in 0..iters {
            let nu = contract_ivw(t, &v, &w)?;
            if norm(&nu) == 0.0 {
                break;
            }
            u = normalize(&nu);
            let nv = contract_uiw(t, &u, &w)?;
            if norm(&nv) == 0.0 {
                break;
            }
            v = normalize(&nv);
            let nw = contract_uvi(t, &u, &v)?;
            if norm(&nw) == 0.0 {
                break;
            }
            w = normalize(&nw);
            let next = contract_uvw(t, &u, &v, &w)?.abs();
            let done = (next - val).abs() <= 1e-12 * next.max(1e-300);
            val = next;
            if done {
                break;
            }
        }
        best = best.max(val);
    }
    Ok(best)
}

pub const SPECTRAL_RESTARTS: usize = 20;
pub const SPECTRAL_ITERS: usize = 100;

/// `Σ_j λ_j a_j ⊗ b_j ⊗ …` for any order.
pub fn kruskal_to_tensor(k: &KruskalForm) -> Result<DenseTensor> {
    let dims = k.dims();
    ensure!(
        k.factors.iter().all(|f| f.cols() == k.rank()),
        Dimension,
        "inconsistent kruskal factors"
    );
    if dims.len() == 3 {
        return Ok(kruskal3(k));
    }
    let mut out = DenseTensor::zeros(&dims);
    for j in 0..k.rank() {
        let cols: Vec<Vec<f64>> = k.factors.iter().map(|f| f.col(j)).collect();
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        let term = outer_rank1(k.weights[j], &refs)?;
        for (o, x) in out.data.iter_mut().zip(term.data) {
            *o += x;
        }
    }
    Ok(out)
}

fn kruskal3(k: &KruskalForm) -> DenseTensor {
    let (a, b, c) = (&k.factors[0], &k.factors[1], &k.factors[2]);
    let (d1, d2, d3, r) = (a.rows(), b.rows(), c.rows(), k.rank());
    let mut data = vec![0.0; d1 * d2 * d3];
    let mut w = vec![0.0; r];
    for i in 0..d1 {
        for l in 0..d2 {
            for j in 0..r {
                w[j] = k.weights[j] * a.get(i, j) * b.get(l, j);
            }
            let base = (i * d2 + l) * d3;
            for m in 0..d3 {
                data[base + m] = dot(&w, c.row(m));
            }
        }
    }
    DenseTensor { dims: vec![d1, d2, d3], data }
}

/// `Σ_j λ_j v_j^{⊗p}` from the columns of `v`.
pub fn symmetric_tensor(weights: &[f64], v: &Matrix, p: usize) -> Result<DenseTensor> {
    kruskal_to_tensor(&KruskalForm::symmetric(weights.to_vec(), v.clone(), p)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked_tensor() -> DenseTensor {
        DenseTensor::new(vec![3, 4, 2], (0..24).map(|x| x as f64).collect()).unwrap()
    }

    fn rand_matrix(seed: u64, r: usize, c: usize) -> Matrix {
        let mut g = rng::stream(seed, 9, 9);
        Matrix::from_fn(r, c, |_, _| rng::normal(&mut g))
    }

    fn rand_tensor(seed: u64, dims: &[usize]) -> DenseTensor {
        let mut g = rng::stream(seed, 8, 8);
        DenseTensor::from_fn(dims, |_| rng::normal(&mut g))
    }

    #[test]
    fn outer_rank1_examples() {
        let t = outer_rank1(1.0, &[&[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]]).unwrap();
        assert_eq!(t.get(&[0, 0, 0]), 1.0);
        assert_eq!(t.data().iter().sum::<f64>(), 1.0);
        let t = outer_rank1(2.0, &[&[0.0, 1.0], &[0.0, 1.0], &[0.0, 1.0]]).unwrap();
        assert_eq!(t.get(&[1, 1, 1]), 2.0);
        assert_eq!(t.data().iter().sum::<f64>(), 2.0);
        let m = outer_rank1(1.0, &[&[1.0, 1.0], &[1.0, -1.0]]).unwrap();
        assert_eq!(m.data(), &[1.0, -1.0, 1.0, -1.0]);
        assert!(outer_rank1(1.0, &[&[]]).is_err());
    }

    #[test]
    fn outer_matches_loop() {
        let a = [1.0, 2.0];
        let b = [3.0, -1.0, 0.5];
        let c = [2.0, 7.0];
        let t = outer_rank1(1.5, &[&a, &b, &c]).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                for l in 0..2 {
                    assert_eq!(t.get(&[i, j, l]), 1.5 * a[i] * b[j] * c[l]);
                }
            }
        }
    }

    #[test]
    fn get_set_offsets_roundtrip() {
        let mut t = DenseTensor::zeros(&[2, 3, 4]);
        for off in 0..t.len() {
            let idx = t.index_of(off);
            assert_eq!(t.offset(&idx), off);
            t.set(&idx, off as f64);
            assert_eq!(t.get(&idx), off as f64);
        }
    }

    #[test]
    fn unfold_worked_example() {
        let t = worked_tensor();
        let m0 = unfold(&t, 0).unwrap();
        assert_eq!(m0.shape(), (3, 8));
        assert_eq!(m0.col(0), vec![0.0, 8.0, 16.0]);
        let expect: Vec<f64> = (0..24).map(|x| x as f64).collect();
        assert_eq!(m0.data(), expect.as_slice());
        // naive oracle for mode 1: column index (i, l) with l fastest
        let m1 = unfold(&t, 1).unwrap();
        for j in 0..4 {
            for i in 0..3 {
                for l in 0..2 {
                    assert_eq!(m1.get(j, i * 2 + l), t.get(&[i, j, l]));
                }
            }
        }
    }

    #[test]
    fn unfold_matrix_is_identity() {
        let m = rand_matrix(1, 3, 5);
        assert_eq!(unfold(&m.to_tensor(), 0).unwrap(), m);
        assert!(unfold(&m.to_tensor(), 2).is_err());
    }

    #[test]
    fn fold_examples() {
        let t = worked_tensor();
        for mode in 0..3 {
            assert_eq!(fold(&unfold(&t, mode).unwrap(), mode, &[3, 4, 2]).unwrap(), t);
        }
        let row = Matrix::new(1, 4, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let r = fold(&row, 0, &[1, 4]).unwrap();
        assert_eq!(r.dims(), &[1, 4]);
        assert_eq!(r.data(), row.data());
        let m = Matrix::new(3, 8, (0..24).map(|x| x as f64).collect()).unwrap();
        assert_eq!(fold(&m, 0, &[3, 4, 2]).unwrap(), t);
        assert!(fold(&m, 0, &[3, 4, 3]).is_err());
    }

    #[test]
    fn multilinear_examples() {
        let t = rand_tensor(2, &[3, 3, 3]);
        let i3 = Matrix::identity(3);
        assert!(multilinear(&t, &i3, &i3, &i3).unwrap().max_abs_diff(&t) < 1e-14);

        let (a, b, c) = ([1.0, 2.0, -1.0], [0.5, 0.0, 1.0], [2.0, 1.0, 1.0]);
        let r1 = outer_rank1(1.0, &[&a, &b, &c]).unwrap();
        let (ma, mb, mc) = (rand_matrix(3, 3, 2), rand_matrix(4, 3, 2), rand_matrix(5, 3, 2));
        let got = multilinear(&r1, &ma, &mb, &mc).unwrap();
        let want = outer_rank1(
            1.0,
            &[&ma.t_matvec(&a).unwrap(), &mb.t_matvec(&b).unwrap(), &mc.t_matvec(&c).unwrap()],
        )
        .unwrap();
        assert!(got.max_abs_diff(&want) < 1e-12);

        let got = multilinear(&t, &ma, &mb, &mc).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                for z in 0..2 {
                    let mut s = 0.0;
                    for i in 0..3 {
                        for j in 0..3 {
                            for l in 0..3 {
                                s += t.get(&[i, j, l]) * ma.get(i, x) * mb.get(j, y) * mc.get(l, z);
                            }
                        }
                    }
                    assert!((got.get(&[x, y, z]) - s).abs() < 1e-12);
                }
            }
        }
        assert!(multilinear(&t, &rand_matrix(1, 4, 2), &mb, &mc).is_err());
    }

    #[test]
    fn apply_vectors_examples() {
        let mut t = DenseTensor::zeros(&[2, 2, 2]);
        t.set(&[0, 0, 0], 2.0);
        t.set(&[1, 1, 1], 1.0);
        let e1 = [1.0, 0.0];
        assert_eq!(contract_ivw(&t, &e1, &e1).unwrap(), vec![2.0, 0.0]);
        assert_eq!(apply_vectors(&t, [None, Some(&e1), Some(&e1)]).unwrap(), Applied::Vector(vec![2.0, 0.0]));

        let v = Matrix::identity(2);
        let lam = [2.0, 1.0];
        let x = [0.6, -0.8];
        let val = contract_uvw(&t, &x, &x, &x).unwrap();
        let want: f64 = (0..2).map(|j| lam[j] * dot(&v.col(j), &x).powi(3)).sum();
        assert!((val - want).abs() < 1e-15);

        let t = rand_tensor(5, &[4, 4, 4]);
        let mut g = rng::stream(5, 1, 1);
        let (u, v, w) = (rng::normal_vec(&mut g, 4), rng::normal_vec(&mut g, 4), rng::normal_vec(&mut g, 4));
        let ivw = contract_ivw(&t, &v, &w).unwrap();
        let uiw = contract_uiw(&t, &u, &w).unwrap();
        let uvi = contract_uvi(&t, &u, &v).unwrap();
        let iiw = contract_iiw(&t, &w).unwrap();
        for a in 0..4 {
            let (mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0);
            for b in 0..4 {
                let mut s4 = 0.0;
                for c in 0..4 {
                    s1 += t.get(&[a, b, c]) * v[b] * w[c];
                    s2 += t.get(&[b, a, c]) * u[b] * w[c];
                    s3 += t.get(&[b, c, a]) * u[b] * v[c];
                    s4 += t.get(&[a, b, c]) * w[c];
                }
                assert!((iiw.get(a, b) - s4).abs() < 1e-12);
            }
            assert!((ivw[a] - s1).abs() < 1e-12);
            assert!((uiw[a] - s2).abs() < 1e-12);
            assert!((uvi[a] - s3).abs() < 1e-12);
        }
        match apply_vectors(&t, [Some(&u), Some(&v), Some(&w)]).unwrap() {
            Applied::Scalar(s) => assert!((s - dot(&u, &ivw)).abs() < 1e-12),
            other => panic!("unexpected {:?}", other),
        }
        match apply_vectors(&t, [None, None, Some(&w)]).unwrap() {
            Applied::Matrix(m) => assert!(m.max_abs_diff(&iiw) < 1e-12),
            other => panic!("unexpected {:?}", other),
        }
        assert!(contract_ivw(&t, &[1.0], &w).is_err());
    }

    #[test]
    fn khatri_rao_examples() {
        let one = Matrix::new(1, 1, vec![2.0]).unwrap();
        assert_eq!(khatri_rao(&one, &one).unwrap().data(), &[4.0]);
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let kr = khatri_rao(&a, &b).unwrap();
        let want = Matrix::from_rows(&[vec![0.0, 2.0], vec![1.0, 0.0], vec![0.0, 4.0], vec![3.0, 0.0]]).unwrap();
        assert_eq!(kr, want);
        let ei = Matrix::new(3, 1, vec![0.0, 1.0, 0.0]).unwrap();
        let ej = Matrix::new(4, 1, vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let e = khatri_rao(&ei, &ej).unwrap();
        assert_eq!(e.get(3 + 4, 0), 1.0);
        assert_eq!(e.data().iter().sum::<f64>(), 1.0);
        assert!(khatri_rao(&a, &Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn hadamard_examples() {
        let a = rand_matrix(7, 5, 3);
        let ones = Matrix::from_fn(5, 3, |_, _| 1.0);
        assert_eq!(hadamard(&a, &ones).unwrap(), a);
        assert_eq!(hadamard(&a, &Matrix::zeros(5, 3)).unwrap(), Matrix::zeros(5, 3));
        let b = rand_matrix(8, 5, 3);
        let kr = khatri_rao(&a, &b).unwrap();
        let lhs = kr.t_matmul(&kr).unwrap();
        let rhs = hadamard(&a.t_matmul(&a).unwrap(), &b.t_matmul(&b).unwrap()).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-10 * rhs.frobenius());
    }

    #[test]
    fn frobenius_examples() {
        assert_eq!(frobenius_norm(&DenseTensor::zeros(&[2, 2])), 0.0);
        let t = DenseTensor::new(vec![1], vec![3.0]).unwrap();
        assert_eq!(frobenius_norm(&t), 3.0);
        assert!((frobenius_norm(&worked_tensor()) - 4324f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn spectral_estimate_examples() {
        let a = normalize(&[1.0, 2.0, 2.0]);
        let b = normalize(&[0.0, 1.0, -1.0]);
        let c = normalize(&[3.0, 0.0, 4.0]);
        let r1 = outer_rank1(-2.5, &[&a, &b, &c]).unwrap();
        assert!((spectral_norm_estimate(&r1, 3, 100, 1).unwrap() - 2.5).abs() < 1e-9);

        let q = rng::orthogonal(&mut rng::stream(3, 0, 0), 4);
        let lam = [1.0, 1.7, 1.3, 0.4];
        let t = symmetric_tensor(&lam, &q, 3).unwrap();
        let est = spectral_norm_estimate(&t, 50, 200, 2).unwrap();
        assert!((est - 1.7).abs() < 1e-6, "{}", est);
        assert!(est <= frobenius_norm(&t));

        let t = rand_tensor(4, &[3, 4, 5]);
        let mut prev = 0.0;
        for r in 1..6 {
            let e = spectral_norm_estimate(&t, r, 50, 9).unwrap();
            assert!(e >= prev && e <= frobenius_norm(&t) + 1e-12);
            prev = e;
        }
    }

    #[test]
    fn kruskal_examples() {
        let a = vec![0.6, 0.8];
        let one = KruskalForm::new(
            vec![1.0],
            vec![Matrix::from_cols(&[a.clone()]).unwrap(); 3],
        )
        .unwrap();
        assert_eq!(
            kruskal_to_tensor(&one).unwrap().max_abs_diff(&outer_rank1(1.0, &[&a, &a, &a]).unwrap()),
            0.0
        );
        let f = rand_matrix(11, 4, 3);
        let zero = KruskalForm::new(vec![0.0; 3], vec![f.clone(); 3]).unwrap();
        assert!(kruskal_to_tensor(&zero).unwrap().data().iter().all(|&x| x == 0.0));

        let k = KruskalForm::new(vec![1.0, -2.0, 0.5], vec![f.clone(), rand_matrix(12, 4, 3), rand_matrix(13, 4, 3)])
            .unwrap();
        let t = kruskal_to_tensor(&k).unwrap();
        let mut oracle = DenseTensor::zeros(&[4, 4, 4]);
        for j in 0..3 {
            let term = outer_rank1(
                k.weights[j],
                &[&k.factors[0].col(j), &k.factors[1].col(j), &k.factors[2].col(j)],
            )
            .unwrap();
            oracle = oracle.add(&term).unwrap();
        }
        assert!(t.max_abs_diff(&oracle) < 1e-12);
        // matricized form A diag(λ) (B ⊙ C)ᵀ
        let m = k.factors[0]
            .scale_cols(&k.weights)
            .matmul(&khatri_rao(&k.factors[1], &k.factors[2]).unwrap().transpose())
            .unwrap();
        assert!(fold(&m, 0, &[4, 4, 4]).unwrap().max_abs_diff(&t) < 1e-12);
        // order 4 path
        let k4 = KruskalForm::symmetric(vec![1.0, 2.0, 3.0], f, 4).unwrap();
        let t4 = kruskal_to_tensor(&k4).unwrap();
        assert_eq!(t4.dims(), &[4, 4, 4, 4]);
        assert!(t4.asymmetry() < 1e-14);
    }

    #[test]
    fn symmetrize_and_asymmetry() {
        let t = rand_tensor(21, &[3, 3, 3]);
        assert!(t.asymmetry() > 0.01);
        let s = t.symmetrized().unwrap();
        assert!(s.asymmetry() < 1e-15);
        let m = rand_matrix(1, 3, 3);
        assert!(m.symmetrized().asymmetry() == 0.0);
    }
}
