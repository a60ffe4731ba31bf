//! Perturbation sweeps: recovery error as a function of injected noise.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::sym_eigen;
use crate::power::{decompose_orthogonal, PowerConfig};
use crate::rng::{normal, orthogonal, stream, uniform};
use crate::tensor::{spectral_norm_estimate, symmetric_tensor, DenseTensor, Matrix};
use crate::whiten::{decompose_nonorthogonal, ScaleModel};

use super::matching::match_components;

/// Exact moments with the components and weights they were built from.
#[derive(Debug, Clone)]
pub struct Instance {
    pub m: Option<Matrix>,
    pub t: DenseTensor,
    pub components: Matrix,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Estimate {
    pub components: Matrix,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub seed: u64,
    pub vector_error: Option<f64>,
    pub weight_error: Option<f64>,
    pub status: String,
}

/// `Σ λ_j v_j^{⊗3}` with orthonormal `v_j` and `λ_j ∈ [1, 2]`.
pub fn orthogonal_instance(d: usize, k: usize, seed: u64) -> Result<Instance> {
    let mut g = stream(seed, 6, 0);
    let v = orthogonal(&mut g, d).take_cols(k);
    let w: Vec<f64> = (0..k).map(|_| 1.0 + uniform(&mut g)).collect();
    Ok(Instance { m: None, t: symmetric_tensor(&w, &v, 3)?, components: v, weights: w })
}

/// `M = Σ λ̃_j a_j a_jᵀ`, `T = Σ λ_j a_j^{⊗3}` for Gaussian `a_j` and weights
/// in `[1, 2]`. The truth is stored as the scale-free pairs
/// `(√λ̃_j a_j, λ_j λ̃_j^{−3/2})`.
pub fn nonorthogonal_instance(d: usize, k: usize, seed: u64) -> Result<Instance> {
    let mut g = stream(seed, 6, 1);
    let a = Matrix::from_fn(d, k, |_, _| normal(&mut g));
    let lt: Vec<f64> = (0..k).map(|_| 1.0 + uniform(&mut g)).collect();
    let l: Vec<f64> = (0..k).map(|_| 1.0 + uniform(&mut g)).collect();
    let m = a.scale_cols(&lt).matmul(&a.transpose())?;
    let t = symmetric_tensor(&l, &a, 3)?;
    let components = a.scale_cols(&lt.iter().map(|x| x.sqrt()).collect::<Vec<_>>());
    let weights = l.iter().zip(&lt).map(|(l, lt)| l * lt.powf(-1.5)).collect();
    Ok(Instance { m: Some(m), t, components, weights })
}

/// Robust power method on `T` alone.
pub fn power_decomposer(k: usize) -> impl Fn(Option<&Matrix>, &DenseTensor, u64) -> Result<Estimate> {
    move |_, t, seed| {
        let (form, _) = decompose_orthogonal(t, k, &PowerConfig::for_rank(k, seed))?;
        Ok(Estimate { components: form.factors[0].clone(), weights: form.weights })
    }
}

/// Whitening with `M` followed by the power method.
pub fn whiten_power_decomposer(k: usize) -> impl Fn(Option<&Matrix>, &DenseTensor, u64) -> Result<Estimate> {
    move |m, t, seed| {
        let m = m.ok_or_else(|| crate::Error::Validation("whitened decomposition needs a second-moment matrix".into()))?;
        let r = decompose_nonorthogonal(t, m, k, &PowerConfig::for_rank(k, seed), ScaleModel::UnitAssumed)?;
        Ok(Estimate { components: r.components, weights: r.weights })
    }
}

/// Symmetric Gaussian tensor scaled to spectral-norm estimate 1.
fn unit_tensor_noise(d: usize, seed: u64) -> Result<DenseTensor> {
    let mut g = stream(seed, 5, 0);
    let raw = DenseTensor::from_fn(&[d, d, d], |_| normal(&mut g)).symmetrized()?;
    let s = spectral_norm_estimate(&raw, 20, 100, seed)?;
    Ok(raw.scale(1.0 / s))
}

/// Symmetric Gaussian matrix scaled to spectral norm 1.
fn unit_matrix_noise(d: usize, seed: u64) -> Result<Matrix> {
    let mut g = stream(seed, 5, 1);
    let raw = Matrix::from_fn(d, d, |_, _| normal(&mut g)).symmetrized();
    let (vals, _) = sym_eigen(&raw)?;
    let s = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok(raw.scale(1.0 / s))
}

/// Decomposes `T + εE` (and `M + εF` when present) for every `(ε, seed)`.
/// The noise direction depends only on the seed, so rows for one seed differ
/// only in scale. Failures are recorded per row.
pub fn perturbation_sweep(
    build: impl Fn(u64) -> Result<Instance>,
    decompose: impl Fn(Option<&Matrix>, &DenseTensor, u64) -> Result<Estimate>,
    epsilons: &[f64],
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(epsilons.len() * seeds.len());
    let mut eps: Vec<f64> = epsilons.to_vec();
    eps.sort_by(f64::total_cmp);
    let instances: Vec<(Instance, DenseTensor, Option<Matrix>)> = seeds
        .iter()
        .map(|&s| {
            let inst = build(s)?;
            let d = inst.t.dims()[0];
            let e = unit_tensor_noise(d, s)?;
            let f = inst.m.as_ref().map(|_| unit_matrix_noise(d, s)).transpose()?;
            Ok((inst, e, f))
        })
        .collect::<Result<_>>()?;
    for &epsilon in &eps {
        for (&seed, (inst, e, f)) in seeds.iter().zip(&instances) {
            let t = inst.t.add(&e.scale(epsilon))?;
            let m = match (&inst.m, f) {
                (Some(m), Some(f)) => Some(m.add(&f.scale(epsilon))?),
                _ => None,
            };
            let row = match decompose(m.as_ref(), &t, seed).and_then(|est| {
                let mr = match_components(&inst.components, &est.components)?;
                let w = mr.permute(&est.weights);
                let werr = inst.weights.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                Ok((mr.max_error(), werr))
            }) {
                Ok((v, w)) => SweepRow { epsilon, seed, vector_error: Some(v), weight_error: Some(w), status: "ok".into() },
                Err(e) => SweepRow { epsilon, seed, vector_error: None, weight_error: None, status: e.to_string() },
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

/// CSV with a header row; failed cells leave the error columns empty.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("epsilon,seed,vector_error,weight_error,status\n");
    let opt = |v: Option<f64>| v.map(|x| format!("{:e}", x)).unwrap_or_default();
    for r in rows {
        let status = r.status.replace(['"', ','], ";");
        writeln!(s, "{:e},{},{},{},{}", r.epsilon, r.seed, opt(r.vector_error), opt(r.weight_error), status).unwrap();
    }
    s
}

/// Mean vector error per ε over successful rows, in increasing ε.
pub fn mean_errors(rows: &[SweepRow]) -> Vec<(f64, f64)> {
    let mut eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    eps.into_iter()
        .filter_map(|e| {
            let errs: Vec<f64> = rows.iter().filter(|r| r.epsilon == e).filter_map(|r| r.vector_error).collect();
            (!errs.is_empty()).then(|| (e, errs.iter().sum::<f64>() / errs.len() as f64))
        })
        .collect()
}

/// Least-squares slope of `log(error)` against `log(ε)` over `ε > 0`.
pub fn loglog_slope(rows: &[SweepRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = mean_errors(rows)
        .into_iter()
        .filter(|&(e, v)| e > 0.0 && v > 0.0)
        .map(|(e, v)| (e.ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_sweep_is_linear() {
        let eps = [0.0, 1e-4, 1e-3, 1e-2];
        let rows = perturbation_sweep(|s| orthogonal_instance(10, 10, s), power_decomposer(10), &eps, &[1, 2]).unwrap();
        assert_eq!(rows.len(), 8);
        assert!(rows.iter().all(|r| r.status == "ok"), "{:?}", rows);
        for r in rows.iter().filter(|r| r.epsilon == 0.0) {
            assert!(r.vector_error.unwrap() <= 1e-8);
        }
        let means = mean_errors(&rows);
        assert!(means.windows(2).all(|w| w[0].1 <= w[1].1), "{:?}", means);
        let slope = loglog_slope(&rows).unwrap();
        assert!((slope - 1.0).abs() <= 0.3, "slope {}", slope);
        let csv = sweep_csv(&rows);
        assert!(csv.starts_with("epsilon,seed,vector_error,weight_error,status\n"));
        assert_eq!(csv.lines().count(), 9);
    }

    #[test]
    fn failures_are_recorded() {
        let rows = perturbation_sweep(
            |s| orthogonal_instance(3, 2, s),
            |_, _, _| Err(crate::Error::NonConvergence("stub".into())),
            &[0.1],
            &[0],
        )
        .unwrap();
        assert_eq!(rows[0].vector_error, None);
        assert!(rows[0].status.contains("stub"));
    }

    #[test]
    fn missing_second_moment() {
        let inst = orthogonal_instance(3, 2, 0).unwrap();
        assert!(whiten_power_decomposer(2)(None, &inst.t, 0).unwrap_err().is_validation());
    }
}
