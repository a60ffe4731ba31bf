//! End-to-end learning: samples → moments → whitened power method →
//! model parameters, optionally scored against the generating spec.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::models::{
    self, gmm_common_moments, gmm_differing_moments, gmm_multiview_split, hmm_postprocess, hmm_reduce, ica_cumulant,
    lda_alpha_from_components, lda_moments, multiview_symmetrized_moments, noisy_or_pmi, topic_empirical_moments,
    view_means, Family, MomentSet,
};
use crate::power::PowerConfig;
use crate::report::DecompositionReport;
use crate::rng::{stream, unit_sphere};
use crate::stream::TripleSampleBatch;
use crate::tensor::Matrix;
use crate::whiten::{decompose_nonorthogonal, ScaleModel};

use super::matching::{match_components, MatchResult};

pub enum LearnInput {
    /// Word-index documents or observation sequences.
    Docs(Vec<Vec<usize>>),
    /// One sample per row.
    Samples(Matrix),
    Views(TripleSampleBatch),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub rank: usize,
    pub seed: u64,
    /// Dirichlet concentration, required for LDA.
    pub alpha0: Option<f64>,
    /// Pseudo-count for noisy-or PMI estimates.
    pub smoothing: f64,
    /// Vocabulary size; inferred from the corpus when absent.
    pub vocabulary: Option<usize>,
}

impl LearnConfig {
    pub fn new(rank: usize, seed: u64) -> Self {
        Self { rank, seed, alpha0: None, smoothing: 0.5, vocabulary: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedModel {
    pub family: Family,
    pub rank: usize,
    pub weights: Vec<f64>,
    /// Component columns: topics, means, emission columns or directions.
    pub components: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<Vec<Vec<f64>>>,
    pub report: DecompositionReport,
}

impl LearnedModel {
    pub fn component_matrix(&self) -> Matrix {
        Matrix::from_cols(&self.components).expect("equal column lengths")
    }

    /// Aligns components with the truth and records per-component errors.
    pub fn score(&mut self, truth: &Matrix, truth_weights: Option<&[f64]>) -> Result<MatchResult> {
        let m = match_components(truth, &self.component_matrix())?;
        self.report.permutation = Some(m.permutation.clone());
        self.report.vector_errors = m.errors.clone();
        if let Some(tw) = truth_weights {
            let w = m.permute(&self.weights);
            self.report.weight_errors = tw.iter().zip(&w).map(|(a, b)| (a - b).abs()).collect();
        }
        Ok(m)
    }
}

fn unit_cols(m: &Matrix) -> Matrix {
    m.scale_cols(&m.column_norms().iter().map(|&n| if n > 0.0 { 1.0 / n } else { 0.0 }).collect::<Vec<_>>())
}

/// Whitened decomposition of a symmetric `(M₂, M₃)` pair.
fn decompose_pair(ms: &MomentSet, k: usize, seed: u64, scale: ScaleModel) -> Result<(Matrix, Vec<f64>, DecompositionReport)> {
    let (m2, m3) = ms.symmetric_pair()?;
    let r = decompose_nonorthogonal(&m3, &m2, k, &PowerConfig::for_rank(k, seed), scale)?;
    Ok((r.components, r.weights, r.report))
}

/// Components and weights from moments whose targets are `Σ w_j μ_j^{⊗2,3}`.
pub fn learn_from_moments(ms: &MomentSet, cfg: &LearnConfig) -> Result<(Matrix, Vec<f64>, DecompositionReport)> {
    let k = cfg.rank;
    ensure!(k >= 1 && k <= ms.d, Validation, "rank {} out of range for dimension {}", k, ms.d);
    match ms.family {
        Family::Topic | Family::Gmm | Family::GmmDiff | Family::Multiview | Family::Hmm => {
            decompose_pair(ms, k, cfg.seed, ScaleModel::EqualWeights)
        }
        Family::Lda => {
            let a0 = ms.alpha0.ok_or_else(|| Error::Validation("LDA moments carry no alpha0".into()))?;
            let (c, _, rep) = decompose_pair(ms, k, cfg.seed, ScaleModel::UnitAssumed)?;
            let alpha = lda_alpha_from_components(&c, a0);
            let sums: Vec<f64> = (0..k).map(|j| c.col(j).iter().sum::<f64>()).collect();
            let topics = c.scale_cols(&sums.iter().map(|s| 1.0 / s).collect::<Vec<_>>());
            Ok((topics, alpha, rep))
        }
        Family::NoisyOr => {
            let (c, w, rep) = decompose_pair(ms, k, cfg.seed, ScaleModel::UnitAssumed)?;
            Ok((unit_cols(&c), w, rep))
        }
        Family::Ica => {
            let m4 = ms.m4.as_ref().ok_or_else(|| Error::Validation("ICA moments carry no fourth cumulant".into()))?;
            let v = unit_sphere(&mut stream(cfg.seed, 7, 1), ms.d);
            let t = models::cumulant_tensor(m4, &v)?.symmetrized()?;
            let r = decompose_nonorthogonal(&t, &ms.m2, k, &PowerConfig::for_rank(k, cfg.seed), ScaleModel::UnitAssumed)?;
            Ok((unit_cols(&r.components), r.weights, r.report))
        }
    }
}

fn model(family: Family, rank: usize, comps: &Matrix, weights: Vec<f64>, mut report: DecompositionReport) -> LearnedModel {
    report.notes.push(format!("{} moments", family));
    LearnedModel { family, rank, weights, components: comps.columns(), initial: None, transition: None, report }
}

fn wrong_input(family: Family, want: &str) -> Error {
    Error::Validation(format!("{} learning needs {} input", family, want))
}

pub fn learn(family: Family, input: &LearnInput, cfg: &LearnConfig) -> Result<LearnedModel> {
    let k = cfg.rank;
    ensure!(k >= 1, Validation, "rank must be positive");
    match (family, input) {
        (Family::Topic | Family::Lda | Family::Hmm, LearnInput::Docs(docs)) => {
            let d = cfg.vocabulary.unwrap_or_else(|| models::vocabulary_size(docs));
            if family == Family::Hmm {
                let red = hmm_reduce(docs, d, k)?;
                let (mu3, w, report) = learn_from_moments(&red.multiview.moments, cfg)?;
                let est = hmm_postprocess(&red.raw, &mu3, &w)?;
                let mut m = model(family, k, &est.emission, est.hidden_weights, report);
                m.initial = Some(est.initial);
                m.transition = Some(est.transition.columns());
                return Ok(m);
            }
            let ms = if family == Family::Topic {
                topic_empirical_moments(docs, d)?
            } else {
                let a0 = cfg.alpha0.ok_or_else(|| Error::Validation("LDA learning needs alpha0".into()))?;
                lda_moments(docs, d, a0)?
            };
            let (c, w, report) = learn_from_moments(&ms, cfg)?;
            Ok(model(family, k, &c, w, report))
        }
        (Family::Gmm | Family::GmmDiff | Family::Ica | Family::NoisyOr, LearnInput::Samples(x)) => {
            let ms = match family {
                Family::Gmm => gmm_common_moments(x)?,
                Family::GmmDiff => gmm_differing_moments(x)?,
                Family::Ica => ica_cumulant(x)?,
                _ => noisy_or_pmi(x, cfg.smoothing)?.into_moment_set(),
            };
            let (c, w, report) = learn_from_moments(&ms, cfg)?;
            Ok(model(family, k, &c, w, report))
        }
        (Family::Multiview, LearnInput::Views(batch)) => {
            let mv = multiview_symmetrized_moments(batch, k)?;
            let (c, w, report) = learn_from_moments(&mv.moments, cfg)?;
            Ok(model(family, k, &c, w, report))
        }
        (Family::Topic | Family::Lda | Family::Hmm, _) => Err(wrong_input(family, "document")),
        (Family::Multiview, _) => Err(wrong_input(family, "three-view")),
        _ => Err(wrong_input(family, "sample matrix")),
    }
}

/// Spherical mixture means through a random rotation and a three-way
/// coordinate split; needs `d ≥ 3k`.
pub fn learn_gmm_multiview(samples: &Matrix, cfg: &LearnConfig) -> Result<LearnedModel> {
    let k = cfg.rank;
    let split = gmm_multiview_split(samples, cfg.seed)?;
    ensure!(split.sizes.iter().all(|&s| s >= k), Validation, "view sizes {:?} are below rank {}", split.sizes, k);
    let mv = multiview_symmetrized_moments(&split.batch, k)?;
    let (mu3, w, report) = learn_from_moments(&mv.moments, cfg)?;
    let raw = models::MultiviewRaw::from_batch(&split.batch)?;
    let mu1 = view_means(&raw.e13, &mu3, &w)?;
    let mu2 = view_means(&raw.e23, &mu3, &w)?;
    let means = split.unsplit([&mu1, &mu2, &mu3])?;
    Ok(model(Family::Gmm, k, &means, w, report))
}

/// True components and weights of a generating spec, in the same convention
/// as [`learn`] output.
pub fn spec_truth(family: Family, spec: &serde_json::Value) -> Result<(Matrix, Vec<f64>)> {
    let parse = |e: serde_json::Error| Error::Validation(format!("{} spec: {}", family, e));
    let v = spec.clone();
    Ok(match family {
        Family::Topic => {
            let s: models::TopicSpec = serde_json::from_value(v).map_err(parse)?;
            s.validate()?;
            (s.topic_matrix(), s.weights)
        }
        Family::Gmm | Family::GmmDiff => {
            let s: models::GmmSpec = serde_json::from_value(v).map_err(parse)?;
            s.validate()?;
            (s.mean_matrix(), s.weights)
        }
        Family::Lda => {
            let s: models::LdaSpec = serde_json::from_value(v).map_err(parse)?;
            s.validate()?;
            (s.topic_matrix(), s.alpha)
        }
        Family::Multiview => {
            let s: models::MultiviewSpec = serde_json::from_value(v).map_err(parse)?;
            s.validate()?;
            (s.view_means(2), s.weights)
        }
        Family::Hmm => {
            let s: models::HmmSpec = serde_json::from_value(v).map_err(parse)?;
            s.validate()?;
            (s.emission_matrix(), s.hidden_weights())
        }
        Family::Ica => {
            let s: models::IcaSpec = serde_json::from_value(v).map_err(parse)?;
            s.validate()?;
            let k = s.k();
            (unit_cols(&s.mixing_matrix()), vec![f64::NAN; k])
        }
        Family::NoisyOr => {
            let s: models::NoisyOrSpec = serde_json::from_value(v).map_err(parse)?;
            s.validate()?;
            let w = s.weight_matrix();
            let f = Matrix::from_fn(w.rows(), w.cols(), |i, j| 1.0 - (-w.get(i, j)).exp());
            (unit_cols(&f), vec![f64::NAN; s.k()])
        }
    })
}
