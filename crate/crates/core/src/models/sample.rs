//! Seeded samplers for every model family and the plain-text corpus format.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{ensure, Error, Result};
use crate::rng::{categorical, dirichlet, normal, stream, uniform, Stream};
use crate::stream::TripleSampleBatch;
use crate::tensor::Matrix;

use super::spec::{GmmSpec, HmmSpec, IcaSpec, LdaSpec, MultiviewSpec, NoisyOrSpec, Source, TopicSpec};

fn data_stream(seed: u64) -> Stream {
    stream(seed, 0, 0)
}

/// Documents as word-index lists, all of length `spec.words`.
pub fn sample_topic(spec: &TopicSpec, n: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    spec.validate()?;
    let mut rng = data_stream(seed);
    Ok((0..n)
        .map(|_| {
            let h = categorical(&mut rng, &spec.weights);
            (0..spec.words).map(|_| categorical(&mut rng, &spec.topics[h])).collect()
        })
        .collect())
}

/// Documents whose words come from the mixture `Σ_j h_j μ_j`, `h ~ Dir(α)`.
pub fn sample_lda(spec: &LdaSpec, n: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    spec.validate()?;
    let mut rng = data_stream(seed);
    let (d, k) = (spec.d(), spec.k());
    let mut p = vec![0.0; d];
    Ok((0..n)
        .map(|_| {
            let h = dirichlet(&mut rng, &spec.alpha);
            p.iter_mut().enumerate().for_each(|(i, x)| *x = (0..k).map(|j| h[j] * spec.topics[j][i]).sum());
            (0..spec.words).map(|_| categorical(&mut rng, &p)).collect()
        })
        .collect())
}

/// Rows `μ_h + σ_h z` together with the component labels.
pub fn sample_gmm(spec: &GmmSpec, n: usize, seed: u64) -> Result<(Matrix, Vec<usize>)> {
    spec.validate()?;
    let mut rng = data_stream(seed);
    let d = spec.d();
    let mut x = Matrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let h = categorical(&mut rng, &spec.weights);
        let s = spec.sigma_of(h);
        for (c, m) in spec.means[h].iter().enumerate() {
            let z = normal(&mut rng);
            x.set(i, c, m + s * z);
        }
        labels.push(h);
    }
    Ok((x, labels))
}

pub fn sample_multiview(spec: &MultiviewSpec, n: usize, seed: u64) -> Result<(TripleSampleBatch, Vec<usize>)> {
    spec.validate()?;
    let mut rng = data_stream(seed);
    let mut views: Vec<Matrix> = spec.views.iter().map(|v| Matrix::zeros(n, v[0].len())).collect();
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let h = categorical(&mut rng, &spec.weights);
        for (t, view) in views.iter_mut().enumerate() {
            for (c, m) in spec.views[t][h].iter().enumerate() {
                let z = normal(&mut rng);
                view.set(i, c, m + spec.noise * z);
            }
        }
        labels.push(h);
    }
    let [a, b, c]: [Matrix; 3] = views.try_into().expect("three views");
    Ok((TripleSampleBatch::new(a, b, c)?, labels))
}

/// Observation sequences and the hidden state paths that produced them.
pub fn sample_hmm(spec: &HmmSpec, n: usize, seed: u64) -> Result<(Vec<Vec<usize>>, Vec<Vec<usize>>)> {
    spec.validate()?;
    let mut rng = data_stream(seed);
    let mut obs = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    for _ in 0..n {
        let mut y = categorical(&mut rng, &spec.initial);
        let mut o = Vec::with_capacity(spec.length);
        let mut s = Vec::with_capacity(spec.length);
        for step in 0..spec.length {
            if step > 0 {
                y = categorical(&mut rng, &spec.transition[y]);
            }
            s.push(y);
            o.push(categorical(&mut rng, &spec.emission[y]));
        }
        obs.push(o);
        states.push(s);
    }
    Ok((obs, states))
}

fn source_draw(rng: &mut Stream, s: Source) -> f64 {
    match s {
        Source::Rademacher => {
            if uniform(rng) < 0.5 {
                -1.0
            } else {
                1.0
            }
        }
        Source::Uniform => 3f64.sqrt() * (2.0 * uniform(rng) - 1.0),
        Source::Laplace => {
            let u = uniform(rng) - 0.5;
            -u.signum() * (1.0 - 2.0 * u.abs()).ln() / 2f64.sqrt()
        }
        Source::Gaussian => normal(rng),
    }
}

pub fn sample_ica(spec: &IcaSpec, n: usize, seed: u64) -> Result<Matrix> {
    spec.validate()?;
    let mut rng = data_stream(seed);
    let (d, k) = (spec.d(), spec.k());
    let mut x = Matrix::zeros(n, d);
    let mut h = vec![0.0; k];
    for i in 0..n {
        h.iter_mut().zip(&spec.sources).for_each(|(hj, &s)| *hj = source_draw(&mut rng, s));
        for c in 0..d {
            let z = normal(&mut rng);
            let v: f64 = (0..k).map(|j| spec.mixing[j][c] * h[j]).sum();
            x.set(i, c, v + spec.noise * z);
        }
    }
    Ok(x)
}

/// Binary rows (0.0 / 1.0).
pub fn sample_noisy_or(spec: &NoisyOrSpec, n: usize, seed: u64) -> Result<Matrix> {
    spec.validate()?;
    let mut rng = data_stream(seed);
    let (d, k) = (spec.d(), spec.k());
    let mut x = Matrix::zeros(n, d);
    let mut h = vec![false; k];
    for i in 0..n {
        h.iter_mut().for_each(|hj| *hj = uniform(&mut rng) < spec.rho);
        for c in 0..d {
            let act: f64 = (0..k).filter(|&j| h[j]).map(|j| spec.weights[j][c]).sum();
            if uniform(&mut rng) >= (-act).exp() {
                x.set(i, c, 1.0);
            }
        }
    }
    Ok(x)
}

/// One-hot views of the tokens at `positions` in each sequence.
pub fn one_hot_views(seqs: &[Vec<usize>], d: usize, positions: [usize; 3]) -> Result<TripleSampleBatch> {
    ensure!(!seqs.is_empty(), Validation, "empty corpus");
    let n = seqs.len();
    let mut views = [Matrix::zeros(n, d), Matrix::zeros(n, d), Matrix::zeros(n, d)];
    for (i, s) in seqs.iter().enumerate() {
        for (t, &p) in positions.iter().enumerate() {
            ensure!(p < s.len(), Validation, "sequence {} has {} tokens, need position {}", i, s.len(), p);
            ensure!(s[p] < d, Validation, "token {} out of range for vocabulary {}", s[p], d);
            views[t].set(i, s[p], 1.0);
        }
    }
    let [a, b, c] = views;
    TripleSampleBatch::new(a, b, c)
}

pub fn write_corpus(path: &Path, docs: &[Vec<usize>]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for doc in docs {
        let line: Vec<String> = doc.iter().map(|x| x.to_string()).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

/// One document per line, whitespace-separated 0-based word indices.
pub fn read_corpus(path: &Path) -> Result<Vec<Vec<usize>>> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut docs = Vec::new();
    for (ln, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc = line
            .split_whitespace()
            .map(|tok| tok.parse::<usize>().map_err(|_| Error::Format(format!("line {}: bad word index {:?}", ln + 1, tok))))
            .collect::<Result<Vec<_>>>()?;
        docs.push(doc);
    }
    Ok(docs)
}

/// Vocabulary size implied by a corpus.
pub fn vocabulary_size(docs: &[Vec<usize>]) -> usize {
    docs.iter().flatten().max().map_or(0, |m| m + 1)
}
