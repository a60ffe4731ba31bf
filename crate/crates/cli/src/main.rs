use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tensorlab::als::{als, AlsConfig};
use tensorlab::dten;
use tensorlab::eval::{
    compress_image, image_als_config, learn, learn_gmm_multiview, match_components, nonorthogonal_instance,
    orthogonal_instance, perturbation_sweep, power_decomposer, spec_truth, sweep_csv, whiten_power_decomposer,
    loglog_slope, FactorsFile, Image, LearnConfig, LearnInput,
};
use tensorlab::models::{self, Family};
use tensorlab::overcomplete::{foobi, tensorize_decompose, unit_columns};
use tensorlab::simdiag::{simdiag, SimdiagConfig};
use tensorlab::stream::TripleSampleBatch;
use tensorlab::whiten::{decompose_nonorthogonal, ScaleModel};
use tensorlab::{decompose_orthogonal, Error, KruskalForm, Matrix, PowerConfig};

#[derive(Parser)]
#[command(name = "tensorlab", version, about = "CP tensor decompositions and moment-based latent variable learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Power,
    WhitenPower,
    Simdiag,
    Als,
    Foobi,
    Tensorize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InstanceKind {
    Orthogonal,
    Nonorthogonal,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose a DTEN tensor and write a factors JSON file.
    Decompose {
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        rank: usize,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Second-moment matrix M (DTEN), required by whiten-power.
        #[arg(long)]
        second_moment: Option<PathBuf>,
        /// Ridge regularization for ALS.
        #[arg(long, default_value_t = 0.0)]
        reg: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Power iterations per restart, or ALS sweeps.
        #[arg(long)]
        iters: Option<usize>,
        /// Random restarts per extracted component.
        #[arg(long)]
        restarts: Option<usize>,
        /// Factors JSON with the true components; adds matched errors to the report.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Sample a synthetic data set from a model spec.
    Generate {
        #[arg(long)]
        family: Family,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate model parameters from data by the method of moments.
    Learn {
        #[arg(long)]
        family: Family,
        #[arg(long)]
        rank: usize,
        /// Data file, or a directory written by `generate`.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Generating spec; adds matched errors to the report.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dirichlet concentration for LDA.
        #[arg(long)]
        alpha0: Option<f64>,
        /// Pseudo-count for noisy-or PMI estimates.
        #[arg(long, default_value_t = 0.5)]
        smoothing: f64,
        /// Vocabulary size for document data.
        #[arg(long)]
        vocabulary: Option<usize>,
        /// Spherical mixtures only: rotate and split coordinates into three views.
        #[arg(long)]
        split_views: bool,
    },
    /// Recovery error against injected noise, as CSV.
    Sweep {
        #[arg(long, value_enum, default_value = "orthogonal")]
        instance: InstanceKind,
        #[arg(long, value_enum, default_value = "power")]
        method: Method,
        #[arg(long, default_value_t = 10)]
        d: usize,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, value_delimiter = ',', default_value = "0,1e-5,1e-4,1e-3")]
        epsilons: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        /// CSV path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Low-rank CP compression of a binary PPM image.
    CompressImage {
        #[arg(long)]
        rank: usize,
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Ridge regularization; defaults to the image setting.
        #[arg(long)]
        reg: Option<f64>,
        #[arg(long)]
        iters: Option<usize>,
        /// Also write the factors JSON here.
        #[arg(long)]
        factors: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self { code: if e.is_validation() { 2 } else { 3 }, message: e.to_string() }
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Decompose { method, rank, input, out, second_moment, reg, seed, iters, restarts, truth } => {
            let t = dten::read(&input)?;
            let mut power = PowerConfig::for_rank(rank, seed);
            if let Some(n) = iters {
                power.iterations = n;
            }
            if let Some(r) = restarts {
                power.restarts = r;
            }
            let (form, mut report) = match method {
                Method::Power => decompose_orthogonal(&t, rank, &power)?,
                Method::WhitenPower => {
                    let path = second_moment.ok_or_else(|| {
                        invalid("whiten-power needs the second-moment matrix M for whitening; pass --second-moment M.dten")
                    })?;
                    let m = dten::read_matrix(&path)?;
                    let r = decompose_nonorthogonal(&t, &m, rank, &power, ScaleModel::UnitAssumed)?;
                    (r.form, r.report)
                }
                Method::Simdiag => simdiag(&t, rank, &SimdiagConfig { seed, ..SimdiagConfig::default() })?,
                Method::Als => {
                    let cfg = AlsConfig { l2_reg: reg, max_iters: iters.unwrap_or(200), ..AlsConfig::new(rank, seed) };
                    als(&t, &cfg)?
                }
                Method::Foobi => foobi(&t, rank, seed)?,
                Method::Tensorize => tensorize_decompose(&t, rank, &power)?,
            };
            if let Some(path) = truth {
                let tf = FactorsFile::read(&path)?.to_kruskal()?;
                let est = first_factor(&form);
                let m = match_components(&first_factor(&tf), &est)?;
                report.permutation = Some(m.permutation.clone());
                report.vector_errors = m.errors.clone();
                let w = m.permute(&form.with_positive_weights().weights);
                let tw = tf.with_positive_weights().weights;
                report.weight_errors = tw.iter().zip(&w).map(|(a, b)| (a - b).abs()).collect();
            }
            let file = FactorsFile::from_kruskal(&form, report);
            file.write(&out)?;
            println!("{}: rank {} written to {}", file.report.method, file.rank, out.display());
            if !file.report.vector_errors.is_empty() {
                let worst = file.report.vector_errors.iter().copied().fold(0.0, f64::max);
                println!("max matched error {:e}", worst);
            }
            Ok(())
        }
        Command::Generate { family, spec, n, seed, out } => generate(family, &spec, n, seed, &out),
        Command::Learn { family, rank, input, out, truth, seed, alpha0, smoothing, vocabulary, split_views } => {
            let cfg = LearnConfig { rank, seed, alpha0, smoothing, vocabulary };
            let data = load_input(family, &input)?;
            let mut model = if split_views {
                match (family, &data) {
                    (Family::Gmm, LearnInput::Samples(x)) => learn_gmm_multiview(x, &cfg)?,
                    _ => return Err(invalid("--split-views applies to gmm sample data only")),
                }
            } else {
                learn(family, &data, &cfg)?
            };
            if let Some(path) = truth {
                let spec = read_json(&path)?;
                let (comps, weights) = spec_truth(family, &spec)?;
                ensure_shape(&comps, &model.component_matrix())?;
                let tw = weights.iter().all(|w| w.is_finite()).then_some(weights.as_slice());
                model.score(&comps, tw)?;
            }
            let mut s = serde_json::to_string_pretty(&model).map_err(|e| invalid(e.to_string()))?;
            s.push('\n');
            fs::write(&out, s).map_err(Error::from)?;
            println!("{} model of rank {} written to {}", family, rank, out.display());
            if !model.report.vector_errors.is_empty() {
                let worst = model.report.vector_errors.iter().copied().fold(0.0, f64::max);
                println!("max matched error {:e}", worst);
            }
            Ok(())
        }
        Command::Sweep { instance, method, d, k, epsilons, seeds, out } => {
            if epsilons.is_empty() || seeds.is_empty() {
                return Err(invalid("sweep needs at least one epsilon and one seed"));
            }
            if k == 0 || k > d {
                return Err(invalid(format!("rank {} out of range for dimension {}", k, d)));
            }
            let build = move |s| match instance {
                InstanceKind::Orthogonal => orthogonal_instance(d, k, s),
                InstanceKind::Nonorthogonal => nonorthogonal_instance(d, k, s),
            };
            let rows = match method {
                Method::Power => perturbation_sweep(build, power_decomposer(k), &epsilons, &seeds)?,
                Method::WhitenPower => {
                    if instance == InstanceKind::Orthogonal {
                        return Err(invalid("whiten-power sweeps need the nonorthogonal instance, which carries M"));
                    }
                    perturbation_sweep(build, whiten_power_decomposer(k), &epsilons, &seeds)?
                }
                _ => return Err(invalid("sweeps support the power and whiten-power methods")),
            };
            let csv = sweep_csv(&rows);
            match out {
                Some(p) => fs::write(&p, csv).map_err(Error::from)?,
                None => print!("{}", csv),
            }
            if let Some(s) = loglog_slope(&rows) {
                eprintln!("log-log slope {:.3}", s);
            }
            Ok(())
        }
        Command::CompressImage { rank, input, output, seed, reg, iters, factors } => {
            if rank == 0 {
                return Err(invalid("rank must be positive"));
            }
            let img = Image::read(&input)?;
            let mut cfg = image_als_config(rank, seed);
            if let Some(r) = reg {
                cfg.l2_reg = r;
            }
            if let Some(n) = iters {
                cfg.max_iters = n;
            }
            let c = compress_image(&img, &cfg)?;
            c.output.write(&output)?;
            if let Some(p) = factors {
                FactorsFile::from_kruskal(&c.form, c.report.clone()).write(&p)?;
            }
            println!("{}", serde_json::to_string(&c.stats).map_err(|e| invalid(e.to_string()))?);
            Ok(())
        }
    }
}

fn first_factor(form: &KruskalForm) -> Matrix {
    unit_columns(&form.factors[0])
}

fn ensure_shape(truth: &Matrix, est: &Matrix) -> CliResult<()> {
    if truth.shape() != est.shape() {
        return Err(invalid(format!("truth has shape {:?} but the model has {:?}", truth.shape(), est.shape())));
    }
    Ok(())
}

fn read_json(path: &Path) -> CliResult<serde_json::Value> {
    let s = fs::read_to_string(path).map_err(Error::from)?;
    serde_json::from_str(&s).map_err(|e| invalid(format!("{}: {}", path.display(), e)))
}

fn parse_spec<T: serde::de::DeserializeOwned>(v: serde_json::Value, family: Family) -> CliResult<T> {
    serde_json::from_value(v).map_err(|e| invalid(format!("{} spec: {}", family, e)))
}

const DOCS: &str = "docs.txt";
const SAMPLES: &str = "samples.dten";
const VIEWS: [&str; 3] = ["view1.dten", "view2.dten", "view3.dten"];

fn generate(family: Family, spec_path: &Path, n: usize, seed: u64, out: &Path) -> CliResult<()> {
    if n == 0 {
        return Err(invalid("--n must be positive"));
    }
    let v = read_json(spec_path)?;
    fs::create_dir_all(out).map_err(Error::from)?;
    let write_samples = |x: &Matrix| dten::write(out.join(SAMPLES), &x.to_tensor());
    match family {
        Family::Topic => {
            let s: models::TopicSpec = parse_spec(v.clone(), family)?;
            models::write_corpus(&out.join(DOCS), &models::sample_topic(&s, n, seed)?)?;
        }
        Family::Lda => {
            let s: models::LdaSpec = parse_spec(v.clone(), family)?;
            models::write_corpus(&out.join(DOCS), &models::sample_lda(&s, n, seed)?)?;
        }
        Family::Hmm => {
            let s: models::HmmSpec = parse_spec(v.clone(), family)?;
            models::write_corpus(&out.join(DOCS), &models::sample_hmm(&s, n, seed)?.0)?;
        }
        Family::Gmm | Family::GmmDiff => {
            let s: models::GmmSpec = parse_spec(v.clone(), family)?;
            write_samples(&models::sample_gmm(&s, n, seed)?.0)?;
        }
        Family::Ica => {
            let s: models::IcaSpec = parse_spec(v.clone(), family)?;
            write_samples(&models::sample_ica(&s, n, seed)?)?;
        }
        Family::NoisyOr => {
            let s: models::NoisyOrSpec = parse_spec(v.clone(), family)?;
            write_samples(&models::sample_noisy_or(&s, n, seed)?)?;
        }
        Family::Multiview => {
            let s: models::MultiviewSpec = parse_spec(v.clone(), family)?;
            let (batch, _) = models::sample_multiview(&s, n, seed)?;
            for (m, name) in VIEWS.iter().enumerate() {
                dten::write(out.join(name), &batch.view(m).to_tensor())?;
            }
        }
    }
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| invalid(e.to_string()))?;
    s.push('\n');
    fs::write(out.join("spec.json"), s).map_err(Error::from)?;
    println!("{} samples of {} written to {}", n, family, out.display());
    Ok(())
}

fn load_input(family: Family, input: &Path) -> CliResult<LearnInput> {
    let file = |name: &str| if input.is_dir() { input.join(name) } else { input.to_path_buf() };
    Ok(match family {
        Family::Topic | Family::Lda | Family::Hmm => LearnInput::Docs(models::read_corpus(&file(DOCS))?),
        Family::Gmm | Family::GmmDiff | Family::Ica | Family::NoisyOr => {
            LearnInput::Samples(dten::read_matrix(file(SAMPLES))?)
        }
        Family::Multiview => {
            if !input.is_dir() {
                return Err(invalid("multiview input must be a directory holding view1.dten, view2.dten and view3.dten"));
            }
            let [a, b, c] = VIEWS.map(|v| input.join(v));
            LearnInput::Views(TripleSampleBatch::read([&a, &b, &c])?)
        }
    })
}
