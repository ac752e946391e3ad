//! Command-line surface: config parsing and the `gen-data`, `train`,
//! `eval`, and `retrieve` subcommands.
//!
//! Every command is deterministic for a fixed (config, seed) pair: reruns
//! produce byte-identical files and output. Runtime failures print one
//! `error: ...` line on stderr and exit 1; usage errors exit 2.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use crate::data::{self, Dataset, LabelMatrix};
use crate::error::{Error, Result};
use crate::model::{self, Hyperparams, Modality, TrainedModel};
use crate::retrieval::{self, EvalReport, RankedList};

/// Where a run's samples come from: feature/label files on disk, or the
/// built-in synthetic generator.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Files {
        features1: PathBuf,
        features2: PathBuf,
        labels: PathBuf,
    },
    Synthetic {
        n_per_class: usize,
        classes: usize,
        d1: usize,
        d2: usize,
        noise_sigma: f64,
    },
}

/// Parsed run configuration: one data source, hyperparameters, and the
/// bookkeeping fields shared by all commands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: DataSource,
    pub hyper: Hyperparams,
    /// When set, the dataset is split and only the train part is fitted;
    /// the held-out part is written next to the model.
    pub train_fraction: Option<f64>,
    pub seed: u64,
    pub output_dir: PathBuf,
}

const FILE_KEYS: [&str; 3] = ["features1_path", "features2_path", "labels_path"];
const SYNTH_KEYS: [&str; 5] = ["n_per_class", "c", "d1", "d2", "noise_sigma"];

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parses `key = value` lines; `#` starts a comment, blank lines are
    /// skipped. Exactly one data block (file paths or synthetic shape) must
    /// be present, and every key must be known.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = std::collections::BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {} is not `key = value`: {raw:?}",
                    idx + 1
                )));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if value.is_empty() {
                return Err(Error::Config(format!("key `{key}` has no value")));
            }
            if pairs.insert(key.clone(), value).is_some() {
                return Err(Error::Config(format!("duplicate key `{key}`")));
            }
        }

        let known: Vec<&str> = FILE_KEYS
            .iter()
            .chain(&SYNTH_KEYS)
            .copied()
            .chain([
                "train_fraction",
                "seed",
                "output_dir",
                "alpha1",
                "alpha2",
                "lambda1",
                "lambda2",
                "theta",
                "beta",
                "k",
                "max_outer_iter",
                "inner_cg_iter",
                "outer_tol",
                "row_norm_floor",
            ])
            .collect();
        for key in pairs.keys() {
            if !known.contains(&key.as_str()) {
                return Err(Error::Config(format!("unknown key `{key}`")));
            }
        }

        let get_f64 = |key: &str| -> Result<Option<f64>> {
            pairs
                .get(key)
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::Config(format!("key `{key}` is not a number: {v:?}")))
                })
                .transpose()
        };
        let get_usize = |key: &str| -> Result<Option<usize>> {
            pairs
                .get(key)
                .map(|v| {
                    v.parse::<usize>().map_err(|_| {
                        Error::Config(format!("key `{key}` is not a non-negative integer: {v:?}"))
                    })
                })
                .transpose()
        };

        let defaults = Hyperparams::default();
        let hyper = Hyperparams {
            alpha1: get_f64("alpha1")?.unwrap_or(defaults.alpha1),
            alpha2: get_f64("alpha2")?.unwrap_or(defaults.alpha2),
            lambda1: get_f64("lambda1")?.unwrap_or(defaults.lambda1),
            lambda2: get_f64("lambda2")?.unwrap_or(defaults.lambda2),
            theta: get_f64("theta")?.unwrap_or(defaults.theta),
            beta: get_f64("beta")?.unwrap_or(defaults.beta),
            k: get_usize("k")?.unwrap_or(defaults.k),
            max_outer_iter: get_usize("max_outer_iter")?.unwrap_or(defaults.max_outer_iter),
            inner_cg_iter: get_usize("inner_cg_iter")?.unwrap_or(defaults.inner_cg_iter),
            outer_tol: get_f64("outer_tol")?.unwrap_or(defaults.outer_tol),
            row_norm_floor: get_f64("row_norm_floor")?.unwrap_or(defaults.row_norm_floor),
        };

        let train_fraction = get_f64("train_fraction")?;
        if let Some(f) = train_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!(
                    "train_fraction must lie strictly between 0 and 1, got {f}"
                )));
            }
        }

        let seed = pairs
            .get("seed")
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| Error::Config(format!("key `seed` is not an integer: {v:?}")))
            })
            .transpose()?
            .unwrap_or(0);

        let file_count = FILE_KEYS.iter().filter(|k| pairs.contains_key(**k)).count();
        let synth_count = SYNTH_KEYS.iter().filter(|k| pairs.contains_key(**k)).count();
        let data = match (file_count, synth_count) {
            (0, 0) => {
                return Err(Error::Config(
                    "no data block: set features1_path/features2_path/labels_path \
                     or n_per_class/c/d1/d2/noise_sigma"
                        .into(),
                ))
            }
            (_, 0) if file_count < FILE_KEYS.len() => {
                return Err(Error::Config(
                    "incomplete file block: features1_path, features2_path, and \
                     labels_path are all required"
                        .into(),
                ))
            }
            (0, _) if synth_count < SYNTH_KEYS.len() => {
                return Err(Error::Config(
                    "incomplete synthetic block: n_per_class, c, d1, d2, and \
                     noise_sigma are all required"
                        .into(),
                ))
            }
            (_, 0) => DataSource::Files {
                features1: PathBuf::from(&pairs["features1_path"]),
                features2: PathBuf::from(&pairs["features2_path"]),
                labels: PathBuf::from(&pairs["labels_path"]),
            },
            (0, _) => DataSource::Synthetic {
                n_per_class: get_usize("n_per_class")?.unwrap(),
                classes: get_usize("c")?.unwrap(),
                d1: get_usize("d1")?.unwrap(),
                d2: get_usize("d2")?.unwrap(),
                noise_sigma: get_f64("noise_sigma")?.unwrap(),
            },
            _ => {
                return Err(Error::Config(
                    "both data blocks present: use either file paths or the \
                     synthetic shape, not both"
                        .into(),
                ))
            }
        };

        Ok(Self {
            data,
            hyper,
            train_fraction,
            seed,
            output_dir: PathBuf::from(pairs.get("output_dir").map_or(".", String::as_str)),
        })
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn create_output_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })
}

/// Features go out at 17 significant digits so a load-back is exact.
fn features_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn labels_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn load_dataset(config: &RunConfig) -> Result<Dataset> {
    match &config.data {
        DataSource::Files {
            features1,
            features2,
            labels,
        } => {
            let x1 = data::load_features(features1, None)?;
            let x2 = data::load_features(features2, None)?;
            let y = data::load_labels(labels)?;
            Dataset::new(x1, x2, y)
        }
        DataSource::Synthetic {
            n_per_class,
            classes,
            d1,
            d2,
            noise_sigma,
        } => data::generate_synthetic(*n_per_class, *classes, *d1, *d2, *noise_sigma, config.seed),
    }
}

/// Writes features1.csv, features2.csv, labels.csv, and a manifest with the
/// seed and shapes into the output directory.
pub fn cmd_gen_data(config: &RunConfig) -> Result<String> {
    let DataSource::Synthetic {
        n_per_class,
        classes,
        d1,
        d2,
        noise_sigma,
    } = &config.data
    else {
        return Err(Error::Config(
            "gen-data needs the synthetic block (n_per_class, c, d1, d2, noise_sigma)".into(),
        ));
    };
    let ds = load_dataset(config)?;
    create_output_dir(&config.output_dir)?;
    let dir = &config.output_dir;
    write_file(&dir.join("features1.csv"), &features_csv(ds.modality1.values()))?;
    write_file(&dir.join("features2.csv"), &features_csv(ds.modality2.values()))?;
    write_file(&dir.join("labels.csv"), &labels_csv(ds.labels.values()))?;
    let manifest = format!(
        "seed {}\nsamples {}\nclasses {classes}\nn_per_class {n_per_class}\n\
         d1 {d1}\nd2 {d2}\nnoise_sigma {noise_sigma}\n",
        config.seed,
        ds.len(),
    );
    write_file(&dir.join("manifest"), &manifest)?;
    Ok(format!(
        "wrote {} samples to {}\n",
        ds.len(),
        dir.display()
    ))
}

/// Trains on the configured data and writes `model.ds2l` plus `trace.csv`;
/// with a train fraction, the held-out rows go to `test_*.csv` alongside.
pub fn cmd_train(config: &RunConfig) -> Result<String> {
    let full = load_dataset(config)?;
    let (train_ds, test_ds) = match config.train_fraction {
        Some(fraction) => {
            let (tr, te) = data::split(&full, fraction, config.seed)?;
            (tr, Some(te))
        }
        None => (full, None),
    };

    let model = model::train(&train_ds, &config.hyper, config.seed)?;

    create_output_dir(&config.output_dir)?;
    let dir = &config.output_dir;
    model.save(&dir.join("model.ds2l"))?;

    let mut trace = String::from("iteration,objective\n");
    for (i, value) in model.objective_trace().iter().enumerate() {
        writeln!(trace, "{i},{value:.16e}").expect("string write");
    }
    write_file(&dir.join("trace.csv"), &trace)?;

    if let Some(test) = &test_ds {
        write_file(&dir.join("test_features1.csv"), &features_csv(test.modality1.values()))?;
        write_file(&dir.join("test_features2.csv"), &features_csv(test.modality2.values()))?;
        write_file(&dir.join("test_labels.csv"), &labels_csv(test.labels.values()))?;
    }

    let iters = model.objective_trace().len() - 1;
    let last = model.objective_trace().last().copied().unwrap_or(f64::NAN);
    Ok(format!(
        "trained {iters} outer iterations, final objective {last:.6e}; \
         model and trace in {}\n",
        dir.display()
    ))
}

/// Retrieval direction: which modality queries which.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Direction {
    /// Modality-1 queries against the modality-2 gallery.
    I2t,
    /// Modality-2 queries against the modality-1 gallery.
    T2i,
}

/// Evaluation direction: one of the two, or both averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalDirection {
    I2t,
    T2i,
    Both,
}

/// Report format flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Csv,
}

struct ProjectedTestSet {
    w1: DMatrix<f64>,
    w2: DMatrix<f64>,
    labels: LabelMatrix,
}

fn project_test_set(
    model: &TrainedModel,
    features1: &Path,
    features2: &Path,
    labels: &Path,
) -> Result<ProjectedTestSet> {
    let x1 = data::load_features(features1, None)?;
    let x2 = data::load_features(features2, None)?;
    let y = data::load_labels(labels)?;
    if x2.len() != x1.len() || y.len() != x1.len() {
        return Err(Error::DimensionMismatch {
            context: "test sample count",
            expected: x1.len(),
            found: x2.len().min(y.len()),
        });
    }
    Ok(ProjectedTestSet {
        w1: model.project(&x1, Modality::One)?,
        w2: model.project(&x2, Modality::Two)?,
        labels: y,
    })
}

fn direction_metrics(
    set: &ProjectedTestSet,
    direction: Direction,
) -> Result<(f64, Vec<f64>)> {
    let (queries, gallery) = match direction {
        Direction::I2t => (&set.w1, &set.w2),
        Direction::T2i => (&set.w2, &set.w1),
    };
    let rankings = retrieval::rank_all(queries, gallery)?;
    let n_g = gallery.nrows();
    let map = retrieval::mean_average_precision(&rankings, &set.labels, &set.labels, n_g)?;
    let cmc = retrieval::cmc_curve(&rankings, &set.labels, &set.labels, n_g)?;
    Ok((map, cmc))
}

/// Projects the test set and reports MAP and CMC for the chosen direction,
/// or both directions plus their average.
pub fn cmd_eval(
    model_path: &Path,
    features1: &Path,
    features2: &Path,
    labels: &Path,
    direction: EvalDirection,
    format: ReportFormat,
) -> Result<String> {
    let model = TrainedModel::load(model_path)?;
    let set = project_test_set(&model, features1, features2, labels)?;

    let report = match direction {
        EvalDirection::I2t => {
            let (map, cmc) = direction_metrics(&set, Direction::I2t)?;
            EvalReport::new(vec![("MAP_I2T", map)], cmc)
        }
        EvalDirection::T2i => {
            let (map, cmc) = direction_metrics(&set, Direction::T2i)?;
            EvalReport::new(vec![("MAP_T2I", map)], cmc)
        }
        EvalDirection::Both => {
            let (map_i2t, cmc_i2t) = direction_metrics(&set, Direction::I2t)?;
            let (map_t2i, cmc_t2i) = direction_metrics(&set, Direction::T2i)?;
            let cmc = cmc_i2t
                .iter()
                .zip(&cmc_t2i)
                .map(|(a, b)| (a + b) / 2.0)
                .collect();
            EvalReport::new(
                vec![
                    ("MAP_I2T", map_i2t),
                    ("MAP_T2I", map_t2i),
                    ("MAP_AVG", (map_i2t + map_t2i) / 2.0),
                ],
                cmc,
            )
        }
    };
    Ok(match format {
        ReportFormat::Text => report.to_text(),
        ReportFormat::Csv => report.to_csv(),
    })
}

/// Ranks the gallery for every query and prints the top-k indices with
/// scores, one `query: idx:score ...` line per query.
pub fn cmd_retrieve(
    model_path: &Path,
    queries_path: &Path,
    gallery_path: &Path,
    direction: Direction,
    top_k: usize,
) -> Result<String> {
    let model = TrainedModel::load(model_path)?;
    let (query_modality, gallery_modality) = match direction {
        Direction::I2t => (Modality::One, Modality::Two),
        Direction::T2i => (Modality::Two, Modality::One),
    };
    let queries = data::load_features(queries_path, None)?;
    let gallery = data::load_features(gallery_path, None)?;
    if top_k > gallery.len() {
        return Err(Error::InvalidArgument(format!(
            "top_k {top_k} exceeds gallery size {}",
            gallery.len()
        )));
    }
    let wq = model.project(&queries, query_modality)?;
    let wg = model.project(&gallery, gallery_modality)?;
    let rankings = retrieval::rank_all(&wq, &wg)?;

    let mut out = String::new();
    for ranking in &rankings {
        out.push_str(&format_ranking_line(ranking, top_k));
        out.push('\n');
    }
    Ok(out)
}

fn format_ranking_line(ranking: &RankedList, top_k: usize) -> String {
    let mut line = format!("{}:", ranking.query_index());
    for (idx, score) in ranking
        .ordered_indices()
        .iter()
        .zip(ranking.scores())
        .take(top_k)
    {
        write!(line, " {idx}:{score:.6}").expect("string write");
    }
    line
}

#[derive(Parser)]
#[command(
    name = "ds2l",
    version,
    about = "Supervised cross-modal subspace learning and retrieval"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic paired dataset described by a config file.
    GenData {
        /// Run configuration (`key = value` lines; `#` comments).
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Learn the two projections and write model.ds2l plus trace.csv.
    ///
    /// Defaults when a key is absent from the config: alpha1 = alpha2 = 1,
    /// lambda1 = lambda2 = 0.01, theta = 1, beta = 1, k = 10,
    /// max_outer_iter = 100, inner_cg_iter = 20, outer_tol = 1e-6,
    /// row_norm_floor = 1e-8, seed = 0.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score a trained model on held-out features and print MAP/CMC.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// Modality-1 test features (CSV).
        #[arg(long)]
        features1: PathBuf,
        /// Modality-2 test features (CSV).
        #[arg(long)]
        features2: PathBuf,
        /// Test labels (CSV of 0/1 rows).
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, value_enum, default_value_t = EvalDirection::Both)]
        direction: EvalDirection,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        format: ReportFormat,
    },
    /// Rank a gallery for each query row and print the top-k matches.
    Retrieve {
        #[arg(long)]
        model: PathBuf,
        /// Query features in the direction's query modality (CSV).
        #[arg(long)]
        queries: PathBuf,
        /// Gallery features in the other modality (CSV).
        #[arg(long)]
        gallery: PathBuf,
        #[arg(long, value_enum)]
        direction: Direction,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
    },
}

fn load_config(path: &Path, seed: Option<u64>, output: Option<PathBuf>) -> Result<RunConfig> {
    let mut config = RunConfig::from_file(path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(output) = output {
        config.output_dir = output;
    }
    Ok(config)
}

fn dispatch(cli: Cli) -> Result<String> {
    match cli.command {
        Command::GenData {
            config,
            seed,
            output,
        } => cmd_gen_data(&load_config(&config, seed, output)?),
        Command::Train {
            config,
            seed,
            output,
        } => cmd_train(&load_config(&config, seed, output)?),
        Command::Eval {
            model,
            features1,
            features2,
            labels,
            direction,
            format,
        } => cmd_eval(&model, &features1, &features2, &labels, direction, format),
        Command::Retrieve {
            model,
            queries,
            gallery,
            direction,
            top_k,
        } => cmd_retrieve(&model, &queries, &gallery, direction, top_k),
    }
}

/// Binary entry point: parse, run, print, set the exit code.
pub fn run() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(output) => print!("{output}"),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(1);
        }
    }
}
