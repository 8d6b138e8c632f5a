//! Command implementations behind the `kshape` binary.
//!
//! Each `cmd_*` function is usable on its own; [`run`] dispatches parsed
//! arguments. Exit codes: 0 success, 1 partial or runtime failure, 2
//! configuration or input error.

pub mod config;
pub mod evaluate;
pub mod extract;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use kendall_shape::eval::{delong_test, DelongResult, ScoreTable};
use kendall_shape::io::{load_dataset, save_dataset, ManifestRow};
use kendall_shape::svm::{select_hyperparams, HyperGrid, SelectOptions};
use kendall_shape::synthetic::{generate, SynthConfig};
use kendall_shape::{DistanceKind, Error, Kernel, SvmModel, TrainConfig};
use serde::Serialize;

pub use config::{ConfigFile, RunManifest};
pub use evaluate::{cmd_evaluate, format_summary, EvaluateReport};
pub use extract::{cmd_extract, ExtractReport};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{failed} of {total} files failed")]
    Partial { failed: usize, total: usize },
    #[error("{context}: {source}")]
    Context { context: String, source: Error },
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        let core = match self {
            CliError::Config(_) => return 2,
            CliError::Partial { .. } => return 1,
            CliError::Context { source, .. } => source,
            CliError::Core(e) => e,
        };
        match core.root() {
            Error::Io(_) | Error::NotConverged { .. } => 1,
            _ => 2,
        }
    }
}

pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Context {
        context: format!("writing {}", path.display()),
        source: e.into(),
    })
}

#[derive(Debug, Parser)]
#[command(name = "kshape", version, about = "Contour classification on Kendall's shape space")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trace binary masks and write equidistant landmark files.
    Extract(ExtractArgs),
    /// Generate a labeled synthetic dataset.
    Synth(SynthArgs),
    /// Landmark-count sweep with LOOCV, ROC analysis and DeLong tests.
    Evaluate(EvaluateArgs),
    /// DeLong test between two score tables.
    Compare(CompareArgs),
    /// Fit a model on a whole dataset and save it as JSON.
    Train(TrainArgs),
    /// Score a dataset with a saved model.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Directory searched recursively for PGM or 0/1 CSV masks.
    pub mask_dir: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub landmarks: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// CSV of `id,label` rows keyed by mask file stem.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 60)]
    pub n_benign: usize,
    #[arg(long, default_value_t = 60)]
    pub n_malignant: usize,
    #[arg(long, default_value_t = 50)]
    pub landmarks: usize,
    /// `lo,hi`
    #[arg(long)]
    pub eccentricity: Option<String>,
    /// `lo,hi`
    #[arg(long)]
    pub lobes: Option<String>,
    /// `lo,hi`, as a fraction of the radius.
    #[arg(long)]
    pub amplitude: Option<String>,
    /// Radial noise as a fraction of the radius.
    #[arg(long)]
    pub noise: Option<f64>,
}

/// Hyperparameter and solver flags shared by `evaluate` and `train`.
#[derive(Debug, Default, Args)]
pub struct ModelArgs {
    /// Fix σ instead of searching.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Fix C instead of searching.
    #[arg(long = "C")]
    pub c: Option<f64>,
    /// Search grid `σ₁,σ₂,...:C₁,C₂,...`.
    #[arg(long)]
    pub grid: Option<String>,
    /// Train without the bias term.
    #[arg(long)]
    pub no_bias: bool,
    /// Minimize the distance over cyclic landmark re-indexing.
    #[arg(long)]
    pub cyclic_distance: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Folds of the inner hyperparameter search.
    #[arg(long)]
    pub folds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Dataset manifest (`id,label,file[,status]`).
    pub manifest: Option<PathBuf>,
    /// Comma-separated landmark counts.
    #[arg(long, value_delimiter = ',')]
    pub landmarks: Vec<usize>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Select σ and C inside every leave-one-out fold.
    #[arg(long)]
    pub nested_cv: bool,
    /// Bootstrap resamples for the metric spreads (0 disables).
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON run manifest supplying defaults for the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub scores_a: PathBuf,
    pub scores_b: PathBuf,
    /// Also write the result as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub landmarks: usize,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    pub model: PathBuf,
    pub manifest: PathBuf,
    /// Score table CSV (`id,label,score`).
    #[arg(long)]
    pub out: PathBuf,
}

fn pick_grid(model: &ModelArgs, sigmas: Option<Vec<f64>>, cs: Option<Vec<f64>>) -> Result<HyperGrid, CliError> {
    let default = HyperGrid::default();
    let flag_grid = model.grid.as_deref().map(config::parse_grid).transpose()?;
    let sigmas = match (model.sigma, &flag_grid) {
        (Some(s), _) => vec![s],
        (None, Some(g)) => g.sigmas.clone(),
        (None, None) => sigmas.unwrap_or(default.sigmas),
    };
    let cs = match (model.c, &flag_grid) {
        (Some(c), _) => vec![c],
        (None, Some(g)) => g.cs.clone(),
        (None, None) => cs.unwrap_or(default.cs),
    };
    Ok(HyperGrid { sigmas, cs })
}

fn distance_kind(cyclic: bool, fallback: Option<DistanceKind>) -> DistanceKind {
    if cyclic {
        DistanceKind::CyclicProcrustes
    } else {
        fallback.unwrap_or_default()
    }
}

/// Merges flags over the optional config file over the defaults.
pub fn resolve_run(args: &EvaluateArgs) -> Result<RunManifest, CliError> {
    let file = args
        .config
        .as_deref()
        .map(ConfigFile::load)
        .transpose()?
        .unwrap_or_default();
    let dataset = args
        .manifest
        .clone()
        .or(file.dataset)
        .ok_or_else(|| CliError::Config("a dataset manifest is required".into()))?;
    let grid = pick_grid(&args.model, file.sigmas, file.cs)?;
    let run = RunManifest {
        dataset,
        landmark_counts: if args.landmarks.is_empty() {
            file.landmark_counts.unwrap_or_else(|| config::DEFAULT_COUNTS.to_vec())
        } else {
            args.landmarks.clone()
        },
        sigmas: grid.sigmas,
        cs: grid.cs,
        seed: args.model.seed.or(file.seed).unwrap_or(0),
        out: args
            .out
            .clone()
            .or(file.out)
            .unwrap_or_else(|| PathBuf::from("results")),
        folds: args.model.folds.or(file.folds).unwrap_or(config::DEFAULT_FOLDS),
        nested_cv: args.nested_cv || file.nested_cv.unwrap_or(false),
        bias: !args.model.no_bias && file.bias.unwrap_or(true),
        distance: distance_kind(args.model.cyclic_distance, file.distance),
        bootstrap: args.bootstrap.or(file.bootstrap).unwrap_or(config::DEFAULT_BOOTSTRAP),
    };
    run.validate()?;
    Ok(run)
}

/// Writes the synthetic dataset's landmark files, `manifest.csv` and the
/// resolved generator settings.
pub fn cmd_synth(cfg: &SynthConfig, out: &Path) -> Result<Vec<ManifestRow>, CliError> {
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let ds = generate(cfg)?;
    let rows = save_dataset(&ds, cfg.n_landmarks, out)?;
    write_json(&out.join("synth_config.json"), cfg)?;
    Ok(rows)
}

pub fn synth_config(args: &SynthArgs) -> Result<SynthConfig, CliError> {
    let mut cfg = SynthConfig {
        n_benign: args.n_benign,
        n_malignant: args.n_malignant,
        n_landmarks: args.landmarks,
        seed: args.seed,
        ..Default::default()
    };
    if let Some(r) = &args.eccentricity {
        cfg.eccentricity_range = config::parse_range(r)?;
    }
    if let Some(r) = &args.lobes {
        let (lo, hi) = config::parse_range(r)?;
        if lo.fract() != 0.0 || hi.fract() != 0.0 || lo < 0.0 || hi < 0.0 {
            return Err(CliError::Config(format!(
                "lobe counts must be whole numbers, got '{r}'"
            )));
        }
        cfg.lobe_count_range = (lo as u32, hi as u32);
    }
    if let Some(r) = &args.amplitude {
        cfg.lobe_amplitude_range = config::parse_range(r)?;
    }
    if let Some(n) = args.noise {
        cfg.noise_std = n;
    }
    Ok(cfg)
}

/// DeLong test between two score tables on the same samples.
pub fn cmd_compare(a: &Path, b: &Path) -> Result<DelongResult, CliError> {
    let load = |p: &Path| {
        ScoreTable::read_csv(p).map_err(|e| CliError::Context {
            context: format!("reading {}", p.display()),
            source: e,
        })
    };
    Ok(delong_test(&load(a)?, &load(b)?)?)
}

/// Fits on the whole dataset; searches the grid unless it is a single point.
pub fn cmd_train(args: &TrainArgs) -> Result<SvmModel, CliError> {
    if args.landmarks < 3 {
        return Err(CliError::Config(format!(
            "--landmarks must be at least 3, got {}",
            args.landmarks
        )));
    }
    let grid = pick_grid(&args.model, None, None)?;
    let ds = load_dataset(&args.manifest)?;
    let shapes = ds.pre_shapes(args.landmarks)?;
    let labels = ds.labels();
    let distance = distance_kind(args.model.cyclic_distance, None);
    let train = TrainConfig {
        bias: !args.model.no_bias,
        ..Default::default()
    };
    let opts = SelectOptions {
        folds: args.model.folds.unwrap_or(config::DEFAULT_FOLDS),
        seed: args.model.seed.unwrap_or(0),
        distance,
        train,
    };
    let sel = select_hyperparams(&shapes, &labels, &grid, &opts)?;
    let model = SvmModel::fit(
        &shapes,
        &labels,
        Kernel::new(sel.sigma, distance)?,
        &TrainConfig { c: sel.c, ..train },
    )?;
    fs::write(&args.out, model.to_json()? + "\n").map_err(|e| CliError::Core(e.into()))?;
    Ok(model)
}

/// Decision values of a saved model on every usable manifest row.
pub fn cmd_predict(model: &Path, manifest: &Path) -> Result<ScoreTable, CliError> {
    let text =
        fs::read_to_string(model).map_err(|e| CliError::Config(format!("cannot read {}: {e}", model.display())))?;
    let model = SvmModel::from_json(&text)?;
    let n = model
        .support_shapes()
        .first()
        .map(|s| s.len())
        .ok_or_else(|| CliError::Config("model has no support vectors".into()))?;
    let ds = load_dataset(manifest)?;
    let scores = ds
        .pre_shapes(n)?
        .iter()
        .map(|z| model.decision_value(z))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ScoreTable::new(ds.ids(), ds.labels(), scores)?)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Extract(a) => {
            let report = cmd_extract(&a.mask_dir, a.landmarks, &a.out, a.labels.as_deref())?;
            println!("extracted {} masks into {}", report.rows.len(), a.out.display());
        }
        Command::Synth(a) => {
            let cfg = synth_config(&a)?;
            let rows = cmd_synth(&cfg, &a.out)?;
            println!(
                "wrote {} samples to {}",
                rows.len(),
                a.out.join("manifest.csv").display()
            );
        }
        Command::Evaluate(a) => {
            let run = resolve_run(&a)?;
            let report = cmd_evaluate(&run)?;
            print!("{}", format_summary(&report));
        }
        Command::Compare(a) => {
            let r = cmd_compare(&a.scores_a, &a.scores_b)?;
            println!("AUC a = {:.4}", r.auc_a);
            println!("AUC b = {:.4}", r.auc_b);
            println!("z = {:.4}", r.z_statistic);
            println!("p = {:.4}", r.p_value);
            if let Some(out) = &a.out {
                write_json(out, &r)?;
            }
        }
        Command::Train(a) => {
            let m = cmd_train(&a)?;
            println!(
                "sigma {} C {}: {} support vectors, written to {}",
                m.sigma(),
                m.c(),
                m.support_shapes().len(),
                a.out.display()
            );
        }
        Command::Predict(a) => {
            let t = cmd_predict(&a.model, &a.manifest)?;
            t.write_csv(&a.out)?;
            println!("scored {} samples into {}", t.len(), a.out.display());
        }
    }
    Ok(())
}
