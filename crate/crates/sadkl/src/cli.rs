//! Subcommands: gen-data, pretrain, train, eval, fit-burr and kl.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use sadkl_core::burr::{burr_fit_mle, ks_statistic, BurrFit};
use sadkl_core::data::{make_two_moons, two_moons_scenario, Dataset};
use sadkl_core::divergence::{detection_probability, kl_burr};
use sadkl_core::eval::{
    anomaly_scores, decision_boundary_grid, roc_auc, GridSpec, DEFAULT_BOUNDARY_LEVEL,
};
use sadkl_core::lof::lof_scores;
use sadkl_core::net::{compute_centroid, pretrain_autoencoder};
use sadkl_core::sadkl::{partition_scores, run_sadkl, train_from_encoder};

use crate::checkpoint::{check_input_dim, Checkpoint};
use crate::config::{ExperimentConfig, Overrides};
use crate::csvio::{load_dataset, load_scores, save_dataset, save_scores};
use crate::error::{CliError, Context, Result};
use crate::report::{save_grid, save_history, save_pretrain_history, save_roc};
use crate::svg::{boundary_svg, roc_svg};

#[derive(Debug, Parser)]
#[command(
    name = "sadkl",
    version,
    about = "Semi-supervised anomaly detection with KL-driven probabilistic labels"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled/unlabeled two-moons training set and a test set.
    GenData(GenDataArgs),
    /// Pretrain the autoencoder and save the encoder with its centroid.
    Pretrain(DataArgs),
    /// Run the full training procedure and save the model and history.
    Train(TrainArgs),
    /// Score a test set with a checkpoint; print the AUC.
    Eval(EvalArgs),
    /// Fit a Burr XII distribution to a score file and test the fit.
    FitBurr(FitBurrArgs),
    /// KL divergence between the Burr fits of two score files.
    Kl(KlArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub config: Overrides,
    /// Training set path; without it both sets go to a new run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Test set path.
    #[arg(long)]
    pub test_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[command(flatten)]
    pub config: Overrides,
    /// Training set CSV.
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: DataArgs,
    /// Start from a pretrained encoder checkpoint instead of pretraining.
    #[arg(long)]
    pub init: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Test set CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Parent directory of the run directory.
    #[arg(long, default_value = "runs")]
    pub output_dir: PathBuf,
    /// Boundary grid points per axis.
    #[arg(long, default_value_t = 200)]
    pub resolution: usize,
    /// Contour level on the normalized score scale.
    #[arg(long, default_value_t = DEFAULT_BOUNDARY_LEVEL)]
    pub level: f64,
}

#[derive(Debug, Args)]
pub struct FitBurrArgs {
    /// One-column score file.
    #[arg(long)]
    pub scores: PathBuf,
}

#[derive(Debug, Args)]
pub struct KlArgs {
    /// Scores of the reference (labeled-normal) population.
    #[arg(long)]
    pub p: PathBuf,
    /// Scores of the unlabeled population.
    #[arg(long)]
    pub q: PathBuf,
    #[arg(long, default_value_t = 500.0)]
    pub beta: f64,
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from<I, T>(args: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli =
        Cli::try_parse_from(args).map_err(|e| CliError::config("arguments", e.to_string()))?;
    run(cli.command, out)
}

pub fn run(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::GenData(a) => gen_data(&a, out),
        Command::Pretrain(a) => pretrain(&a, out),
        Command::Train(a) => train(&a, out),
        Command::Eval(a) => eval(&a, out),
        Command::FitBurr(a) => fit_burr(&a, out),
        Command::Kl(a) => kl(&a, out),
    }
}

fn say(out: &mut dyn Write, text: std::fmt::Arguments) -> Result<()> {
    writeln!(out, "{text}").map_err(|e| CliError::io("<stdout>", e))
}

/// Creates `<base>/<command>-<YYYYmmdd-HHMMSS>`, suffixed when taken.
pub fn create_run_dir(base: &Path, command: &str) -> Result<PathBuf> {
    fs::create_dir_all(base).map_err(|e| CliError::io(base, e))?;
    let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
    for n in 0u32.. {
        let name = match n {
            0 => format!("{command}-{stamp}"),
            _ => format!("{command}-{stamp}-{n}"),
        };
        let dir = base.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(CliError::io(dir, e)),
        }
    }
    unreachable!("run directory suffixes exhausted")
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn echo_config(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    write_file(&dir.join("config.toml"), &cfg.to_toml())
}

fn gen_data(a: &GenDataArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = ExperimentConfig::resolve(&a.config)?;
    let train = two_moons_scenario(&cfg.moons(), cfg.fractions()).context("training set")?;
    let test = make_two_moons(&cfg.test_moons()).context("test set")?;
    let (train_path, test_path) = match &a.out {
        Some(p) => (p.clone(), a.test_out.clone()),
        None => {
            let dir = create_run_dir(&cfg.output_dir, "gen-data")?;
            echo_config(&dir, &cfg)?;
            (dir.join("train.csv"), Some(dir.join("test.csv")))
        }
    };
    save_dataset(&train, &train_path)?;
    say(
        out,
        format_args!(
            "train {} samples ({} labeled) -> {}",
            train.len(),
            train.n_labeled(),
            train_path.display()
        ),
    )?;
    if let Some(p) = test_path {
        save_dataset(&test, &p)?;
        say(
            out,
            format_args!("test {} samples -> {}", test.len(), p.display()),
        )?;
    }
    Ok(())
}

fn pretrain(a: &DataArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = ExperimentConfig::resolve(&a.config)?;
    let ds = load_dataset(&a.data)?;
    let sadkl = cfg.sadkl(ds.dim());
    let pre = pretrain_autoencoder(&ds, &sadkl.pretrain).context("pretraining")?;
    let encoder = pre.autoencoder.encoder;
    let centroid = compute_centroid(&encoder, &ds).context("centroid")?;
    let z = encoder.forward_all(ds.features()).context("embedding")?;
    let scores = lof_scores(&z, sadkl.lof).context("LOF scores")?;
    let (s_r, s_u) = partition_scores(&ds, &scores);

    let dir = create_run_dir(&cfg.output_dir, "pretrain")?;
    echo_config(&dir, &cfg)?;
    Checkpoint { encoder, centroid }.save(&dir.join("encoder.ckpt"))?;
    save_pretrain_history(&pre.mse, &dir.join("pretrain.csv"))?;
    save_scores(&s_r, &dir.join("scores_normal.csv"))?;
    save_scores(&s_u, &dir.join("scores_unlabeled.csv"))?;
    say(
        out,
        format_args!(
            "pretrain mse {:.6e} -> {:.6e}; outputs in {}",
            pre.mse[0],
            pre.mse.last().copied().unwrap_or(f64::NAN),
            dir.display()
        ),
    )
}

fn train(a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = ExperimentConfig::resolve(&a.common.config)?;
    let ds = load_dataset(&a.common.data)?;
    let sadkl = cfg.sadkl(ds.dim());
    let result = match &a.init {
        Some(p) => {
            let init = Checkpoint::load(p)?;
            check_input_dim(&init, ds.dim())?;
            train_from_encoder(&ds, init.encoder, &sadkl)
        }
        None => run_sadkl(&ds, &sadkl),
    };
    let outcome = result.context("training")?;
    let state = &outcome.state;

    let dir = create_run_dir(&cfg.output_dir, "train")?;
    echo_config(&dir, &cfg)?;
    Checkpoint {
        encoder: outcome.encoder.clone(),
        centroid: outcome.centroid.clone(),
    }
    .save(&dir.join("model.ckpt"))?;
    save_history(&state.history, &dir.join("history.csv"))?;
    if !outcome.pretrain_mse.is_empty() {
        save_pretrain_history(&outcome.pretrain_mse, &dir.join("pretrain.csv"))?;
    }
    let summary = format!(
        "iterations {} converged {} delta {:.6e} kl {:.6e} p_d {:.6} eta {:.6}",
        state.t, state.converged, state.delta, state.setup.kl, state.p_d, state.eta
    );
    write_file(&dir.join("summary.txt"), &format!("{summary}\n"))?;
    say(out, format_args!("{summary}"))?;
    say(out, format_args!("outputs in {}", dir.display()))
}

/// Bounding box of the points with 5% padding on each side.
fn padded_bounds(ds: &Dataset, axis: usize) -> (f64, f64) {
    let (lo, hi) = ds
        .features()
        .map(|f| f[axis])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    let pad = 0.05 * (hi - lo).max(1e-9);
    (lo - pad, hi + pad)
}

fn eval(a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let ds = load_dataset(&a.data)?;
    check_input_dim(&ckpt, ds.dim())?;
    let truth = ds.ground_truth();
    let scores = anomaly_scores(&ckpt.encoder, &ckpt.centroid, ds.features()).context("scoring")?;
    let roc = roc_auc(&scores, &truth).context("ROC")?;

    let dir = create_run_dir(&a.output_dir, "eval")?;
    save_roc(&roc, &dir.join("roc.csv"))?;
    write_file(&dir.join("roc.svg"), &roc_svg(&roc))?;
    if ds.dim() == 2 {
        let spec = GridSpec {
            x_range: padded_bounds(&ds, 0),
            y_range: padded_bounds(&ds, 1),
            nx: a.resolution,
            ny: a.resolution,
        };
        let grid = decision_boundary_grid(&ckpt.encoder, &ckpt.centroid, spec, a.level)
            .context("boundary grid")?;
        save_grid(&grid, &dir.join("boundary.csv"))?;
        let points: Vec<(f64, f64, bool)> = ds
            .samples()
            .iter()
            .map(|s| (s.features[0], s.features[1], s.ground_truth.is_abnormal()))
            .collect();
        write_file(&dir.join("boundary.svg"), &boundary_svg(&grid, &points))?;
    }
    say(out, format_args!("auc {:.4}", roc.auc))?;
    say(out, format_args!("outputs in {}", dir.display()))
}

fn fit_scores(path: &Path) -> Result<BurrFit> {
    let scores = load_scores(path)?;
    burr_fit_mle(&scores).context("Burr fit")
}

fn fit_burr(a: &FitBurrArgs, out: &mut dyn Write) -> Result<()> {
    let scores = load_scores(&a.scores)?;
    let fit = burr_fit_mle(&scores).context("Burr fit")?;
    let ks = ks_statistic(&scores, fit.params).context("KS test")?;
    say(
        out,
        format_args!(
            "c {:.6} k {:.6} mean_log_likelihood {:.6} iterations {} ks_statistic {:.6} p_value {:.4}",
            fit.params.c(),
            fit.params.k(),
            fit.log_likelihood,
            fit.iterations,
            ks.statistic,
            ks.p_value
        ),
    )
}

fn kl(a: &KlArgs, out: &mut dyn Write) -> Result<()> {
    let p = fit_scores(&a.p)?;
    let q = fit_scores(&a.q)?;
    let kl = kl_burr(p.params, q.params)
        .context("KL quadrature")?
        .max(0.0);
    say(
        out,
        format_args!(
            "p ({:.6}, {:.6}) q ({:.6}, {:.6}) kl {:.6e}",
            p.params.c(),
            p.params.k(),
            q.params.c(),
            q.params.k(),
            kl
        ),
    )?;
    let p_d = detection_probability(kl, a.beta).context("detection probability")?;
    say(out, format_args!("p_d {p_d:.6} (beta {})", a.beta))
}
