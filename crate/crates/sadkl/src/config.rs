//! Experiment configuration: a flat TOML file of documented keys, overridden
//! by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use sadkl_core::data::{SplitFractions, TwoMoons, DEFAULT_ANOMALY_MARGIN_SIGMAS};
use sadkl_core::lof::LofConfig;
use sadkl_core::net::{Architecture, PretrainConfig};
use sadkl_core::sadkl::SadKlConfig;

use crate::error::{CliError, Result};

/// Every knob of an experiment. Defaults are the two-moons setup: 10000
/// samples, 10% labeled with 5% of them abnormal, 1% abnormal among the
/// unlabeled, noise variance 0.3, a 2-100-100-2 ELU encoder, k = 100,
/// β = 500, ε = 1e-4, λ = 1e-6 and learning rate 1e-5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Training set size.
    pub n_samples: usize,
    pub noise_variance: f64,
    pub labeled_frac: f64,
    pub labeled_anom_frac: f64,
    pub unlabeled_anom_frac: f64,
    /// Anomaly box margin around the moons, in noise standard deviations.
    pub anomaly_margin_sigmas: f64,
    /// Seeds data generation and the split.
    pub seed: u64,
    pub test_samples: usize,
    pub test_anomalies: usize,
    /// Seeds the test set; `seed + 1000` when absent.
    pub test_seed: Option<u64>,
    /// Seeds network initialization and batch order.
    pub train_seed: u64,
    pub lof_k: usize,
    pub beta: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub hidden: Vec<usize>,
    pub latent: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub pretrain_epochs: usize,
    pub pretrain_lr: f64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sadkl = SadKlConfig::default();
        ExperimentConfig {
            n_samples: 10_000,
            noise_variance: 0.3,
            labeled_frac: 0.10,
            labeled_anom_frac: 0.05,
            unlabeled_anom_frac: 0.01,
            anomaly_margin_sigmas: DEFAULT_ANOMALY_MARGIN_SIGMAS,
            seed: 0,
            test_samples: 1000,
            test_anomalies: 500,
            test_seed: None,
            train_seed: 0,
            lof_k: sadkl.lof.k,
            beta: sadkl.beta,
            epsilon: sadkl.epsilon,
            max_iterations: sadkl.max_iterations,
            hidden: sadkl.pretrain.arch.hidden.clone(),
            latent: sadkl.pretrain.arch.latent,
            lr: sadkl.lr,
            weight_decay: sadkl.weight_decay,
            batch_size: sadkl.batch_size,
            pretrain_epochs: sadkl.pretrain.epochs,
            pretrain_lr: sadkl.pretrain.lr,
            output_dir: PathBuf::from("runs"),
        }
    }
}

/// Command-line overrides; each flag replaces the matching config key.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML file with any of the keys below (snake_case).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training set size [default: 10000]
    #[arg(long)]
    pub n_samples: Option<usize>,
    /// Variance of the Gaussian noise on the moons [default: 0.3]
    #[arg(long)]
    pub noise_variance: Option<f64>,
    /// Fraction of samples that are labeled [default: 0.1]
    #[arg(long)]
    pub labeled_frac: Option<f64>,
    /// Fraction of labeled samples that are abnormal [default: 0.05]
    #[arg(long)]
    pub labeled_anom_frac: Option<f64>,
    /// Fraction of unlabeled samples that are abnormal [default: 0.01]
    #[arg(long)]
    pub unlabeled_anom_frac: Option<f64>,
    /// Anomaly box margin in noise standard deviations [default: 10]
    #[arg(long)]
    pub anomaly_margin_sigmas: Option<f64>,
    /// Data generation and split seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Test set size [default: 1000]
    #[arg(long)]
    pub test_samples: Option<usize>,
    /// Anomalies in the test set [default: 500]
    #[arg(long)]
    pub test_anomalies: Option<usize>,
    /// Test set seed [default: seed + 1000]
    #[arg(long)]
    pub test_seed: Option<u64>,
    /// Network initialization and batch order seed [default: 0]
    #[arg(long)]
    pub train_seed: Option<u64>,
    /// LOF neighborhood size [default: 100]
    #[arg(long)]
    pub lof_k: Option<usize>,
    /// Scale of the KL to detection probability map [default: 500]
    #[arg(long)]
    pub beta: Option<f64>,
    /// Stop once the labeling change rate is below this [default: 1e-4]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Cap on labeling iterations [default: 200]
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Hidden layer widths, comma separated [default: 100,100]
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// Embedding dimension [default: 2]
    #[arg(long)]
    pub latent: Option<usize>,
    /// Adam learning rate of the labeling loop [default: 1e-5]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Weight decay λ [default: 1e-6]
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Minibatch size [default: 200]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Autoencoder pretraining epochs [default: 50]
    #[arg(long)]
    pub pretrain_epochs: Option<usize>,
    /// Autoencoder learning rate [default: 1e-3]
    #[arg(long)]
    pub pretrain_lr: Option<f64>,
    /// Parent directory of the timestamped run directories [default: runs]
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

macro_rules! apply {
    ($cfg:ident, $o:ident, $($field:ident),*) => {
        $(if let Some(v) = $o.$field.clone() { $cfg.$field = v; })*
    };
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
            .map_err(|e| CliError::config("config file", format!("{}: {e}", path.display())))
    }

    /// File values (or defaults) with the flags applied, validated.
    pub fn resolve(o: &Overrides) -> Result<Self> {
        let mut cfg = match &o.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        apply!(
            cfg,
            o,
            n_samples,
            noise_variance,
            labeled_frac,
            labeled_anom_frac,
            unlabeled_anom_frac,
            anomaly_margin_sigmas,
            seed,
            test_samples,
            test_anomalies,
            train_seed,
            lof_k,
            beta,
            epsilon,
            max_iterations,
            hidden,
            latent,
            lr,
            weight_decay,
            batch_size,
            pretrain_epochs,
            pretrain_lr,
            output_dir
        );
        if o.test_seed.is_some() {
            cfg.test_seed = o.test_seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn fractions(&self) -> SplitFractions {
        SplitFractions {
            labeled: self.labeled_frac,
            labeled_abnormal: self.labeled_anom_frac,
            unlabeled_abnormal: self.unlabeled_anom_frac,
        }
    }

    pub fn moons(&self) -> TwoMoons {
        TwoMoons {
            n_samples: self.n_samples,
            n_abnormal: 0,
            noise_variance: self.noise_variance,
            anomaly_margin_sigmas: self.anomaly_margin_sigmas,
            seed: self.seed,
        }
    }

    pub fn test_moons(&self) -> TwoMoons {
        TwoMoons {
            n_samples: self.test_samples,
            n_abnormal: self.test_anomalies,
            seed: self.test_seed.unwrap_or(self.seed.wrapping_add(1000)),
            ..self.moons()
        }
    }

    pub fn architecture(&self, input: usize) -> Architecture {
        Architecture {
            input,
            hidden: self.hidden.clone(),
            latent: self.latent,
        }
    }

    pub fn sadkl(&self, input: usize) -> SadKlConfig {
        SadKlConfig {
            lof: LofConfig { k: self.lof_k },
            beta: self.beta,
            epsilon: self.epsilon,
            max_iterations: self.max_iterations,
            pretrain: PretrainConfig {
                arch: self.architecture(input),
                epochs: self.pretrain_epochs,
                lr: self.pretrain_lr,
                weight_decay: self.weight_decay,
                batch_size: self.batch_size,
                seed: self.train_seed,
            },
            lr: self.lr,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            seed: self.train_seed,
        }
    }

    /// Checks every field against the preconditions of the module that
    /// consumes it, naming the first offending key.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| Err(CliError::config(field, reason));
        if self.n_samples == 0 {
            return bad("n_samples", "must be positive");
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return bad("noise_variance", "must be finite and nonnegative");
        }
        if !(self.anomaly_margin_sigmas >= 0.0 && self.anomaly_margin_sigmas.is_finite()) {
            return bad("anomaly_margin_sigmas", "must be finite and nonnegative");
        }
        if let Err(e) = self.fractions().counts(self.n_samples) {
            return Err(core_field(e));
        }
        if self.test_samples == 0 {
            return bad("test_samples", "must be positive");
        }
        if self.test_anomalies > self.test_samples {
            return bad("test_anomalies", "exceeds test_samples");
        }
        if self.hidden.contains(&0) {
            return bad("hidden", "layer widths must be positive");
        }
        if self.latent == 0 {
            return bad("latent", "must be positive");
        }
        self.sadkl(2).validate().map_err(core_field)
    }
}

fn core_field(e: sadkl_core::Error) -> CliError {
    match e {
        sadkl_core::Error::InvalidParameter { name, reason } => CliError::config(name, reason),
        other => CliError::config("config", other.to_string()),
    }
}
