//! The training procedure: pretrain, fix the detection probability from the
//! KL divergence of the initial score densities, then alternate LOF scoring,
//! threshold estimation, probabilistic labeling and one epoch of hypersphere
//! training until the labels stop changing.

use alloc::vec::Vec;

use crate::burr::{burr_fit_mle, BurrFit};
use crate::data::{Dataset, LabelState};
use crate::divergence::{detection_probability, detection_threshold, kl_burr};
use crate::eval::roc_auc;
use crate::lof::{lof_scores, squared_distance, LofConfig, LofScores, Points};
use crate::net::{
    compute_centroid, pretrain_autoencoder, train_epoch, Adam, Centroid, Mlp, PretrainConfig,
};
use crate::{rng_from_seed, Error, Result};

/// Soft labels for unlabeled samples: `p_d` at or below the threshold,
/// `1 - p_d` above it.
pub fn assign_labels(scores_u: &[f64], eta: f64, p_d: f64) -> Result<Vec<f64>> {
    check_pd(p_d)?;
    let low = 1.0 - p_d;
    Ok(scores_u
        .iter()
        .map(|&s| if s <= eta { p_d } else { low })
        .collect())
}

fn check_pd(p_d: f64) -> Result<()> {
    if !(p_d > 0.5 && p_d < 1.0) && p_d != 1.0 {
        return Err(Error::DetectionProbabilityTooLow(p_d));
    }
    Ok(())
}

/// Fraction of unlabeled samples whose soft label switched branch:
/// `(1/(m-n)) Σ |y_now - y_prev| / (2 p_d - 1)`.
///
/// For `p_d ∈ (1/2, 1]` both `1 - p_d` and `2 p_d - 1` are exact in binary
/// floating point, so each flip contributes exactly one.
pub fn label_change_rate(y_now: &[f64], y_prev: &[f64], p_d: f64) -> Result<f64> {
    check_pd(p_d)?;
    if y_now.len() != y_prev.len() {
        return Err(Error::DimensionMismatch {
            expected: y_prev.len(),
            got: y_now.len(),
        });
    }
    if y_now.is_empty() {
        return Err(Error::invalid("y_now", "no unlabeled samples"));
    }
    let low = 1.0 - p_d;
    if let Some(i) = y_now
        .iter()
        .chain(y_prev)
        .position(|&y| y != p_d && y != low)
    {
        return Err(Error::invalid(
            "y",
            alloc::format!("entry {} is neither p_d nor 1 - p_d", i % y_now.len()),
        ));
    }
    let gap = 2.0 * p_d - 1.0;
    let sum: f64 = y_now
        .iter()
        .zip(y_prev)
        .map(|(a, b)| ((a - b) / gap).abs())
        .sum();
    Ok(sum / y_now.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SadKlConfig {
    pub lof: LofConfig,
    pub beta: f64,
    /// Stop once the labeling change rate drops below this.
    pub epsilon: f64,
    pub max_iterations: usize,
    pub pretrain: PretrainConfig,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    /// Seeds batch order during hypersphere training.
    pub seed: u64,
}

impl Default for SadKlConfig {
    fn default() -> Self {
        SadKlConfig {
            lof: LofConfig { k: 100 },
            beta: 500.0,
            epsilon: 1e-4,
            max_iterations: 200,
            pretrain: PretrainConfig::default(),
            lr: 1e-5,
            weight_decay: 1e-6,
            batch_size: 200,
            seed: 0,
        }
    }
}

impl SadKlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lof.k == 0 {
            return Err(Error::invalid("lof_k", "must be at least 1"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid("beta", "must be positive and finite"));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::invalid("epsilon", "must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations", "must be positive"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid("lr", "must be finite and nonnegative"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid(
                "weight_decay",
                "must be finite and nonnegative",
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be positive"));
        }
        if self.pretrain.epochs == 0 {
            return Err(Error::invalid("pretrain_epochs", "must be positive"));
        }
        if !(self.pretrain.lr >= 0.0 && self.pretrain.lr.is_finite()) {
            return Err(Error::invalid(
                "pretrain_lr",
                "must be finite and nonnegative",
            ));
        }
        Ok(())
    }
}

/// Quantities fixed before the labeling loop starts.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSetup {
    /// Fit of the labeled-normal LOF scores.
    pub normal_fit: BurrFit,
    /// Fit of the unlabeled LOF scores on the pretrained embedding.
    pub unlabeled_fit: BurrFit,
    pub kl: f64,
    pub p_d: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub t: usize,
    pub eta: f64,
    pub delta: f64,
    /// Unlabeled samples whose label switched branch.
    pub flips: usize,
    pub mean_loss: f64,
    /// AUC of the anomaly score on the training set after the epoch; `None`
    /// when the training set has a single class.
    pub train_auc: Option<f64>,
    pub unlabeled_fit: BurrFit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub t: usize,
    pub p_d: f64,
    pub eta: f64,
    /// Training labels of every sample after the last labeling pass.
    pub labels: Vec<f64>,
    pub delta: f64,
    pub converged: bool,
    pub setup: DetectionSetup,
    pub history: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SadKlOutcome {
    pub encoder: Mlp,
    pub centroid: Centroid,
    pub state: TrainState,
    /// Reconstruction MSE per pretraining epoch, initial value first. Empty
    /// when training started from a given encoder.
    pub pretrain_mse: Vec<f64>,
}

/// Splits LOF scores into the labeled-normal and unlabeled populations.
pub fn partition_scores(ds: &Dataset, scores: &LofScores) -> (Vec<f64>, Vec<f64>) {
    let s = scores.as_slice();
    let normal = ds
        .labeled()
        .iter()
        .zip(s)
        .filter(|(x, _)| x.label_state == LabelState::LabeledNormal)
        .map(|(_, &v)| v)
        .collect();
    (normal, s[ds.n_labeled()..].to_vec())
}

fn embed_and_score(encoder: &Mlp, ds: &Dataset, lof: LofConfig) -> Result<LofScores> {
    let z = encoder.forward_all(ds.features())?;
    lof_scores(&z, lof)
}

/// Fits both score densities on the current embedding and maps their KL
/// divergence to a detection probability.
pub fn determine_detection_probability(
    encoder: &Mlp,
    ds: &Dataset,
    lof: LofConfig,
    beta: f64,
) -> Result<(DetectionSetup, LofScores)> {
    let scores = embed_and_score(encoder, ds, lof)?;
    let (s_r, s_u) = partition_scores(ds, &scores);
    let normal_fit = burr_fit_mle(&s_r)?;
    let unlabeled_fit = burr_fit_mle(&s_u)?;
    let kl = kl_burr(normal_fit.params, unlabeled_fit.params)?.max(0.0);
    let p_d = detection_probability(kl, beta)?;
    Ok((
        DetectionSetup {
            normal_fit,
            unlabeled_fit,
            kl,
            p_d,
        },
        scores,
    ))
}

/// Full procedure: pretrain, centroid, detection probability, labeling loop.
pub fn run_sadkl(ds: &Dataset, cfg: &SadKlConfig) -> Result<SadKlOutcome> {
    cfg.validate()?;
    let pre = pretrain_autoencoder(ds, &cfg.pretrain)?;
    let mut out = train_from_encoder(ds, pre.autoencoder.encoder, cfg)?;
    out.pretrain_mse = pre.mse;
    Ok(out)
}

/// The procedure after pretraining, starting from `encoder`.
pub fn train_from_encoder(
    ds: &Dataset,
    mut encoder: Mlp,
    cfg: &SadKlConfig,
) -> Result<SadKlOutcome> {
    cfg.validate()?;
    if encoder.input_dim() != ds.dim() {
        return Err(Error::DimensionMismatch {
            expected: encoder.input_dim(),
            got: ds.dim(),
        });
    }
    let centroid = compute_centroid(&encoder, ds)?;
    let (setup, initial_scores) = determine_detection_probability(&encoder, ds, cfg.lof, cfg.beta)?;
    let p_d = setup.p_d;

    let mut work = ds.clone();
    let truth = ds.ground_truth();
    let has_both = truth.iter().any(|t| t.is_abnormal()) && truth.iter().any(|t| !t.is_abnormal());
    let mut opt = Adam::new(&encoder, cfg.lr, cfg.weight_decay);
    let mut rng = rng_from_seed(cfg.seed);
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut prev: Option<Vec<f64>> = None;
    let mut initial = Some(initial_scores);
    // Embedding of the training set under the current encoder, shared by the
    // training AUC of one pass and the LOF scores of the next.
    let mut embedding: Option<Points> = None;
    let mut converged = false;

    for t in 1..=cfg.max_iterations {
        let mut step = || -> Result<IterationRecord> {
            // The first pass reuses the scores of the unchanged pretrained
            // embedding.
            let scores = match (initial.take(), embedding.take()) {
                (Some(s), _) => s,
                (None, Some(z)) => lof_scores(&z, cfg.lof)?,
                (None, None) => embed_and_score(&encoder, &work, cfg.lof)?,
            };
            let (_, s_u) = partition_scores(&work, &scores);
            let q = burr_fit_mle(&s_u)?;
            let eta = detection_threshold(p_d, q.params)?;
            let y_u = assign_labels(&s_u, eta, p_d)?;
            let (delta, flips) = match &prev {
                // Every label is new on the first pass.
                None => (1.0, y_u.len()),
                Some(y_prev) => {
                    let delta = label_change_rate(&y_u, y_prev, p_d)?;
                    let flips = y_u.iter().zip(y_prev).filter(|(a, b)| a != b).count();
                    assert_eq!(
                        delta,
                        flips as f64 / y_u.len() as f64,
                        "labeling change rate mismatch"
                    );
                    (delta, flips)
                }
            };
            work.set_unlabeled_labels(&y_u)?;
            let mean_loss = train_epoch(
                &mut encoder,
                &work,
                &centroid,
                &mut opt,
                cfg.batch_size,
                &mut rng,
            )
            .map_err(|e| match e {
                Error::Diverged { what, .. } => Error::Diverged { what, epoch: t },
                other => other,
            })?;
            let z = encoder.forward_all(work.features())?;
            let train_auc = if has_both {
                let s: Vec<f64> = z.rows().map(|p| squared_distance(p, &centroid.0)).collect();
                Some(roc_auc(&s, &truth)?.auc)
            } else {
                None
            };
            embedding = Some(z);
            prev = Some(y_u);
            Ok(IterationRecord {
                t,
                eta,
                delta,
                flips,
                mean_loss,
                train_auc,
                unlabeled_fit: q,
            })
        };
        let record = step().map_err(|e| e.at_iteration(t))?;
        let stop = record.delta < cfg.epsilon;
        history.push(record);
        if stop {
            converged = true;
            break;
        }
    }

    let last = history.last().expect("at least one iteration runs");
    let state = TrainState {
        t: last.t,
        p_d,
        eta: last.eta,
        labels: work.labels(),
        delta: last.delta,
        converged,
        setup,
        history,
    };
    Ok(SadKlOutcome {
        encoder,
        centroid,
        state,
        pretrain_mse: Vec::new(),
    })
}
