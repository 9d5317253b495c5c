//! Samples, datasets, the two-moons generator and the labeled/unlabeled split.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

#[allow(unused_imports)] // shadowed by the inherent methods when std is linked
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::{rng_from_seed, Error, Result};

/// Training label carried by unlabeled samples before the first labeling pass.
pub const UNSET_LABEL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LabelState {
    LabeledNormal,
    LabeledAbnormal,
    Unlabeled,
}

impl LabelState {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelState::LabeledNormal => "labeled_normal",
            LabelState::LabeledAbnormal => "labeled_abnormal",
            LabelState::Unlabeled => "unlabeled",
        }
    }

    pub fn is_labeled(self) -> bool {
        !matches!(self, LabelState::Unlabeled)
    }
}

impl fmt::Display for LabelState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "labeled_normal" => Ok(LabelState::LabeledNormal),
            "labeled_abnormal" => Ok(LabelState::LabeledAbnormal),
            "unlabeled" => Ok(LabelState::Unlabeled),
            _ => Err(Error::invalid(
                "label_state",
                alloc::format!("unknown value {s:?}"),
            )),
        }
    }
}

/// Held-out truth, used only for evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroundTruth {
    Normal,
    Abnormal,
}

impl GroundTruth {
    pub fn as_str(self) -> &'static str {
        match self {
            GroundTruth::Normal => "normal",
            GroundTruth::Abnormal => "abnormal",
        }
    }

    pub fn is_abnormal(self) -> bool {
        self == GroundTruth::Abnormal
    }
}

impl fmt::Display for GroundTruth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GroundTruth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(GroundTruth::Normal),
            "abnormal" => Ok(GroundTruth::Abnormal),
            _ => Err(Error::invalid(
                "ground_truth",
                alloc::format!("unknown value {s:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label_state: LabelState,
    pub ground_truth: GroundTruth,
    /// Current training label in `[0, 1]`.
    pub y: f64,
}

impl Sample {
    /// A sample with the label implied by its state: 1 for labeled normals,
    /// 0 for labeled abnormals, [`UNSET_LABEL`] otherwise.
    pub fn new(features: Vec<f64>, label_state: LabelState, ground_truth: GroundTruth) -> Self {
        let y = match label_state {
            LabelState::LabeledNormal => 1.0,
            LabelState::LabeledAbnormal => 0.0,
            LabelState::Unlabeled => UNSET_LABEL,
        };
        Sample {
            features,
            label_state,
            ground_truth,
            y,
        }
    }
}

/// Ordered samples; the first `n_labeled` carry labels, the rest do not.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    n_labeled: usize,
}

impl Dataset {
    /// Validates the labeled-prefix convention, a common feature dimension,
    /// finite features and labels consistent with each label state.
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("samples", "dataset is empty"));
        }
        let dim = samples[0].features.len();
        if dim == 0 {
            return Err(Error::invalid("features", "samples have no features"));
        }
        let n_labeled = samples
            .iter()
            .take_while(|s| s.label_state.is_labeled())
            .count();
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: s.features.len(),
                });
            }
            if s.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { index: i });
            }
            if i >= n_labeled && s.label_state.is_labeled() {
                return Err(Error::invalid(
                    "label_state",
                    alloc::format!("labeled sample {i} follows unlabeled samples"),
                ));
            }
            let ok = match s.label_state {
                LabelState::LabeledNormal => s.y == 1.0,
                LabelState::LabeledAbnormal => s.y == 0.0,
                LabelState::Unlabeled => (0.0..=1.0).contains(&s.y),
            };
            if !ok {
                return Err(Error::invalid(
                    "y",
                    alloc::format!(
                        "sample {i} has label {} inconsistent with {}",
                        s.y,
                        s.label_state
                    ),
                ));
            }
        }
        if n_labeled == samples.len() {
            return Err(Error::invalid(
                "label_state",
                "dataset has no unlabeled samples",
            ));
        }
        Ok(Dataset { samples, n_labeled })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_labeled(&self) -> usize {
        self.n_labeled
    }

    pub fn n_unlabeled(&self) -> usize {
        self.samples.len() - self.n_labeled
    }

    pub fn dim(&self) -> usize {
        self.samples[0].features.len()
    }

    pub fn labeled(&self) -> &[Sample] {
        &self.samples[..self.n_labeled]
    }

    pub fn unlabeled(&self) -> &[Sample] {
        &self.samples[self.n_labeled..]
    }

    pub fn features(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.samples.iter().map(|s| s.features.as_slice())
    }

    pub fn labels(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.y).collect()
    }

    pub fn ground_truth(&self) -> Vec<GroundTruth> {
        self.samples.iter().map(|s| s.ground_truth).collect()
    }

    pub fn count(&self, truth: GroundTruth) -> usize {
        self.samples
            .iter()
            .filter(|s| s.ground_truth == truth)
            .count()
    }

    /// Overwrites the training labels of the unlabeled portion.
    ///
    /// Labeled samples keep their fixed labels.
    pub fn set_unlabeled_labels(&mut self, y_u: &[f64]) -> Result<()> {
        if y_u.len() != self.n_unlabeled() {
            return Err(Error::DimensionMismatch {
                expected: self.n_unlabeled(),
                got: y_u.len(),
            });
        }
        if let Some(i) = y_u.iter().position(|y| !(0.0..=1.0).contains(y)) {
            return Err(Error::invalid(
                "y",
                alloc::format!(
                    "label {} at unlabeled position {i} is outside [0, 1]",
                    y_u[i]
                ),
            ));
        }
        for (s, &y) in self.samples[self.n_labeled..].iter_mut().zip(y_u) {
            s.y = y;
        }
        Ok(())
    }
}

/// Settings of the two-moons generator.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoMoons {
    pub n_samples: usize,
    /// How many of `n_samples` are uniform anomalies.
    pub n_abnormal: usize,
    /// Variance of the isotropic Gaussian noise added to the arcs.
    pub noise_variance: f64,
    /// Margin added on every side of the noise-free moons' bounding box to
    /// form the anomaly box, in units of the noise standard deviation.
    pub anomaly_margin_sigmas: f64,
    pub seed: u64,
}

/// Default anomaly-box margin, in noise standard deviations.
pub const DEFAULT_ANOMALY_MARGIN_SIGMAS: f64 = 10.0;

impl TwoMoons {
    pub fn new(n_samples: usize, n_abnormal: usize, noise_variance: f64, seed: u64) -> Self {
        TwoMoons {
            n_samples,
            n_abnormal,
            noise_variance,
            anomaly_margin_sigmas: DEFAULT_ANOMALY_MARGIN_SIGMAS,
            seed,
        }
    }

    /// Axis-aligned anomaly box as `([x_min, y_min], [x_max, y_max])`.
    pub fn anomaly_box(&self) -> ([f64; 2], [f64; 2]) {
        let margin = self.anomaly_margin_sigmas * self.noise_variance.sqrt();
        (
            [MOONS_MIN[0] - margin, MOONS_MIN[1] - margin],
            [MOONS_MAX[0] + margin, MOONS_MAX[1] + margin],
        )
    }
}

/// Bounding box of the noise-free moons.
pub const MOONS_MIN: [f64; 2] = [-1.0, -0.5];
pub const MOONS_MAX: [f64; 2] = [2.0, 1.0];

/// Point at angle `t ∈ [0, π]` on the upper ("big") moon or the lower
/// ("small") moon.
pub fn moon_point(upper: bool, t: f64) -> [f64; 2] {
    if upper {
        [t.cos(), t.sin()]
    } else {
        [1.0 - t.cos(), 0.5 - t.sin()]
    }
}

/// Generates two interleaved half-circles with Gaussian noise plus uniform
/// anomalies, shuffled, all unlabeled.
///
/// The upper arc is the unit half-circle centered at the origin, the lower arc
/// the unit half-circle centered at `(1, 0.5)`.
pub fn make_two_moons(cfg: &TwoMoons) -> Result<Dataset> {
    if cfg.n_samples == 0 {
        return Err(Error::invalid("n_samples", "must be positive"));
    }
    if cfg.n_abnormal > cfg.n_samples {
        return Err(Error::invalid("n_abnormal", "exceeds n_samples"));
    }
    if !(cfg.noise_variance >= 0.0 && cfg.noise_variance.is_finite()) {
        return Err(Error::invalid(
            "noise_variance",
            "must be finite and nonnegative",
        ));
    }
    if !(cfg.anomaly_margin_sigmas >= 0.0 && cfg.anomaly_margin_sigmas.is_finite()) {
        return Err(Error::invalid(
            "anomaly_margin_sigmas",
            "must be finite and nonnegative",
        ));
    }
    let mut rng = rng_from_seed(cfg.seed);
    let sigma = cfg.noise_variance.sqrt();
    let noise =
        Normal::new(0.0, sigma).map_err(|_| Error::invalid("noise_variance", "bad noise scale"))?;
    let (lo, hi) = cfg.anomaly_box();

    let n_normal = cfg.n_samples - cfg.n_abnormal;
    let mut samples = Vec::with_capacity(cfg.n_samples);
    for _ in 0..n_normal {
        let upper = rng.random_bool(0.5);
        let t = rng.random_range(0.0..=PI);
        let [x, y] = moon_point(upper, t);
        let features = if sigma > 0.0 {
            alloc::vec![x + noise.sample(&mut rng), y + noise.sample(&mut rng)]
        } else {
            alloc::vec![x, y]
        };
        samples.push(Sample::new(
            features,
            LabelState::Unlabeled,
            GroundTruth::Normal,
        ));
    }
    for _ in 0..cfg.n_abnormal {
        let features = alloc::vec![
            uniform_in(&mut rng, lo[0], hi[0]),
            uniform_in(&mut rng, lo[1], hi[1]),
        ];
        samples.push(Sample::new(
            features,
            LabelState::Unlabeled,
            GroundTruth::Abnormal,
        ));
    }
    samples.shuffle(&mut rng);
    Dataset::new(samples)
}

fn uniform_in(rng: &mut crate::Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Requested composition of a labeled/unlabeled split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub labeled: f64,
    pub labeled_abnormal: f64,
    pub unlabeled_abnormal: f64,
}

/// Exact sample counts implied by [`SplitFractions`] for `m` samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitCounts {
    pub labeled: usize,
    pub labeled_abnormal: usize,
    pub unlabeled: usize,
    pub unlabeled_abnormal: usize,
}

impl SplitCounts {
    pub fn abnormal(&self) -> usize {
        self.labeled_abnormal + self.unlabeled_abnormal
    }

    pub fn normal(&self) -> usize {
        self.labeled + self.unlabeled - self.abnormal()
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("labeled_frac", self.labeled),
            ("labeled_anom_frac", self.labeled_abnormal),
            ("unlabeled_anom_frac", self.unlabeled_abnormal),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(
                    name,
                    alloc::format!("{v} is outside [0, 1]"),
                ));
            }
        }
        Ok(())
    }

    /// Floor-rounded counts for a dataset of `m` samples.
    pub fn counts(&self, m: usize) -> Result<SplitCounts> {
        self.validate()?;
        let labeled = (self.labeled * m as f64).floor() as usize;
        if labeled >= m {
            return Err(Error::invalid(
                "labeled_frac",
                "leaves no unlabeled samples",
            ));
        }
        let unlabeled = m - labeled;
        Ok(SplitCounts {
            labeled,
            labeled_abnormal: (self.labeled_abnormal * labeled as f64).floor() as usize,
            unlabeled,
            unlabeled_abnormal: (self.unlabeled_abnormal * unlabeled as f64).floor() as usize,
        })
    }
}

/// Partitions `ds` into a labeled prefix and an unlabeled suffix with the
/// requested anomaly composition.
///
/// Ground truth must supply exactly the implied number of abnormal samples;
/// any surplus in one class is a shortfall in the other and is reported.
pub fn split_dataset(ds: &Dataset, fractions: SplitFractions, seed: u64) -> Result<Dataset> {
    let counts = fractions.counts(ds.len())?;
    let mut normal: Vec<usize> = Vec::new();
    let mut abnormal: Vec<usize> = Vec::new();
    for (i, s) in ds.samples().iter().enumerate() {
        match s.ground_truth {
            GroundTruth::Normal => normal.push(i),
            GroundTruth::Abnormal => abnormal.push(i),
        }
    }
    if abnormal.len() < counts.abnormal() {
        return Err(Error::Shortfall {
            class: "abnormal",
            needed: counts.abnormal(),
            available: abnormal.len(),
        });
    }
    if normal.len() < counts.normal() {
        return Err(Error::Shortfall {
            class: "normal",
            needed: counts.normal(),
            available: normal.len(),
        });
    }

    let mut rng = rng_from_seed(seed);
    normal.shuffle(&mut rng);
    abnormal.shuffle(&mut rng);
    let n_labeled_normal = counts.labeled - counts.labeled_abnormal;

    let mut labeled: Vec<Sample> = Vec::with_capacity(counts.labeled);
    for &i in &abnormal[..counts.labeled_abnormal] {
        labeled.push(relabel(&ds.samples()[i], LabelState::LabeledAbnormal));
    }
    for &i in &normal[..n_labeled_normal] {
        labeled.push(relabel(&ds.samples()[i], LabelState::LabeledNormal));
    }
    let mut unlabeled: Vec<Sample> = abnormal[counts.labeled_abnormal..]
        .iter()
        .chain(&normal[n_labeled_normal..])
        .map(|&i| relabel(&ds.samples()[i], LabelState::Unlabeled))
        .collect();
    labeled.shuffle(&mut rng);
    unlabeled.shuffle(&mut rng);
    labeled.append(&mut unlabeled);
    Dataset::new(labeled)
}

fn relabel(s: &Sample, state: LabelState) -> Sample {
    Sample::new(s.features.clone(), state, s.ground_truth)
}

/// Generates a two-moons pool with exactly the anomaly count the split needs
/// and splits it. `moons.n_abnormal` is replaced by that count.
pub fn two_moons_scenario(moons: &TwoMoons, fractions: SplitFractions) -> Result<Dataset> {
    let counts = fractions.counts(moons.n_samples)?;
    let pool = make_two_moons(&TwoMoons {
        n_abnormal: counts.abnormal(),
        ..moons.clone()
    })?;
    split_dataset(&pool, fractions, moons.seed.wrapping_add(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_fractions() -> SplitFractions {
        SplitFractions {
            labeled: 0.10,
            labeled_abnormal: 0.05,
            unlabeled_abnormal: 0.01,
        }
    }

    #[test]
    fn two_moons_size_and_dimension() {
        let ds = make_two_moons(&TwoMoons::new(10_000, 140, 0.3, 0)).unwrap();
        assert_eq!(ds.len(), 10_000);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.count(GroundTruth::Abnormal), 140);
    }

    #[test]
    fn zero_noise_lies_on_arcs() {
        let ds = make_two_moons(&TwoMoons::new(500, 0, 0.0, 7)).unwrap();
        for s in ds.samples() {
            let (x, y) = (s.features[0], s.features[1]);
            let upper = (x * x + y * y - 1.0).abs() < 1e-12 && y >= -1e-12;
            let lower =
                ((x - 1.0).powi(2) + (y - 0.5).powi(2) - 1.0).abs() < 1e-12 && y <= 0.5 + 1e-12;
            assert!(upper || lower, "({x}, {y}) is off both arcs");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = TwoMoons::new(300, 30, 0.3, 42);
        assert_eq!(make_two_moons(&cfg).unwrap(), make_two_moons(&cfg).unwrap());
        let other = TwoMoons {
            seed: 43,
            ..cfg.clone()
        };
        assert_ne!(
            make_two_moons(&cfg).unwrap(),
            make_two_moons(&other).unwrap()
        );
    }

    #[test]
    fn anomalies_stay_in_box() {
        let cfg = TwoMoons::new(2000, 1000, 0.3, 3);
        let (lo, hi) = cfg.anomaly_box();
        let ds = make_two_moons(&cfg).unwrap();
        for s in ds.samples().iter().filter(|s| s.ground_truth.is_abnormal()) {
            assert!(s.features[0] >= lo[0] && s.features[0] < hi[0]);
            assert!(s.features[1] >= lo[1] && s.features[1] < hi[1]);
        }
    }

    #[test]
    fn rejects_zero_samples() {
        assert!(make_two_moons(&TwoMoons::new(0, 0, 0.3, 0)).is_err());
    }

    #[test]
    fn default_split_counts() {
        let ds =
            two_moons_scenario(&TwoMoons::new(10_000, 0, 0.3, 0), default_fractions()).unwrap();
        assert_eq!(ds.n_labeled(), 1000);
        assert_eq!(ds.n_unlabeled(), 9000);
        let la = ds
            .labeled()
            .iter()
            .filter(|s| s.ground_truth.is_abnormal())
            .count();
        let ua = ds
            .unlabeled()
            .iter()
            .filter(|s| s.ground_truth.is_abnormal())
            .count();
        assert_eq!((la, ua), (50, 90));
        for s in ds.labeled() {
            match s.label_state {
                LabelState::LabeledNormal => {
                    assert_eq!((s.y, s.ground_truth), (1.0, GroundTruth::Normal))
                }
                LabelState::LabeledAbnormal => {
                    assert_eq!((s.y, s.ground_truth), (0.0, GroundTruth::Abnormal))
                }
                LabelState::Unlabeled => panic!("unlabeled sample in labeled prefix"),
            }
        }
        assert!(ds.unlabeled().iter().all(|s| s.y == UNSET_LABEL));
    }

    #[test]
    fn split_partitions_the_pool() {
        let pool = make_two_moons(&TwoMoons::new(1000, 14, 0.3, 5)).unwrap();
        let ds = split_dataset(&pool, default_fractions(), 9).unwrap();
        let key = |s: &Sample| (s.features[0].to_bits(), s.features[1].to_bits());
        let mut a: Vec<_> = pool.samples().iter().map(key).collect();
        let mut b: Vec<_> = ds.samples().iter().map(key).collect();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_splits() {
        let pool = make_two_moons(&TwoMoons::new(200, 2, 0.3, 1)).unwrap();
        let none = SplitFractions {
            labeled: 0.0,
            labeled_abnormal: 0.05,
            unlabeled_abnormal: 0.01,
        };
        let ds = split_dataset(&pool, none, 0).unwrap();
        assert_eq!(ds.n_labeled(), 0);

        let pool = make_two_moons(&TwoMoons::new(200, 1, 0.3, 1)).unwrap();
        let clean = SplitFractions {
            labeled: 0.1,
            labeled_abnormal: 0.0,
            unlabeled_abnormal: 0.01,
        };
        let ds = split_dataset(&pool, clean, 0).unwrap();
        assert!(ds.labeled().iter().all(|s| s.y == 1.0));
    }

    #[test]
    fn shortfall_names_the_class() {
        let pool = make_two_moons(&TwoMoons::new(1000, 3, 0.3, 1)).unwrap();
        match split_dataset(&pool, default_fractions(), 0) {
            Err(Error::Shortfall {
                class,
                needed,
                available,
            }) => {
                assert_eq!((class, needed, available), ("abnormal", 14, 3));
            }
            other => panic!("unexpected {other:?}"),
        }
        let bad = SplitFractions {
            labeled: 1.5,
            ..default_fractions()
        };
        assert!(matches!(
            split_dataset(&pool, bad, 0),
            Err(Error::InvalidParameter {
                name: "labeled_frac",
                ..
            })
        ));
    }

    #[test]
    fn unlabeled_labels_are_replaced_and_labeled_kept() {
        let mut ds =
            two_moons_scenario(&TwoMoons::new(100, 0, 0.3, 2), default_fractions()).unwrap();
        let before: Vec<f64> = ds.labeled().iter().map(|s| s.y).collect();
        let y_u = alloc::vec![0.96; ds.n_unlabeled()];
        ds.set_unlabeled_labels(&y_u).unwrap();
        assert!(ds.unlabeled().iter().all(|s| s.y == 0.96));
        assert_eq!(before, ds.labeled().iter().map(|s| s.y).collect::<Vec<_>>());
        assert!(ds.set_unlabeled_labels(&[0.5]).is_err());
    }
}
