//! Anomaly scores, ROC analysis and decision-boundary grids.

use alloc::vec::Vec;

use crate::data::GroundTruth;
use crate::lof::squared_distance;
use crate::net::{Centroid, Mlp, Trace};
use crate::{Error, Result};

/// `‖φ(x) - c‖²`; higher means more anomalous.
pub fn anomaly_score(encoder: &Mlp, c: &Centroid, x: &[f64]) -> Result<f64> {
    let z = encoder.forward(x)?;
    check_centroid(encoder, c)?;
    Ok(squared_distance(&z, &c.0))
}

fn check_centroid(encoder: &Mlp, c: &Centroid) -> Result<()> {
    if c.0.len() != encoder.output_dim() {
        return Err(Error::DimensionMismatch {
            expected: encoder.output_dim(),
            got: c.0.len(),
        });
    }
    Ok(())
}

pub fn anomaly_scores<'a>(
    encoder: &Mlp,
    c: &Centroid,
    rows: impl Iterator<Item = &'a [f64]>,
) -> Result<Vec<f64>> {
    check_centroid(encoder, c)?;
    let mut trace = Trace::default();
    rows.map(|x| {
        encoder.forward_traced(x, &mut trace)?;
        Ok(squared_distance(trace.output(), &c.0))
    })
    .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(false-positive rate, true-positive rate)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC curve and AUC with abnormal as the positive class.
///
/// The AUC is the Mann–Whitney statistic: the fraction of (normal, abnormal)
/// pairs ordered correctly, ties counting one half.
pub fn roc_auc(scores: &[f64], truth: &[GroundTruth]) -> Result<RocCurve> {
    if scores.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: scores.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::NonFinite { index: i });
    }
    let n_pos = truth.iter().filter(|t| t.is_abnormal()).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Average ranks (1-based) over tie groups; every value is a multiple of 1/2.
    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let avg_rank = (start + 1 + end) as f64 / 2.0;
        let pos_in_group = order[start..end]
            .iter()
            .filter(|&&i| truth[i].is_abnormal())
            .count();
        rank_sum_pos += avg_rank * pos_in_group as f64;
        start = end;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    let auc = u / (n_pos as f64 * n_neg as f64);

    let mut points = Vec::with_capacity(scores.len() + 1);
    points.push((0.0, 0.0));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = order.len();
    while i > 0 {
        let threshold = scores[order[i - 1]];
        while i > 0 && scores[order[i - 1]] == threshold {
            if truth[order[i - 1]].is_abnormal() {
                tp += 1;
            } else {
                fp += 1;
            }
            i -= 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    Ok(RocCurve { points, auc })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scaled {
    pub values: Vec<f64>,
    /// Set when the input had zero range; `values` are then all zero.
    pub degenerate: bool,
}

/// `(v - min) / (max - min)`.
pub fn minmax_scale(v: &[f64]) -> Result<Scaled> {
    if v.is_empty() {
        return Err(Error::invalid("v", "must be nonempty"));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if range == 0.0 {
        return Ok(Scaled {
            values: alloc::vec![0.0; v.len()],
            degenerate: true,
        });
    }
    Ok(Scaled {
        values: v
            .iter()
            .map(|x| ((x - lo) / range).clamp(0.0, 1.0))
            .collect(),
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryGrid {
    pub spec: GridSpec,
    /// Min-max normalized anomaly scores, row-major with `y` as the outer
    /// index.
    pub values: Vec<f64>,
    /// Contour level on the normalized scale; `None` for a flat field.
    pub level: Option<f64>,
    pub flat: bool,
}

impl BoundaryGrid {
    pub fn x(&self, i: usize) -> f64 {
        lerp(self.spec.x_range, i, self.spec.nx)
    }

    pub fn y(&self, j: usize) -> f64 {
        lerp(self.spec.y_range, j, self.spec.ny)
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.spec.nx + i]
    }
}

fn lerp((lo, hi): (f64, f64), i: usize, n: usize) -> f64 {
    lo + (hi - lo) * i as f64 / (n - 1) as f64
}

/// Default contour level: the lowest tenth of the normalized score range.
pub const DEFAULT_BOUNDARY_LEVEL: f64 = 0.1;

/// Anomaly scores on a regular grid over a 2-D input space, min-max
/// normalized, with the contour `level` that encloses the normal region.
pub fn decision_boundary_grid(
    encoder: &Mlp,
    c: &Centroid,
    spec: GridSpec,
    level: f64,
) -> Result<BoundaryGrid> {
    if encoder.input_dim() != 2 {
        return Err(Error::NotTwoDimensional(encoder.input_dim()));
    }
    if spec.nx < 2 || spec.ny < 2 {
        return Err(Error::invalid(
            "resolution",
            "need at least 2 points per axis",
        ));
    }
    if !(0.0..=1.0).contains(&level) {
        return Err(Error::invalid("level", "must lie in [0, 1]"));
    }
    let mut coords = Vec::with_capacity(spec.nx * spec.ny);
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            coords.push([
                lerp(spec.x_range, i, spec.nx),
                lerp(spec.y_range, j, spec.ny),
            ]);
        }
    }
    let raw = anomaly_scores(encoder, c, coords.iter().map(|p| p.as_slice()))?;
    let scaled = minmax_scale(&raw)?;
    Ok(BoundaryGrid {
        spec,
        values: scaled.values,
        level: (!scaled.degenerate).then_some(level),
        flat: scaled.degenerate,
    })
}
