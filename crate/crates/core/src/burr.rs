//! Burr Type-XII distribution on `(0, ∞)` without a scale parameter.
//!
//! ```text
//! F(s) = 1 - (1 + s^c)^(-k)
//! f(s) = k c s^(c-1) (1 + s^c)^(-k-1)
//! Q(u) = ((1 - u)^(-1/k) - 1)^(1/c)
//! ```
//!
//! All evaluations go through `x = c ln s` and `softplus(x) = ln(1 + e^x)` so
//! that large scores and large shapes neither overflow nor cancel.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by the inherent methods when std is linked
use num_traits::Float;
use rand::distr::Open01;
use rand::Rng as _;

use crate::{rng_from_seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurrParams {
    c: f64,
    k: f64,
}

impl BurrParams {
    pub fn new(c: f64, k: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid(
                "c",
                alloc::format!("shape must be positive and finite, got {c}"),
            ));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::invalid(
                "k",
                alloc::format!("shape must be positive and finite, got {k}"),
            ));
        }
        Ok(BurrParams { c, k })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn pdf(&self, s: f64) -> Result<f64> {
        burr_pdf(s, *self)
    }

    pub fn cdf(&self, s: f64) -> Result<f64> {
        burr_cdf(s, *self)
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        burr_quantile(u, *self)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_score(s: f64) -> Result<()> {
    if s.is_nan() || s < 0.0 {
        return Err(Error::NegativeScore(s));
    }
    Ok(())
}

/// Natural log of the density. `-∞` where the density is zero.
pub fn burr_log_pdf(s: f64, p: BurrParams) -> Result<f64> {
    check_score(s)?;
    let BurrParams { c, k } = p;
    if s == 0.0 {
        return if c < 1.0 {
            Err(Error::DivergentDensity { c })
        } else if c == 1.0 {
            Ok(k.ln())
        } else {
            Ok(f64::NEG_INFINITY)
        };
    }
    if s.is_infinite() {
        return Ok(f64::NEG_INFINITY);
    }
    let ln_s = s.ln();
    Ok(k.ln() + c.ln() + (c - 1.0) * ln_s - (k + 1.0) * softplus(c * ln_s))
}

pub fn burr_pdf(s: f64, p: BurrParams) -> Result<f64> {
    burr_log_pdf(s, p).map(f64::exp)
}

pub fn burr_cdf(s: f64, p: BurrParams) -> Result<f64> {
    check_score(s)?;
    if s == 0.0 {
        return Ok(0.0);
    }
    Ok(-(-p.k * softplus(p.c * s.ln())).exp_m1())
}

pub fn burr_quantile(u: f64, p: BurrParams) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::invalid(
            "u",
            alloc::format!("probability {u} is outside (0, 1)"),
        ));
    }
    Ok((-(-u).ln_1p() / p.k).exp_m1().powf(1.0 / p.c))
}

/// `n` inverse-CDF draws from the open unit interval stream of `seed`.
pub fn burr_sample(n: usize, p: BurrParams, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("n", "must be positive"));
    }
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|_| burr_quantile(rng.sample::<f64, _>(Open01), p))
        .collect()
}

/// Mean log-likelihood over `samples`.
pub fn mean_log_likelihood(samples: &[f64], p: BurrParams) -> Result<f64> {
    let mut sum = 0.0;
    for &s in samples {
        sum += burr_log_pdf(s, p)?;
    }
    Ok(sum / samples.len() as f64)
}

/// Minimum sample count accepted by the fitter and the KS test.
pub const MIN_SAMPLES: usize = 10;
pub const FIT_MAX_ITERATIONS: usize = 500;
pub const FIT_GRADIENT_TOLERANCE: f64 = 1e-8;
/// Relative rounding noise assumed for the mean log-likelihood.
const VALUE_NOISE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurrFit {
    pub params: BurrParams,
    /// Mean log-likelihood at `params`.
    pub log_likelihood: f64,
    pub iterations: usize,
    /// ∞-norm of the mean log-likelihood gradient in `(ln c, ln k)`.
    pub gradient_norm: f64,
}

/// Sufficient summaries of the samples for repeated likelihood evaluation.
struct Objective {
    ln_s: Vec<f64>,
    mean_ln_s: f64,
}

impl Objective {
    /// Profile log-likelihood at `ln c`, with `k` set to its closed-form
    /// maximizer `1 / mean ln(1 + s^c)`.
    ///
    /// Returns the value, the full gradient in `(ln c, ln k)` and `ln k`.
    fn profile(&self, log_c: f64) -> (f64, [f64; 2], f64) {
        let c = log_c.exp();
        let n = self.ln_s.len() as f64;
        let (mut sp_sum, mut sig_ln_sum) = (0.0, 0.0);
        for &l in &self.ln_s {
            let x = c * l;
            sp_sum += softplus(x);
            sig_ln_sum += sigmoid(x) * l;
        }
        let (mean_sp, mean_sig_ln) = (sp_sum / n, sig_ln_sum / n);
        let log_k = -mean_sp.ln();
        let k = log_k.exp();
        let value = log_k + log_c + (c - 1.0) * self.mean_ln_s - (k + 1.0) * mean_sp;
        let d_log_c = 1.0 + c * self.mean_ln_s - (k + 1.0) * c * mean_sig_ln;
        let d_log_k = 1.0 - k * mean_sp;
        (value, [d_log_c, d_log_k], log_k)
    }
}

/// Maximum-likelihood shapes.
///
/// For fixed `c` the likelihood is maximized in `k` in closed form, so the
/// search is gradient ascent over `ln c` on the profile likelihood, starting
/// from `c = 1`. Steps use a Barzilai–Borwein (secant) length followed by
/// Armijo backtracking.
pub fn burr_fit_mle(samples: &[f64]) -> Result<BurrFit> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::NotEnoughSamples {
            needed: MIN_SAMPLES,
            got: samples.len(),
        });
    }
    if let Some(i) = samples.iter().position(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::NonPositiveSample {
            index: i,
            value: samples[i],
        });
    }
    let ln_s: Vec<f64> = samples.iter().map(|s| s.ln()).collect();
    let mean_ln_s = ln_s.iter().sum::<f64>() / ln_s.len() as f64;
    let obj = Objective { ln_s, mean_ln_s };

    let mut log_c = 0.0f64;
    let (mut value, mut grad, mut log_k) = obj.profile(log_c);
    let fail =
        |log_c: f64, log_k: f64, grad: [f64; 2], iterations: usize| Error::FitNonConvergence {
            c: log_c.exp(),
            k: log_k.exp(),
            grad_norm: inf_norm(grad),
            iterations,
        };
    // Identical samples: the likelihood increases without bound in c.
    if obj.ln_s.iter().all(|&l| l == obj.ln_s[0]) {
        return Err(fail(log_c, log_k, grad, 0));
    }

    let mut prev: Option<(f64, f64)> = None;
    for it in 0..FIT_MAX_ITERATIONS {
        if inf_norm(grad) < FIT_GRADIENT_TOLERANCE {
            return Ok(BurrFit {
                params: BurrParams::new(log_c.exp(), log_k.exp())?,
                log_likelihood: value,
                iterations: it,
                gradient_norm: inf_norm(grad),
            });
        }
        let g = grad[0];
        let mut step = match prev {
            Some((x_prev, g_prev)) if g != g_prev => ((log_c - x_prev) / (g - g_prev)).abs(),
            _ => 1.0,
        }
        .clamp(1e-10, 1e6);
        // Near the optimum the Armijo gain drops below the rounding noise of
        // the objective. A step is then also accepted if the value holds to
        // within that noise and the gradient shrinks (approximate Wolfe).
        let noise = VALUE_NOISE * (1.0 + value.abs());
        let mut accepted = None;
        for _ in 0..80 {
            let cand = log_c + step * g;
            let evaluated = obj.profile(cand);
            let (v, g_cand) = (evaluated.0, evaluated.1[0]);
            let armijo = v >= value + 1e-4 * step * g * g;
            let approx_wolfe = v >= value - noise && g_cand.abs() < g.abs();
            if v.is_finite() && (armijo || approx_wolfe) {
                accepted = Some((cand, evaluated));
                break;
            }
            step *= 0.5;
        }
        let Some((next, evaluated)) = accepted else {
            return Err(fail(log_c, log_k, grad, it));
        };
        prev = Some((log_c, g));
        log_c = next;
        (value, grad, log_k) = evaluated;
        // Shapes running off towards 0 or ∞ mean the likelihood has no
        // interior maximum.
        if !log_c.is_finite() || !log_k.is_finite() || log_c.abs() > 18.0 || log_k.abs() > 18.0 {
            return Err(fail(log_c, log_k, grad, it + 1));
        }
    }
    Err(fail(log_c, log_k, grad, FIT_MAX_ITERATIONS))
}

fn inf_norm(g: [f64; 2]) -> f64 {
    g[0].abs().max(g[1].abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    /// Supremum distance between the empirical and model CDFs.
    pub statistic: f64,
    /// Asymptotic p-value from the Kolmogorov distribution.
    pub p_value: f64,
}

/// One-sample Kolmogorov–Smirnov test of `samples` against `p`.
pub fn ks_statistic(samples: &[f64], p: BurrParams) -> Result<KsResult> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::NotEnoughSamples {
            needed: MIN_SAMPLES,
            got: samples.len(),
        });
    }
    let mut sorted = samples.to_vec();
    if let Some(i) = sorted.iter().position(|s| s.is_nan()) {
        return Err(Error::NonFinite { index: i });
    }
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &s) in sorted.iter().enumerate() {
        let f = burr_cdf(s, p)?;
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sqrt_n = n.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_survival(lambda),
    })
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    use core::f64::consts::PI;
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Theta-function form, fast for small λ.
        let y = -PI * PI / (8.0 * lambda * lambda);
        let cdf = (2.0 * PI).sqrt() / lambda
            * (1..=6)
                .map(|j| (((2 * j - 1) * (2 * j - 1)) as f64 * y).exp())
                .sum::<f64>();
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let q = (-2.0 * lambda * lambda).exp();
        let mut sum = 0.0;
        let mut sign = 1.0;
        for j in 1..=100 {
            let term = q.powi(j * j);
            sum += sign * term;
            if term < 1e-17 {
                break;
            }
            sign = -sign;
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}
