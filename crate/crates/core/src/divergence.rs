//! KL divergence between Burr score densities, the KL to detection
//! probability map `P_D = exp(-KL / β)`, and the detection threshold.

use alloc::vec::Vec;

use crate::burr::{burr_log_pdf, burr_quantile, BurrParams};
use crate::{Error, Result};
#[allow(unused_imports)] // shadowed by the inherent methods when std is linked
use num_traits::Float;

/// Absolute error target of [`kl_burr`].
pub const KL_TOLERANCE: f64 = 1e-8;
/// Distance kept from the ends of the unit interval after `s = u / (1 - u)`.
const ENDPOINT_GAP: f64 = 1e-12;
const INITIAL_PANELS: usize = 128;
const MAX_DEPTH: u32 = 40;
/// Below this log-density the integrand is treated as zero.
const LOG_UNDERFLOW: f64 = -740.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionParams {
    pub beta: f64,
    pub p_d: f64,
    pub eta: f64,
}

impl DetectionParams {
    pub fn new(beta: f64, p_d: f64, eta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid("beta", "must be positive and finite"));
        }
        if !(p_d > 0.5 && p_d < 1.0) {
            return Err(Error::DetectionProbabilityTooLow(p_d));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::invalid("eta", "must be positive and finite"));
        }
        Ok(DetectionParams { beta, p_d, eta })
    }
}

/// Integrand of `KL(P‖Q)` in the compactified variable `u ∈ [0, 1)`.
fn kl_integrand(u: f64, p: BurrParams, q: BurrParams) -> f64 {
    let one_minus = 1.0 - u;
    let s = u / one_minus;
    let (Ok(lp), Ok(lq)) = (burr_log_pdf(s, p), burr_log_pdf(s, q)) else {
        return 0.0;
    };
    if lp < LOG_UNDERFLOW || !lp.is_finite() {
        return 0.0;
    }
    lp.exp() * (lp - lq) / (one_minus * one_minus)
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Adaptive Simpson quadrature over `[a, b]` to absolute tolerance `tol`.
///
/// Returns the estimate and the accumulated error estimate of panels that
/// hit the depth limit before meeting their share of the tolerance.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let mut stack: Vec<Panel> = Vec::with_capacity(INITIAL_PANELS + 2 * MAX_DEPTH as usize);
    let width = (b - a) / INITIAL_PANELS as f64;
    for i in (0..INITIAL_PANELS).rev() {
        let pa = a + i as f64 * width;
        let pb = if i + 1 == INITIAL_PANELS {
            b
        } else {
            pa + width
        };
        let (fa, fm, fb) = (f(pa), f(0.5 * (pa + pb)), f(pb));
        stack.push(Panel {
            a: pa,
            b: pb,
            fa,
            fm,
            fb,
            whole: simpson(pa, pb, fa, fm, fb),
            tol: tol / INITIAL_PANELS as f64,
            depth: 0,
        });
    }
    let mut total = 0.0;
    let mut unresolved = 0.0;
    while let Some(Panel {
        a,
        b,
        fa,
        fm,
        fb,
        whole,
        tol,
        depth,
    }) = stack.pop()
    {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(a, m, fa, flm, fm);
        let right = simpson(m, b, fm, frm, fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            total += left + right + delta / 15.0;
        } else if depth >= MAX_DEPTH {
            total += left + right + delta / 15.0;
            unresolved += delta.abs() / 15.0;
        } else {
            stack.push(Panel {
                a: m,
                b,
                fa: fm,
                fm: frm,
                fb,
                whole: right,
                tol: 0.5 * tol,
                depth: depth + 1,
            });
            stack.push(Panel {
                a,
                b: m,
                fa,
                fm: flm,
                fb: fm,
                whole: left,
                tol: 0.5 * tol,
                depth: depth + 1,
            });
        }
    }
    (total, unresolved)
}

/// `KL(P‖Q) = ∫₀^∞ p(s) ln(p(s)/q(s)) ds`.
pub fn kl_burr(p: BurrParams, q: BurrParams) -> Result<f64> {
    if p == q {
        return Ok(0.0);
    }
    let (value, unresolved) = adaptive_simpson(
        |u| kl_integrand(u, p, q),
        ENDPOINT_GAP,
        1.0 - ENDPOINT_GAP,
        KL_TOLERANCE,
    );
    if !value.is_finite() || unresolved > KL_TOLERANCE {
        return Err(Error::QuadratureNonConvergence {
            requested: KL_TOLERANCE,
            achieved: if value.is_finite() {
                unresolved
            } else {
                f64::INFINITY
            },
        });
    }
    Ok(value)
}

/// `P_D = exp(-kl / β)`; fails unless the result exceeds 1/2.
pub fn detection_probability(kl: f64, beta: f64) -> Result<f64> {
    if !(kl >= 0.0 && kl.is_finite()) {
        return Err(Error::invalid(
            "kl",
            alloc::format!("must be finite and nonnegative, got {kl}"),
        ));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid(
            "beta",
            alloc::format!("must be positive and finite, got {beta}"),
        ));
    }
    let p_d = (-kl / beta).exp();
    if p_d <= 0.5 {
        return Err(Error::DetectionProbabilityTooLow(p_d));
    }
    Ok(p_d)
}

/// `β = -kl / ln(P_D)`, the inverse of [`detection_probability`] in β.
pub fn beta_from_pd(kl: f64, target_pd: f64) -> Result<f64> {
    if !(kl > 0.0 && kl.is_finite()) {
        return Err(Error::invalid(
            "kl",
            alloc::format!("must be positive and finite, got {kl}"),
        ));
    }
    if !(target_pd > 0.5 && target_pd < 1.0) {
        return Err(Error::invalid(
            "target_pd",
            alloc::format!("{target_pd} is outside (0.5, 1)"),
        ));
    }
    Ok(-kl / target_pd.ln())
}

/// Threshold η with `F_q(η) = p_d`.
pub fn detection_threshold(p_d: f64, q: BurrParams) -> Result<f64> {
    burr_quantile(p_d, q)
        .map_err(|_| Error::invalid("p_d", alloc::format!("{p_d} is outside (0, 1)")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::burr::burr_cdf;
    use rand::Rng as _;

    fn p(c: f64, k: f64) -> BurrParams {
        BurrParams::new(c, k).unwrap()
    }

    #[test]
    fn self_divergence_is_zero() {
        assert!(kl_burr(p(2.0, 3.0), p(2.0, 3.0)).unwrap().abs() < 1e-10);
    }

    #[test]
    fn simpson_on_known_integrals() {
        let (v, e) = adaptive_simpson(|x| x.sin(), 0.0, core::f64::consts::PI, 1e-10);
        assert!((v - 2.0).abs() < 1e-10 && e == 0.0);
        let (v, _) = adaptive_simpson(|x| (-x * x).exp(), -8.0, 8.0, 1e-10);
        assert!((v - core::f64::consts::PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn closed_form_log_logistic_pair() {
        // KL(Burr(1,1) ‖ Burr(1,2)): with F = s/(1+s),
        // ∫ (1+s)^-2 [ln(1/(1+s)^2) - ln(2/(1+s)^3)] ds = ∫ (1+s)^-2 ln(1+s) ds - ln 2
        // and ∫₀^∞ ln(1+s)/(1+s)^2 ds = 1.
        let kl = kl_burr(p(1.0, 1.0), p(1.0, 2.0)).unwrap();
        let exact = 1.0 - core::f64::consts::LN_2;
        assert!((kl - exact).abs() < 1e-7, "{kl} vs {exact}");
    }

    #[test]
    fn asymmetric() {
        let a = kl_burr(p(1.0, 1.0), p(3.0, 3.0)).unwrap();
        let b = kl_burr(p(3.0, 3.0), p(1.0, 1.0)).unwrap();
        assert!(a > 0.0 && b > 0.0);
        assert!((a - b).abs() > 1e-3);
    }

    #[test]
    fn nonnegative_on_random_pairs() {
        let mut rng = crate::rng_from_seed(8);
        for _ in 0..1000 {
            let a = p(rng.random_range(1.0..6.0), rng.random_range(0.5..6.0));
            let b = p(rng.random_range(1.0..6.0), rng.random_range(0.5..6.0));
            assert!(kl_burr(a, b).unwrap() >= -1e-10);
        }
    }

    #[test]
    fn detection_probability_values() {
        assert_eq!(detection_probability(0.0, 500.0).unwrap(), 1.0);
        let two_moons = detection_probability(20.44, 500.0).unwrap();
        assert!((two_moons - 0.95994).abs() < 5e-6, "{two_moons}");
        let mnist = detection_probability(81.30, 2500.0).unwrap();
        assert!((mnist - 0.96801).abs() < 1e-5, "{mnist}");
        assert!(matches!(
            detection_probability(400.0, 500.0),
            Err(Error::DetectionProbabilityTooLow(_))
        ));
    }

    #[test]
    fn detection_probability_monotone() {
        let a = detection_probability(10.0, 500.0).unwrap();
        let b = detection_probability(20.0, 500.0).unwrap();
        let c = detection_probability(20.0, 800.0).unwrap();
        assert!(b < a && b < c);
    }

    #[test]
    fn beta_inverts_detection_probability() {
        let mut rng = crate::rng_from_seed(3);
        for _ in 0..1000 {
            let kl = rng.random_range(0.01..100.0);
            let target = rng.random_range(0.51..0.999);
            let beta = beta_from_pd(kl, target).unwrap();
            assert!((detection_probability(kl, beta).unwrap() - target).abs() < 1e-14);
        }
        assert!((beta_from_pd(81.30, 0.95).unwrap() - 1585.0).abs() < 1.0);
        assert!((beta_from_pd(20.44, 0.96).unwrap() - 500.7).abs() < 0.1);
        assert!(beta_from_pd(20.44, 0.4).is_err());
        assert!(beta_from_pd(20.44, 1.0).is_err());
    }

    #[test]
    fn threshold_values() {
        assert!((detection_threshold(0.5, p(1.0, 1.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!((detection_threshold(0.96, p(2.0, 3.0)).unwrap() - 1.3871).abs() < 5e-5);
        let mut rng = crate::rng_from_seed(4);
        let q = p(2.5, 1.5);
        let mut last = 0.0;
        for i in 1..100 {
            let eta = detection_threshold(i as f64 / 100.0, q).unwrap();
            assert!(eta > last);
            last = eta;
        }
        for _ in 0..100 {
            let q = p(rng.random_range(0.5..10.0), rng.random_range(0.2..10.0));
            let pd = rng.random_range(0.01..0.99);
            let eta = detection_threshold(pd, q).unwrap();
            assert!((burr_cdf(eta, q).unwrap() - pd).abs() < 1e-12);
        }
        assert!(detection_threshold(1.0, q).is_err());
    }
}
