//! Fully connected ELU networks trained by backpropagation and Adam: the
//! autoencoder used for pretraining, the hypersphere centroid, and the soft
//! label objective
//!
//! ```text
//! L = (1/m) Σ [ y d(φ(x)) + (1 - y)(1 - d(φ(x))) ] + (λ/2) Σ_j ‖W_j‖²_F
//! d(z) = ‖z - c‖² / (‖z - c‖² + 1)
//! ```

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by the inherent methods when std is linked
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::data::{Dataset, LabelState, Sample, UNSET_LABEL};
use crate::lof::Points;
use crate::{rng_from_seed, Error, Result, Rng};

/// Dense layer, `out = W x + b` with `W` stored row-major (`n_out × n_in`).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Layer {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            bias: vec![0.0; n_out],
        }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in self
            .weights
            .chunks_exact(self.n_in)
            .zip(&self.bias)
            .enumerate()
        {
            out[o] = b + dot(row, x);
        }
    }
}

/// Dot product with eight independent partial sums.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    let mut acc = [0.0; 8];
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    acc.iter().sum::<f64>() + tail
}

#[inline]
pub fn elu(z: f64) -> f64 {
    if z >= 0.0 {
        z
    } else {
        z.exp_m1()
    }
}

#[inline]
fn elu_grad(z: f64) -> f64 {
    if z >= 0.0 {
        1.0
    } else {
        z.exp()
    }
}

/// Multilayer perceptron with ELU on hidden layers and a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Activations recorded by a forward pass for backpropagation.
#[derive(Debug, Default)]
pub struct Trace {
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
    /// Pre-activations of each layer.
    pre: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map_or(&[], |v| v.as_slice())
    }
}

impl Mlp {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("layers", "network has no layers"));
        }
        for l in &layers {
            if l.n_in == 0
                || l.n_out == 0
                || l.weights.len() != l.n_in * l.n_out
                || l.bias.len() != l.n_out
            {
                return Err(Error::invalid("layers", "inconsistent layer shape"));
            }
        }
        for pair in layers.windows(2) {
            if pair[0].n_out != pair[1].n_in {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].n_out,
                    got: pair[1].n_in,
                });
            }
        }
        Ok(Mlp { layers })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::invalid("dims", "need an input and an output width"));
        }
        Mlp::from_layers(dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect())
    }

    /// Glorot-uniform weights and zero biases.
    pub fn random(dims: &[usize], rng: &mut Rng) -> Result<Self> {
        let mut m = Mlp::zeros(dims)?;
        for l in &mut m.layers {
            let limit = (6.0 / (l.n_in + l.n_out) as f64).sqrt();
            for w in &mut l.weights {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(m)
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].n_in];
        d.extend(self.layers.iter().map(|l| l.n_out));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out
    }

    pub fn zeros_like(&self) -> Self {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.n_in, l.n_out))
                .collect(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Every parameter, layer by layer, weights before biases.
    pub fn params(&self) -> impl Iterator<Item = &f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    /// `Σ_j ‖W_j‖²_F`, biases excluded.
    pub fn weight_sq_norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.weights.iter().map(|w| w * w).sum::<f64>())
            .sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut trace = Trace::default();
        self.forward_traced(x, &mut trace)?;
        Ok(trace.output().to_vec())
    }

    /// Forward pass recording activations; reuses the trace's buffers.
    pub fn forward_traced(&self, x: &[f64], trace: &mut Trace) -> Result<()> {
        self.check_input(x)?;
        let n = self.layers.len();
        trace.acts.resize_with(n + 1, Vec::new);
        trace.pre.resize_with(n, Vec::new);
        trace.acts[0].clear();
        trace.acts[0].extend_from_slice(x);
        for (l, layer) in self.layers.iter().enumerate() {
            let z = &mut trace.pre[l];
            z.resize(layer.n_out, 0.0);
            layer.apply(&trace.acts[l], z);
            let a = &mut trace.acts[l + 1];
            a.clear();
            if l + 1 == n {
                a.extend_from_slice(z);
            } else {
                a.extend(z.iter().map(|&v| elu(v)));
            }
        }
        Ok(())
    }

    /// Accumulates `∂L/∂θ` into `grads` given `∂L/∂output`, returning
    /// `∂L/∂input`.
    pub fn backward(&self, trace: &Trace, grad_out: &[f64], grads: &mut Mlp) -> Vec<f64> {
        let n = self.layers.len();
        let mut delta = grad_out.to_vec();
        for l in (0..n).rev() {
            let layer = &self.layers[l];
            if l + 1 < n {
                for (d, &z) in delta.iter_mut().zip(&trace.pre[l]) {
                    *d *= elu_grad(z);
                }
            }
            let input = &trace.acts[l];
            let g = &mut grads.layers[l];
            for (o, &d) in delta.iter().enumerate() {
                g.bias[o] += d;
                if d != 0.0 {
                    for (gw, &a) in g.weights[o * layer.n_in..(o + 1) * layer.n_in]
                        .iter_mut()
                        .zip(input)
                    {
                        *gw += d * a;
                    }
                }
            }
            let mut grad_in = vec![0.0; layer.n_in];
            for (row, &d) in layer.weights.chunks_exact(layer.n_in).zip(&delta) {
                if d != 0.0 {
                    for (gi, &w) in grad_in.iter_mut().zip(row) {
                        *gi += w * d;
                    }
                }
            }
            delta = grad_in;
        }
        delta
    }

    /// Adds `λ W` to the weight gradients.
    fn add_weight_decay(&self, grads: &mut Mlp, lambda: f64) {
        if lambda == 0.0 {
            return;
        }
        for (g, l) in grads.layers.iter_mut().zip(&self.layers) {
            for (gw, w) in g.weights.iter_mut().zip(&l.weights) {
                *gw += lambda * w;
            }
        }
    }

    /// Encodes every row of `points`.
    pub fn forward_all<'a>(&self, rows: impl Iterator<Item = &'a [f64]>) -> Result<Points> {
        let mut trace = Trace::default();
        let mut coords = Vec::new();
        for x in rows {
            self.forward_traced(x, &mut trace)?;
            coords.extend_from_slice(trace.output());
        }
        Points::new(self.output_dim(), coords)
    }
}

/// Hidden widths and latent size of the encoder; the decoder mirrors them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub latent: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            input: 2,
            hidden: vec![100, 100],
            latent: 2,
        }
    }
}

impl Architecture {
    pub fn encoder_dims(&self) -> Vec<usize> {
        let mut d = vec![self.input];
        d.extend(&self.hidden);
        d.push(self.latent);
        d
    }

    pub fn decoder_dims(&self) -> Vec<usize> {
        let mut d = self.encoder_dims();
        d.reverse();
        d
    }
}

/// Latent-space center of the hypersphere.
#[derive(Debug, Clone, PartialEq)]
pub struct Centroid(pub Vec<f64>);

/// Coordinates closer to zero than this are moved to ±0.1.
pub const CENTROID_EPS: f64 = 1e-6;

/// Mean embedding of the labeled-normal samples, with near-zero coordinates
/// pushed to ±0.1 so the hypersphere cannot collapse onto the origin.
pub fn compute_centroid(encoder: &Mlp, ds: &Dataset) -> Result<Centroid> {
    let normals = ds
        .labeled()
        .iter()
        .filter(|s| s.label_state == LabelState::LabeledNormal);
    let z = encoder.forward_all(normals.map(|s| s.features.as_slice()))?;
    centroid_from_embeddings(&z)
}

pub fn centroid_from_embeddings(z: &Points) -> Result<Centroid> {
    if z.is_empty() {
        return Err(Error::NoLabeledNormal);
    }
    let mut c = vec![0.0; z.dim()];
    for row in z.rows() {
        for (ci, v) in c.iter_mut().zip(row) {
            *ci += v;
        }
    }
    let n = z.len() as f64;
    for ci in &mut c {
        *ci /= n;
        if ci.abs() < CENTROID_EPS {
            *ci = if *ci < 0.0 { -0.1 } else { 0.1 };
        }
    }
    Ok(Centroid(c))
}

/// Geman–McClure transform of the squared distance to the centroid, in `[0, 1)`.
pub fn geman_mcclure(z: &[f64], c: &Centroid) -> f64 {
    let r = crate::lof::squared_distance(z, &c.0);
    r / (r + 1.0)
}

fn check_labels<'a>(batch: impl Iterator<Item = (usize, &'a Sample)>) -> Result<()> {
    for (i, s) in batch {
        if !(0.0..=1.0).contains(&s.y) {
            return Err(Error::invalid(
                "y",
                alloc::format!("sample {i} has label {}", s.y),
            ));
        }
        if s.label_state == LabelState::Unlabeled && s.y == UNSET_LABEL {
            return Err(Error::UnsetLabel { index: i });
        }
    }
    Ok(())
}

/// Soft-label hypersphere objective over `batch`, including weight decay.
pub fn sadkl_loss(encoder: &Mlp, batch: &[Sample], c: &Centroid, lambda: f64) -> Result<f64> {
    check_labels(batch.iter().enumerate())?;
    let mut sum = 0.0;
    for s in batch {
        let z = encoder.forward(&s.features)?;
        let d = geman_mcclure(&z, c);
        sum += s.y * d + (1.0 - s.y) * (1.0 - d);
    }
    Ok(sum / batch.len() as f64 + 0.5 * lambda * encoder.weight_sq_norm())
}

/// [`sadkl_loss`] over `ds.samples()[idx]` and its gradient.
pub fn sadkl_loss_and_grad(
    encoder: &Mlp,
    ds: &Dataset,
    idx: &[usize],
    c: &Centroid,
    lambda: f64,
    trace: &mut Trace,
) -> Result<(f64, Mlp)> {
    let samples = ds.samples();
    check_labels(idx.iter().map(|&i| (i, &samples[i])))?;
    if c.0.len() != encoder.output_dim() {
        return Err(Error::DimensionMismatch {
            expected: encoder.output_dim(),
            got: c.0.len(),
        });
    }
    let mut grads = encoder.zeros_like();
    let inv_b = 1.0 / idx.len() as f64;
    let mut sum = 0.0;
    let mut grad_out = vec![0.0; encoder.output_dim()];
    for &i in idx {
        let s = &samples[i];
        encoder.forward_traced(&s.features, trace)?;
        let z = trace.output();
        let r = crate::lof::squared_distance(z, &c.0);
        let d = r / (r + 1.0);
        sum += s.y * d + (1.0 - s.y) * (1.0 - d);
        // ∂/∂z [(1 - y) + (2y - 1) d] = (2y - 1) · 2(z - c) / (r + 1)²
        let coef = (2.0 * s.y - 1.0) * 2.0 / ((r + 1.0) * (r + 1.0)) * inv_b;
        for ((g, zi), ci) in grad_out.iter_mut().zip(z).zip(&c.0) {
            *g = coef * (zi - ci);
        }
        encoder.backward(trace, &grad_out, &mut grads);
    }
    encoder.add_weight_decay(&mut grads, lambda);
    Ok((sum * inv_b + 0.5 * lambda * encoder.weight_sq_norm(), grads))
}

/// Encoder/decoder pair trained on reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    pub encoder: Mlp,
    pub decoder: Mlp,
}

impl Autoencoder {
    pub fn random(arch: &Architecture, rng: &mut Rng) -> Result<Self> {
        Ok(Autoencoder {
            encoder: Mlp::random(&arch.encoder_dims(), rng)?,
            decoder: Mlp::random(&arch.decoder_dims(), rng)?,
        })
    }

    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.decoder.forward(&self.encoder.forward(x)?)
    }

    pub fn weight_sq_norm(&self) -> f64 {
        self.encoder.weight_sq_norm() + self.decoder.weight_sq_norm()
    }
}

/// Mean over samples and coordinates of the squared reconstruction error.
pub fn reconstruction_mse<'a>(
    ae: &Autoencoder,
    rows: impl Iterator<Item = &'a [f64]>,
) -> Result<f64> {
    let (mut sum, mut count) = (0.0, 0usize);
    for x in rows {
        let r = ae.reconstruct(x)?;
        sum += r.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        count += x.len();
    }
    Ok(sum / count as f64)
}

/// Reconstruction MSE plus `(λ/2) Σ ‖W‖²` over `rows[idx]`, with gradients
/// for encoder and decoder.
pub fn reconstruction_loss_and_grad(
    ae: &Autoencoder,
    rows: &[&[f64]],
    idx: &[usize],
    lambda: f64,
) -> Result<(f64, Autoencoder)> {
    let mut g_enc = ae.encoder.zeros_like();
    let mut g_dec = ae.decoder.zeros_like();
    let (mut t_enc, mut t_dec) = (Trace::default(), Trace::default());
    let dim = ae.encoder.input_dim();
    let scale = 1.0 / (idx.len() * dim) as f64;
    let mut sum = 0.0;
    for &i in idx {
        let x = rows[i];
        ae.encoder.forward_traced(x, &mut t_enc)?;
        ae.decoder.forward_traced(t_enc.output(), &mut t_dec)?;
        let grad_out: Vec<f64> = t_dec
            .output()
            .iter()
            .zip(x)
            .map(|(r, v)| {
                sum += (r - v) * (r - v);
                2.0 * (r - v) * scale
            })
            .collect();
        let g_latent = ae.decoder.backward(&t_dec, &grad_out, &mut g_dec);
        ae.encoder.backward(&t_enc, &g_latent, &mut g_enc);
    }
    ae.encoder.add_weight_decay(&mut g_enc, lambda);
    ae.decoder.add_weight_decay(&mut g_dec, lambda);
    let loss = sum * scale + 0.5 * lambda * ae.weight_sq_norm();
    Ok((
        loss,
        Autoencoder {
            encoder: g_enc,
            decoder: g_dec,
        },
    ))
}

/// Adam state for one network: moment estimates shaped like its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Weight-decay coefficient λ of the objective.
    pub weight_decay: f64,
    pub step: u64,
    m: Mlp,
    v: Mlp,
}

impl Adam {
    pub fn new(model: &Mlp, lr: f64, weight_decay: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            m: model.zeros_like(),
            v: model.zeros_like(),
        }
    }

    pub fn update(&mut self, model: &mut Mlp, grads: &Mlp) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (((p, g), m), v) in model
            .params_mut()
            .zip(grads.params())
            .zip(self.m.params_mut())
            .zip(self.v.params_mut())
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
        }
    }
}

fn shuffled_batches(n: usize, batch_size: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
        .chunks(batch_size.max(1))
        .map(<[usize]>::to_vec)
        .collect()
}

/// One pass of minibatch Adam on the soft-label objective; returns the mean
/// batch loss.
pub fn train_epoch(
    encoder: &mut Mlp,
    ds: &Dataset,
    c: &Centroid,
    opt: &mut Adam,
    batch_size: usize,
    rng: &mut Rng,
) -> Result<f64> {
    if batch_size == 0 {
        return Err(Error::invalid("batch_size", "must be positive"));
    }
    let mut trace = Trace::default();
    let batches = shuffled_batches(ds.len(), batch_size, rng);
    let mut total = 0.0;
    for idx in &batches {
        let (loss, grads) = sadkl_loss_and_grad(encoder, ds, idx, c, opt.weight_decay, &mut trace)?;
        if !loss.is_finite() || grads.params().any(|g| !g.is_finite()) {
            return Err(Error::Diverged {
                what: "loss",
                epoch: 0,
            });
        }
        opt.update(encoder, &grads);
        total += loss;
    }
    Ok(total / batches.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainConfig {
    pub arch: Architecture,
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            arch: Architecture::default(),
            epochs: 50,
            lr: 1e-3,
            weight_decay: 1e-6,
            batch_size: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pretrained {
    pub autoencoder: Autoencoder,
    /// Reconstruction MSE over all samples before training and after each
    /// epoch.
    pub mse: Vec<f64>,
}

/// Trains an autoencoder on every sample, labeled or not.
pub fn pretrain_autoencoder(ds: &Dataset, cfg: &PretrainConfig) -> Result<Pretrained> {
    if cfg.epochs == 0 {
        return Err(Error::invalid("epochs", "must be positive"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch_size", "must be positive"));
    }
    if cfg.arch.input != ds.dim() {
        return Err(Error::DimensionMismatch {
            expected: cfg.arch.input,
            got: ds.dim(),
        });
    }
    let mut rng = rng_from_seed(cfg.seed);
    let mut ae = Autoencoder::random(&cfg.arch, &mut rng)?;
    let mut opt_enc = Adam::new(&ae.encoder, cfg.lr, cfg.weight_decay);
    let mut opt_dec = Adam::new(&ae.decoder, cfg.lr, cfg.weight_decay);
    let rows: Vec<&[f64]> = ds.features().collect();
    let mut mse = vec![reconstruction_mse(&ae, rows.iter().copied())?];
    for epoch in 1..=cfg.epochs {
        for idx in shuffled_batches(rows.len(), cfg.batch_size, &mut rng) {
            let (loss, g) = reconstruction_loss_and_grad(&ae, &rows, &idx, cfg.weight_decay)?;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    what: "reconstruction loss",
                    epoch,
                });
            }
            opt_enc.update(&mut ae.encoder, &g.encoder);
            opt_dec.update(&mut ae.decoder, &g.decoder);
        }
        let e = reconstruction_mse(&ae, rows.iter().copied())?;
        if !e.is_finite() {
            return Err(Error::Diverged {
                what: "reconstruction loss",
                epoch,
            });
        }
        mse.push(e);
    }
    Ok(Pretrained {
        autoencoder: ae,
        mse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{GroundTruth, Sample};

    fn labeled_ds(rows: &[[f64; 2]], ys: &[f64]) -> Dataset {
        let mut samples: Vec<Sample> = rows
            .iter()
            .zip(ys)
            .map(|(r, &y)| {
                let mut s = Sample::new(r.to_vec(), LabelState::Unlabeled, GroundTruth::Normal);
                s.y = y;
                s
            })
            .collect();
        samples.insert(
            0,
            Sample::new(
                vec![0.0, 0.0],
                LabelState::LabeledNormal,
                GroundTruth::Normal,
            ),
        );
        Dataset::new(samples).unwrap()
    }

    /// Independent transcription: explicit loops, no traces.
    #[allow(clippy::needless_range_loop)]
    fn reference_forward(m: &Mlp, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for (l, layer) in m.layers.iter().enumerate() {
            let mut z = vec![0.0; layer.n_out];
            for o in 0..layer.n_out {
                let mut acc = layer.bias[o];
                for i in 0..layer.n_in {
                    acc += layer.weights[o * layer.n_in + i] * a[i];
                }
                z[o] = if l + 1 < m.layers.len() && acc < 0.0 {
                    acc.exp() - 1.0
                } else {
                    acc
                };
            }
            a = z;
        }
        a
    }

    #[test]
    fn zero_model_outputs_zero() {
        let m = Mlp::zeros(&[3, 5, 2]).unwrap();
        assert_eq!(m.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layer_passes_nonnegative_input() {
        let mut m = Mlp::zeros(&[3, 3, 3]).unwrap();
        for l in &mut m.layers {
            for i in 0..3 {
                l.weights[i * 3 + i] = 1.0;
            }
        }
        assert_eq!(m.forward(&[0.5, 0.0, 2.0]).unwrap(), vec![0.5, 0.0, 2.0]);
        assert_eq!(elu(-1.0), (-1.0f64).exp() - 1.0);
    }

    #[test]
    fn forward_matches_transcription() {
        let mut rng = rng_from_seed(1);
        let m = Mlp::random(&[2, 7, 5, 3], &mut rng).unwrap();
        for _ in 0..20 {
            let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let a = m.forward(&x).unwrap();
            let b = reference_forward(&m, &x);
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-12);
            }
        }
        assert!(matches!(
            m.forward(&[1.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn centroid_paths() {
        let z = Points::from_rows(&[[0.3, -2.0]]).unwrap();
        assert_eq!(
            centroid_from_embeddings(&z).unwrap(),
            Centroid(vec![0.3, -2.0])
        );
        let z = Points::from_rows(&[[1.0, -1.0], [-1.0, 1.0]]).unwrap();
        assert_eq!(
            centroid_from_embeddings(&z).unwrap(),
            Centroid(vec![0.1, 0.1])
        );
        let z = Points::from_rows(&[[-4e-7, 1.0], [0.0, 1.0]]).unwrap();
        assert_eq!(
            centroid_from_embeddings(&z).unwrap(),
            Centroid(vec![-0.1, 1.0])
        );

        let mut rng = rng_from_seed(2);
        let rows: Vec<[f64; 3]> = (0..100)
            .map(|_| {
                [
                    rng.random_range(1.0..2.0),
                    rng.random_range(-2.0..-1.0),
                    rng.random_range(3.0..4.0),
                ]
            })
            .collect();
        let c = centroid_from_embeddings(&Points::from_rows(&rows).unwrap()).unwrap();
        for d in 0..3 {
            let mean = rows.iter().map(|r| r[d]).sum::<f64>() / 100.0;
            assert!((c.0[d] - mean).abs() < 1e-12);
        }
        assert_eq!(
            centroid_from_embeddings(&Points::new(2, vec![]).unwrap()),
            Err(Error::NoLabeledNormal)
        );
    }

    #[test]
    fn geman_mcclure_values() {
        let c = Centroid(vec![1.0, 2.0]);
        assert_eq!(geman_mcclure(&[1.0, 2.0], &c), 0.0);
        assert_eq!(geman_mcclure(&[2.0, 2.0], &c), 0.5);
        let mut last = -1.0;
        for i in 0..200 {
            let d = geman_mcclure(&[1.0 + i as f64 * 0.5, 2.0], &c);
            assert!(d > last && d < 1.0);
            last = d;
        }
    }

    #[test]
    fn loss_extremes() {
        let m = Mlp::zeros(&[2, 4, 2]).unwrap();
        let c = Centroid(vec![0.0, 0.0]);
        let mk = |y: f64| {
            let mut s = Sample::new(vec![1.0, 2.0], LabelState::Unlabeled, GroundTruth::Normal);
            s.y = y;
            s
        };
        assert_eq!(sadkl_loss(&m, &[mk(1.0), mk(1.0)], &c, 0.0).unwrap(), 0.0);
        assert_eq!(sadkl_loss(&m, &[mk(0.0), mk(0.0)], &c, 0.0).unwrap(), 1.0);
        assert_eq!(
            sadkl_loss(&m, &[mk(1.0), mk(UNSET_LABEL)], &c, 0.0),
            Err(Error::UnsetLabel { index: 1 })
        );
    }

    #[test]
    fn loss_matches_batched_path() {
        let mut rng = rng_from_seed(3);
        let m = Mlp::random(&[2, 6, 2], &mut rng).unwrap();
        let ds = labeled_ds(&[[0.2, 1.0], [-1.0, 0.5], [2.0, -0.3]], &[0.9, 0.1, 0.9]);
        let c = Centroid(vec![0.1, -0.2]);
        let direct = sadkl_loss(&m, ds.samples(), &c, 0.01).unwrap();
        let (batched, _) =
            sadkl_loss_and_grad(&m, &ds, &[0, 1, 2, 3], &c, 0.01, &mut Trace::default()).unwrap();
        assert!((direct - batched).abs() < 1e-14);
    }

    fn max_rel_err(analytic: &Mlp, numeric: &[f64]) -> f64 {
        analytic
            .params()
            .zip(numeric)
            .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
            .fold(0.0, f64::max)
    }

    #[test]
    fn sadkl_gradient_matches_finite_differences() {
        let mut rng = rng_from_seed(4);
        let m = Mlp::random(&[2, 5, 4, 2], &mut rng).unwrap();
        let ds = labeled_ds(&[[0.3, -0.8], [1.5, 0.2], [-0.7, 1.1]], &[0.96, 0.04, 0.96]);
        let idx = [1, 2, 3];
        let c = Centroid(vec![0.4, -0.1]);
        let lambda = 0.05;
        let (_, grads) =
            sadkl_loss_and_grad(&m, &ds, &idx, &c, lambda, &mut Trace::default()).unwrap();
        let batch: Vec<Sample> = idx.iter().map(|&i| ds.samples()[i].clone()).collect();
        let h = 1e-5;
        let numeric: Vec<f64> = (0..m.param_count())
            .map(|p| {
                let mut plus = m.clone();
                let mut minus = m.clone();
                *plus.params_mut().nth(p).unwrap() += h;
                *minus.params_mut().nth(p).unwrap() -= h;
                (sadkl_loss(&plus, &batch, &c, lambda).unwrap()
                    - sadkl_loss(&minus, &batch, &c, lambda).unwrap())
                    / (2.0 * h)
            })
            .collect();
        assert!(max_rel_err(&grads, &numeric) < 1e-4);
    }

    #[test]
    fn zero_learning_rate_leaves_model_unchanged() {
        let mut rng = rng_from_seed(5);
        let mut m = Mlp::random(&[2, 5, 2], &mut rng).unwrap();
        let before = m.clone();
        let ds = labeled_ds(&[[0.3, -0.8], [1.5, 0.2], [-0.7, 1.1]], &[0.96, 0.04, 0.96]);
        let mut opt = Adam::new(&m, 0.0, 0.0);
        train_epoch(
            &mut m,
            &ds,
            &Centroid(vec![0.1, 0.1]),
            &mut opt,
            2,
            &mut rng,
        )
        .unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn training_is_deterministic_and_rejects_unset_labels() {
        let ds = labeled_ds(&[[0.3, -0.8], [1.5, 0.2], [-0.7, 1.1]], &[0.96, 0.04, 0.96]);
        let run = || {
            let mut rng = rng_from_seed(6);
            let mut m = Mlp::random(&[2, 5, 2], &mut rng).unwrap();
            let mut opt = Adam::new(&m, 1e-2, 1e-6);
            for _ in 0..5 {
                train_epoch(
                    &mut m,
                    &ds,
                    &Centroid(vec![0.1, 0.1]),
                    &mut opt,
                    2,
                    &mut rng,
                )
                .unwrap();
            }
            m
        };
        assert_eq!(run(), run());

        let unset = labeled_ds(&[[0.3, -0.8]], &[UNSET_LABEL]);
        let mut rng = rng_from_seed(6);
        let mut m = Mlp::random(&[2, 5, 2], &mut rng).unwrap();
        let mut opt = Adam::new(&m, 1e-2, 0.0);
        assert_eq!(
            train_epoch(
                &mut m,
                &unset,
                &Centroid(vec![0.1, 0.1]),
                &mut opt,
                2,
                &mut rng
            ),
            Err(Error::UnsetLabel { index: 1 })
        );
    }

    /// Reconstruction loss through the transcribed forward pass.
    fn reference_ae_loss(ae: &Autoencoder, rows: &[[f64; 2]], lambda: f64) -> f64 {
        let mut sum = 0.0;
        for x in rows {
            let r = reference_forward(&ae.decoder, &reference_forward(&ae.encoder, x));
            sum += (r[0] - x[0]).powi(2) + (r[1] - x[1]).powi(2);
        }
        let w2: f64 = ae
            .encoder
            .layers
            .iter()
            .chain(&ae.decoder.layers)
            .flat_map(|l| &l.weights)
            .map(|w| w * w)
            .sum();
        sum / (2 * rows.len()) as f64 + 0.5 * lambda * w2
    }

    #[test]
    fn autoencoder_gradient_matches_finite_differences() {
        let mut rng = rng_from_seed(7);
        let arch = Architecture {
            input: 2,
            hidden: vec![5, 4],
            latent: 2,
        };
        let ae = Autoencoder::random(&arch, &mut rng).unwrap();
        let rows = [[0.3, -0.8], [1.5, 0.2], [-0.7, 1.1]];
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let lambda = 0.02;
        let (loss, g) = reconstruction_loss_and_grad(&ae, &refs, &[0, 1, 2], lambda).unwrap();
        assert!((loss - reference_ae_loss(&ae, &rows, lambda)).abs() < 1e-12);
        let h = 1e-5;
        for which in 0..2 {
            let n = if which == 0 {
                ae.encoder.param_count()
            } else {
                ae.decoder.param_count()
            };
            let numeric: Vec<f64> = (0..n)
                .map(|p| {
                    let bump = |delta: f64| {
                        let mut m = ae.clone();
                        let net = if which == 0 {
                            &mut m.encoder
                        } else {
                            &mut m.decoder
                        };
                        *net.params_mut().nth(p).unwrap() += delta;
                        reference_ae_loss(&m, &rows, lambda)
                    };
                    (bump(h) - bump(-h)) / (2.0 * h)
                })
                .collect();
            let analytic = if which == 0 { &g.encoder } else { &g.decoder };
            assert!(max_rel_err(analytic, &numeric) < 1e-4);
        }
    }

    fn pretrain_cfg(epochs: usize, seed: u64) -> PretrainConfig {
        PretrainConfig {
            arch: Architecture {
                input: 2,
                hidden: vec![16, 16],
                latent: 2,
            },
            epochs,
            lr: 1e-2,
            weight_decay: 0.0,
            batch_size: 10,
            seed,
        }
    }

    #[test]
    fn pretraining_memorizes_a_repeated_point() {
        let ds = labeled_ds(&[[0.7, -0.4]; 20], &[1.0; 20]);
        let pre = pretrain_autoencoder(&ds, &pretrain_cfg(300, 1)).unwrap();
        assert!(*pre.mse.last().unwrap() < 1e-3, "{:?}", pre.mse.last());
        assert_eq!(pre.mse.len(), 301);
    }

    #[test]
    fn pretraining_reduces_error_on_two_moons_and_is_deterministic() {
        use crate::data::{make_two_moons, TwoMoons};
        let ds = make_two_moons(&TwoMoons::new(500, 25, 0.3, 3)).unwrap();
        let cfg = PretrainConfig {
            arch: Architecture::default(),
            epochs: 50,
            ..PretrainConfig::default()
        };
        let a = pretrain_autoencoder(&ds, &cfg).unwrap();
        assert!(a.mse.last().unwrap() < &a.mse[0]);
        let b = pretrain_autoencoder(&ds, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(pretrain_autoencoder(&ds, &pretrain_cfg(0, 1)).is_err());
    }

    #[test]
    fn normal_training_pulls_embeddings_to_the_centroid() {
        // Two separable clusters, every sample labeled normal, λ = 0.
        let mut rng = rng_from_seed(8);
        let rows: Vec<[f64; 2]> = (0..40)
            .map(|i| {
                let side = if i % 2 == 0 { 1.0 } else { -1.0 };
                [
                    side + rng.random_range(-0.2..0.2),
                    rng.random_range(-0.2..0.2),
                ]
            })
            .collect();
        let ds = labeled_ds(&rows, &[1.0; 40]);
        let mut m = Mlp::random(&[2, 8, 2], &mut rng).unwrap();
        let c = compute_centroid(&m, &ds).unwrap();
        let spread = |m: &Mlp| {
            let z = m.forward_all(ds.features()).unwrap();
            z.rows()
                .map(|p| crate::lof::squared_distance(p, &c.0))
                .sum::<f64>()
                / z.len() as f64
        };
        let mut opt = Adam::new(&m, 1e-2, 0.0);
        let mut last = spread(&m);
        for _ in 0..10 {
            train_epoch(&mut m, &ds, &c, &mut opt, 41, &mut rng).unwrap();
            let now = spread(&m);
            assert!(now < last, "{now} >= {last}");
            last = now;
        }
    }
}
