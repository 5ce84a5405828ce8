//! Loss functions with their gradients. Every function returns the scalar
//! loss and the gradient with respect to each differentiable input.

use crate::nn::Tensor;

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Mean binary cross-entropy of logits against a constant label.
pub fn bce_with_logits(logits: &Tensor, label: f64) -> (f64, Tensor) {
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for &l in logits.data() {
        // −y·log σ(l) − (1−y)·log(1−σ(l)) = y·softplus(−l) + (1−y)·softplus(l)
        loss += label * softplus(-l) + (1.0 - label) * softplus(l);
        grad.push((sigmoid(l) - label) / n);
    }
    (
        loss / n,
        Tensor::from_vec(logits.shape(), grad).expect("same shape"),
    )
}

/// Mean squared error; the gradient is with respect to `pred` (negate it for `target`).
pub fn mse(pred: &Tensor, target: &Tensor) -> (f64, Tensor) {
    debug_assert_eq!(pred.shape(), target.shape());
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.data().iter().zip(target.data()) {
        let d = p - t;
        loss += d * d;
        grad.push(2.0 * d / n);
    }
    (
        loss / n,
        Tensor::from_vec(pred.shape(), grad).expect("same shape"),
    )
}

/// Next-step latent prediction error on time-major `[T, B, D]` tensors:
/// mean over t < T−1 of (pred[t] − latent[t+1])².
///
/// Returns `(loss, d/d pred, d/d latent)`.
pub fn supervised_loss(pred: &Tensor, latent: &Tensor) -> (f64, Tensor, Tensor) {
    debug_assert_eq!(pred.shape(), latent.shape());
    let step = pred.dim(1) * pred.dim(2);
    let steps = pred.dim(0);
    let n = ((steps - 1) * step) as f64;
    let mut loss = 0.0;
    let mut d_pred = vec![0.0; pred.len()];
    let mut d_latent = vec![0.0; latent.len()];
    for i in 0..(steps - 1) * step {
        let d = pred.data()[i] - latent.data()[i + step];
        loss += d * d;
        d_pred[i] = 2.0 * d / n;
        d_latent[i + step] = -2.0 * d / n;
    }
    (
        loss / n,
        Tensor::from_vec(pred.shape(), d_pred).expect("same shape"),
        Tensor::from_vec(latent.shape(), d_latent).expect("same shape"),
    )
}

/// Added to the batch variance before the square root.
const MOMENT_EPS: f64 = 1e-6;

/// Per (step, feature) mean and standard deviation over the batch axis of a
/// time-major `[T, B, F]` tensor.
fn batch_moments(x: &Tensor) -> (Vec<f64>, Vec<f64>) {
    let (t, b, f) = (x.dim(0), x.dim(1), x.dim(2));
    let mut mean = vec![0.0; t * f];
    let mut std = vec![0.0; t * f];
    for s in 0..t {
        for j in 0..f {
            let col = (0..b).map(|k| x.data()[(s * b + k) * f + j]);
            let m = col.clone().sum::<f64>() / b as f64;
            let var = col.map(|v| (v - m) * (v - m)).sum::<f64>() / b as f64;
            mean[s * f + j] = m;
            std[s * f + j] = (var + MOMENT_EPS).sqrt();
        }
    }
    (mean, std)
}

/// Moment matching: mean over (step, feature) of |σ̂ − σ| plus |μ̂ − μ|, with
/// moments taken over the batch axis. The gradient is with respect to `fake`.
pub fn moment_loss(fake: &Tensor, real: &Tensor) -> (f64, Tensor) {
    let (mf, sf) = batch_moments(fake);
    let (mr, sr) = batch_moments(real);
    let (t, b, f) = (fake.dim(0), fake.dim(1), fake.dim(2));
    let cells = (t * f) as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; fake.len()];
    for c in 0..t * f {
        let ds = sf[c] - sr[c];
        let dm = mf[c] - mr[c];
        loss += ds.abs() + dm.abs();
        let (s, j) = (c / f, c % f);
        let sign_s = sign(ds) / cells;
        let sign_m = sign(dm) / cells;
        for k in 0..b {
            let i = (s * b + k) * f + j;
            grad[i] = sign_s * (fake.data()[i] - mf[c]) / (b as f64 * sf[c]) + sign_m / b as f64;
        }
    }
    (
        loss / cells,
        Tensor::from_vec(fake.shape(), grad).expect("same shape"),
    )
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// d√L/dL, zero at L = 0 so a perfect fit contributes no gradient.
pub fn sqrt_grad(loss: f64) -> f64 {
    if loss > 0.0 {
        0.5 / loss.sqrt()
    } else {
        0.0
    }
}
