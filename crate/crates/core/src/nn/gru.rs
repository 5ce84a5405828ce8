//! Multi-layer GRU with exact backpropagation through time.
//!
//! Cell convention, per layer and step:
//!
//! ```text
//! z  = σ(x·Wz + h·Uz + bz)
//! r  = σ(x·Wr + h·Ur + br)
//! n  = tanh(x·Wn + (r∘h)·Un + bn)
//! h' = (1 − z)∘n + z∘h
//! ```

use rand::Rng;

use super::linalg::{gemm, gemm_tn, sigmoid, tanh, transpose};
use super::params::{glorot_uniform, Parameterized};
use super::tensor::Tensor;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GruLayer {
    input_dim: usize,
    hidden_dim: usize,
    /// Input weights `[in × 3h]`, gate blocks ordered (z, r, n).
    pub w_x: Vec<f64>,
    /// Recurrent weights of the update and reset gates `[h × 2h]`.
    pub u_zr: Vec<f64>,
    /// Recurrent weights of the candidate `[h × h]`, applied to `r∘h`.
    pub u_n: Vec<f64>,
    /// Biases `[3h]`, ordered (z, r, n).
    pub bias: Vec<f64>,
}

impl GruLayer {
    fn new<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let h = hidden_dim;
        GruLayer {
            input_dim,
            hidden_dim,
            w_x: glorot_uniform(rng, input_dim, h, input_dim * 3 * h),
            u_zr: glorot_uniform(rng, h, h, h * 2 * h),
            u_n: glorot_uniform(rng, h, h, h * h),
            bias: vec![0.0; 3 * h],
        }
    }

    fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let h = hidden_dim;
        GruLayer {
            input_dim,
            hidden_dim,
            w_x: vec![0.0; input_dim * 3 * h],
            u_zr: vec![0.0; 2 * h * h],
            u_n: vec![0.0; h * h],
            bias: vec![0.0; 3 * h],
        }
    }
}

#[derive(Debug, Clone)]
pub struct GruStack {
    layers: Vec<GruLayer>,
    /// Bumped on every mutable parameter access; caches remember it.
    version: u64,
}

/// Equality of parameters; the cache version is bookkeeping.
impl PartialEq for GruStack {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

#[derive(Debug, Clone)]
struct LayerCache {
    /// Layer input, `[T·B × in]`.
    input: Vec<f64>,
    /// Hidden states h_0..h_T, `[(T+1)·B × h]`.
    states: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
    /// r∘h_{t-1}
    rh: Vec<f64>,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct GruCache {
    steps: usize,
    batch: usize,
    input_dim: usize,
    hidden_dim: usize,
    version: u64,
    layers: Vec<LayerCache>,
}

impl GruStack {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, num_layers: usize, rng: &mut R) -> Self {
        assert!(
            num_layers >= 1 && input_dim >= 1 && hidden_dim >= 1,
            "GRU dimensions must be positive"
        );
        let layers = (0..num_layers)
            .map(|l| GruLayer::new(if l == 0 { input_dim } else { hidden_dim }, hidden_dim, rng))
            .collect();
        GruStack { layers, version: 0 }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize, num_layers: usize) -> Self {
        assert!(
            num_layers >= 1 && input_dim >= 1 && hidden_dim >= 1,
            "GRU dimensions must be positive"
        );
        let layers = (0..num_layers)
            .map(|l| GruLayer::zeros(if l == 0 { input_dim } else { hidden_dim }, hidden_dim))
            .collect();
        GruStack { layers, version: 0 }
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.layers[0].hidden_dim
    }

    pub fn layers(&self) -> &[GruLayer] {
        &self.layers
    }

    /// Runs the stack over `input` of shape `[T, B, input_dim]`.
    ///
    /// `h0` has shape `[num_layers, B, hidden_dim]`; zeros when absent.
    /// Returns the top layer's states `[T, B, hidden_dim]`.
    pub fn forward(&self, input: &Tensor, h0: Option<&Tensor>) -> Result<(Tensor, GruCache)> {
        let shape = input.shape();
        if shape.len() != 3 || shape[2] != self.input_dim() {
            return Err(invalid(format!(
                "GRU expects input [T, B, {}], got {shape:?}",
                self.input_dim()
            )));
        }
        let (steps, batch, h) = (shape[0], shape[1], self.hidden_dim());
        if let Some(h0) = h0 {
            if h0.shape() != [self.num_layers(), batch, h] {
                return Err(invalid(format!(
                    "initial state must be [{}, {batch}, {h}], got {:?}",
                    self.num_layers(),
                    h0.shape()
                )));
            }
        }

        let mut caches = Vec::with_capacity(self.layers.len());
        let mut current = input.data().to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let init = h0.map(|t| &t.data()[l * batch * h..(l + 1) * batch * h]);
            let cache = layer_forward(layer, current, steps, batch, init);
            current = cache.states[batch * h..].to_vec();
            caches.push(cache);
        }
        let output = Tensor::from_vec(&[steps, batch, h], current)?;
        Ok((
            output,
            GruCache {
                steps,
                batch,
                input_dim: self.input_dim(),
                hidden_dim: h,
                version: self.version,
                layers: caches,
            },
        ))
    }

    /// Backpropagation through time.
    ///
    /// Returns `(grad_input [T, B, in], grad_h0 [layers, B, h])` and accumulates
    /// parameter gradients into `grads` when given.
    pub fn backward(
        &self,
        cache: &GruCache,
        grad_output: &Tensor,
        grads: Option<&mut GruStack>,
    ) -> Result<(Tensor, Tensor)> {
        if cache.version != self.version
            || cache.layers.len() != self.layers.len()
            || cache.input_dim != self.input_dim()
            || cache.hidden_dim != self.hidden_dim()
        {
            return Err(invalid(
                "GRU backward: cache is stale or belongs to another stack",
            ));
        }
        let (steps, batch, h) = (cache.steps, cache.batch, cache.hidden_dim);
        if grad_output.shape() != [steps, batch, h] {
            return Err(invalid(format!(
                "GRU backward: gradient shape {:?} does not match [{steps}, {batch}, {h}]",
                grad_output.shape()
            )));
        }
        if let Some(g) = grads.as_deref() {
            if g.layers.len() != self.layers.len() || g.input_dim() != self.input_dim() || g.hidden_dim() != h
            {
                return Err(invalid(
                    "GRU backward: gradient accumulator has a different shape",
                ));
            }
        }

        let mut grads = grads;
        let mut upstream = grad_output.data().to_vec();
        let mut grad_h0 = vec![0.0; self.layers.len() * batch * h];
        for l in (0..self.layers.len()).rev() {
            let g = grads.as_deref_mut().map(|g| &mut g.layers[l]);
            let (dx, dh0) = layer_backward(&self.layers[l], &cache.layers[l], &upstream, steps, batch, g);
            grad_h0[l * batch * h..(l + 1) * batch * h].copy_from_slice(&dh0);
            upstream = dx;
        }
        Ok((
            Tensor::from_vec(&[steps, batch, self.input_dim()], upstream)?,
            Tensor::from_vec(&[self.layers.len(), batch, h], grad_h0)?,
        ))
    }
}

fn layer_forward(
    layer: &GruLayer,
    input: Vec<f64>,
    steps: usize,
    batch: usize,
    h0: Option<&[f64]>,
) -> LayerCache {
    let (inp, h) = (layer.input_dim, layer.hidden_dim);
    let h3 = 3 * h;
    let rows = steps * batch;

    // Input contributions for all steps at once.
    let mut gx = Vec::with_capacity(rows * h3);
    for _ in 0..rows {
        gx.extend_from_slice(&layer.bias);
    }
    gemm(rows, inp, h3, &input, inp, &layer.w_x, h3, &mut gx, h3);

    let mut states = vec![0.0; (steps + 1) * batch * h];
    if let Some(init) = h0 {
        states[..batch * h].copy_from_slice(init);
    }
    let mut z = vec![0.0; rows * h];
    let mut r = vec![0.0; rows * h];
    let mut n = vec![0.0; rows * h];
    let mut rh = vec![0.0; rows * h];
    let mut rec_zr = vec![0.0; batch * 2 * h];
    let mut rec_n = vec![0.0; batch * h];

    for t in 0..steps {
        let bh = batch * h;
        let (prev_states, next_states) = states.split_at_mut((t + 1) * bh);
        let prev = &prev_states[t * bh..];
        let next = &mut next_states[..bh];
        let step = t * bh..(t + 1) * bh;

        rec_zr.fill(0.0);
        gemm(batch, h, 2 * h, prev, h, &layer.u_zr, 2 * h, &mut rec_zr, 2 * h);
        let gx_t = &gx[t * batch * h3..(t + 1) * batch * h3];
        let (z_t, r_t, rh_t) = (&mut z[step.clone()], &mut r[step.clone()], &mut rh[step.clone()]);
        for (rec_b, gx_b) in rec_zr.chunks_exact_mut(2 * h).zip(gx_t.chunks_exact(h3)) {
            for (v, &g) in rec_b.iter_mut().zip(&gx_b[..2 * h]) {
                *v = sigmoid(*v + g);
            }
        }
        for (b, gates) in rec_zr.chunks_exact(2 * h).enumerate() {
            let row = b * h..(b + 1) * h;
            z_t[row.clone()].copy_from_slice(&gates[..h]);
            r_t[row.clone()].copy_from_slice(&gates[h..]);
            for ((o, &rv), &p) in rh_t[row.clone()].iter_mut().zip(&gates[h..]).zip(&prev[row]) {
                *o = rv * p;
            }
        }
        rec_n.fill(0.0);
        gemm(batch, h, h, rh_t, h, &layer.u_n, h, &mut rec_n, h);
        let n_t = &mut n[step];
        for b in 0..batch {
            let row = b * h..(b + 1) * h;
            let gx_b = &gx_t[b * h3 + 2 * h..(b + 1) * h3];
            let (rec_b, z_b, prev_b) = (&rec_n[row.clone()], &z_t[row.clone()], &prev[row.clone()]);
            let (n_b, next_b) = (&mut n_t[row.clone()], &mut next[row]);
            for (((nv, &g), &rc), ((nx, &zv), &p)) in n_b
                .iter_mut()
                .zip(gx_b)
                .zip(rec_b)
                .zip(next_b.iter_mut().zip(z_b).zip(prev_b))
            {
                *nv = tanh(g + rc);
                *nx = (1.0 - zv) * *nv + zv * p;
            }
        }
    }
    LayerCache {
        input,
        states,
        z,
        r,
        n,
        rh,
    }
}

/// Returns (grad wrt layer input, grad wrt initial state).
fn layer_backward(
    layer: &GruLayer,
    cache: &LayerCache,
    grad_out: &[f64],
    steps: usize,
    batch: usize,
    grads: Option<&mut GruLayer>,
) -> (Vec<f64>, Vec<f64>) {
    let (inp, h) = (layer.input_dim, layer.hidden_dim);
    let h3 = 3 * h;
    let bh = batch * h;
    let rows = steps * batch;

    let u_zr_t = transpose(&layer.u_zr, h, 2 * h);
    let u_n_t = transpose(&layer.u_n, h, h);
    let w_x_t = transpose(&layer.w_x, inp, h3);

    // Pre-activation gradients for all steps, `[T·B × 3h]` in (z, r, n) blocks.
    let mut pre = vec![0.0; rows * h3];
    let mut carry = vec![0.0; bh];
    let mut d_rh = vec![0.0; bh];
    let mut grads = grads;

    for t in (0..steps).rev() {
        let prev = &cache.states[t * bh..(t + 1) * bh];
        let step = t * bh..(t + 1) * bh;
        let (z, r, n) = (
            &cache.z[step.clone()],
            &cache.r[step.clone()],
            &cache.n[step.clone()],
        );
        let dh_out = &grad_out[step.clone()];
        let pre_t = &mut pre[t * batch * h3..(t + 1) * batch * h3];

        // carry becomes d(prev) as we go.
        for b in 0..batch {
            let row = b * h..(b + 1) * h;
            let (z, n, prev, dh_out) = (
                &z[row.clone()],
                &n[row.clone()],
                &prev[row.clone()],
                &dh_out[row.clone()],
            );
            let carry = &mut carry[row];
            let (pre_z, rest) = pre_t[b * h3..(b + 1) * h3].split_at_mut(h);
            let pre_n = &mut rest[h..];
            for j in 0..h {
                let dh = dh_out[j] + carry[j];
                let dz = dh * (prev[j] - n[j]);
                pre_z[j] = dz * z[j] * (1.0 - z[j]);
                pre_n[j] = dh * (1.0 - z[j]) * (1.0 - n[j] * n[j]);
                carry[j] = dh * z[j];
            }
        }

        d_rh.fill(0.0);
        gemm(batch, h, h, &pre_t[2 * h..], h3, &u_n_t, h, &mut d_rh, h);
        for b in 0..batch {
            let row = b * h..(b + 1) * h;
            let (r, prev, d_rh) = (&r[row.clone()], &prev[row.clone()], &d_rh[row.clone()]);
            let carry = &mut carry[row];
            let pre_r = &mut pre_t[b * h3 + h..b * h3 + 2 * h];
            for j in 0..h {
                pre_r[j] = d_rh[j] * prev[j] * r[j] * (1.0 - r[j]);
                carry[j] += d_rh[j] * r[j];
            }
        }
        gemm(batch, 2 * h, h, pre_t, h3, &u_zr_t, h, &mut carry, h);

        if let Some(g) = grads.as_deref_mut() {
            gemm_tn(batch, h, 2 * h, prev, h, pre_t, h3, &mut g.u_zr, 2 * h);
            gemm_tn(
                batch,
                h,
                h,
                &cache.rh[step],
                h,
                &pre_t[2 * h..],
                h3,
                &mut g.u_n,
                h,
            );
        }
    }

    if let Some(g) = grads {
        gemm_tn(rows, inp, h3, &cache.input, inp, &pre, h3, &mut g.w_x, h3);
        for row in pre.chunks_exact(h3) {
            for (b, &d) in g.bias.iter_mut().zip(row) {
                *b += d;
            }
        }
    }
    let mut dx = vec![0.0; rows * inp];
    gemm(rows, h3, inp, &pre, h3, &w_x_t, inp, &mut dx, inp);
    (dx, carry)
}

impl Parameterized for GruStack {
    fn for_each_param(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        for (l, layer) in self.layers.iter().enumerate() {
            let (i, h) = (layer.input_dim, layer.hidden_dim);
            f(&format!("layer{l}.w_x"), &[i, 3 * h], &layer.w_x);
            f(&format!("layer{l}.u_zr"), &[h, 2 * h], &layer.u_zr);
            f(&format!("layer{l}.u_n"), &[h, h], &layer.u_n);
            f(&format!("layer{l}.bias"), &[3 * h], &layer.bias);
        }
    }

    fn for_each_param_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        self.version += 1;
        for (l, layer) in self.layers.iter_mut().enumerate() {
            f(&format!("layer{l}.w_x"), &mut layer.w_x);
            f(&format!("layer{l}.u_zr"), &mut layer.u_zr);
            f(&format!("layer{l}.u_n"), &mut layer.u_n);
            f(&format!("layer{l}.bias"), &mut layer.bias);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradient_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn zero_weights_zero_state_gives_zero_output() {
        let stack = GruStack::zeros(3, 4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = random_tensor(&mut rng, &[5, 2, 3]);
        let (y, _) = stack.forward(&x, None).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_weights_halve_the_state() {
        let stack = GruStack::zeros(2, 3, 1);
        let x = Tensor::zeros(&[1, 1, 2]);
        let h0 = Tensor::from_vec(&[1, 1, 3], vec![0.0, 1.0, 0.0]).unwrap();
        let (y, _) = stack.forward(&x, Some(&h0)).unwrap();
        assert_eq!(y.data(), &[0.0, 0.5, 0.0]);
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let stack = GruStack::new(3, 6, 3, &mut rng);
        let x = random_tensor(&mut rng, &[7, 4, 3]);
        let (a, _) = stack.forward(&x, None).unwrap();
        let (b, _) = stack.forward(&x, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn batch_rows_are_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let stack = GruStack::new(2, 5, 2, &mut rng);
        let x = random_tensor(&mut rng, &[4, 3, 2]);
        let (full, _) = stack.forward(&x, None).unwrap();
        // Row 1 alone.
        let single: Vec<f64> = (0..4)
            .flat_map(|t| x.data()[t * 6 + 2..t * 6 + 4].to_vec())
            .collect();
        let (one, _) = stack
            .forward(&Tensor::from_vec(&[4, 1, 2], single).unwrap(), None)
            .unwrap();
        for t in 0..4 {
            assert_eq!(
                &full.data()[t * 15 + 5..t * 15 + 10],
                &one.data()[t * 5..t * 5 + 5]
            );
        }
    }

    #[test]
    fn shape_and_cache_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut stack = GruStack::new(2, 3, 2, &mut rng);
        assert!(stack.forward(&Tensor::zeros(&[4, 1, 3]), None).is_err());
        assert!(stack
            .forward(&Tensor::zeros(&[4, 1, 2]), Some(&Tensor::zeros(&[1, 1, 3])))
            .is_err());
        let (y, cache) = stack.forward(&Tensor::zeros(&[4, 1, 2]), None).unwrap();
        assert!(stack.backward(&cache, &Tensor::zeros(&[3, 1, 3]), None).is_err());
        stack.for_each_param_mut(&mut |_, v| v[0] += 1.0);
        assert!(stack.backward(&cache, &Tensor::zeros(y.shape()), None).is_err());
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let stack = GruStack::new(3, 4, 2, &mut rng);
        let x = random_tensor(&mut rng, &[5, 2, 3]);
        let (y, cache) = stack.forward(&x, None).unwrap();
        let mut grads = GruStack::zeros(3, 4, 2);
        let (dx, dh0) = stack
            .backward(&cache, &Tensor::zeros(y.shape()), Some(&mut grads))
            .unwrap();
        assert!(dx.data().iter().all(|&v| v == 0.0));
        assert!(dh0.data().iter().all(|&v| v == 0.0));
        assert!(grads.to_flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bptt_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for &(layers, hidden, steps, batch) in &[(1, 3, 4, 2), (2, 8, 6, 2), (3, 5, 5, 1)] {
            let stack = GruStack::new(3, hidden, layers, &mut rng);
            let x = random_tensor(&mut rng, &[steps, batch, 3]);
            let h0 = random_tensor(&mut rng, &[layers, batch, hidden]);
            let weights = random_tensor(&mut rng, &[steps, batch, hidden]);
            let loss = |s: &GruStack, x: &Tensor, h0: &Tensor| -> f64 {
                let (y, _) = s.forward(x, Some(h0)).unwrap();
                y.data()
                    .iter()
                    .zip(weights.data())
                    .map(|(a, w)| (a * w).sin())
                    .sum()
            };
            let (y, cache) = stack.forward(&x, Some(&h0)).unwrap();
            let dy: Vec<f64> = y
                .data()
                .iter()
                .zip(weights.data())
                .map(|(a, w)| (a * w).cos() * w)
                .collect();
            let mut grads = GruStack::zeros(3, hidden, layers);
            let (dx, dh0) = stack
                .backward(
                    &cache,
                    &Tensor::from_vec(y.shape(), dy).unwrap(),
                    Some(&mut grads),
                )
                .unwrap();

            let report = gradient_check(
                &stack.to_flat(),
                &grads.to_flat(),
                |p| {
                    let mut s = stack.clone();
                    s.set_from_flat(p).unwrap();
                    loss(&s, &x, &h0)
                },
                1e-5,
                1e-4,
            );
            assert!(report.passed(), "params {layers}x{hidden}: {report:?}");

            let report = gradient_check(
                x.data(),
                dx.data(),
                |p| loss(&stack, &Tensor::from_vec(x.shape(), p.to_vec()).unwrap(), &h0),
                1e-5,
                1e-4,
            );
            assert!(report.passed(), "input: {report:?}");

            let report = gradient_check(
                h0.data(),
                dh0.data(),
                |p| loss(&stack, &x, &Tensor::from_vec(h0.shape(), p.to_vec()).unwrap()),
                1e-5,
                1e-4,
            );
            assert!(report.passed(), "h0: {report:?}");
        }
    }
}
