use rand::Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{gemm, gemm_tn, sigmoid, tanh, transpose};
use super::params::{glorot_uniform, Parameterized};
use super::tensor::Tensor;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Sigmoid,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => tanh(x),
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// Affine map followed by an elementwise activation, applied to every row of
/// the input (all leading dimensions are rows).
///
/// The weight is stored input-major, `[in × out]`, so a row maps as `x · W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    in_dim: usize,
    out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    activation: Activation,
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    input: Tensor,
    output: Tensor,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        Dense {
            in_dim,
            out_dim,
            weight: glorot_uniform(rng, in_dim, out_dim, in_dim * out_dim),
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Dense {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, DenseCache)> {
        if input.cols() != self.in_dim {
            return Err(invalid(format!(
                "dense layer expects {} input features, got {}",
                self.in_dim,
                input.cols()
            )));
        }
        let rows = input.rows();
        let mut out = Vec::with_capacity(rows * self.out_dim);
        for _ in 0..rows {
            out.extend_from_slice(&self.bias);
        }
        gemm(
            rows,
            self.in_dim,
            self.out_dim,
            input.data(),
            self.in_dim,
            &self.weight,
            self.out_dim,
            &mut out,
            self.out_dim,
        );
        for v in out.iter_mut() {
            *v = self.activation.apply(*v);
        }
        let mut shape = input.shape().to_vec();
        *shape.last_mut().unwrap() = self.out_dim;
        let output = Tensor::from_vec(&shape, out)?;
        let cache = DenseCache {
            input: input.clone(),
            output: output.clone(),
        };
        Ok((output, cache))
    }

    /// Returns the input gradient; accumulates parameter gradients into `grads` when given.
    pub fn backward(
        &self,
        cache: &DenseCache,
        grad_output: &Tensor,
        grads: Option<&mut Dense>,
    ) -> Result<Tensor> {
        if grad_output.shape() != cache.output.shape() || cache.input.cols() != self.in_dim {
            return Err(invalid(
                "dense backward: gradient or cache does not match this layer",
            ));
        }
        let rows = cache.input.rows();
        let pre: Vec<f64> = grad_output
            .data()
            .iter()
            .zip(cache.output.data())
            .map(|(&g, &y)| g * self.activation.derivative_from_output(y))
            .collect();
        if let Some(g) = grads {
            gemm_tn(
                rows,
                self.in_dim,
                self.out_dim,
                cache.input.data(),
                self.in_dim,
                &pre,
                self.out_dim,
                &mut g.weight,
                self.out_dim,
            );
            for row in pre.chunks_exact(self.out_dim) {
                for (b, &d) in g.bias.iter_mut().zip(row) {
                    *b += d;
                }
            }
        }
        let wt = transpose(&self.weight, self.in_dim, self.out_dim);
        let mut dx = vec![0.0; rows * self.in_dim];
        gemm(
            rows,
            self.out_dim,
            self.in_dim,
            &pre,
            self.out_dim,
            &wt,
            self.in_dim,
            &mut dx,
            self.in_dim,
        );
        Tensor::from_vec(cache.input.shape(), dx)
    }
}

impl Parameterized for Dense {
    fn for_each_param(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        f("weight", &[self.in_dim, self.out_dim], &self.weight);
        f("bias", &[self.out_dim], &self.bias);
    }

    fn for_each_param_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        f("weight", &mut self.weight);
        f("bias", &mut self.bias);
    }
}
