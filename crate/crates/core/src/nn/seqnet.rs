use rand::Rng;

use super::dense::{Activation, Dense, DenseCache};
use super::gru::{GruCache, GruStack};
use super::params::Parameterized;
use super::tensor::Tensor;
use crate::error::Result;

/// A GRU stack followed by a per-step dense head: the shape shared by all
/// five TimeGAN networks.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqNet {
    pub gru: GruStack,
    pub head: Dense,
}

#[derive(Debug, Clone)]
pub struct SeqCache {
    gru: GruCache,
    head: DenseCache,
}

impl SeqNet {
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        hidden_dim: usize,
        num_layers: usize,
        output_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let gru = GruStack::new(input_dim, hidden_dim, num_layers, rng);
        let head = Dense::new(hidden_dim, output_dim, activation, rng);
        SeqNet { gru, head }
    }

    /// A network of the same shape with every parameter zero; used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        SeqNet {
            gru: GruStack::zeros(self.gru.input_dim(), self.gru.hidden_dim(), self.gru.num_layers()),
            head: Dense::zeros(self.head.in_dim(), self.head.out_dim(), self.head.activation()),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.gru.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.head.out_dim()
    }

    /// `[T, B, input_dim]` → `[T, B, output_dim]`, starting from a zero state.
    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, SeqCache)> {
        let (hidden, gru) = self.gru.forward(input, None)?;
        let (out, head) = self.head.forward(&hidden)?;
        Ok((out, SeqCache { gru, head }))
    }

    pub fn predict(&self, input: &Tensor) -> Result<Tensor> {
        Ok(self.forward(input)?.0)
    }

    /// Returns the input gradient; parameter gradients accumulate into `grads` when given.
    pub fn backward(
        &self,
        cache: &SeqCache,
        grad_output: &Tensor,
        grads: Option<&mut SeqNet>,
    ) -> Result<Tensor> {
        let (g_gru, g_head) = match grads {
            Some(g) => (Some(&mut g.gru), Some(&mut g.head)),
            None => (None, None),
        };
        let d_hidden = self.head.backward(&cache.head, grad_output, g_head)?;
        let (dx, _) = self.gru.backward(&cache.gru, &d_hidden, g_gru)?;
        Ok(dx)
    }
}

impl Parameterized for SeqNet {
    fn for_each_param(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        self.gru
            .for_each_param(&mut |name, shape, v| f(&format!("gru.{name}"), shape, v));
        self.head
            .for_each_param(&mut |name, shape, v| f(&format!("head.{name}"), shape, v));
    }

    fn for_each_param_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        self.gru
            .for_each_param_mut(&mut |name, v| f(&format!("gru.{name}"), v));
        self.head
            .for_each_param_mut(&mut |name, v| f(&format!("head.{name}"), v));
    }
}
