use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::TimeGanConfig;
use crate::error::{invalid, Result};
use crate::nn::{Activation, Parameterized, SeqNet, Tensor};
use crate::preprocess::{invert_transform, TransformParams};
use crate::windows::{WindowSet, AXES};

/// Windows pushed through the networks at once during generation.
const GENERATION_CHUNK: usize = 256;

const INIT_STREAM: u64 = u64::MAX;

/// The five TimeGAN networks. Every network is a GRU stack with a per-step
/// dense head; data and latents live in [0, 1] (sigmoid heads), the
/// discriminator emits one logit per step.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGanModel {
    pub config: TimeGanConfig,
    pub seq_len: usize,
    pub rate_hz: f64,
    pub embedder: SeqNet,
    pub recovery: SeqNet,
    pub generator: SeqNet,
    pub supervisor: SeqNet,
    pub discriminator: SeqNet,
}

/// Network names in checkpoint order.
pub const NETWORKS: [&str; 5] = ["embedder", "recovery", "generator", "supervisor", "discriminator"];

impl TimeGanModel {
    pub fn new(config: TimeGanConfig, seq_len: usize, rate_hz: f64, seed: u64) -> Result<Self> {
        config.validate()?;
        if seq_len < 2 {
            return Err(invalid("sequence length must be at least 2"));
        }
        // Initialisation draws from its own stream; training uses stream 0.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(INIT_STREAM);
        let (h, l, z) = (config.hidden_dim, config.num_layers, config.latent_dim);
        let embedder = SeqNet::new(AXES, h, l, z, Activation::Sigmoid, &mut rng);
        let recovery = SeqNet::new(z, h, l, AXES, Activation::Sigmoid, &mut rng);
        let generator = SeqNet::new(config.noise_dim, h, l, z, Activation::Sigmoid, &mut rng);
        let supervisor = SeqNet::new(z, h, l - 1, z, Activation::Sigmoid, &mut rng);
        let discriminator = SeqNet::new(z, h, l, 1, Activation::Identity, &mut rng);
        Ok(TimeGanModel {
            config,
            seq_len,
            rate_hz,
            embedder,
            recovery,
            generator,
            supervisor,
            discriminator,
        })
    }

    pub fn networks(&self) -> [&SeqNet; 5] {
        [
            &self.embedder,
            &self.recovery,
            &self.generator,
            &self.supervisor,
            &self.discriminator,
        ]
    }

    pub fn networks_mut(&mut self) -> [&mut SeqNet; 5] {
        [
            &mut self.embedder,
            &mut self.recovery,
            &mut self.generator,
            &mut self.supervisor,
            &mut self.discriminator,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.networks().iter().map(|n| n.param_count()).sum()
    }

    /// Draws noise for `count` windows, each `seq_len × noise_dim` uniform on
    /// [0, 1), window by window, and lays it out time-major.
    pub fn sample_noise<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Tensor {
        let (t, f) = (self.seq_len, self.config.noise_dim);
        let mut data = vec![0.0; t * count * f];
        for b in 0..count {
            for s in 0..t {
                for j in 0..f {
                    data[(s * count + b) * f + j] = rng.random::<f64>();
                }
            }
        }
        Tensor::from_vec(&[t, count, f], data).expect("positive dims")
    }

    /// Generator → supervisor → recovery on time-major noise.
    pub fn synthesize(&self, noise: &Tensor) -> Result<Tensor> {
        let e_hat = self.generator.predict(noise)?;
        let h_hat = self.supervisor.predict(&e_hat)?;
        self.recovery.predict(&h_hat)
    }

    /// `n` windows in the model's [0, 1] representation, window-major.
    pub fn generate_normalized<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<WindowSet> {
        if n < 1 {
            return Err(invalid("number of windows to generate must be at least 1"));
        }
        let t = self.seq_len;
        let mut data = vec![0.0; n * t * AXES];
        let mut start = 0;
        while start < n {
            let count = GENERATION_CHUNK.min(n - start);
            let x = self.synthesize(&self.sample_noise(count, rng))?;
            for s in 0..t {
                for b in 0..count {
                    let src = (s * count + b) * AXES;
                    let dst = ((start + b) * t + s) * AXES;
                    data[dst..dst + AXES].copy_from_slice(&x.data()[src..src + AXES]);
                }
            }
            start += count;
        }
        WindowSet::new(n, t, self.rate_hz, data)
    }

    /// Generates `n` windows and maps them back to degrees. Returns the windows
    /// and how many values fell outside [0, 1] and were clamped.
    pub fn generate_with_rng<R: Rng + ?Sized>(
        &self,
        params: &TransformParams,
        n: usize,
        rng: &mut R,
    ) -> Result<(WindowSet, usize)> {
        let normalized = self.generate_normalized(n, rng)?;
        Ok(invert_transform(&normalized, params))
    }
}

/// Generates `n` windows in degrees from noise seeded by `seed`.
pub fn generate(model: &TimeGanModel, params: &TransformParams, n: usize, seed: u64) -> Result<WindowSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(model.generate_with_rng(params, n, &mut rng)?.0)
}
