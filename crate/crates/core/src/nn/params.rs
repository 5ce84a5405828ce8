use rand::Rng;

use crate::error::{invalid, Result};

/// Anything holding trainable parameter tensors in a fixed visiting order.
pub trait Parameterized {
    /// Visits `(name, shape, values)` for every tensor.
    fn for_each_param(&self, f: &mut dyn FnMut(&str, &[usize], &[f64]));

    fn for_each_param_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64]));

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.for_each_param(&mut |_, _, v| n += v.len());
        n
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.for_each_param(&mut |_, _, v| out.extend_from_slice(v));
        out
    }

    fn set_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        let n = self.param_count();
        if flat.len() != n {
            return Err(invalid(format!("expected {n} parameters, got {}", flat.len())));
        }
        let mut offset = 0;
        self.for_each_param_mut(&mut |_, v| {
            v.copy_from_slice(&flat[offset..offset + v.len()]);
            offset += v.len();
        });
        Ok(())
    }

    fn fill_zero(&mut self) {
        self.for_each_param_mut(&mut |_, v| v.fill(0.0));
    }
}

/// Uniform Glorot initialisation, limit √(6 / (fan_in + fan_out)).
pub fn glorot_uniform<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, fan_out: usize, count: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..count).map(|_| rng.random_range(-limit..limit)).collect()
}
