//! Small differentiable building blocks: dense layers, GRU stacks with
//! backpropagation through time, Adam, and a finite-difference gradient checker.
//!
//! Sequence batches are time-major tensors of shape `[T, B, D]`.

mod adam;
mod dense;
mod gradcheck;
mod gru;
mod linalg;
mod params;
mod seqnet;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use dense::{Activation, Dense, DenseCache};
pub use gradcheck::{gradient_check, GradCheckReport, GradMismatch};
pub use gru::{GruCache, GruLayer, GruStack};
pub use params::{glorot_uniform, Parameterized};
pub use seqnet::{SeqCache, SeqNet};
pub use tensor::Tensor;

/// Keeps freed heap memory in the process instead of handing it back to the
/// OS. Training allocates and drops several megabytes of activations per
/// batch, and with glibc's defaults every batch pays for fresh page faults.
/// Only has an effect on glibc targets; call once at startup.
pub fn retain_freed_memory() {
    #[cfg(all(target_os = "linux", target_env = "gnu"))]
    // SAFETY: mallopt only adjusts allocator tuning parameters.
    unsafe {
        libc::mallopt(libc::M_MMAP_THRESHOLD, 32 << 20);
        libc::mallopt(libc::M_TRIM_THRESHOLD, i32::MAX);
        libc::mallopt(libc::M_TOP_PAD, 64 << 20);
    }
}
