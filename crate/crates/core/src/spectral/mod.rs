//! FFT baseline: mean power spectral density estimation and random-phase
//! trace synthesis.

mod fft;
mod psd;

pub use fft::{fft, ifft, ifft_complex, Spectrum};
pub use psd::{
    analysis_len_for, baseline_windows, energy_fraction_below, estimate_mean_psd, synthesize_traces,
    PsdModel, DEFAULT_TRACE_LEN,
};
