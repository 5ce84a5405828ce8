//! Synthetic head-rotation data generation.
//!
//! The crate covers the whole pipeline for yaw/pitch/roll traces:
//!
//! * [`trace`]: orientation traces, CSV ingestion and validation.
//! * [`windows`]: the windowed dataset block and its on-disk archive.
//! * [`preprocess`]: unwrapping, decimation, spline fidelity analysis, windowing and
//!   the reversible quantile-to-normal transform.
//! * [`nn`]: dense and GRU layers with hand-written backpropagation, Adam and a
//!   finite-difference gradient checker.
//! * [`timegan`]: the five-network TimeGAN, its training phases, checkpoints,
//!   snapshots and generation.
//! * [`spectral`]: the random-phase FFT baseline generator.
//! * [`metrics`]: orientation/range histograms, velocity correlations and PCA.

pub mod error;
pub mod metrics;
pub mod nn;
pub mod preprocess;
pub mod spectral;
pub mod timegan;
pub mod toy;
pub mod trace;
pub mod windows;

pub use error::{Error, Result};
pub use trace::{AngleDeg, Axis, Orientation, Trace, TraceSet};
pub use windows::WindowSet;
