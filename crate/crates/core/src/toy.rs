//! Synthetic datasets with known structure, used by tests, the acceptance
//! suite and demos.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::trace::{Trace, TraceSet};
use crate::windows::{WindowSet, AXES};

/// Component frequencies (Hz) and yaw amplitudes (deg) of [`band_limited_trace`].
/// Amplitude falls with frequency, as in head motion; nothing above 5 Hz.
const COMPONENTS: [(f64, f64); 9] = [
    (0.05, 40.0),
    (0.13, 25.0),
    (0.3, 12.0),
    (0.6, 6.0),
    (1.1, 3.0),
    (1.8, 1.5),
    (2.7, 0.7),
    (4.0, 0.3),
    (5.0, 0.15),
];
const AXIS_GAIN: [f64; 3] = [1.0, 0.4, 0.2];

/// Sum of sinusoids at or below 5 Hz with seeded random phases, per axis.
pub fn band_limited_trace(subject: &str, rate_hz: f64, len: usize, seed: u64) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut axes: [Vec<f64>; 3] = Default::default();
    for (axis, series) in axes.iter_mut().enumerate() {
        let phases: Vec<f64> = COMPONENTS
            .iter()
            .map(|_| rng.random::<f64>() * 2.0 * PI)
            .collect();
        *series = (0..len)
            .map(|i| {
                let t = i as f64 / rate_hz;
                COMPONENTS
                    .iter()
                    .zip(&phases)
                    .map(|(&(f, a), &ph)| AXIS_GAIN[axis] * a * (2.0 * PI * f * t + ph).sin())
                    .sum()
            })
            .collect();
    }
    Trace::from_axes(subject, rate_hz, &axes[0], &axes[1], &axes[2]).expect("finite synthetic trace")
}

/// `count` band-limited traces with distinct seeds.
pub fn band_limited_set(count: usize, rate_hz: f64, len: usize, seed: u64) -> TraceSet {
    let traces = (0..count)
        .map(|i| {
            band_limited_trace(
                &format!("toy-{i:02}"),
                rate_hz,
                len,
                seed.wrapping_add(i as u64 * 7919),
            )
        })
        .collect();
    TraceSet::new(traces, format!("band-limited toy set, seed {seed}")).expect("common rate")
}

/// Parameters of the sinusoidal window dataset.
#[derive(Debug, Clone, Copy)]
pub struct SineWindowSpec {
    pub count: usize,
    pub len: usize,
    pub rate_hz: f64,
    pub max_freq_hz: f64,
    /// Noise standard deviation in units of the axis scale.
    pub noise_sigma: f64,
    /// Degrees per unit amplitude for (yaw, pitch, roll).
    pub axis_scale_deg: [f64; 3],
}

impl Default for SineWindowSpec {
    fn default() -> Self {
        SineWindowSpec {
            count: 2000,
            len: 25,
            rate_hz: 250.0 / 15.0,
            max_freq_hz: 2.0,
            noise_sigma: 0.05,
            axis_scale_deg: [40.0, 20.0, 10.0],
        }
    }
}

/// Windows of independent per-axis sinusoids (random frequency up to
/// `max_freq_hz`, random phase) whose amplitudes share a per-window factor,
/// plus Gaussian noise.
pub fn sine_windows(spec: &SineWindowSpec, seed: u64) -> WindowSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spec.noise_sigma).expect("valid sigma");
    let mut data = Vec::with_capacity(spec.count * spec.len * AXES);
    for _ in 0..spec.count {
        let shared = rng.random_range(0.2..1.0);
        let params: Vec<(f64, f64, f64)> = (0..AXES)
            .map(|_| {
                let amp = shared * rng.random_range(0.8..1.2);
                let freq = rng.random_range(0.1..spec.max_freq_hz);
                let phase = rng.random::<f64>() * 2.0 * PI;
                (amp, freq, phase)
            })
            .collect();
        for step in 0..spec.len {
            let t = step as f64 / spec.rate_hz;
            for (axis, &(amp, freq, phase)) in params.iter().enumerate() {
                let v = amp * (2.0 * PI * freq * t + phase).sin() + noise.sample(&mut rng);
                data.push(spec.axis_scale_deg[axis] * v);
            }
        }
    }
    WindowSet::new(spec.count, spec.len, spec.rate_hz, data).expect("finite synthetic windows")
}
