//! Trace preparation: rollover removal, decimation, spline fidelity analysis,
//! sliding-window segmentation and the reversible quantile transform.

mod angles;
mod normal;
mod quantile;
mod spline;

use serde::{Deserialize, Serialize};

pub use angles::{unwrap_angles, wrap_angle, wrap_angles};
pub use normal::{inverse_normal_cdf, normal_cdf};
pub use quantile::{
    apply_transform, fit_transform, invert_transform, AxisTransform, TransformParams, CDF_FLOOR,
    DEFAULT_QUANTILE_COUNT,
};
pub use spline::UniformSpline;

use crate::error::{invalid, Error, Result};
use crate::trace::{Axis, Trace, TraceSet};
use crate::windows::{WindowSet, AXES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub downsample_factor: usize,
    pub window_len: usize,
    pub window_stride: usize,
    pub quantile_count: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            downsample_factor: 15,
            window_len: 25,
            window_stride: 1,
            quantile_count: DEFAULT_QUANTILE_COUNT,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.downsample_factor < 1 {
            return Err(invalid("downsample_factor must be at least 1"));
        }
        if self.window_len < 2 {
            return Err(invalid("window_len must be at least 2"));
        }
        if self.window_stride < 1 {
            return Err(invalid("window_stride must be at least 1"));
        }
        if self.quantile_count < 2 {
            return Err(invalid("quantile_count must be at least 2"));
        }
        Ok(())
    }
}

/// Keeps samples 0, factor, 2·factor, ... without anti-alias filtering.
pub fn downsample(trace: &Trace, factor: usize) -> Result<Trace> {
    if factor < 1 {
        return Err(invalid("downsample factor must be at least 1"));
    }
    let samples = trace.samples().iter().step_by(factor).copied().collect();
    Trace::new(trace.subject_id(), trace.rate_hz() / factor as f64, samples)
}

/// Natural cubic spline through the samples, evaluated `factor` times more densely.
/// The result has `(len - 1) * factor + 1` samples.
pub fn spline_upsample(trace: &Trace, factor: usize) -> Result<Trace> {
    if factor < 1 {
        return Err(invalid("upsample factor must be at least 1"));
    }
    if trace.len() < 4 {
        return Err(invalid(format!(
            "spline upsampling needs at least 4 samples, got {}",
            trace.len()
        )));
    }
    let axes = trace
        .axes()
        .map(|series| UniformSpline::fit(&series).map(|s| s.resample(factor)));
    let [yaw, pitch, roll] = axes;
    Trace::from_axes(
        trace.subject_id(),
        trace.rate_hz() * factor as f64,
        &yaw?,
        &pitch?,
        &roll?,
    )
}

fn unwrap_trace(trace: &Trace) -> Result<Trace> {
    let [yaw, pitch, roll] = trace.axes().map(|s| unwrap_angles(&s));
    Trace::from_axes(trace.subject_id(), trace.rate_hz(), &yaw, &pitch, &roll)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorQuantiles {
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
}

impl ErrorQuantiles {
    fn from_errors(mut errors: Vec<f64>) -> Self {
        errors.sort_by(|a, b| a.total_cmp(b));
        ErrorQuantiles {
            p50: quantile::sorted_quantile(&errors, 0.5),
            p90: quantile::sorted_quantile(&errors, 0.9),
            p99: quantile::sorted_quantile(&errors, 0.99),
            max: *errors.last().unwrap(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownsampleError {
    pub factor: usize,
    /// Absolute-error quantiles in degrees, per axis in (yaw, pitch, roll) order.
    pub axes: [ErrorQuantiles; 3],
}

/// Decimates by each factor, spline-upsamples back and measures the absolute
/// error against the (unwrapped) original on every covered sample.
pub fn downsampling_error_cdf(trace: &Trace, factors: &[usize]) -> Result<Vec<DownsampleError>> {
    let original = unwrap_trace(trace)?;
    factors
        .iter()
        .map(|&factor| {
            if factor < 2 {
                return Err(invalid(format!(
                    "analysis factors must be at least 2, got {factor}"
                )));
            }
            let rebuilt = spline_upsample(&downsample(&original, factor)?, factor)?;
            let axes = Axis::ALL.map(|axis| {
                let errors = rebuilt
                    .samples()
                    .iter()
                    .zip(original.samples())
                    .map(|(r, o)| (r.get(axis) - o.get(axis)).abs())
                    .collect();
                ErrorQuantiles::from_errors(errors)
            });
            Ok(DownsampleError { factor, axes })
        })
        .collect()
}

/// Number of windows a series of `len` samples yields.
pub fn window_count(len: usize, window_len: usize, stride: usize) -> usize {
    if len < window_len {
        0
    } else {
        (len - window_len) / stride + 1
    }
}

#[derive(Debug, Clone)]
pub struct Windowing {
    pub windows: WindowSet,
    /// Windows produced per input trace, in input order (0 for skipped traces).
    pub per_trace: Vec<usize>,
    /// Samples per trace after decimation.
    pub decimated_lengths: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Unwraps each axis, decimates, then cuts sliding windows per trace.
/// Windows never span two traces.
pub fn make_windows(set: &TraceSet, cfg: &PreprocessConfig) -> Result<Windowing> {
    cfg.validate()?;
    let rate = set.rate_hz().ok_or_else(|| invalid("trace set is empty"))? / cfg.downsample_factor as f64;
    let mut data = Vec::new();
    let mut per_trace = Vec::with_capacity(set.len());
    let mut decimated_lengths = Vec::with_capacity(set.len());
    let mut warnings = Vec::new();
    for trace in set.traces() {
        let reduced = downsample(&unwrap_trace(trace)?, cfg.downsample_factor)?;
        decimated_lengths.push(reduced.len());
        let n = window_count(reduced.len(), cfg.window_len, cfg.window_stride);
        if n == 0 {
            warnings.push(format!(
                "trace {} has {} samples after decimation, fewer than window length {}; skipped",
                trace.subject_id(),
                reduced.len(),
                cfg.window_len
            ));
        }
        let flat: Vec<f64> = reduced.samples().iter().flat_map(|s| s.as_array()).collect();
        for w in 0..n {
            let start = w * cfg.window_stride * AXES;
            data.extend_from_slice(&flat[start..start + cfg.window_len * AXES]);
        }
        per_trace.push(n);
    }
    let count: usize = per_trace.iter().sum();
    if count == 0 {
        return Err(Error::Validation(
            "every trace is shorter than the window length".into(),
        ));
    }
    Ok(Windowing {
        windows: WindowSet::new(count, cfg.window_len, rate, data)?,
        per_trace,
        decimated_lengths,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy;
    use proptest::prelude::*;

    fn ramp(n: usize, rate: f64) -> Trace {
        let yaw: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let pitch: Vec<f64> = (0..n).map(|i| -(i as f64) * 0.5).collect();
        let roll = vec![1.0; n];
        Trace::from_axes("ramp", rate, &yaw, &pitch, &roll).unwrap()
    }

    #[test]
    fn downsample_examples() {
        let t = ramp(30_000, 250.0);
        let d = downsample(&t, 15).unwrap();
        assert_eq!(d.len(), 2000);
        assert!((d.rate_hz() - 16.6667).abs() < 1e-3);
        assert_eq!(downsample(&t, 1).unwrap(), t);
        let d = downsample(&ramp(10, 1.0), 3).unwrap();
        assert_eq!(d.axis(Axis::Yaw), vec![0.0, 3.0, 6.0, 9.0]);
        assert!(downsample(&t, 0).is_err());
    }

    #[test]
    fn spline_upsample_linear_and_knots() {
        let t = ramp(40, 10.0);
        let up = spline_upsample(&t, 4).unwrap();
        assert_eq!(up.len(), 39 * 4 + 1);
        assert_eq!(up.rate_hz(), 40.0);
        for (j, s) in up.samples().iter().enumerate() {
            assert!((s.yaw - j as f64 / 4.0).abs() < 1e-9);
            assert!((s.roll - 1.0).abs() < 1e-12);
        }
        assert!(spline_upsample(&ramp(3, 1.0), 2).is_err());
    }

    #[test]
    fn sine_survives_decimation_round_trip() {
        let rate = 250.0;
        let n = 3000;
        let sine: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 2.0 * i as f64 / rate).sin())
            .collect();
        let t = Trace::from_axes("s", rate, &sine, &sine, &sine).unwrap();
        let up = spline_upsample(&downsample(&t, 15).unwrap(), 15).unwrap();
        let max_err = up
            .samples()
            .iter()
            .enumerate()
            .map(|(i, s)| (s.yaw - (2.0 * std::f64::consts::PI * 2.0 * i as f64 / rate).sin()).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 0.05, "{max_err}");
    }

    #[test]
    fn error_cdf_constant_trace_is_zero() {
        let t = Trace::from_axes("c", 250.0, &[3.0; 200], &[4.0; 200], &[5.0; 200]).unwrap();
        let table = downsampling_error_cdf(&t, &[2, 15]).unwrap();
        for row in table {
            for q in row.axes {
                assert_eq!(q.max, 0.0);
            }
        }
        assert!(downsampling_error_cdf(&t, &[1]).is_err());
    }

    #[test]
    fn error_cdf_band_limited_signal() {
        let t = toy::band_limited_trace("b", 250.0, 30_000, 11);
        let table = downsampling_error_cdf(&t, &[15, 25, 50]).unwrap();
        for q in &table[0].axes {
            assert!(q.p99 < 0.5, "{q:?}");
        }
        for axis in 0..3 {
            assert!(table[2].axes[axis].p99 > table[1].axes[axis].p99);
        }
    }

    #[test]
    fn window_counts() {
        let set = TraceSet::new(vec![ramp(2000, 16.0)], "x").unwrap();
        let cfg = PreprocessConfig {
            downsample_factor: 1,
            ..Default::default()
        };
        let w = make_windows(&set, &cfg).unwrap();
        assert_eq!(w.windows.count(), 1976);
        assert_eq!(w.windows.window(3)[0], 3.0);

        let set = TraceSet::new(vec![ramp(25, 16.0)], "x").unwrap();
        assert_eq!(make_windows(&set, &cfg).unwrap().windows.count(), 1);
    }

    #[test]
    fn short_traces_are_skipped_with_warning() {
        let set = TraceSet::new(vec![ramp(10, 16.0), ramp(30, 16.0)], "x").unwrap();
        let cfg = PreprocessConfig {
            downsample_factor: 1,
            window_stride: 2,
            ..Default::default()
        };
        let w = make_windows(&set, &cfg).unwrap();
        assert_eq!(w.per_trace, vec![0, 3]);
        assert_eq!(w.warnings.len(), 1);
        let set = TraceSet::new(vec![ramp(10, 16.0)], "x").unwrap();
        assert!(make_windows(&set, &cfg).is_err());
    }

    #[test]
    fn windows_are_unwrapped_before_decimation() {
        // Yaw creeps across the ±180 seam; after unwrapping the windows are continuous.
        let yaw: Vec<f64> = (0..300).map(|i| wrap_angle(170.0 + i as f64 * 0.2)).collect();
        let zeros = vec![0.0; 300];
        let t = Trace::from_axes("w", 250.0, &yaw, &zeros, &zeros).unwrap();
        let set = TraceSet::new(vec![t], "x").unwrap();
        let cfg = PreprocessConfig {
            downsample_factor: 3,
            window_len: 10,
            ..Default::default()
        };
        let w = make_windows(&set, &cfg).unwrap();
        for i in 0..w.windows.count() {
            let s = w.windows.series(i, Axis::Yaw);
            assert!(s.windows(2).all(|p| (p[1] - p[0] - 0.6).abs() < 1e-9));
        }
    }

    proptest! {
        #[test]
        fn count_formula(len in 25usize..400, wl in 2usize..30, stride in 1usize..7) {
            let set = TraceSet::new(vec![ramp(len, 10.0)], "x").unwrap();
            let cfg = PreprocessConfig { downsample_factor: 1, window_len: wl, window_stride: stride, ..Default::default() };
            let expected = if len >= wl { (len - wl) / stride + 1 } else { 0 };
            match make_windows(&set, &cfg) {
                Ok(w) => prop_assert_eq!(w.windows.count(), expected),
                Err(_) => prop_assert_eq!(expected, 0),
            }
        }
    }
}
