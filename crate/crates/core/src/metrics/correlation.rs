use serde::{Deserialize, Serialize};

use super::histogram::continuous_series;
use crate::error::{invalid, Result};
use crate::trace::Axis;
use crate::windows::WindowSet;

pub const DEFAULT_MAX_LAG: usize = 10;

/// Relative variance below which a velocity series counts as constant.
const FLAT_VARIANCE: f64 = 1e-20;

/// Mean normalized correlation at lags `0..=max_lag`, over contributing windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCurve {
    pub values: Vec<f64>,
    pub contributing: usize,
    pub skipped: usize,
}

impl CorrelationCurve {
    pub fn max_lag(&self) -> usize {
        self.values.len() - 1
    }

    /// Mean |self − other| over lags 1..=max_lag.
    pub fn mean_abs_deviation(&self, other: &CorrelationCurve) -> f64 {
        let n = self.values.len().min(other.values.len());
        if n < 2 {
            return 0.0;
        }
        (1..n)
            .map(|k| (self.values[k] - other.values[k]).abs())
            .sum::<f64>()
            / (n - 1) as f64
    }

    fn from_sums(sums: Vec<f64>, contributing: usize, skipped: usize) -> Self {
        let values = if contributing == 0 {
            vec![0.0; sums.len()]
        } else {
            sums.into_iter().map(|s| s / contributing as f64).collect()
        };
        CorrelationCurve {
            values,
            contributing,
            skipped,
        }
    }
}

/// How velocities enter the cross-correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VelocityMode {
    /// Magnitudes |v|: co-occurrence of motion regardless of direction.
    #[default]
    Absolute,
    Signed,
}

fn velocity(series: &[f64]) -> Vec<f64> {
    series.windows(2).map(|p| p[1] - p[0]).collect()
}

fn check_lag(w: &WindowSet, max_lag: usize) -> Result<()> {
    if w.len() < max_lag + 2 {
        return Err(invalid(format!(
            "window length {} too short for max_lag {max_lag} (needs ≥ {})",
            w.len(),
            max_lag + 2
        )));
    }
    Ok(())
}

/// Autocorrelation of the per-window velocity, averaged over windows whose
/// velocity is not constant.
pub fn velocity_autocorrelation(w: &WindowSet, axis: Axis, max_lag: usize) -> Result<CorrelationCurve> {
    check_lag(w, max_lag)?;
    let mut sums = vec![0.0; max_lag + 1];
    let (mut contributing, mut skipped) = (0, 0);
    for i in 0..w.count() {
        let v = velocity(&continuous_series(w, i, axis));
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let d: Vec<f64> = v.iter().map(|x| x - mean).collect();
        let denom: f64 = d.iter().map(|x| x * x).sum();
        let scale: f64 = v.iter().map(|x| x * x).sum();
        if denom <= FLAT_VARIANCE * scale || denom == 0.0 {
            skipped += 1;
            continue;
        }
        contributing += 1;
        sums[0] += 1.0;
        for (k, s) in sums.iter_mut().enumerate().skip(1) {
            let num: f64 = (0..n - k).map(|t| d[t] * d[t + k]).sum();
            *s += num / denom;
        }
    }
    Ok(CorrelationCurve::from_sums(sums, contributing, skipped))
}

/// Pearson correlation of `a` and `b`; None when either is constant.
fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    let flat = |s: f64, v: &[f64]| s == 0.0 || s <= FLAT_VARIANCE * v.iter().map(|x| x * x).sum::<f64>();
    if flat(saa, a) || flat(sbb, b) {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Correlation between the velocity of `axis_a` at step t and that of
/// `axis_b` at step t + k, per window, averaged over windows where every lag
/// has non-constant segments on both axes.
pub fn velocity_crosscorrelation(
    w: &WindowSet,
    axis_a: Axis,
    axis_b: Axis,
    max_lag: usize,
    mode: VelocityMode,
) -> Result<CorrelationCurve> {
    if axis_a == axis_b {
        return Err(invalid("cross-correlation needs two different axes"));
    }
    check_lag(w, max_lag)?;
    let prep = |v: Vec<f64>| match mode {
        VelocityMode::Absolute => v.into_iter().map(f64::abs).collect(),
        VelocityMode::Signed => v,
    };
    let mut sums = vec![0.0; max_lag + 1];
    let (mut contributing, mut skipped) = (0, 0);
    let mut row = vec![0.0; max_lag + 1];
    for i in 0..w.count() {
        let a: Vec<f64> = prep(velocity(&continuous_series(w, i, axis_a)));
        let b: Vec<f64> = prep(velocity(&continuous_series(w, i, axis_b)));
        let n = a.len();
        let mut ok = true;
        for (k, r) in row.iter_mut().enumerate() {
            match pearson(&a[..n - k], &b[k..]) {
                Some(v) => *r = v,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            skipped += 1;
            continue;
        }
        contributing += 1;
        for (s, r) in sums.iter_mut().zip(&row) {
            *s += r;
        }
    }
    Ok(CorrelationCurve::from_sums(sums, contributing, skipped))
}
