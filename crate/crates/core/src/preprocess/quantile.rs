//! Reversible per-axis quantile-to-normal transform with range scaling.
//!
//! Forward map for one axis: empirical CDF (piecewise linear between quantile
//! table entries) → Φ⁻¹ → affine map of the fitted normal range onto [0, 1].

use serde::{Deserialize, Serialize};

use super::normal::{inverse_normal_cdf, normal_cdf};
use crate::error::{invalid, Error, Result};
use crate::trace::Axis;
use crate::windows::{WindowSet, AXES};

/// Bounds applied to empirical CDF values before Φ⁻¹.
pub const CDF_FLOOR: f64 = 1e-7;
pub const DEFAULT_QUANTILE_COUNT: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisTransform {
    /// Empirical quantiles, non-decreasing.
    pub references: Vec<f64>,
    /// CDF level of each reference, strictly increasing inside (0, 1).
    pub probabilities: Vec<f64>,
    /// Normal-space value mapped to 0.
    pub z_min: f64,
    /// Normal-space value mapped to 1.
    pub z_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformParams {
    pub quantile_count: usize,
    pub axes: Vec<AxisTransform>,
}

/// Linear-interpolated sample quantile of sorted data at level `q` in [0, 1].
pub(crate) fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

impl AxisTransform {
    fn fit(values: &mut [f64], quantile_count: usize, axis: Axis) -> Result<Self> {
        values.sort_by(|a, b| a.total_cmp(b));
        if values[0] == values[values.len() - 1] {
            return Err(Error::DegenerateAxis { axis: axis.name() });
        }
        let last = (quantile_count - 1) as f64;
        let references = (0..quantile_count)
            .map(|i| sorted_quantile(values, i as f64 / last))
            .collect();
        let probabilities: Vec<f64> = (0..quantile_count)
            .map(|i| (i as f64 / last).clamp(CDF_FLOOR, 1.0 - CDF_FLOOR))
            .collect();
        let z_min = inverse_normal_cdf(probabilities[0])?;
        let z_max = inverse_normal_cdf(probabilities[quantile_count - 1])?;
        Ok(AxisTransform {
            references,
            probabilities,
            z_min,
            z_max,
        })
    }

    /// Empirical CDF level of `x`, clamped to the table's probability range.
    pub fn cdf(&self, x: f64) -> f64 {
        let q = &self.references;
        let p = &self.probabilities;
        let n = q.len();
        if x <= q[0] {
            return p[0];
        }
        if x >= q[n - 1] {
            return p[n - 1];
        }
        let lo = q.partition_point(|&v| v < x);
        let hi = q.partition_point(|&v| v <= x);
        if lo < hi {
            // x sits on a run of tied references.
            return 0.5 * (p[lo] + p[hi - 1]);
        }
        let (a, b) = (lo - 1, lo);
        p[a] + (x - q[a]) / (q[b] - q[a]) * (p[b] - p[a])
    }

    /// Inverse of [`AxisTransform::cdf`] on the table's probability range.
    pub fn quantile(&self, prob: f64) -> f64 {
        let q = &self.references;
        let p = &self.probabilities;
        let n = p.len();
        let prob = prob.clamp(p[0], p[n - 1]);
        let b = p.partition_point(|&v| v < prob).clamp(1, n - 1);
        let a = b - 1;
        q[a] + (prob - p[a]) / (p[b] - p[a]) * (q[b] - q[a])
    }

    /// Normal-space value before range scaling.
    pub fn to_normal(&self, x: f64) -> f64 {
        inverse_normal_cdf(self.cdf(x)).expect("cdf is clamped inside (0, 1)")
    }

    pub fn forward(&self, x: f64) -> f64 {
        (self.to_normal(x) - self.z_min) / (self.z_max - self.z_min)
    }

    /// Inverse map; returns the value and whether the input had to be clamped to [0, 1].
    pub fn inverse(&self, s: f64) -> (f64, bool) {
        let clamped = !(0.0..=1.0).contains(&s);
        let s = s.clamp(0.0, 1.0);
        let z = self.z_min + s * (self.z_max - self.z_min);
        (self.quantile(normal_cdf(z)), clamped)
    }
}

impl TransformParams {
    pub fn axis(&self, axis: Axis) -> &AxisTransform {
        &self.axes[axis.index()]
    }
}

/// Fits the transform on all values of each axis pooled over windows and steps.
pub fn fit_transform(w: &WindowSet, quantile_count: usize) -> Result<TransformParams> {
    if quantile_count < 2 {
        return Err(invalid("quantile_count must be at least 2"));
    }
    let per_axis = w.count() * w.len();
    if per_axis < quantile_count {
        return Err(invalid(format!(
            "{per_axis} values per axis is fewer than quantile_count {quantile_count}"
        )));
    }
    let axes = Axis::ALL
        .iter()
        .map(|&axis| {
            let mut values: Vec<f64> = w.axis_values(axis).collect();
            AxisTransform::fit(&mut values, quantile_count, axis)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TransformParams { quantile_count, axes })
}

pub fn apply_transform(w: &WindowSet, params: &TransformParams) -> WindowSet {
    let data = w
        .data()
        .iter()
        .enumerate()
        .map(|(i, &x)| params.axes[i % AXES].forward(x))
        .collect();
    WindowSet::new(w.count(), w.len(), w.rate_hz(), data).expect("transform preserves shape and finiteness")
}

/// Inverts [`apply_transform`]; returns the windows and the number of inputs clamped to [0, 1].
pub fn invert_transform(w: &WindowSet, params: &TransformParams) -> (WindowSet, usize) {
    let mut clamped = 0;
    let data = w
        .data()
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let (x, c) = params.axes[i % AXES].inverse(s);
            clamped += c as usize;
            x
        })
        .collect();
    let set = WindowSet::new(w.count(), w.len(), w.rate_hz(), data)
        .expect("inverse preserves shape and finiteness");
    (set, clamped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn windows_from(values: &[[f64; 3]], len: usize) -> WindowSet {
        let data: Vec<f64> = values.iter().flat_map(|v| v.iter().copied()).collect();
        WindowSet::new(values.len() / len, len, 16.0, data).unwrap()
    }

    fn uniform_set(n: usize, seed: u64) -> WindowSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals: Vec<[f64; 3]> = (0..n)
            .map(|_| {
                [
                    rng.random::<f64>(),
                    rng.random::<f64>() * 20.0 - 10.0,
                    rng.random::<f64>().powi(3),
                ]
            })
            .collect();
        windows_from(&vals, 10)
    }

    #[test]
    fn median_maps_to_zero_and_upper_tail_to_two() {
        let w = uniform_set(20_000, 1);
        // An odd table size puts the median on a table entry.
        let params = fit_transform(&w, 1001).unwrap();
        let mut yaw: Vec<f64> = w.axis_values(Axis::Yaw).collect();
        yaw.sort_by(|a, b| a.total_cmp(b));
        let t = params.axis(Axis::Yaw);
        assert!(t.to_normal(sorted_quantile(&yaw, 0.5)).abs() < 1e-9);
        // Φ(2) = 0.977249868 (series oracle in normal.rs)
        // Between table entries the sample spacing limits the match to about 1e-3.
        let z = t.to_normal(sorted_quantile(&yaw, 0.977249868));
        assert!((z - 2.0).abs() < 1e-2, "{z}");
    }

    #[test]
    fn training_extremes_map_to_unit_interval_ends() {
        let w = uniform_set(5_000, 2);
        let params = fit_transform(&w, 1000).unwrap();
        let out = apply_transform(&w, &params);
        for axis in Axis::ALL {
            let vals: Vec<f64> = out.axis_values(axis).collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(lo.abs() < 1e-12 && (hi - 1.0).abs() < 1e-12, "{axis}: {lo} {hi}");
        }
        let t = params.axis(Axis::Pitch);
        assert_eq!(t.forward(1e9), 1.0);
        assert_eq!(t.forward(-1e9), 0.0);
    }

    #[test]
    fn inverse_of_half_is_median() {
        let w = uniform_set(5_000, 3);
        let params = fit_transform(&w, 1001).unwrap();
        for axis in Axis::ALL {
            let mut v: Vec<f64> = w.axis_values(axis).collect();
            v.sort_by(|a, b| a.total_cmp(b));
            let (x, _) = params.axis(axis).inverse(0.5);
            assert!((x - sorted_quantile(&v, 0.5)).abs() < 1e-6);
        }
    }

    #[test]
    fn clamps_and_counts() {
        let w = uniform_set(2_000, 4);
        let params = fit_transform(&w, 100).unwrap();
        let data = vec![1.3, 0.5, -0.2, 0.5, 0.5, 0.5];
        let out = WindowSet::new(1, 2, 16.0, data).unwrap();
        let (back, clamped) = invert_transform(&out, &params);
        assert_eq!(clamped, 2);
        assert_eq!(back.value(0, 0, Axis::Yaw), params.axis(Axis::Yaw).inverse(1.0).0);
    }

    #[test]
    fn degenerate_and_undersized_inputs() {
        let vals: Vec<[f64; 3]> = (0..100).map(|i| [i as f64, 5.0, i as f64]).collect();
        let w = windows_from(&vals, 10);
        assert!(matches!(
            fit_transform(&w, 10),
            Err(Error::DegenerateAxis { axis: "pitch" })
        ));
        let w = uniform_set(50, 5);
        assert!(fit_transform(&w, 1000).is_err());
    }

    #[test]
    fn ties_are_handled_monotonically() {
        let vals: Vec<[f64; 3]> = (0..400)
            .map(|i| {
                let v = if i % 3 == 0 { 1.0 } else { i as f64 };
                [v, v, v]
            })
            .collect();
        let w = windows_from(&vals, 4);
        let params = fit_transform(&w, 50).unwrap();
        let t = params.axis(Axis::Yaw);
        let mut last = -1.0;
        for k in 0..500 {
            let y = t.forward(k as f64 - 50.0);
            assert!(y >= last);
            last = y;
        }
    }

    #[test]
    fn transformed_values_look_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let vals: Vec<[f64; 3]> = (0..30_000)
            .map(|_| {
                let a: f64 = rng.random();
                [a.powi(4) * 300.0, (a * 7.0).sin(), rng.random::<f64>().ln()]
            })
            .collect();
        let w = windows_from(&vals, 25);
        let params = fit_transform(&w, 1000).unwrap();
        for axis in Axis::ALL {
            let t = params.axis(axis);
            let z: Vec<f64> = w.axis_values(axis).map(|x| t.to_normal(x)).collect();
            let n = z.len() as f64;
            let mean = z.iter().sum::<f64>() / n;
            let m2 = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let m3 = z.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
            let m4 = z.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
            let skew = m3 / m2.powf(1.5);
            let kurt = m4 / (m2 * m2) - 3.0;
            assert!(
                skew.abs() < 0.1 && kurt.abs() < 0.3,
                "{axis}: skew {skew} kurt {kurt}"
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn round_trip_inside_fitted_range(seed in 0u64..1000, qs in prop::collection::vec(0.001f64..0.999, 1..20)) {
            let w = uniform_set(3_000, seed);
            let params = fit_transform(&w, 1000).unwrap();
            for axis in Axis::ALL {
                let t = params.axis(axis);
                let lo = t.references[0];
                let hi = *t.references.last().unwrap();
                for &q in &qs {
                    let x = lo + q * (hi - lo);
                    let (back, clamped) = t.inverse(t.forward(x));
                    prop_assert!(!clamped);
                    prop_assert!((back - x).abs() < 1e-6, "{} -> {}", x, back);
                }
            }
        }

        #[test]
        fn forward_is_monotone(seed in 0u64..1000, a in -20.0f64..20.0, b in -20.0f64..20.0) {
            let w = uniform_set(2_000, seed);
            let params = fit_transform(&w, 200).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for axis in Axis::ALL {
                let t = params.axis(axis);
                prop_assert!(t.forward(lo) <= t.forward(hi));
            }
        }
    }
}
