use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::preprocess::{unwrap_angles, wrap_angle};
use crate::trace::Axis;
use crate::windows::WindowSet;

pub const DEFAULT_BUCKET_WIDTH: f64 = 10.0;

/// Normalized histogram on a regular grid.
///
/// Bucket `i` (for `i` in `first..first + masses.len()`) covers
/// `[origin + i·width, origin + (i+1)·width)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub width: f64,
    pub origin: f64,
    pub first: i64,
    pub masses: Vec<f64>,
    pub count: usize,
}

impl Histogram {
    fn from_values(values: impl Iterator<Item = f64>, width: f64, origin: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(invalid(format!("bucket width must be positive, got {width}")));
        }
        let indices: Vec<i64> = values.map(|v| ((v - origin) / width).floor() as i64).collect();
        let (Some(&lo), Some(&hi)) = (indices.iter().min(), indices.iter().max()) else {
            return Err(invalid("cannot build a histogram from an empty window set"));
        };
        let mut counts = vec![0usize; (hi - lo + 1) as usize];
        for i in &indices {
            counts[(i - lo) as usize] += 1;
        }
        let total = indices.len() as f64;
        Ok(Histogram {
            width,
            origin,
            first: lo,
            masses: counts.into_iter().map(|c| c as f64 / total).collect(),
            count: indices.len(),
        })
    }

    pub fn center(&self, bucket: i64) -> f64 {
        self.origin + (bucket as f64 + 0.5) * self.width
    }

    /// `(center, mass)` for every stored bucket.
    pub fn buckets(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.masses
            .iter()
            .enumerate()
            .map(|(i, &m)| (self.center(self.first + i as i64), m))
    }

    pub fn mass(&self, bucket: i64) -> f64 {
        let i = bucket - self.first;
        if i < 0 {
            return 0.0;
        }
        self.masses.get(i as usize).copied().unwrap_or(0.0)
    }

    /// Mass of the bucket containing `value`.
    pub fn mass_at(&self, value: f64) -> f64 {
        self.mass(((value - self.origin) / self.width).floor() as i64)
    }

    pub fn last(&self) -> i64 {
        self.first + self.masses.len() as i64 - 1
    }
}

/// Pools every step of every window. Yaw and roll are wrapped into [−180, 180)
/// first; buckets are centered on multiples of `width`.
pub fn orientation_histogram(w: &WindowSet, axis: Axis, width: f64) -> Result<Histogram> {
    let circular = axis.is_circular();
    let values = w
        .axis_values(axis)
        .map(|v| if circular { wrap_angle(v) } else { v });
    Histogram::from_values(values, width, -width / 2.0)
}

/// Per-window series on a continuous scale: circular axes are unwrapped.
pub(crate) fn continuous_series(w: &WindowSet, i: usize, axis: Axis) -> Vec<f64> {
    let s = w.series(i, axis);
    if axis.is_circular() {
        unwrap_angles(&s)
    } else {
        s
    }
}

/// Histogram of per-window `max − min`, buckets starting at `[0, width)`.
pub fn range_distribution(w: &WindowSet, axis: Axis, width: f64) -> Result<Histogram> {
    let ranges = (0..w.count()).map(|i| {
        let s = continuous_series(w, i, axis);
        let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
        hi - lo
    });
    Histogram::from_values(ranges, width, 0.0)
}

/// L1 distance between two histograms on the same grid, over the union of their buckets.
pub fn histogram_l1(a: &Histogram, b: &Histogram) -> Result<f64> {
    if (a.width - b.width).abs() > 1e-12 * a.width || (a.origin - b.origin).abs() > 1e-12 * a.width.max(1.0) {
        return Err(invalid(format!(
            "histogram grids differ (width {} vs {}, origin {} vs {})",
            a.width, b.width, a.origin, b.origin
        )));
    }
    let lo = a.first.min(b.first);
    let hi = a.last().max(b.last());
    Ok((lo..=hi).map(|i| (a.mass(i) - b.mass(i)).abs()).sum())
}
