//! Head-rotation fidelity metrics: orientation and range histograms, velocity
//! auto- and cross-correlation, and a two-component PCA.

mod correlation;
mod histogram;
mod pca;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use correlation::{
    velocity_autocorrelation, velocity_crosscorrelation, CorrelationCurve, VelocityMode, DEFAULT_MAX_LAG,
};
pub use histogram::{
    histogram_l1, orientation_histogram, range_distribution, Histogram, DEFAULT_BUCKET_WIDTH,
};
pub use pca::{pca_fit_project, PcaProjection};

use crate::error::{invalid, Error, Result};
use crate::trace::Axis;
use crate::windows::WindowSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    pub bucket_width: f64,
    pub max_lag: usize,
    /// Upper bound on windows drawn from each set for PCA.
    pub pca_sample: usize,
    pub pca_seed: u64,
    pub velocity_mode: VelocityMode,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            bucket_width: DEFAULT_BUCKET_WIDTH,
            max_lag: DEFAULT_MAX_LAG,
            pca_sample: 1000,
            pca_seed: 0,
            velocity_mode: VelocityMode::Absolute,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramPair {
    pub axis: Axis,
    pub real: Histogram,
    pub synthetic: Histogram,
    pub l1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePair {
    pub axes: (Axis, Axis),
    pub real: CorrelationCurve,
    pub synthetic: CorrelationCurve,
    /// Mean |real − synthetic| over lags 1..=max_lag.
    pub mean_abs_deviation: f64,
}

impl CurvePair {
    fn new(axes: (Axis, Axis), real: CorrelationCurve, synthetic: CorrelationCurve) -> Self {
        let mean_abs_deviation = real.mean_abs_deviation(&synthetic);
        CurvePair {
            axes,
            real,
            synthetic,
            mean_abs_deviation,
        }
    }

    pub fn label(&self) -> String {
        if self.axes.0 == self.axes.1 {
            self.axes.0.to_string()
        } else {
            format!("{}-{}", self.axes.0, self.axes.1)
        }
    }
}

/// The scalar used to rank generated datasets against the real one; lower is better.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityScore {
    pub orientation_l1: [f64; 3],
    pub range_l1: [f64; 3],
    pub autocorrelation_deviation: [f64; 3],
    pub total: f64,
}

impl FidelityScore {
    fn new(orientation_l1: [f64; 3], range_l1: [f64; 3], autocorrelation_deviation: [f64; 3]) -> Self {
        let total = (0..3)
            .map(|i| orientation_l1[i] + range_l1[i] + autocorrelation_deviation[i])
            .sum();
        FidelityScore {
            orientation_l1,
            range_l1,
            autocorrelation_deviation,
            total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config: MetricsConfig,
    pub window_len: usize,
    pub real_count: usize,
    pub synthetic_count: usize,
    pub orientation: Vec<HistogramPair>,
    pub range: Vec<HistogramPair>,
    pub autocorrelation: Vec<CurvePair>,
    pub crosscorrelation: Vec<CurvePair>,
    pub pca: PcaProjection,
    pub score: FidelityScore,
}

fn check_compatible(real: &WindowSet, synthetic: &WindowSet) -> Result<()> {
    if real.len() != synthetic.len() {
        return Err(invalid(format!(
            "window lengths differ: real {}, synthetic {}",
            real.len(),
            synthetic.len()
        )));
    }
    if (real.rate_hz() - synthetic.rate_hz()).abs() > 1e-9 * real.rate_hz() {
        return Err(invalid(format!(
            "window rates differ: real {} Hz, synthetic {} Hz",
            real.rate_hz(),
            synthetic.rate_hz()
        )));
    }
    Ok(())
}

fn histogram_pairs(
    real: &WindowSet,
    synthetic: &WindowSet,
    width: f64,
    f: fn(&WindowSet, Axis, f64) -> Result<Histogram>,
) -> Result<Vec<HistogramPair>> {
    Axis::ALL
        .iter()
        .map(|&axis| {
            let (r, s) = (f(real, axis, width)?, f(synthetic, axis, width)?);
            let l1 = histogram_l1(&r, &s)?;
            Ok(HistogramPair {
                axis,
                real: r,
                synthetic: s,
                l1,
            })
        })
        .collect()
}

fn autocorrelation_pairs(real: &WindowSet, synthetic: &WindowSet, max_lag: usize) -> Result<Vec<CurvePair>> {
    Axis::ALL
        .iter()
        .map(|&axis| {
            Ok(CurvePair::new(
                (axis, axis),
                velocity_autocorrelation(real, axis, max_lag)?,
                velocity_autocorrelation(synthetic, axis, max_lag)?,
            ))
        })
        .collect()
}

fn score_from(orientation: &[HistogramPair], range: &[HistogramPair], auto: &[CurvePair]) -> FidelityScore {
    let pick = |f: &dyn Fn(usize) -> f64| [f(0), f(1), f(2)];
    FidelityScore::new(
        pick(&|i| orientation[i].l1),
        pick(&|i| range[i].l1),
        pick(&|i| auto[i].mean_abs_deviation),
    )
}

/// Ranking score of `synthetic` against `real`: per axis, orientation L1 +
/// range L1 + mean |autocorrelation deviation| over lags 1..=max_lag, summed.
pub fn fidelity_score(real: &WindowSet, synthetic: &WindowSet, cfg: &MetricsConfig) -> Result<FidelityScore> {
    check_compatible(real, synthetic)?;
    let orientation = histogram_pairs(real, synthetic, cfg.bucket_width, orientation_histogram)?;
    let range = histogram_pairs(real, synthetic, cfg.bucket_width, range_distribution)?;
    let auto = autocorrelation_pairs(real, synthetic, cfg.max_lag)?;
    Ok(score_from(&orientation, &range, &auto))
}

pub fn compare_datasets(real: &WindowSet, synthetic: &WindowSet) -> Result<MetricsReport> {
    compare_datasets_with(real, synthetic, &MetricsConfig::default())
}

pub fn compare_datasets_with(
    real: &WindowSet,
    synthetic: &WindowSet,
    cfg: &MetricsConfig,
) -> Result<MetricsReport> {
    check_compatible(real, synthetic)?;
    let orientation = histogram_pairs(real, synthetic, cfg.bucket_width, orientation_histogram)?;
    let range = histogram_pairs(real, synthetic, cfg.bucket_width, range_distribution)?;
    let autocorrelation = autocorrelation_pairs(real, synthetic, cfg.max_lag)?;
    let crosscorrelation = Axis::PAIRS
        .iter()
        .map(|&(a, b)| {
            Ok(CurvePair::new(
                (a, b),
                velocity_crosscorrelation(real, a, b, cfg.max_lag, cfg.velocity_mode)?,
                velocity_crosscorrelation(synthetic, a, b, cfg.max_lag, cfg.velocity_mode)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let sample_n = cfg.pca_sample.min(real.count()).min(synthetic.count());
    let pca = pca_fit_project(real, synthetic, sample_n, cfg.pca_seed)?;
    let score = score_from(&orientation, &range, &autocorrelation);
    Ok(MetricsReport {
        config: *cfg,
        window_len: real.len(),
        real_count: real.count(),
        synthetic_count: synthetic.count(),
        orientation,
        range,
        autocorrelation,
        crosscorrelation,
        pca,
        score,
    })
}

impl MetricsReport {
    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Writes `histograms.csv`, `correlations.csv` and `pca.csv` into `dir`.
    pub fn write_csv(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let csv_err = |path: &Path, e: csv::Error| Error::Format(format!("{}: {e}", path.display()));

        let path = dir.join("histograms.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
        w.write_record(["kind", "axis", "center", "real", "synthetic"])
            .map_err(|e| csv_err(&path, e))?;
        for (kind, pairs) in [("orientation", &self.orientation), ("range", &self.range)] {
            for p in pairs {
                let lo = p.real.first.min(p.synthetic.first);
                let hi = p.real.last().max(p.synthetic.last());
                for b in lo..=hi {
                    w.write_record([
                        kind.to_string(),
                        p.axis.to_string(),
                        p.real.center(b).to_string(),
                        p.real.mass(b).to_string(),
                        p.synthetic.mass(b).to_string(),
                    ])
                    .map_err(|e| csv_err(&path, e))?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let path = dir.join("correlations.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
        w.write_record(["kind", "axes", "lag", "real", "synthetic"])
            .map_err(|e| csv_err(&path, e))?;
        for (kind, pairs) in [
            ("autocorrelation", &self.autocorrelation),
            ("crosscorrelation", &self.crosscorrelation),
        ] {
            for p in pairs {
                for (lag, (r, s)) in p.real.values.iter().zip(&p.synthetic.values).enumerate() {
                    w.write_record([
                        kind.to_string(),
                        p.label(),
                        lag.to_string(),
                        r.to_string(),
                        s.to_string(),
                    ])
                    .map_err(|e| csv_err(&path, e))?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let path = dir.join("pca.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
        w.write_record(["label", "pc1", "pc2"])
            .map_err(|e| csv_err(&path, e))?;
        for (label, points) in [("real", &self.pca.real), ("synthetic", &self.pca.synthetic)] {
            for p in points.iter() {
                w.write_record([label.to_string(), p[0].to_string(), p[1].to_string()])
                    .map_err(|e| csv_err(&path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        Ok(())
    }
}
