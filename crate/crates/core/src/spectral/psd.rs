use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fft::{fft, ifft_complex, Spectrum};
use crate::error::{invalid, Error, Result};
use crate::preprocess::{make_windows, unwrap_angles, PreprocessConfig};
use crate::trace::{Axis, Trace, TraceSet};
use crate::windows::{WindowSet, AXES};

/// Length of synthesized baseline traces, matching the source recordings.
pub const DEFAULT_TRACE_LEN: usize = 30_000;

/// Per-axis mean periodogram of mean-removed traces.
///
/// `psd[axis][k]` is the density at frequency `k · rate_hz / analysis_len`
/// for `k = 0..=analysis_len/2`, in deg²/Hz, without one-sided doubling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdModel {
    pub rate_hz: f64,
    pub analysis_len: usize,
    pub means: Vec<f64>,
    pub psd: Vec<Vec<f64>>,
}

impl PsdModel {
    pub fn bin_count(&self) -> usize {
        self.analysis_len / 2 + 1
    }

    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.rate_hz / self.analysis_len as f64
    }

    pub fn nyquist(&self) -> f64 {
        self.rate_hz / 2.0
    }

    pub fn axis(&self, axis: Axis) -> &[f64] {
        &self.psd[axis.index()]
    }

    /// Density at `freq` by linear interpolation between bins.
    pub fn density_at(&self, axis: Axis, freq: f64) -> f64 {
        let psd = self.axis(axis);
        let pos = (freq / self.rate_hz * self.analysis_len as f64).clamp(0.0, (psd.len() - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(psd.len() - 1);
        psd[lo] + (pos - lo as f64) * (psd[hi] - psd[lo])
    }

    fn validate(&self) -> Result<()> {
        let ok = self.rate_hz > 0.0
            && self.analysis_len >= 2
            && self.analysis_len.is_power_of_two()
            && self.means.len() == AXES
            && self.psd.len() == AXES
            && self
                .psd
                .iter()
                .all(|p| p.len() == self.bin_count() && p.iter().all(|&v| v >= 0.0 && v.is_finite()));
        if ok {
            Ok(())
        } else {
            Err(Error::Format("PSD model is inconsistent".into()))
        }
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: PsdModel = serde_json::from_str(&text)?;
        model.validate()?;
        Ok(model)
    }
}

/// Largest power of two not exceeding `len`.
pub fn analysis_len_for(len: usize) -> usize {
    if len == 0 {
        0
    } else {
        1 << (usize::BITS - 1 - len.leading_zeros())
    }
}

/// Averages the periodograms of the first `analysis_len` samples of every
/// trace, per axis, after unwrapping and removing each segment's mean.
pub fn estimate_mean_psd(set: &TraceSet, analysis_len: usize) -> Result<PsdModel> {
    if analysis_len < 2 || !analysis_len.is_power_of_two() {
        return Err(invalid(format!(
            "analysis length must be a power of two ≥ 2, got {analysis_len}"
        )));
    }
    let rate = set.rate_hz().ok_or_else(|| invalid("trace set is empty"))?;
    let short: Vec<String> = set
        .traces()
        .iter()
        .filter(|t| t.len() < analysis_len)
        .map(|t| format!("{} ({} samples)", t.subject_id(), t.len()))
        .collect();
    if !short.is_empty() {
        return Err(invalid(format!(
            "traces shorter than analysis length {analysis_len}: {}",
            short.join(", ")
        )));
    }
    let bins = analysis_len / 2 + 1;
    let norm = analysis_len as f64 * rate;
    let mut psd = vec![vec![0.0; bins]; AXES];
    let mut means = vec![0.0; AXES];
    for trace in set.traces() {
        for axis in Axis::ALL {
            let series = unwrap_angles(&trace.axis(axis));
            let segment = &series[..analysis_len];
            let mean = segment.iter().sum::<f64>() / analysis_len as f64;
            means[axis.index()] += mean;
            let centered: Vec<f64> = segment.iter().map(|v| v - mean).collect();
            let spectrum = fft(&centered, analysis_len)?;
            for (p, c) in psd[axis.index()].iter_mut().zip(spectrum.coefficients()) {
                *p += c.norm_sqr() / norm;
            }
        }
    }
    let n = set.len() as f64;
    for axis in 0..AXES {
        means[axis] /= n;
        for p in psd[axis].iter_mut() {
            *p /= n;
        }
    }
    Ok(PsdModel {
        rate_hz: rate,
        analysis_len,
        means,
        psd,
    })
}

/// Share of spectral energy at frequencies ≤ `freq`, per axis, ignoring DC.
pub fn energy_fraction_below(model: &PsdModel, freq: f64) -> Result<[f64; AXES]> {
    if !(freq > 0.0 && freq <= model.nyquist()) {
        return Err(invalid(format!(
            "frequency {freq} Hz outside (0, {}] Hz",
            model.nyquist()
        )));
    }
    let mut out = [0.0; AXES];
    for axis in Axis::ALL {
        let psd = model.axis(axis);
        let total: f64 = psd[1..].iter().sum();
        let below: f64 = psd[1..]
            .iter()
            .enumerate()
            .filter(|(i, _)| model.frequency(i + 1) <= freq * (1.0 + 1e-12))
            .map(|(_, p)| p)
            .sum();
        out[axis.index()] = if total > 0.0 { below / total } else { 0.0 };
    }
    Ok(out)
}

/// Random-phase spectrum of length `m` whose expected periodogram equals the model PSD.
fn random_phase_spectrum<R: Rng>(model: &PsdModel, axis: Axis, m: usize, rng: &mut R) -> Result<Spectrum> {
    let fs = model.rate_hz;
    let scale = m as f64 * fs;
    let magnitude = |k: usize| (model.density_at(axis, k as f64 * fs / m as f64) * scale).sqrt();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); m];
    let half = m / 2;
    let sign = |rng: &mut R| if rng.random::<bool>() { 1.0 } else { -1.0 };
    coeffs[0] = Complex64::new(magnitude(0) * sign(rng), 0.0);
    for k in 1..half {
        let phase = rng.random_range(0.0..2.0 * PI);
        let c = Complex64::from_polar(magnitude(k), phase);
        coeffs[k] = c;
        coeffs[m - k] = c.conj();
    }
    if m >= 2 {
        coeffs[half] = Complex64::new(magnitude(half) * sign(rng), 0.0);
    }
    Spectrum::from_coefficients(coeffs)
}

fn synthesize_trace(model: &PsdModel, index: usize, out_len: usize, seed: u64) -> Result<(Trace, f64)> {
    let m = out_len.max(model.analysis_len).next_power_of_two();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(AXES);
    let mut residue = 0.0f64;
    for axis in Axis::ALL {
        let spectrum = random_phase_spectrum(model, axis, m, &mut rng)?;
        let signal = ifft_complex(&spectrum);
        let mean = model.means[axis.index()];
        residue = signal.iter().fold(residue, |r, c| r.max(c.im.abs()));
        axes.push(signal[..out_len].iter().map(|c| c.re + mean).collect());
    }
    let trace = Trace::from_axes(
        format!("fft-{index}"),
        model.rate_hz,
        &axes[0],
        &axes[1],
        &axes[2],
    )?;
    Ok((trace, residue))
}

/// Synthesizes `n_traces` traces of `out_len` samples with independent axes.
///
/// Spectra are built at the next power of two covering both `out_len` and the
/// analysis length, with the PSD interpolated in frequency, then cropped.
/// Trace `i` draws its phases from stream `i` of `seed`.
pub fn synthesize_traces(model: &PsdModel, n_traces: usize, out_len: usize, seed: u64) -> Result<TraceSet> {
    if n_traces < 1 || out_len < 1 {
        return Err(invalid("need at least one trace of at least one sample"));
    }
    model.validate()?;
    let traces = (0..n_traces)
        .map(|i| synthesize_trace(model, i, out_len, seed).map(|(t, _)| t))
        .collect::<Result<Vec<_>>>()?;
    TraceSet::new(traces, "fft-baseline")
}

/// Synthesizes traces and windows them exactly as the real pipeline does.
pub fn baseline_windows(
    model: &PsdModel,
    cfg: &PreprocessConfig,
    n_traces: usize,
    trace_len: usize,
    seed: u64,
) -> Result<WindowSet> {
    let set = synthesize_traces(model, n_traces, trace_len, seed)?;
    Ok(make_windows(&set, cfg)?.windows)
}
