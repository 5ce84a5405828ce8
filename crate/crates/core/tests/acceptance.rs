//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.
//!
//! `HEADROT_ACCEPTANCE=1,3` runs a subset. `HEADROT_DATASET=<dir of trace CSVs>`
//! enables the dataset-conditional criterion 8.

mod common;

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use headrot::metrics::{
    compare_datasets_with, velocity_crosscorrelation, MetricsConfig, MetricsReport, VelocityMode,
};
use headrot::nn::Tensor;
use headrot::preprocess::{
    apply_transform, downsampling_error_cdf, fit_transform, invert_transform, make_windows, unwrap_angles,
    wrap_angles, PreprocessConfig,
};
use headrot::spectral::{
    analysis_len_for, baseline_windows, energy_fraction_below, estimate_mean_psd, synthesize_traces,
    PsdModel, DEFAULT_TRACE_LEN,
};
use headrot::timegan::{
    check_update_gradients, generate, DirectoryArchive, ScoringSink, SnapshotSink, TimeGanConfig,
    TimeGanModel, TrainSchedule, Trainer,
};
use headrot::toy::{band_limited_trace, sine_windows, SineWindowSpec};
use headrot::trace::load_trace_csv;
use headrot::{Axis, Trace, TraceSet, WindowSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// `Ok(detail)` passes, `Err(detail)` fails, `None` means skipped.
type Outcome = Option<Result<String, String>>;

fn verdict(ok: bool, detail: String) -> Outcome {
    Some(if ok { Ok(detail) } else { Err(detail) })
}

/// Finite-difference step. The generator loss carries weights of 100, so
/// roundoff in the difference quotient grows quickly below this.
const GRAD_STEP: f64 = 1e-4;

fn gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst, mut worst_at, mut checked, mut failures) = (0.0f64, String::new(), 0, Vec::new());
    for (hidden, latent) in [(3, 2), (5, 4), (8, 8)] {
        for seq_len in [2, 6] {
            for three_stream in [false, true] {
                let cfg = TimeGanConfig {
                    hidden_dim: hidden,
                    latent_dim: latent,
                    num_layers: 2,
                    three_stream,
                    ..TimeGanConfig::default()
                };
                let model = TimeGanModel::new(cfg, seq_len, 250.0 / 15.0, rng.random()).unwrap();
                let batch = 3;
                let x = (0..seq_len * batch * 3)
                    .map(|_| rng.random_range(0.0..1.0))
                    .collect();
                let x = Tensor::from_vec(&[seq_len, batch, 3], x).unwrap();
                let z = model.sample_noise(batch, &mut rng);
                for (rule, report) in check_update_gradients(&model, &x, &z, GRAD_STEP, 1e-4).unwrap() {
                    let at = format!("{rule} h={hidden} l={latent} T={seq_len} three_stream={three_stream}");
                    checked += report.checked;
                    if report.max_rel_error > worst || report.max_rel_error.is_nan() {
                        worst = report.max_rel_error;
                        worst_at = at.clone();
                    }
                    if !report.passed() {
                        failures.push(format!("{at}: {} coordinates", report.failures.len()));
                    }
                }
            }
        }
    }
    verdict(
        failures.is_empty(),
        format!("{checked} coordinates, max relative error {worst:.2e} ({worst_at}) {failures:?}"),
    )
}

fn round_trips() -> Outcome {
    let real = sine_windows(&SineWindowSpec::default(), 3);
    let params = fit_transform(&real, 1000).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (count, len) = (4000, 25);
    let data = (0..count * len * 3)
        .map(|i| {
            let r = &params.axes[i % 3].references;
            rng.random_range(r[0]..=r[r.len() - 1])
        })
        .collect();
    let values = WindowSet::new(count, len, real.rate_hz(), data).unwrap();
    let (back, clamped) = invert_transform(&apply_transform(&values, &params), &params);
    let transform_err = values
        .data()
        .iter()
        .zip(back.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let mut angle_err = 0.0f64;
    for _ in 0..100 {
        let mut x = rng.random_range(-1000.0..1000.0);
        let series: Vec<f64> = (0..1000)
            .map(|_| {
                x += rng.random_range(-170.0..170.0);
                x
            })
            .collect();
        let wrapped = wrap_angles(&series);
        let unwrapped = unwrap_angles(&wrapped);
        let shift = series[0] - unwrapped[0];
        for (a, b) in series.iter().zip(&unwrapped) {
            angle_err = angle_err.max((a - b - shift).abs());
        }
        for (a, b) in wrapped.iter().zip(wrap_angles(&unwrapped)) {
            angle_err = angle_err.max((a - b).abs());
        }
    }
    verdict(
        transform_err < 1e-6 && angle_err < 1e-6 && clamped == 0,
        format!("10^5 values per axis: transform max error {transform_err:.2e} deg, unwrap/wrap max error {angle_err:.2e} deg, clamped {clamped}"),
    )
}

fn downsampling() -> Outcome {
    let trace = band_limited_trace("band", 250.0, 30_000, 5);
    let errors = downsampling_error_cdf(&trace, &[15, 25, 50]).unwrap();
    let p99 = |i: usize| errors[i].axes.map(|q| q.p99);
    let (f15, f25, f50) = (p99(0), p99(1), p99(2));
    let ok = f15.iter().all(|&e| e < 0.5) && (0..3).all(|a| f50[a] > f25[a]);
    verdict(
        ok,
        format!("p99 |error| (yaw, pitch, roll): x15 {f15:.3?}, x25 {f25:.3?}, x50 {f50:.3?} deg"),
    )
}

fn fidelity_detail(r: &MetricsReport) -> (bool, String) {
    let orient: Vec<f64> = r.orientation.iter().map(|p| p.l1).collect();
    let range: Vec<f64> = r.range.iter().map(|p| p.l1).collect();
    let auto: Vec<f64> = r.autocorrelation.iter().map(|p| p.mean_abs_deviation).collect();
    let cross: Vec<f64> = r
        .crosscorrelation
        .iter()
        .map(|p| p.synthetic.values[0] - p.real.values[0])
        .collect();
    let ok = orient.iter().all(|&v| v < 0.15)
        && range.iter().all(|&v| v < 0.25)
        && auto.iter().all(|&v| v < 0.15)
        && cross.iter().all(|&v| v.abs() <= 0.2);
    let detail = format!(
        "orientation L1 {orient:.3?} (<0.15), range L1 {range:.3?} (<0.25), autocorrelation deviation {auto:.3?} (<0.15), lag-0 cross-correlation offset {cross:.3?} (±0.2)"
    );
    (ok, detail)
}

fn toy_fidelity() -> Outcome {
    let real = sine_windows(&SineWindowSpec::default(), 7);
    let params = fit_transform(&real, 1000).unwrap();
    let x = apply_transform(&real, &params);
    let schedule = TrainSchedule {
        epochs_embedding: 300,
        epochs_supervised: 300,
        epochs_joint: 500,
        batch_size: 128,
        snapshot_every: 10,
        snapshot_multiplier: 10,
        seed: 7,
        ..TrainSchedule::default()
    };
    let mut trainer = Trainer::new(&x, params, TimeGanConfig::default(), schedule).unwrap();
    let cfg = MetricsConfig::default();
    let mut sink = ScoringSink::new(&real, cfg, None);
    trainer.run(&x, &mut sink).unwrap();
    let selection = sink.selection().unwrap();
    let snapshots = selection.table.len();
    let best = sink.into_best().expect("at least one snapshot");
    let report = compare_datasets_with(&real, &best.windows, &cfg).unwrap();
    let (ok, detail) = fidelity_detail(&report);
    verdict(
        ok,
        format!(
            "best of {snapshots} snapshots at joint epoch {} ({} windows, score {:.3}): {detail}",
            best.epoch,
            best.windows.count(),
            report.score.total
        ),
    )
}

/// Red-noise traces with correlated yaw and pitch, standing in for recorded head motion.
fn red_noise_set(count: usize, len: usize, seed: u64) -> TraceSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let traces = (0..count)
        .map(|i| {
            let mut state = [0.0f64; 3];
            let mut axes: [Vec<f64>; 3] = Default::default();
            for _ in 0..len {
                for s in state.iter_mut() {
                    *s = 0.995 * *s + normal.sample(&mut rng);
                }
                axes[0].push(2.0 * state[0]);
                axes[1].push(0.6 * state[0] + 0.8 * state[1]);
                axes[2].push(0.5 * state[2]);
            }
            Trace::from_axes(format!("red-{i}"), 250.0, &axes[0], &axes[1], &axes[2]).unwrap()
        })
        .collect();
    TraceSet::new(traces, "red noise").unwrap()
}

/// Worst per-bin relative deviation of `mean` from `model` over the
/// highest-power bins that together carry 90% of the non-DC energy.
fn top_energy_deviation(model: &PsdModel, mean: &PsdModel, axis: Axis) -> (f64, usize) {
    let (p, q) = (model.axis(axis), mean.axis(axis));
    let mut bins: Vec<usize> = (1..p.len()).collect();
    bins.sort_by(|&a, &b| p[b].total_cmp(&p[a]));
    let total: f64 = bins.iter().map(|&k| p[k]).sum();
    let (mut acc, mut worst, mut used) = (0.0, 0.0f64, 0);
    for k in bins {
        if acc >= 0.9 * total {
            break;
        }
        acc += p[k];
        used += 1;
        worst = worst.max((q[k] / p[k] - 1.0).abs());
    }
    (worst, used)
}

fn fft_baseline() -> Outcome {
    let real = red_noise_set(18, DEFAULT_TRACE_LEN, 3);
    let analysis_len = analysis_len_for(DEFAULT_TRACE_LEN);
    let model = estimate_mean_psd(&real, analysis_len).unwrap();
    let deviation = |out_len: usize| -> Vec<(f64, usize)> {
        let synthetic = synthesize_traces(&model, 100, out_len, 9).unwrap();
        let mean = estimate_mean_psd(&synthetic, analysis_len).unwrap();
        Axis::ALL
            .iter()
            .map(|&a| top_energy_deviation(&model, &mean, a))
            .collect()
    };
    let show = |d: &[(f64, usize)]| d.iter().map(|(d, n)| format!("{d:.3} ({n})")).collect::<Vec<_>>();
    // Traces of the analysis length sit on the fitted frequency grid. Longer
    // traces are cropped from a finer grid, so each averaged bin keeps ~10%
    // estimator noise; that figure is reported, not gated.
    let exact = deviation(analysis_len);
    let cropped = deviation(DEFAULT_TRACE_LEN);
    let psd_ok = exact.iter().all(|(d, _)| *d < 0.2);

    let windows = baseline_windows(&model, &PreprocessConfig::default(), 100, DEFAULT_TRACE_LEN, 9).unwrap();
    let mut worst = 0.0f64;
    for mode in [VelocityMode::Absolute, VelocityMode::Signed] {
        for (a, b) in Axis::PAIRS {
            let c = velocity_crosscorrelation(&windows, a, b, 10, mode).unwrap();
            worst = c.values.iter().fold(worst, |w, v| w.max(v.abs()));
        }
    }
    let real_windows = make_windows(&real, &PreprocessConfig::default()).unwrap().windows;
    let real_r = velocity_crosscorrelation(&real_windows, Axis::Yaw, Axis::Pitch, 10, VelocityMode::Signed)
        .unwrap()
        .values[0];
    verdict(
        psd_ok && worst < 0.05,
        format!(
            "max relative PSD deviation on top-90% energy bins (bins): {analysis_len}-sample traces {:?} (<0.2), {DEFAULT_TRACE_LEN}-sample traces {:?} (reported); max |velocity cross-correlation| over lags 0..10 {worst:.4} (<0.05; real yaw-pitch lag 0 is {real_r:.3})",
            show(&exact),
            show(&cropped)
        ),
    )
}

fn oracles() -> Outcome {
    common::metric_oracles::check_random_cases(100);
    Some(Ok("100 random sets agree with brute force within 1e-12".into()))
}

/// Every file under `dir`, relative path and bytes, sorted.
fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// One small training run; returns every byte it wrote.
fn determinism_run(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let real = sine_windows(
        &SineWindowSpec {
            count: 200,
            ..SineWindowSpec::default()
        },
        11,
    );
    let params = fit_transform(&real, 200).unwrap();
    let x = apply_transform(&real, &params);
    let cfg = TimeGanConfig {
        hidden_dim: 8,
        latent_dim: 8,
        ..TimeGanConfig::default()
    };
    let schedule = TrainSchedule {
        epochs_embedding: 3,
        epochs_supervised: 3,
        epochs_joint: 4,
        batch_size: 64,
        snapshot_every: 2,
        seed: 5,
        ..TrainSchedule::default()
    };
    let mut trainer = Trainer::new(&x, params, cfg, schedule).unwrap();
    let mut archive = DirectoryArchive::create(dir.join("snapshots")).unwrap();
    trainer.run(&x, &mut archive as &mut dyn SnapshotSink).unwrap();
    let ckpt = trainer.checkpoint();
    ckpt.save(dir.join("checkpoint.bin")).unwrap();
    let generated = generate(&ckpt.model, &ckpt.transform, 500, 3).unwrap();
    generated
        .save(
            dir.join("generated"),
            &headrot::windows::ArchiveMeta::degrees("determinism"),
        )
        .unwrap();
    compare_datasets_with(&real, &generated, &MetricsConfig::default())
        .unwrap()
        .save_json(dir.join("report.json"))
        .unwrap();
    files(dir)
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (fa, fb) = (determinism_run(a.path()), determinism_run(b.path()));
    let differing: Vec<String> = fa
        .iter()
        .zip(&fb)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.display().to_string())
        .collect();
    let bytes: usize = fa.iter().map(|f| f.1.len()).sum();
    verdict(
        fa.len() == fb.len() && differing.is_empty(),
        format!("{} files, {bytes} bytes (checkpoints, snapshot archives, generated archive, report); differing: {differing:?}", fa.len()),
    )
}

fn dataset() -> Outcome {
    let dir = PathBuf::from(std::env::var_os("HEADROT_DATASET")?);
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    let traces = paths.iter().map(|p| load_trace_csv(p, 250.0).unwrap()).collect();
    let set = TraceSet::new(traces, dir.display().to_string()).unwrap();
    let pre = PreprocessConfig::default();
    let windowing = make_windows(&set, &pre).unwrap();
    let decimated_ok = windowing.decimated_lengths.iter().all(|&n| n == 2000);

    let shortest = set.traces().iter().map(|t| t.len()).min().unwrap();
    let psd = estimate_mean_psd(&set, analysis_len_for(shortest)).unwrap();
    let energy = energy_fraction_below(&psd, 5.0).unwrap();
    let energy_ok = energy.iter().all(|&e| e > 0.9);

    let real = windowing.windows;
    let params = fit_transform(&real, pre.quantile_count).unwrap();
    let x = apply_transform(&real, &params);
    let schedule = TrainSchedule::default();
    let mut trainer = Trainer::new(&x, params, TimeGanConfig::default(), schedule).unwrap();
    let cfg = MetricsConfig::default();
    let mut sink = ScoringSink::new(&real, cfg, None);
    trainer.run(&x, &mut sink).unwrap();
    let snapshots = sink.selection().unwrap().table.len();
    let best = sink.into_best().unwrap();
    let (_, fidelity) = fidelity_detail(&compare_datasets_with(&real, &best.windows, &cfg).unwrap());
    verdict(
        decimated_ok && energy_ok && snapshots == 125 && trainer.is_done(),
        format!(
            "{} traces, decimated lengths {:?}; energy below 5 Hz {energy:.3?}; {snapshots} snapshots; best at epoch {} (not gated): {fidelity}",
            set.len(),
            windowing.decimated_lengths,
            best.epoch
        ),
    )
}

fn main() {
    headrot::nn::retain_freed_memory();
    let criteria: [(usize, &str, fn() -> Outcome); 8] = [
        (1, "gradient correctness", gradients),
        (2, "preprocessing round trip", round_trips),
        (3, "downsampling fidelity", downsampling),
        (4, "toy end-to-end fidelity", toy_fidelity),
        (5, "FFT baseline properties", fft_baseline),
        (6, "metric oracle equivalence", oracles),
        (7, "determinism", determinism),
        (8, "source dataset", dataset),
    ];
    let only: Option<Vec<usize>> = std::env::var("HEADROT_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (id, name, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Some(Err(format!("panicked: {msg}")))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Some(Ok(detail)) => println!("criterion {id} ({name}): PASS in {secs:.1} s: {detail}"),
            Some(Err(detail)) => {
                failed += 1;
                println!("criterion {id} ({name}): FAIL in {secs:.1} s: {detail}");
            }
            None => {
                println!("criterion {id} ({name}): SKIP (set HEADROT_DATASET to a directory of trace CSVs)")
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
