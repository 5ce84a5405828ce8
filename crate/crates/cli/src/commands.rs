use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use headrot::metrics::{compare_datasets_with, MetricsReport};
use headrot::preprocess::{
    apply_transform, downsampling_error_cdf, fit_transform, make_windows, TransformParams,
};
use headrot::spectral::{analysis_len_for, baseline_windows, energy_fraction_below, estimate_mean_psd};
use headrot::timegan::{
    generate, Checkpoint, DirectoryArchive, JointLosses, LossHistory, ScoringSink, SnapshotSink, Trainer,
    CHECKPOINT_FILE,
};
use headrot::trace::{load_trace_csv, validate_trace};
use headrot::windows::{ArchiveMeta, Representation};
use headrot::{Axis, Error, TraceSet, WindowSet};
use serde::Serialize;

use crate::config::RunConfig;
use crate::plot::{self, Chart, Series};
use crate::staging::Staging;
use crate::UsageError;

pub const WINDOWS_DIR: &str = "windows";
pub const TRANSFORMED_DIR: &str = "transformed";
pub const TRANSFORM_FILE: &str = "transform.json";
pub const SNAPSHOTS_DIR: &str = "snapshots";

fn require<T: Clone>(value: &Option<T>, what: &str) -> Result<T> {
    value
        .clone()
        .ok_or_else(|| UsageError(format!("missing {what}")).into())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

/// Expands directories to the `.csv` files they contain, sorted by name.
fn trace_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    if paths.is_empty() {
        return Err(UsageError("no trace inputs given (use --traces)".into()).into());
    }
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| Error::Io {
                    path: p.clone(),
                    source: e,
                })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(UsageError("trace inputs contain no .csv files".into()).into());
    }
    Ok(files)
}

fn load_traces(cfg: &RunConfig) -> Result<(TraceSet, Vec<String>)> {
    let files = trace_files(&cfg.traces)?;
    let mut traces = Vec::with_capacity(files.len());
    let mut warnings = Vec::new();
    for f in &files {
        let t = load_trace_csv(f, cfg.rate_hz)?;
        for w in validate_trace(&t) {
            let msg = format!("{}: {w}", f.display());
            eprintln!("warning: {msg}");
            warnings.push(msg);
        }
        traces.push(t);
    }
    let provenance = files
        .iter()
        .map(|f| f.display().to_string())
        .collect::<Vec<_>>()
        .join(";");
    Ok((TraceSet::new(traces, provenance)?, warnings))
}

fn load_degrees(dir: &Path) -> Result<WindowSet> {
    let (w, meta) = WindowSet::load(dir)?;
    if meta.representation != Representation::Degrees {
        return Err(Error::InvalidArgument(format!(
            "{} holds transformed windows, expected degrees",
            dir.display()
        ))
        .into());
    }
    Ok(w)
}

#[derive(Serialize)]
struct TraceSummary {
    subject: String,
    samples: usize,
    decimated_samples: usize,
    windows: usize,
}

#[derive(Serialize)]
struct PreprocessSummary {
    traces: Vec<TraceSummary>,
    trace_count: usize,
    window_count: usize,
    window_len: usize,
    rate_hz: f64,
    /// Transformed values pinned at 0 or 1 by the CDF floor, per axis.
    clamped_values: [usize; 3],
    warnings: Vec<String>,
}

pub fn preprocess(cfg: &RunConfig, stage: &Path) -> Result<()> {
    let (set, mut warnings) = load_traces(cfg)?;
    let windowing = make_windows(&set, &cfg.preprocess)?;
    for w in &windowing.warnings {
        eprintln!("warning: {w}");
    }
    warnings.extend(windowing.warnings.iter().cloned());
    let degrees = &windowing.windows;
    let params = fit_transform(degrees, cfg.preprocess.quantile_count)?;
    let transformed = apply_transform(degrees, &params);

    let meta = |representation| ArchiveMeta {
        representation,
        preprocess: Some(cfg.preprocess),
        provenance: set.provenance().to_string(),
    };
    degrees.save(stage.join(WINDOWS_DIR), &meta(Representation::Degrees))?;
    transformed.save(stage.join(TRANSFORMED_DIR), &meta(Representation::Transformed))?;
    write_json(&stage.join(TRANSFORM_FILE), &params)?;

    let mut clamped_values = [0; 3];
    for (i, v) in transformed.data().iter().enumerate() {
        if *v <= 0.0 || *v >= 1.0 {
            clamped_values[i % 3] += 1;
        }
    }
    let summary = PreprocessSummary {
        traces: set
            .traces()
            .iter()
            .zip(&windowing.per_trace)
            .zip(&windowing.decimated_lengths)
            .map(|((t, &windows), &decimated_samples)| TraceSummary {
                subject: t.subject_id().to_string(),
                samples: t.len(),
                decimated_samples,
                windows,
            })
            .collect(),
        trace_count: set.len(),
        window_count: degrees.count(),
        window_len: degrees.len(),
        rate_hz: degrees.rate_hz(),
        clamped_values,
        warnings,
    };
    write_json(&stage.join("summary.json"), &summary)?;
    eprintln!(
        "{} traces -> {} windows of {} samples at {} Hz",
        summary.trace_count, summary.window_count, summary.window_len, summary.rate_hz
    );
    Ok(())
}

fn write_loss_csvs(history: &LossHistory, dir: &Path) -> Result<()> {
    for (name, values) in [
        ("embedding", &history.embedding),
        ("supervised", &history.supervised),
    ] {
        let mut out = String::from("epoch,loss\n");
        for (i, v) in values.iter().enumerate() {
            let _ = writeln!(out, "{},{v}", i + 1);
        }
        fs::write(dir.join(format!("loss_{name}.csv")), out)?;
    }
    let mut out = format!("epoch,{}\n", JointLosses::FIELDS.join(","));
    for (i, l) in history.joint.iter().enumerate() {
        let cells: Vec<String> = l.to_array().iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{},{}", i + 1, cells.join(","));
    }
    fs::write(dir.join("loss_joint.csv"), out)?;
    Ok(())
}

#[derive(Serialize)]
struct TrainSelection {
    best_epoch: usize,
    snapshot: PathBuf,
    score: headrot::metrics::FidelityScore,
}

pub fn train(cfg: &RunConfig, stage: &Staging) -> Result<()> {
    let data = require(&cfg.data, "preprocessed data directory (--data)")?;
    let (transformed, meta) = WindowSet::load(data.join(TRANSFORMED_DIR))?;
    if meta.representation != Representation::Transformed {
        return Err(
            Error::InvalidArgument(format!("{} does not hold transformed windows", data.display())).into(),
        );
    }
    let real = load_degrees(&data.join(WINDOWS_DIR))?;
    let text = fs::read_to_string(data.join(TRANSFORM_FILE)).map_err(|e| Error::Io {
        path: data.join(TRANSFORM_FILE),
        source: e,
    })?;
    let params: TransformParams = serde_json::from_str(&text).map_err(Error::from)?;

    let mut trainer = match &cfg.resume {
        Some(path) => Trainer::from_checkpoint(Checkpoint::load(path)?),
        None => Trainer::new(&transformed, params, cfg.model, cfg.schedule)?,
    };
    let mut archive = DirectoryArchive::create(stage.path().join(SNAPSHOTS_DIR))?;
    let mut sink = ScoringSink::new(&real, cfg.metrics, Some(&mut archive as &mut dyn SnapshotSink));

    let mut last_phase = None;
    let outcome = loop {
        let before = trainer.position();
        match trainer.step(&transformed, &mut sink) {
            Ok(true) => {}
            Ok(false) => break Ok(()),
            Err(e) => break Err(e),
        }
        let h = trainer.history();
        let pos = trainer.position();
        if last_phase != Some(before.phase) || pos.epoch % 10 == 0 {
            let loss = match before.phase {
                headrot::timegan::Phase::Embedding => h.embedding.last().copied(),
                headrot::timegan::Phase::Supervised => h.supervised.last().copied(),
                headrot::timegan::Phase::Joint => h.joint.last().map(|l| l.generator),
                headrot::timegan::Phase::Done => None,
            };
            if let Some(loss) = loss {
                eprintln!(
                    "{} epoch {}: loss {loss:.6}",
                    before.phase.name(),
                    before.epoch + 1
                );
            }
            last_phase = Some(before.phase);
        }
    };
    if let Err(Error::NonFiniteLoss {
        phase,
        epoch,
        checkpoint,
    }) = outcome
    {
        let checkpoint = match checkpoint {
            Some(p) => Some(stage.rescue(&p)?),
            None => None,
        };
        return Err(Error::NonFiniteLoss {
            phase,
            epoch,
            checkpoint,
        }
        .into());
    }
    outcome?;

    let selection = sink.selection()?;
    drop(sink);
    selection.write_csv(stage.path().join("snapshot_scores.csv"))?;
    let best = selection.best_row();
    write_json(
        &stage.path().join("selection.json"),
        &TrainSelection {
            best_epoch: best.id,
            snapshot: Path::new(SNAPSHOTS_DIR)
                .join(archive.snapshot_dir(best.id).file_name().expect("named")),
            score: best.score,
        },
    )?;
    write_loss_csvs(trainer.history(), stage.path())?;
    trainer.checkpoint().save(stage.path().join(CHECKPOINT_FILE))?;
    eprintln!("best snapshot: epoch {} (score {:.6})", best.id, best.score.total);
    Ok(())
}

#[derive(Serialize)]
struct GenerateSummary {
    checkpoint: PathBuf,
    count: usize,
    window_len: usize,
    seed: u64,
}

pub fn generate_windows(cfg: &RunConfig, stage: &Path) -> Result<()> {
    let path = require(&cfg.checkpoint, "checkpoint (--checkpoint)")?;
    let ckpt = Checkpoint::load(&path)?;
    let count = cfg.count.unwrap_or(10 * ckpt.real_window_count);
    if count == 0 {
        return Err(UsageError("--count must be positive".into()).into());
    }
    let windows = generate(&ckpt.model, &ckpt.transform, count, cfg.seed)?;
    windows.save(
        stage.join(WINDOWS_DIR),
        &ArchiveMeta::degrees(format!("timegan {} seed {}", path.display(), cfg.seed)),
    )?;
    write_json(
        &stage.join("summary.json"),
        &GenerateSummary {
            checkpoint: path,
            count,
            window_len: windows.len(),
            seed: cfg.seed,
        },
    )?;
    eprintln!("generated {count} windows");
    Ok(())
}

#[derive(Serialize)]
struct BaselineSummary {
    analysis_len: usize,
    n_traces: usize,
    trace_len: usize,
    window_count: usize,
    cutoff_hz: f64,
    /// Share of non-DC spectral energy below the cutoff, per axis.
    energy_below_cutoff: [f64; 3],
}

pub fn baseline(cfg: &RunConfig, stage: &Path) -> Result<()> {
    let (set, _) = load_traces(cfg)?;
    let shortest = set.traces().iter().map(|t| t.len()).min().unwrap_or(0);
    let analysis_len = analysis_len_for(shortest);
    let model = estimate_mean_psd(&set, analysis_len)?;
    model.save_json(stage.join("psd.json"))?;
    let n_traces = cfg.baseline.n_traces.unwrap_or(set.len());
    let windows = baseline_windows(
        &model,
        &cfg.preprocess,
        n_traces,
        cfg.baseline.trace_len,
        cfg.seed,
    )?;
    windows.save(
        stage.join(WINDOWS_DIR),
        &ArchiveMeta {
            representation: Representation::Degrees,
            preprocess: Some(cfg.preprocess),
            provenance: format!("fft baseline seed {}", cfg.seed),
        },
    )?;
    let summary = BaselineSummary {
        analysis_len,
        n_traces,
        trace_len: cfg.baseline.trace_len,
        window_count: windows.count(),
        cutoff_hz: cfg.baseline.cutoff_hz,
        energy_below_cutoff: energy_fraction_below(&model, cfg.baseline.cutoff_hz)?,
    };
    write_json(&stage.join("summary.json"), &summary)?;
    eprintln!(
        "baseline: {} windows; energy below {} Hz: yaw {:.4}, pitch {:.4}, roll {:.4}",
        summary.window_count,
        summary.cutoff_hz,
        summary.energy_below_cutoff[0],
        summary.energy_below_cutoff[1],
        summary.energy_below_cutoff[2]
    );
    Ok(())
}

#[derive(Serialize)]
struct Comparison {
    label: String,
    synthetic: PathBuf,
    report: MetricsReport,
}

#[derive(Serialize)]
struct EvaluationReport {
    real: PathBuf,
    comparisons: Vec<Comparison>,
}

fn labels_for(cfg: &RunConfig) -> Result<Vec<String>> {
    if !cfg.labels.is_empty() {
        if cfg.labels.len() != cfg.synthetic.len() {
            return Err(UsageError(format!(
                "{} labels given for {} synthetic sets",
                cfg.labels.len(),
                cfg.synthetic.len()
            ))
            .into());
        }
        return Ok(cfg.labels.clone());
    }
    Ok(cfg
        .synthetic
        .iter()
        .enumerate()
        .map(|(i, p)| {
            p.file_name()
                .and_then(|n| n.to_str())
                .filter(|n| *n != WINDOWS_DIR)
                .or_else(|| p.parent().and_then(|q| q.file_name()).and_then(|n| n.to_str()))
                .map(str::to_string)
                .unwrap_or_else(|| format!("synthetic-{}", i + 1))
        })
        .collect())
}

pub fn evaluate(cfg: &RunConfig, stage: &Path) -> Result<()> {
    let real_path = require(&cfg.real, "real window archive (--real)")?;
    if cfg.synthetic.is_empty() {
        return Err(UsageError("missing synthetic window archive (--synthetic)".into()).into());
    }
    let labels = labels_for(cfg)?;
    let real = load_degrees(&real_path)?;
    let mut comparisons = Vec::new();
    for (label, path) in labels.into_iter().zip(&cfg.synthetic) {
        let synthetic = load_degrees(path)?;
        let report = compare_datasets_with(&real, &synthetic, &cfg.metrics)
            .with_context(|| format!("comparing {} with {}", path.display(), real_path.display()))?;
        eprintln!("{label}: score {:.6}", report.score.total);
        comparisons.push(Comparison {
            label,
            synthetic: path.clone(),
            report,
        });
    }
    for c in &comparisons {
        let dir = stage.join("csv").join(&c.label);
        fs::create_dir_all(&dir)?;
        c.report.write_csv(&dir)?;
    }
    let plots = stage.join("plots");
    fs::create_dir_all(&plots)?;
    for (name, svg) in figures(&comparisons) {
        fs::write(plots.join(format!("{name}.svg")), svg)?;
    }
    write_json(
        &stage.join("report.json"),
        &EvaluationReport {
            real: real_path,
            comparisons,
        },
    )
}

/// The fourteen evaluation figures, keyed by file stem.
fn figures(comparisons: &[Comparison]) -> Vec<(String, String)> {
    let first = &comparisons[0].report;
    let mut out = Vec::new();
    for (kind, title, x_label) in [
        ("orientation", "Orientation distribution", "angle (deg)"),
        ("range", "Per-window range distribution", "range (deg)"),
    ] {
        for i in 0..3 {
            let pick = |r: &MetricsReport| {
                if kind == "orientation" {
                    r.orientation[i].clone()
                } else {
                    r.range[i].clone()
                }
            };
            let real = pick(first).real;
            let mut series = vec![Series::step("real", real.buckets().collect(), real.width)];
            for c in comparisons {
                let h = pick(&c.report).synthetic;
                series.push(Series::step(c.label.clone(), h.buckets().collect(), h.width));
            }
            let axis = Axis::ALL[i];
            out.push((
                format!("{kind}_{axis}"),
                plot::render(&Chart {
                    title: format!("{title}: {axis}"),
                    x_label: x_label.into(),
                    y_label: "probability mass".into(),
                    series,
                }),
            ));
        }
    }
    for (kind, title) in [
        ("autocorrelation", "Velocity autocorrelation"),
        ("crosscorrelation", "Velocity cross-correlation"),
    ] {
        for i in 0..3 {
            let pick = |r: &MetricsReport| {
                if kind == "autocorrelation" {
                    r.autocorrelation[i].clone()
                } else {
                    r.crosscorrelation[i].clone()
                }
            };
            let curve = |v: &[f64]| v.iter().enumerate().map(|(lag, &y)| (lag as f64, y)).collect();
            let pair = pick(first);
            let mut series = vec![Series::line("real", curve(&pair.real.values))];
            for c in comparisons {
                series.push(Series::line(
                    c.label.clone(),
                    curve(&pick(&c.report).synthetic.values),
                ));
            }
            out.push((
                format!("{kind}_{}", pair.label()),
                plot::render(&Chart {
                    title: format!("{title}: {}", pair.label()),
                    x_label: "lag (samples)".into(),
                    y_label: "correlation".into(),
                    series,
                }),
            ));
        }
    }
    let panels: Vec<Chart> = comparisons
        .iter()
        .map(|c| {
            let pts = |v: &[[f64; 2]]| v.iter().map(|p| (p[0], p[1])).collect();
            Chart {
                title: format!("PCA: {}", c.label),
                x_label: "PC1".into(),
                y_label: "PC2".into(),
                series: vec![
                    Series::scatter("real", pts(&c.report.pca.real)),
                    Series::scatter(c.label.clone(), pts(&c.report.pca.synthetic)),
                ],
            }
        })
        .collect();
    out.push(("pca".into(), plot::render_panels(&panels)));
    let series = comparisons
        .iter()
        .map(|c| {
            let s = &c.report.score;
            let parts = s
                .orientation_l1
                .iter()
                .chain(&s.range_l1)
                .chain(&s.autocorrelation_deviation);
            Series::step(
                c.label.clone(),
                parts.enumerate().map(|(i, &v)| (i as f64 + 1.0, v)).collect(),
                1.0,
            )
        })
        .collect();
    out.push((
        "summary".into(),
        plot::render(&Chart {
            title: "Score components (yaw, pitch, roll each)".into(),
            x_label: "1-3 orientation L1, 4-6 range L1, 7-9 autocorrelation deviation".into(),
            y_label: "value".into(),
            series,
        }),
    ));
    out
}

pub fn select(cfg: &RunConfig, stage: &Path) -> Result<()> {
    let root = require(&cfg.archive, "snapshot archive (--archive)")?;
    let real = load_degrees(&require(&cfg.real, "real window archive (--real)")?)?;
    let archive = DirectoryArchive::open(&root)?;
    let selection = archive.select(&real, &cfg.metrics)?;
    selection.write_csv(stage.join("snapshot_scores.csv"))?;
    let best = selection.best_row();
    write_json(
        &stage.join("selection.json"),
        &TrainSelection {
            best_epoch: best.id,
            snapshot: archive.snapshot_dir(best.id),
            score: best.score,
        },
    )?;
    eprintln!("best snapshot: epoch {} (score {:.6})", best.id, best.score.total);
    Ok(())
}

pub fn downsample_analysis(cfg: &RunConfig, stage: &Path) -> Result<()> {
    if cfg.analysis_factors.is_empty() {
        return Err(UsageError("no downsampling factors given".into()).into());
    }
    let (set, _) = load_traces(cfg)?;
    let mut csv = String::from("subject,factor,axis,p50,p90,p99,max\n");
    let mut all = Vec::new();
    for trace in set.traces() {
        let errors = downsampling_error_cdf(trace, &cfg.analysis_factors)?;
        for e in &errors {
            for (axis, q) in Axis::ALL.iter().zip(&e.axes) {
                let _ = writeln!(
                    csv,
                    "{},{},{axis},{},{},{},{}",
                    trace.subject_id(),
                    e.factor,
                    q.p50,
                    q.p90,
                    q.p99,
                    q.max
                );
            }
        }
        all.push(serde_json::json!({ "subject": trace.subject_id(), "errors": errors }));
    }
    fs::write(stage.join("downsample_errors.csv"), csv)?;
    write_json(&stage.join("downsample_errors.json"), &all)
}
