//! Every metric recomputed by brute force on small random window sets.

use std::collections::BTreeMap;

use headrot::metrics::{
    compare_datasets_with, histogram_l1, orientation_histogram, pca_fit_project, range_distribution,
    velocity_autocorrelation, velocity_crosscorrelation, Histogram, MetricsConfig, VelocityMode,
};
use headrot::{Axis, WindowSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-12;

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= TOL * scale.max(1.0)
}

/// Random windows mixing noise with constant and ramp windows (which must be
/// skipped by the correlation estimators).
fn random_set(rng: &mut ChaCha8Rng, count: usize, len: usize) -> WindowSet {
    let mut data = Vec::with_capacity(count * len * 3);
    for _ in 0..count {
        let kind = rng.random_range(0..10);
        let start: [f64; 3] = [
            rng.random_range(-300.0..300.0),
            rng.random_range(-80.0..80.0),
            rng.random_range(-300.0..300.0),
        ];
        let slope: [f64; 3] = [
            rng.random_range(-20.0..20.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(-20.0..20.0),
        ];
        for t in 0..len {
            for a in 0..3 {
                let v = match kind {
                    0 => start[a],
                    1 => start[a] + slope[a] * t as f64,
                    _ => start[a] + rng.random_range(-90.0..90.0),
                };
                data.push(v);
            }
        }
    }
    WindowSet::new(count, len, 16.0, data).unwrap()
}

fn wrap(v: f64) -> f64 {
    (v + 180.0).rem_euclid(360.0) - 180.0
}

fn unwrap(s: &[f64]) -> Vec<f64> {
    let mut out = vec![s[0]];
    let mut offset = 0.0;
    for t in 1..s.len() {
        let mut d = s[t] - s[t - 1];
        while d >= 180.0 {
            d -= 360.0;
            offset -= 360.0;
        }
        while d < -180.0 {
            d += 360.0;
            offset += 360.0;
        }
        out.push(s[t] + offset);
    }
    out
}

fn series(w: &WindowSet, i: usize, axis: Axis) -> Vec<f64> {
    let raw: Vec<f64> = (0..w.len()).map(|t| w.window(i)[t * 3 + axis.index()]).collect();
    if axis == Axis::Pitch {
        raw
    } else {
        unwrap(&raw)
    }
}

/// Bucket masses keyed by bucket index, found by testing every candidate bucket.
fn brute_histogram(values: &[f64], width: f64, origin: f64) -> BTreeMap<i64, f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut masses = BTreeMap::new();
    let first = ((lo - origin) / width).floor() as i64 - 1;
    let last = ((hi - origin) / width).floor() as i64 + 1;
    for b in first..=last {
        let (left, right) = (origin + b as f64 * width, origin + (b + 1) as f64 * width);
        let n = values.iter().filter(|&&v| left <= v && v < right).count();
        if n > 0 {
            masses.insert(b, n as f64 / values.len() as f64);
        }
    }
    masses
}

fn same_histogram(h: &Histogram, oracle: &BTreeMap<i64, f64>) -> bool {
    let total: f64 = oracle.values().sum();
    let stored_ok =
        (h.first..=h.last()).all(|b| close(h.mass(b), oracle.get(&b).copied().unwrap_or(0.0), 1.0));
    stored_ok && oracle.keys().all(|&b| b >= h.first && b <= h.last()) && close(total, 1.0, 1.0)
}

fn brute_l1(a: &BTreeMap<i64, f64>, b: &BTreeMap<i64, f64>) -> f64 {
    let keys: std::collections::BTreeSet<i64> = a.keys().chain(b.keys()).copied().collect();
    keys.iter()
        .map(|k| (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs())
        .sum()
}

fn orientation_oracle(w: &WindowSet, axis: Axis, width: f64) -> BTreeMap<i64, f64> {
    let values: Vec<f64> = (0..w.count())
        .flat_map(|i| (0..w.len()).map(move |t| (i, t)))
        .map(|(i, t)| w.window(i)[t * 3 + axis.index()])
        .map(|v| if axis == Axis::Pitch { v } else { wrap(v) })
        .collect();
    brute_histogram(&values, width, -width / 2.0)
}

fn range_oracle(w: &WindowSet, axis: Axis, width: f64) -> BTreeMap<i64, f64> {
    let ranges: Vec<f64> = (0..w.count())
        .map(|i| {
            let s = series(w, i, axis);
            let mut r: f64 = 0.0;
            for a in &s {
                for b in &s {
                    r = r.max(a - b);
                }
            }
            r
        })
        .collect();
    brute_histogram(&ranges, width, 0.0)
}

fn diff(s: &[f64]) -> Vec<f64> {
    (1..s.len()).map(|t| s[t] - s[t - 1]).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn flat(centered_sq: f64, raw: &[f64]) -> bool {
    centered_sq == 0.0 || centered_sq <= 1e-20 * raw.iter().map(|x| x * x).sum::<f64>()
}

/// (curve, contributing, skipped)
fn auto_oracle(w: &WindowSet, axis: Axis, max_lag: usize) -> (Vec<f64>, usize, usize) {
    let mut curves = Vec::new();
    let mut skipped = 0;
    for i in 0..w.count() {
        let v = diff(&series(w, i, axis));
        let m = mean(&v);
        let var: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
        if flat(var, &v) {
            skipped += 1;
            continue;
        }
        let curve: Vec<f64> = (0..=max_lag)
            .map(|k| {
                if k == 0 {
                    return 1.0;
                }
                let mut num = 0.0;
                for t in 0..v.len() - k {
                    num += (v[t] - m) * (v[t + k] - m);
                }
                num / var
            })
            .collect();
        curves.push(curve);
    }
    (average(&curves, max_lag), curves.len(), skipped)
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let (ma, mb) = (mean(a), mean(b));
    let cov: f64 = (0..a.len()).map(|t| (a[t] - ma) * (b[t] - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|x| (x - mb) * (x - mb)).sum();
    if flat(va, a) || flat(vb, b) {
        return None;
    }
    Some((cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0))
}

fn cross_oracle(
    w: &WindowSet,
    a: Axis,
    b: Axis,
    max_lag: usize,
    mode: VelocityMode,
) -> (Vec<f64>, usize, usize) {
    let prep = |v: Vec<f64>| -> Vec<f64> {
        match mode {
            VelocityMode::Absolute => v.iter().map(|x| x.abs()).collect(),
            VelocityMode::Signed => v,
        }
    };
    let mut curves = Vec::new();
    let mut skipped = 0;
    for i in 0..w.count() {
        let va = prep(diff(&series(w, i, a)));
        let vb = prep(diff(&series(w, i, b)));
        let n = va.len();
        let curve: Option<Vec<f64>> = (0..=max_lag).map(|k| pearson(&va[..n - k], &vb[k..])).collect();
        match curve {
            Some(c) => curves.push(c),
            None => skipped += 1,
        }
    }
    (average(&curves, max_lag), curves.len(), skipped)
}

fn average(curves: &[Vec<f64>], max_lag: usize) -> Vec<f64> {
    (0..=max_lag)
        .map(|k| {
            if curves.is_empty() {
                0.0
            } else {
                curves.iter().map(|c| c[k]).sum::<f64>() / curves.len() as f64
            }
        })
        .collect()
}

fn mean_abs_dev(a: &[f64], b: &[f64]) -> f64 {
    (1..a.len()).map(|k| (a[k] - b[k]).abs()).sum::<f64>() / (a.len() - 1) as f64
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix (row-major).
/// Returns eigenvalues and eigenvectors as columns of `v`.
fn jacobi(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let diag: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-32 * diag {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

struct PcaOracle {
    components: [Vec<f64>; 2],
    variance: [f64; 2],
    real: Vec<[f64; 2]>,
    synthetic: Vec<[f64; 2]>,
}

fn pick(total: usize, n: usize, seed: u64, stream: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut idx = rand::seq::index::sample(&mut rng, total, n).into_vec();
    idx.sort_unstable();
    idx
}

fn pca_oracle(real: &WindowSet, synth: &WindowSet, n: usize, seed: u64) -> PcaOracle {
    let rows: Vec<Vec<f64>> = pick(real.count(), n, seed, 0)
        .into_iter()
        .map(|i| real.window(i).to_vec())
        .chain(
            pick(synth.count(), n, seed, 1)
                .into_iter()
                .map(|i| synth.window(i).to_vec()),
        )
        .collect();
    let dim = rows[0].len();
    let m: Vec<f64> = (0..dim)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64)
        .collect();
    let cov: Vec<Vec<f64>> = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| {
                    rows.iter().map(|r| (r[i] - m[i]) * (r[j] - m[j])).sum::<f64>() / (rows.len() - 1) as f64
                })
                .collect()
        })
        .collect();
    let (values, vectors) = jacobi(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let component = |r: usize| -> Vec<f64> {
        let mut c: Vec<f64> = (0..dim).map(|i| vectors[i][order[r]]).collect();
        let big = c
            .iter()
            .copied()
            .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if big < 0.0 {
            c.iter_mut().for_each(|x| *x = -*x);
        }
        c
    };
    let components = [component(0), component(1)];
    let project = |r: &Vec<f64>| -> [f64; 2] {
        let p = |c: &Vec<f64>| (0..dim).map(|j| (r[j] - m[j]) * c[j]).sum::<f64>();
        [p(&components[0]), p(&components[1])]
    };
    let points: Vec<[f64; 2]> = rows.iter().map(project).collect();
    PcaOracle {
        variance: [values[order[0]].max(0.0), values[order[1]].max(0.0)],
        real: points[..n].to_vec(),
        synthetic: points[n..].to_vec(),
        components,
    }
}

/// Compares every metric with its brute-force recomputation on `cases` random
/// small window sets; panics on the first mismatch.
pub fn check_random_cases(cases: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..cases {
        let len = rng.random_range(3..=8);
        let (nr, ns) = (rng.random_range(2..=20), rng.random_range(2..=20));
        let real = random_set(&mut rng, nr, len);
        let synth = random_set(&mut rng, ns, len);
        let cfg = MetricsConfig {
            bucket_width: [5.0, 10.0, 15.0][rng.random_range(0..3)],
            max_lag: rng.random_range(1..=len - 2),
            pca_sample: rng.random_range(2..=20),
            pca_seed: rng.random(),
            velocity_mode: if rng.random() {
                VelocityMode::Absolute
            } else {
                VelocityMode::Signed
            },
        };
        let report = compare_datasets_with(&real, &synth, &cfg).unwrap();
        let mut total = 0.0;

        for (i, axis) in Axis::ALL.into_iter().enumerate() {
            let (or, os) = (
                orientation_oracle(&real, axis, cfg.bucket_width),
                orientation_oracle(&synth, axis, cfg.bucket_width),
            );
            let h = orientation_histogram(&real, axis, cfg.bucket_width).unwrap();
            assert!(same_histogram(&h, &or), "case {case} orientation {axis}");
            assert!(
                same_histogram(&report.orientation[i].synthetic, &os),
                "case {case} orientation {axis}"
            );
            let l1 = brute_l1(&or, &os);
            assert!(
                close(report.orientation[i].l1, l1, 1.0),
                "case {case} orientation l1 {axis}"
            );

            let (rr, rs) = (
                range_oracle(&real, axis, cfg.bucket_width),
                range_oracle(&synth, axis, cfg.bucket_width),
            );
            let h = range_distribution(&synth, axis, cfg.bucket_width).unwrap();
            assert!(same_histogram(&h, &rs), "case {case} range {axis}");
            assert!(
                same_histogram(&report.range[i].real, &rr),
                "case {case} range {axis}"
            );
            let rl1 = brute_l1(&rr, &rs);
            assert!(
                close(histogram_l1(&report.range[i].real, &h).unwrap(), rl1, 1.0),
                "case {case} range l1 {axis}"
            );

            let (ar, cr, sr) = auto_oracle(&real, axis, cfg.max_lag);
            let (as_, _, _) = auto_oracle(&synth, axis, cfg.max_lag);
            let c = velocity_autocorrelation(&real, axis, cfg.max_lag).unwrap();
            assert_eq!(
                (c.contributing, c.skipped),
                (cr, sr),
                "case {case} autocorrelation counts {axis}"
            );
            assert!(
                c.values.iter().zip(&ar).all(|(a, b)| close(*a, *b, 1.0)),
                "case {case} autocorrelation {axis}"
            );
            let dev = mean_abs_dev(&ar, &as_);
            assert!(
                close(report.autocorrelation[i].mean_abs_deviation, dev, 1.0),
                "case {case} autocorrelation deviation"
            );
            total += l1 + rl1 + dev;
        }
        assert!(close(report.score.total, total, 1.0), "case {case} score");

        for (i, (a, b)) in Axis::PAIRS.into_iter().enumerate() {
            let (cr, n, s) = cross_oracle(&synth, a, b, cfg.max_lag, cfg.velocity_mode);
            let c = velocity_crosscorrelation(&synth, a, b, cfg.max_lag, cfg.velocity_mode).unwrap();
            assert_eq!(
                (c.contributing, c.skipped),
                (n, s),
                "case {case} cross counts {a}-{b}"
            );
            assert!(
                c.values.iter().zip(&cr).all(|(x, y)| close(*x, *y, 1.0)),
                "case {case} cross {a}-{b}"
            );
            assert_eq!(report.crosscorrelation[i].synthetic, c);
        }

        let n = cfg.pca_sample.min(real.count()).min(synth.count());
        let p = pca_fit_project(&real, &synth, n, cfg.pca_seed).unwrap();
        assert_eq!(report.pca, p);
        let o = pca_oracle(&real, &synth, n, cfg.pca_seed);
        let scale = o.variance[0];
        for r in 0..2 {
            assert!(
                close(p.explained_variance[r], o.variance[r], scale),
                "case {case} pca variance"
            );
            assert!(
                p.components[r]
                    .iter()
                    .zip(&o.components[r])
                    .all(|(x, y)| close(*x, *y, 1.0)),
                "case {case} pca component {r}"
            );
        }
        let spread = scale.sqrt();
        for (x, y) in p
            .real
            .iter()
            .chain(&p.synthetic)
            .zip(o.real.iter().chain(&o.synthetic))
        {
            assert!(
                close(x[0], y[0], spread) && close(x[1], y[1], spread),
                "case {case} pca projection {x:?} vs {y:?}"
            );
        }
    }
}
