use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::windows::WindowSet;

/// Two-component PCA fitted on equal-size subsamples of both sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    /// Pooled mean of the flattened windows.
    pub mean: Vec<f64>,
    /// Unit principal directions, largest variance first.
    pub components: [Vec<f64>; 2],
    pub explained_variance: [f64; 2],
    pub real: Vec<[f64; 2]>,
    pub synthetic: Vec<[f64; 2]>,
}

/// Sorted indices of a seeded subsample of `n` out of `total`.
fn subsample(total: usize, n: usize, seed: u64, stream: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut idx = rand::seq::index::sample(&mut rng, total, n).into_vec();
    idx.sort_unstable();
    idx
}

/// Flattens windows to `len × 3` vectors, draws `sample_n` of each set,
/// centers on the pooled mean and projects onto the top two eigenvectors of
/// the pooled sample covariance.
pub fn pca_fit_project(
    real: &WindowSet,
    synthetic: &WindowSet,
    sample_n: usize,
    seed: u64,
) -> Result<PcaProjection> {
    if real.len() != synthetic.len() {
        return Err(invalid("PCA needs windows of equal length"));
    }
    if sample_n < 1 || sample_n > real.count() || sample_n > synthetic.count() {
        return Err(invalid(format!(
            "sample size {sample_n} must be in 1..={}",
            real.count().min(synthetic.count())
        )));
    }
    let dim = real.len() * 3;
    let picks_real = subsample(real.count(), sample_n, seed, 0);
    let picks_synth = subsample(synthetic.count(), sample_n, seed, 1);
    let rows: Vec<&[f64]> = picks_real
        .iter()
        .map(|&i| real.window(i))
        .chain(picks_synth.iter().map(|&i| synthetic.window(i)))
        .collect();

    let n = rows.len();
    let mut mean = vec![0.0; dim];
    for r in &rows {
        for (m, v) in mean.iter_mut().zip(r.iter()) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let centered = DMatrix::from_fn(n, dim, |i, j| rows[i][j] - mean[j]);
    let cov = centered.transpose() * &centered / (n.max(2) - 1) as f64;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let component = |rank: usize| -> Vec<f64> {
        let col = eig.eigenvectors.column(order[rank]);
        let mut v: Vec<f64> = col.iter().copied().collect();
        // Fix the sign so the largest-magnitude entry is positive.
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    };
    let components = [component(0), component(1)];
    let explained_variance = [
        eig.eigenvalues[order[0]].max(0.0),
        eig.eigenvalues[order[1]].max(0.0),
    ];

    let project = |i: usize| -> [f64; 2] {
        let row = centered.row(i);
        let dot = |c: &[f64]| row.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
        [dot(&components[0]), dot(&components[1])]
    };
    Ok(PcaProjection {
        real: (0..sample_n).map(project).collect(),
        synthetic: (sample_n..n).map(project).collect(),
        mean,
        components,
        explained_variance,
    })
}
