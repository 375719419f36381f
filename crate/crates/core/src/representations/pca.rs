use crate::error::{LsrError, Result};
use nalgebra::{DMatrix, SymmetricEigen};

/// Relative eigenvalue floor below which a direction counts as unsupported
/// by the data.
const RANK_TOL: f64 = 1e-10;

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue, with
/// each eigenvector signed so its largest-magnitude entry is positive.
pub(crate) struct SortedEigen {
    pub values: Vec<f64>,
    /// Row-major: row `k` is the k-th eigenvector.
    pub vectors: Vec<f64>,
}

impl SortedEigen {
    pub fn of(cov: DMatrix<f64>) -> SortedEigen {
        let dim = cov.nrows();
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut vectors = Vec::with_capacity(dim * dim);
        let mut values = Vec::with_capacity(dim);
        for &k in &order {
            let col = eig.eigenvectors.column(k);
            let mut lead = 0;
            for i in 1..dim {
                if col[i].abs() > col[lead].abs() {
                    lead = i;
                }
            }
            let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
            vectors.extend(col.iter().map(|v| sign * v));
            values.push(eig.eigenvalues[k]);
        }
        SortedEigen { values, vectors }
    }

    pub fn rank(&self) -> usize {
        let top = self.values.first().copied().unwrap_or(0.0).max(0.0);
        if top == 0.0 {
            return 0;
        }
        self.values.iter().filter(|&&v| v > RANK_TOL * top).count()
    }
}

/// Cross-channel PCA applied to the C filter responses at one position.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPcaSet {
    pub channels: usize,
    /// C x C row-major, rows are principal axes in descending variance.
    pub matrix: Vec<f64>,
    pub mean: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// Fewer than `channels` directions carried variance during fitting.
    pub rank_deficient: bool,
}

impl ChannelPcaSet {
    /// Write the C projected coefficients of `response` into `out`.
    #[inline]
    pub fn project_into(&self, response: &[f64], out: &mut [f64]) {
        let c = self.channels;
        for (k, o) in out.iter_mut().enumerate().take(c) {
            let row = &self.matrix[k * c..(k + 1) * c];
            let mut acc = 0.0;
            for j in 0..c {
                acc += row[j] * (response[j] - self.mean[j]);
            }
            *o = acc;
        }
    }

    pub fn project(&self, response: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.channels];
        self.project_into(response, &mut out);
        out
    }
}

/// Mean-centered PCA over per-position response vectors of length `channels`
/// (`responses` is a flat concatenation).
pub fn fit_channel_pca(responses: &[f64], channels: usize) -> Result<ChannelPcaSet> {
    if channels == 0 || !responses.len().is_multiple_of(channels) {
        return Err(LsrError::dim(format!("{} response values do not split into {channels}-vectors", responses.len())));
    }
    let n = responses.len() / channels;
    if n < channels {
        return Err(LsrError::param(format!("channel PCA needs at least {channels} response vectors, got {n}")));
    }
    let mut mean = vec![0.0; channels];
    for v in responses.chunks_exact(channels) {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut cov = DMatrix::<f64>::zeros(channels, channels);
    let mut centered = vec![0.0; channels];
    for v in responses.chunks_exact(channels) {
        for j in 0..channels {
            centered[j] = v[j] - mean[j];
        }
        for a in 0..channels {
            for b in a..channels {
                cov[(a, b)] += centered[a] * centered[b];
            }
        }
    }
    for a in 0..channels {
        for b in a..channels {
            let v = cov[(a, b)] / n as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let eig = SortedEigen::of(cov);
    let rank_deficient = eig.rank() < channels;
    Ok(ChannelPcaSet { channels, matrix: eig.vectors, mean, eigenvalues: eig.values, rank_deficient })
}

/// max |M M^T - I| for a square row-major matrix.
pub fn orthonormality_error(matrix: &[f64], dim: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for a in 0..dim {
        for b in 0..dim {
            let dot: f64 = (0..dim).map(|k| matrix[a * dim + k] * matrix[b * dim + k]).sum();
            let want = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((dot - want).abs());
        }
    }
    worst
}
