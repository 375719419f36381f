use super::pca::SortedEigen;
use crate::error::{LsrError, Result};
use nalgebra::DMatrix;

/// One-stage Saab transform on n x n windows: a constant DC kernel plus
/// n^2 - 1 AC kernels from PCA of DC-removed windows.
#[derive(Debug, Clone, PartialEq)]
pub struct SaabKernelSet {
    pub window: usize,
    /// n^2 x n^2 row-major; row 0 is DC, rows 1.. are AC by descending energy.
    pub kernels: Vec<f64>,
    /// Variance captured by each AC kernel.
    pub ac_energies: Vec<f64>,
    /// Some AC kernels were completed to an orthonormal basis because the
    /// fitting windows did not span their directions.
    pub rank_deficient: bool,
}

impl SaabKernelSet {
    pub fn dim(&self) -> usize {
        self.window * self.window
    }

    /// All n^2 coefficients of a row-major window.
    #[inline]
    pub fn transform_into(&self, window: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for (k, o) in out.iter_mut().enumerate().take(d) {
            let row = &self.kernels[k * d..(k + 1) * d];
            let mut acc = 0.0;
            for i in 0..d {
                acc += row[i] * window[i];
            }
            *o = acc;
        }
    }

    pub fn transform(&self, window: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.transform_into(window, &mut out);
        out
    }
}

/// Orthonormal basis of the complement of the constant vector, as columns
/// of a `dim x (dim - 1)` matrix (Helmert contrasts).
fn dc_complement_basis(dim: usize) -> DMatrix<f64> {
    let mut b = DMatrix::<f64>::zeros(dim, dim - 1);
    for k in 1..dim {
        let norm = ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            b[(i, k - 1)] = 1.0 / norm;
        }
        b[(k, k - 1)] = -(k as f64) / norm;
    }
    b
}

/// Learn a Saab kernel set from row-major n x n windows given as one flat
/// slice.
pub fn fit_saab(windows: &[f64], n: usize) -> Result<SaabKernelSet> {
    let dim = n * n;
    if n == 0 || !windows.len().is_multiple_of(dim) {
        return Err(LsrError::dim(format!("{} values do not split into {n}x{n} windows", windows.len())));
    }
    let count = windows.len() / dim;
    if count < dim {
        return Err(LsrError::param(format!("Saab {n}x{n} needs at least {dim} windows, got {count}")));
    }
    let dc = 1.0 / n as f64;

    let mut ac = vec![0.0; dim];
    let mut mean = vec![0.0; dim];
    for w in windows.chunks_exact(dim) {
        let m = w.iter().sum::<f64>() / dim as f64;
        for (acc, v) in mean.iter_mut().zip(w) {
            *acc += v - m;
        }
    }
    mean.iter_mut().for_each(|v| *v /= count as f64);

    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for w in windows.chunks_exact(dim) {
        let m = w.iter().sum::<f64>() / dim as f64;
        for i in 0..dim {
            ac[i] = w[i] - m - mean[i];
        }
        for a in 0..dim {
            let x = ac[a];
            for b in a..dim {
                cov[(a, b)] += x * ac[b];
            }
        }
    }
    for a in 0..dim {
        for b in a..dim {
            let v = cov[(a, b)] / count as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }

    let basis = dc_complement_basis(dim);
    let reduced = basis.transpose() * &cov * &basis;
    let eig = SortedEigen::of(reduced);
    let rank = eig.rank();

    let mut kernels = vec![dc; dim];
    for k in 0..dim - 1 {
        let v = &eig.vectors[k * (dim - 1)..(k + 1) * (dim - 1)];
        let mut kernel: Vec<f64> = (0..dim).map(|i| (0..dim - 1).map(|j| basis[(i, j)] * v[j]).sum()).collect();
        let mut lead = 0;
        for i in 1..dim {
            if kernel[i].abs() > kernel[lead].abs() {
                lead = i;
            }
        }
        if kernel[lead] < 0.0 {
            kernel.iter_mut().for_each(|x| *x = -*x);
        }
        kernels.extend(kernel);
    }
    Ok(SaabKernelSet { window: n, kernels, ac_energies: eig.values, rank_deficient: rank < dim - 1 })
}

#[cfg(test)]
mod tests {
    use super::super::pca::orthonormality_error;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_windows(n: usize, count: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n * n * count).map(|_| rng.gen_range(0.0..255.0)).collect()
    }

    #[test]
    fn dc_kernel_is_unit_norm_constant() {
        let k = fit_saab(&random_windows(3, 40, 1), 3).unwrap();
        assert!(k.kernels[..9].iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert!(orthonormality_error(&k.kernels, 9) < 1e-6);
        assert!(k.ac_energies.windows(2).all(|p| p[0] >= p[1]));
        assert!(!k.rank_deficient);
    }

    #[test]
    fn constant_windows_have_only_dc() {
        let mut w = Vec::new();
        for i in 0..30 {
            w.extend(std::iter::repeat_n(i as f64 * 3.0, 25));
        }
        let k = fit_saab(&w, 5).unwrap();
        assert!(k.rank_deficient);
        assert!(orthonormality_error(&k.kernels, 25) < 1e-6);
        let coeffs = k.transform(&[12.0; 25]);
        assert!((coeffs[0] - 5.0 * 12.0).abs() < 1e-9);
        assert!(coeffs[1..].iter().all(|c| c.abs() < 1e-9));
    }

    #[test]
    fn two_by_two_recovers_analytic_eigenvectors() {
        // Zero-mean windows along three orthonormal AC directions with
        // decreasing amplitude; the covariance eigenvectors are those
        // directions with eigenvalues amp^2 / 3.
        let u = [[0.5, 0.5, -0.5, -0.5], [0.5, -0.5, 0.5, -0.5], [0.5, -0.5, -0.5, 0.5]];
        let amps = [6.0, 3.0, 1.0];
        let mut w = Vec::new();
        for (dir, amp) in u.iter().zip(amps) {
            for sign in [1.0, -1.0] {
                w.extend(dir.iter().map(|x| sign * amp * x + 10.0));
            }
        }
        let k = fit_saab(&w, 2).unwrap();
        for (i, dir) in u.iter().enumerate() {
            let row = &k.kernels[(i + 1) * 4..(i + 2) * 4];
            for j in 0..4 {
                assert!((row[j] - dir[j]).abs() < 1e-9, "kernel {i}: {row:?}");
            }
            assert!((k.ac_energies[i] - amps[i] * amps[i] / 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn too_few_windows_is_an_error() {
        assert!(matches!(fit_saab(&random_windows(3, 8, 2), 3), Err(LsrError::Parameter(_))));
    }

    #[test]
    fn energy_is_conserved() {
        let k = fit_saab(&random_windows(7, 200, 3), 7).unwrap();
        let w = random_windows(7, 1, 99);
        let c = k.transform(&w);
        let e_in: f64 = w.iter().map(|v| v * v).sum();
        let e_out: f64 = c.iter().map(|v| v * v).sum();
        assert!(((e_in - e_out) / e_in).abs() < 1e-6);
    }
}
