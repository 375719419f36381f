use crate::error::{LsrError, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_MAX_ITERS: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel {
    pub k: usize,
    pub dim: usize,
    /// k x dim row-major.
    pub centroids: Vec<f64>,
}

#[inline]
fn dist2(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        acc += d * d;
    }
    acc
}

impl KMeansModel {
    pub fn centroid(&self, j: usize) -> &[f64] {
        &self.centroids[j * self.dim..(j + 1) * self.dim]
    }

    /// Nearest centroid; ties go to the lowest index.
    pub fn assign(&self, x: &[f64]) -> usize {
        self.nearest(x).0
    }

    fn nearest(&self, x: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for j in 0..self.k {
            let d = dist2(x, self.centroid(j));
            if d < best.1 {
                best = (j, d);
            }
        }
        best
    }
}

/// k-means++ seeding followed by Lloyd iterations. Stops when no centroid
/// moves by `tol` or more (Euclidean) or after `max_iters` rounds. A cluster
/// left empty is re-seeded with the point farthest from its centroid.
pub fn kmeans_fit(data: &[f64], dim: usize, k: usize, seed: u64, max_iters: usize, tol: f64) -> Result<KMeansModel> {
    if dim == 0 || !data.len().is_multiple_of(dim) {
        return Err(LsrError::dim(format!("{} values do not split into {dim}-vectors", data.len())));
    }
    let n = data.len() / dim;
    if k == 0 || n < k {
        return Err(LsrError::param(format!("k-means with k={k} needs at least {k} points, got {n}")));
    }
    let point = |i: usize| &data[i * dim..(i + 1) * dim];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centroids = Vec::with_capacity(k * dim);
    centroids.extend_from_slice(point(rng.gen_range(0..n)));
    let mut d2: Vec<f64> = (0..n).map(|i| dist2(point(i), &centroids[..dim])).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            pick
        } else {
            0
        };
        let c = point(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(dist2(point(i), &c));
        }
        centroids.extend(c);
    }

    let mut model = KMeansModel { k, dim, centroids };
    let mut labels = vec![0usize; n];
    let mut dists = vec![0.0; n];
    for _ in 0..max_iters {
        for i in 0..n {
            let (j, d) = model.nearest(point(i));
            labels[i] = j;
            dists[i] = d;
        }
        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            for (s, v) in sums[labels[i] * dim..(labels[i] + 1) * dim].iter_mut().zip(point(i)) {
                *s += v;
            }
        }
        let mut shift: f64 = 0.0;
        for j in 0..k {
            let new: Vec<f64> = if counts[j] > 0 {
                sums[j * dim..(j + 1) * dim].iter().map(|s| s / counts[j] as f64).collect()
            } else {
                let mut far = 0;
                for i in 1..n {
                    if dists[i] > dists[far] {
                        far = i;
                    }
                }
                dists[far] = 0.0;
                point(far).to_vec()
            };
            shift = shift.max(dist2(&new, model.centroid(j)).sqrt());
            model.centroids[j * dim..(j + 1) * dim].copy_from_slice(&new);
        }
        if shift < tol {
            break;
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::{prop_assert_eq, proptest};

    fn blobs(seed: u64) -> (Vec<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]];
        let mut data = Vec::new();
        let mut truth = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for _ in 0..25 {
                data.push(center[0] + rng.gen_range(-1.0..1.0));
                data.push(center[1] + rng.gen_range(-1.0..1.0));
                truth.push(c);
            }
        }
        (data, truth)
    }

    #[test]
    fn separated_blobs_are_recovered() {
        let (data, truth) = blobs(1);
        let m = kmeans_fit(&data, 2, 4, 7, DEFAULT_MAX_ITERS, DEFAULT_TOL).unwrap();
        for j in 0..4 {
            let c = m.centroid(j);
            let near = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]]
                .iter()
                .any(|b| (c[0] - b[0]).abs() <= 1.0 && (c[1] - b[1]).abs() <= 1.0);
            assert!(near, "centroid {c:?} outside every blob");
        }
        let labels: Vec<usize> = data.chunks(2).map(|p| m.assign(p)).collect();
        for a in 0..labels.len() {
            for b in 0..labels.len() {
                assert_eq!(truth[a] == truth[b], labels[a] == labels[b]);
            }
        }
    }

    #[test]
    fn identical_points() {
        let data = [0.25, 0.75].repeat(12);
        let m = kmeans_fit(&data, 2, 3, 0, DEFAULT_MAX_ITERS, DEFAULT_TOL).unwrap();
        assert_eq!(m.centroid(0), &[0.25, 0.75]);
        assert_eq!(m, kmeans_fit(&data, 2, 3, 0, DEFAULT_MAX_ITERS, DEFAULT_TOL).unwrap());
    }

    #[test]
    fn same_seed_same_model() {
        let (data, _) = blobs(2);
        let a = kmeans_fit(&data, 2, 4, 99, DEFAULT_MAX_ITERS, DEFAULT_TOL).unwrap();
        let b = kmeans_fit(&data, 2, 4, 99, DEFAULT_MAX_ITERS, DEFAULT_TOL).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(kmeans_fit(&[1.0, 2.0], 1, 3, 0, 10, 1e-6), Err(LsrError::Parameter(_))));
    }

    #[test]
    fn assignment_ties_and_exact_hits() {
        let m = KMeansModel { k: 5, dim: 1, centroids: vec![10.0, -1.0, 20.0, 7.0, 1.0] };
        assert_eq!(m.assign(&[7.0]), 3);
        assert_eq!(m.assign(&[0.0]), 1);
    }

    proptest! {
        #[test]
        fn assign_matches_exhaustive_search(
            cents in proptest::collection::vec(-5.0f64..5.0, 8 * 4),
            x in proptest::collection::vec(-5.0f64..5.0, 4),
            shift in -100.0f64..100.0,
        ) {
            let m = KMeansModel { k: 8, dim: 4, centroids: cents.clone() };
            let d: Vec<f64> = cents.chunks(4).map(|c| c.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum()).collect();
            let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
            let want = d.iter().position(|&v| v == min).unwrap();
            prop_assert_eq!(m.assign(&x), want);

            let shifted = KMeansModel { k: 8, dim: 4, centroids: cents.iter().map(|c| c + shift).collect() };
            let xs: Vec<f64> = x.iter().map(|v| v + shift).collect();
            let gap = {
                let mut s = d.clone();
                s.sort_by(f64::total_cmp);
                s[1] - s[0]
            };
            if gap > 1e-6 {
                prop_assert_eq!(shifted.assign(&xs), want);
            }
        }
    }
}
