use crate::patches::HOG_SIDE;
use std::f64::consts::PI;

pub const HOG_CELLS: usize = 4;
pub const HOG_BINS: usize = 8;
pub const HOG_LEN: usize = HOG_CELLS * HOG_BINS;
const CELL: usize = HOG_SIDE / 2;

/// Orientation histogram of a 16x16 patch: 2x2 cells of 8x8 pixels, 8
/// unsigned orientation bins over [0, pi), magnitude-weighted, then
/// L2-normalized. Index `cell * 8 + bin`, cells in row-major order.
pub fn hog(patch16: &[f64]) -> [f64; HOG_LEN] {
    debug_assert_eq!(patch16.len(), HOG_SIDE * HOG_SIDE);
    let n = HOG_SIDE;
    let at = |r: usize, c: usize| patch16[r * n + c];
    let mut hist = [0.0; HOG_LEN];
    for r in 0..n {
        for c in 0..n {
            let gx = at(r, (c + 1).min(n - 1)) - at(r, c.saturating_sub(1));
            let gy = at((r + 1).min(n - 1), c) - at(r.saturating_sub(1), c);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let bin = orientation_bin(gy, gx);
            let cell = (r / CELL) * 2 + c / CELL;
            hist[cell * HOG_BINS + bin] += mag;
        }
    }
    let norm = hist.iter().map(|v| v * v).sum::<f64>().sqrt();
    hist.iter_mut().for_each(|v| *v /= norm + 1e-12);
    hist
}

fn orientation_bin(gy: f64, gx: f64) -> usize {
    let mut theta = gy.atan2(gx);
    if theta < 0.0 {
        theta += PI;
    }
    if theta >= PI {
        theta -= PI;
    }
    ((theta / (PI / HOG_BINS as f64)) as usize).min(HOG_BINS - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patches::dihedral;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Straightforward per-pixel recomputation with explicit border cases.
    fn naive_hog(p: &[f64]) -> Vec<f64> {
        let n = 16i64;
        let px = |r: i64, c: i64| p[(r.clamp(0, n - 1) * n + c.clamp(0, n - 1)) as usize];
        let mut h = vec![0.0; 32];
        for r in 0..n {
            for c in 0..n {
                let gx = px(r, c + 1) - px(r, c - 1);
                let gy = px(r + 1, c) - px(r - 1, c);
                let m = gx.hypot(gy);
                if m == 0.0 {
                    continue;
                }
                let mut deg = gy.atan2(gx).to_degrees();
                while deg < 0.0 {
                    deg += 180.0;
                }
                while deg >= 180.0 {
                    deg -= 180.0;
                }
                let bin = ((deg / 22.5).floor() as usize).min(7);
                let cell = if r < 8 { 0 } else { 2 } + if c < 8 { 0 } else { 1 };
                h[cell * 8 + bin] += m;
            }
        }
        let norm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
        h.iter().map(|v| v / (norm + 1e-12)).collect()
    }

    fn random_patch(seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..256).map(|_| rng.gen_range(0.0..255.0)).collect()
    }

    #[test]
    fn constant_patch_is_zero() {
        assert!(hog(&[42.0; 256]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn horizontal_ramp_fills_bin_zero() {
        let p: Vec<f64> = (0..256).map(|i| (i % 16) as f64 * 3.0).collect();
        let d = hog(&p);
        for (i, v) in d.iter().enumerate() {
            let want = if i % 8 == 0 { 0.5 } else { 0.0 };
            assert!((v - want).abs() < 1e-9, "{i}: {v}");
        }
    }

    #[test]
    fn matches_naive_oracle() {
        for seed in 0..10 {
            let p = random_patch(seed);
            let d = hog(&p);
            let o = naive_hog(&p);
            for i in 0..32 {
                assert!((d[i] - o[i]).abs() < 1e-12);
            }
            let norm: f64 = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn quarter_turn_permutes_cells_and_shifts_bins() {
        // A 90 degree turn moves each gradient by half of [0, pi), i.e. 4
        // of the 8 bins, and cell (i, j) of the turned patch comes from
        // cell (j, 1 - i).
        for seed in 20..30 {
            let p = random_patch(seed);
            let d = hog(&p);
            let turned = hog(&dihedral(&p, 16, 1).unwrap());
            for ci in 0..2 {
                for cj in 0..2 {
                    let src = cj * 2 + (1 - ci);
                    let dst = ci * 2 + cj;
                    for b in 0..8 {
                        let want = d[src * 8 + (b + 4) % 8];
                        assert!((turned[dst * 8 + b] - want).abs() < 1e-9);
                    }
                }
            }
        }
    }
}
