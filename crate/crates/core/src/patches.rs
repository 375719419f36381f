//! Training and inference samples: 15x15 ILR neighborhoods around a target
//! pixel, their 16x16 HOG companions, residual targets, and the
//! variance-based easy/hard split.

use crate::error::{LsrError, Result};
use crate::imaging::{resize, Filter, ImagePair, YImage};
use std::io::{Read, Write};
use std::path::Path;

pub const PATCH_SIDE: usize = 15;
pub const PATCH_AREA: usize = PATCH_SIDE * PATCH_SIDE;
pub const PATCH_RADIUS: usize = PATCH_SIDE / 2;
pub const HOG_SIDE: usize = 16;
pub const HOG_AREA: usize = HOG_SIDE * HOG_SIDE;
/// Variance at or above which a pixel is routed to the hard model.
pub const DEFAULT_VARIANCE_THRESHOLD: f64 = 180.0;
/// Number of dihedral symmetries of a square.
pub const DIHEDRAL_MODES: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hardness {
    Easy,
    Hard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchSample {
    pub patch15: Vec<f64>,
    pub patch16: Vec<f64>,
    /// HR center minus ILR center; present only for training samples.
    pub residual: Option<f64>,
    pub hardness: Hardness,
    pub variance: f64,
    /// (row, col) of the center pixel in the ILR image.
    pub position: (usize, usize),
}

impl PatchSample {
    pub fn from_patch15(
        patch15: Vec<f64>,
        residual: Option<f64>,
        position: (usize, usize),
        threshold: f64,
    ) -> PatchSample {
        debug_assert_eq!(patch15.len(), PATCH_AREA);
        let variance = patch_variance(&patch15);
        let patch16 = hog_companion(&patch15);
        PatchSample { patch15, patch16, residual, hardness: classify_with(variance, threshold), variance, position }
    }

    pub fn center(&self) -> f64 {
        self.patch15[PATCH_RADIUS * PATCH_SIDE + PATCH_RADIUS]
    }

    /// The same sample seen through dihedral `mode`; patch16 is regenerated
    /// from the transformed 15x15 patch.
    pub fn transformed(&self, mode: u8, threshold: f64) -> PatchSample {
        let p = dihedral(&self.patch15, PATCH_SIDE, mode).expect("patch15 is square");
        PatchSample::from_patch15(p, self.residual, self.position, threshold)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub samples: Vec<PatchSample>,
    pub origins: Vec<String>,
    pub augmented: bool,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// All eight dihedral variants of every sample, grouped per sample.
    pub fn augment(&self, threshold: f64) -> Dataset {
        let samples =
            self.samples.iter().flat_map(|s| (0..DIHEDRAL_MODES).map(move |m| s.transformed(m, threshold))).collect();
        Dataset { samples, origins: self.origins.clone(), augmented: true }
    }

    pub fn count(&self, hardness: Hardness) -> usize {
        self.samples.iter().filter(|s| s.hardness == hardness).count()
    }
}

/// Population variance of a patch. Values are summed in sorted order so the
/// result is identical for every permutation of the patch.
pub fn patch_variance(patch: &[f64]) -> f64 {
    let mut sorted = patch.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

pub fn classify_hardness(variance: f64) -> Hardness {
    classify_with(variance, DEFAULT_VARIANCE_THRESHOLD)
}

/// Ties at the threshold go to the hard model.
pub fn classify_with(variance: f64, threshold: f64) -> Hardness {
    if variance >= threshold {
        Hardness::Hard
    } else {
        Hardness::Easy
    }
}

/// Lanczos resample of a 15x15 patch onto a 16x16 grid.
pub fn hog_companion(patch15: &[f64]) -> Vec<f64> {
    let img = YImage::new(PATCH_SIDE, PATCH_SIDE, patch15.to_vec()).expect("15x15 patch");
    resize(&img, HOG_SIDE, HOG_SIDE, Filter::Lanczos3).expect("nonempty").into_data()
}

/// The 15x15 window centered at `(row, col)` of the unpadded image, read
/// from an image padded by [`PATCH_RADIUS`] on every side.
pub fn patch15_at(padded: &YImage, row: usize, col: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(PATCH_AREA);
    for r in row..row + PATCH_SIDE {
        out.extend_from_slice(&padded.row(r)[col..col + PATCH_SIDE]);
    }
    out
}

/// Center positions on a `stride` grid anchored at (0, 0).
pub fn grid_positions(height: usize, width: usize, stride: usize) -> Vec<(usize, usize)> {
    let stride = stride.max(1);
    (0..height).step_by(stride).flat_map(|r| (0..width).step_by(stride).map(move |c| (r, c))).collect()
}

/// One sample per stride-grid position. Borders are replicate-padded so
/// every pixel has a full neighborhood.
pub fn extract_samples(pair: &ImagePair, stride: usize, for_training: bool) -> Dataset {
    extract_samples_with(pair, stride, for_training, DEFAULT_VARIANCE_THRESHOLD)
}

pub fn extract_samples_with(pair: &ImagePair, stride: usize, for_training: bool, threshold: f64) -> Dataset {
    let padded = pair.ilr.replicate_pad(PATCH_RADIUS);
    let samples = grid_positions(pair.ilr.height(), pair.ilr.width(), stride)
        .into_iter()
        .map(|(r, c)| {
            let residual = for_training.then(|| pair.hr.get(r, c) - pair.ilr.get(r, c));
            PatchSample::from_patch15(patch15_at(&padded, r, c), residual, (r, c), threshold)
        })
        .collect();
    Dataset { samples, origins: Vec::new(), augmented: false }
}

/// Rotate a square patch `mode % 4` quarter turns counter-clockwise, then
/// mirror it left-right when `mode >= 4`.
pub fn dihedral(patch: &[f64], side: usize, mode: u8) -> Result<Vec<f64>> {
    if side * side != patch.len() {
        return Err(LsrError::dim(format!("{} values do not form a {side}x{side} patch", patch.len())));
    }
    if mode >= DIHEDRAL_MODES {
        return Err(LsrError::param(format!("dihedral mode {mode} out of range")));
    }
    let img = YImage::new(side, side, patch.to_vec())?;
    Ok(dihedral_image(&img, mode).into_data())
}

/// [`dihedral`] for whole images; quarter turns swap height and width.
pub fn dihedral_image(img: &YImage, mode: u8) -> YImage {
    let mut cur = img.clone();
    for _ in 0..mode % 4 {
        let (h, w) = cur.dims();
        cur = YImage::from_fn(w, h, |i, j| cur.get(j, w - 1 - i));
    }
    if mode >= 4 {
        let w = cur.width();
        cur = YImage::from_fn(cur.height(), w, |i, j| cur.get(i, w - 1 - j));
    }
    cur
}

/// Where pixel `(row, col)` of an `height x width` image lands under `mode`.
pub fn dihedral_position(row: usize, col: usize, height: usize, width: usize, mode: u8) -> (usize, usize) {
    let (mut r, mut c, mut h, mut w) = (row, col, height, width);
    for _ in 0..mode % 4 {
        (r, c) = (w - 1 - c, r);
        std::mem::swap(&mut h, &mut w);
    }
    if mode >= 4 {
        c = w - 1 - c;
    }
    (r, c)
}

/// Easy/hard tallies with squared-residual sums.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PartitionStats {
    pub easy: usize,
    pub hard: usize,
    pub easy_sq_residual: f64,
    pub hard_sq_residual: f64,
}

impl PartitionStats {
    pub fn add(&mut self, hardness: Hardness, residual: f64) {
        match hardness {
            Hardness::Easy => {
                self.easy += 1;
                self.easy_sq_residual += residual * residual;
            }
            Hardness::Hard => {
                self.hard += 1;
                self.hard_sq_residual += residual * residual;
            }
        }
    }

    pub fn merge(&mut self, other: &PartitionStats) {
        self.easy += other.easy;
        self.hard += other.hard;
        self.easy_sq_residual += other.easy_sq_residual;
        self.hard_sq_residual += other.hard_sq_residual;
    }

    pub fn easy_fraction(&self) -> f64 {
        self.easy as f64 / (self.easy + self.hard).max(1) as f64
    }

    /// Mean squared ILR-vs-HR error of easy pixels.
    pub fn easy_mse(&self) -> f64 {
        self.easy_sq_residual / self.easy.max(1) as f64
    }

    pub fn hard_mse(&self) -> f64 {
        self.hard_sq_residual / self.hard.max(1) as f64
    }
}

/// Per-pixel easy/hard statistics of one image pair at `stride`.
pub fn partition_stats(pair: &ImagePair, stride: usize, threshold: f64) -> PartitionStats {
    let padded = pair.ilr.replicate_pad(PATCH_RADIUS);
    let mut stats = PartitionStats::default();
    for (r, c) in grid_positions(pair.ilr.height(), pair.ilr.width(), stride) {
        let v = patch_variance(&patch15_at(&padded, r, c));
        stats.add(classify_with(v, threshold), pair.hr.get(r, c) - pair.ilr.get(r, c));
    }
    stats
}

const CACHE_MAGIC: &[u8; 4] = b"LSRD";
const CACHE_VERSION: u32 = 1;

/// Write samples as an `LSRD` cache: header, then fixed-size little-endian
/// records (f32 patches and residual, u8 hardness, u32 row and column).
pub fn write_sample_cache(path: impl AsRef<Path>, samples: &[PatchSample]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&CACHE_VERSION.to_le_bytes())?;
    w.write_all(&(samples.len() as u64).to_le_bytes())?;
    for s in samples {
        for v in s.patch15.iter().chain(&s.patch16) {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
        w.write_all(&(s.residual.map_or(f32::NAN, |r| r as f32)).to_le_bytes())?;
        w.write_all(&[matches!(s.hardness, Hardness::Hard) as u8])?;
        w.write_all(&(s.position.0 as u32).to_le_bytes())?;
        w.write_all(&(s.position.1 as u32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

const CACHE_RECORD: usize = (PATCH_AREA + HOG_AREA + 1) * 4 + 1 + 8;

pub fn read_sample_cache(path: impl AsRef<Path>) -> Result<Vec<PatchSample>> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if &header[..4] != CACHE_MAGIC {
        return Err(LsrError::format("not an LSRD sample cache"));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != CACHE_VERSION {
        return Err(LsrError::format(format!("unsupported sample cache version {version}")));
    }
    let count = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let mut rec = vec![0u8; CACHE_RECORD];
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut rec)?;
        let f = |i: usize| f32::from_le_bytes(rec[i * 4..i * 4 + 4].try_into().unwrap()) as f64;
        let patch15: Vec<f64> = (0..PATCH_AREA).map(f).collect();
        let patch16: Vec<f64> = (PATCH_AREA..PATCH_AREA + HOG_AREA).map(f).collect();
        let residual = f(PATCH_AREA + HOG_AREA);
        let tail = (PATCH_AREA + HOG_AREA + 1) * 4;
        let hardness = match rec[tail] {
            0 => Hardness::Easy,
            1 => Hardness::Hard,
            b => return Err(LsrError::format(format!("bad hardness byte {b}"))),
        };
        let row = u32::from_le_bytes(rec[tail + 1..tail + 5].try_into().unwrap()) as usize;
        let col = u32::from_le_bytes(rec[tail + 5..tail + 9].try_into().unwrap()) as usize;
        let variance = patch_variance(&patch15);
        out.push(PatchSample {
            patch15,
            patch16,
            residual: (!residual.is_nan()).then_some(residual),
            hardness,
            variance,
            position: (row, col),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair_from(hr: YImage) -> ImagePair {
        ImagePair::from_hr(&hr, 2).unwrap()
    }

    #[test]
    fn one_sample_per_pixel_at_stride_one() {
        let hr = YImage::from_fn(30, 30, |r, c| (r * 3 + c) as f64);
        let mut pair = pair_from(hr);
        pair.ilr = pair.ilr.crop(0, 0, 15, 15).unwrap();
        pair.hr = pair.hr.crop(0, 0, 15, 15).unwrap();
        assert_eq!(extract_samples(&pair, 1, true).len(), 225);
    }

    #[test]
    fn constant_pair_is_all_easy_zero_residual() {
        let pair = pair_from(YImage::filled(20, 24, 77.0));
        let ds = extract_samples(&pair, 1, true);
        assert!(ds
            .samples
            .iter()
            .all(|s| s.residual.unwrap().abs() < 1e-9 && s.variance < 1e-18 && s.hardness == Hardness::Easy));
    }

    #[test]
    fn strided_centers_follow_grid_arithmetic() {
        let pair = pair_from(YImage::from_fn(20, 20, |r, c| (r + 2 * c) as f64));
        let ds = extract_samples(&pair, 5, false);
        assert_eq!(ds.len(), 16);
        let mut want = Vec::new();
        for k in 0..16 {
            want.push((5 * (k / 4), 5 * (k % 4)));
        }
        let got: Vec<_> = ds.samples.iter().map(|s| s.position).collect();
        assert_eq!(got, want);
        for s in &ds.samples {
            assert_eq!(s.center(), pair.ilr.get(s.position.0, s.position.1));
            assert!(s.residual.is_none());
            assert_eq!(s.patch15.len(), PATCH_AREA);
            assert_eq!(s.patch16.len(), HOG_AREA);
        }
    }

    #[test]
    fn variance_examples() {
        assert_eq!(patch_variance(&[5.0; PATCH_AREA]), 0.0);
        let mut p = vec![0.0; PATCH_AREA];
        p[17] = 225.0;
        assert!((patch_variance(&p) - 224.0).abs() < 1e-9);

        let checker: Vec<f64> = (0..PATCH_AREA).map(|i| if i % 2 == 0 { 0.0 } else { 255.0 }).collect();
        // 113 zeros, 112 values of 255.
        let mean = 112.0 * 255.0 / 225.0;
        let direct = (113.0 * mean * mean + 112.0 * (255.0 - mean) * (255.0 - mean)) / 225.0;
        assert!((patch_variance(&checker) - direct).abs() < 1e-9);
    }

    #[test]
    fn hardness_boundaries() {
        assert_eq!(classify_hardness(0.0), Hardness::Easy);
        assert_eq!(classify_hardness(179.999), Hardness::Easy);
        assert_eq!(classify_hardness(180.0), Hardness::Hard);
        assert_eq!(classify_hardness(1000.0), Hardness::Hard);
    }

    #[test]
    fn dihedral_examples() {
        let p: Vec<f64> = (1..=9).map(|v| v as f64).collect();
        assert_eq!(dihedral(&p, 3, 0).unwrap(), p);
        assert_eq!(dihedral(&p, 3, 1).unwrap(), vec![3.0, 6.0, 9.0, 2.0, 5.0, 8.0, 1.0, 4.0, 7.0]);
        assert_eq!(dihedral(&p, 3, 4).unwrap(), vec![3.0, 2.0, 1.0, 6.0, 5.0, 4.0, 9.0, 8.0, 7.0]);
        let mut q = p.clone();
        for _ in 0..4 {
            q = dihedral(&q, 3, 1).unwrap();
        }
        assert_eq!(q, p);
        assert!(matches!(dihedral(&p, 2, 0), Err(LsrError::Dimension(_))));
    }

    #[test]
    fn augmentation_multiplies_by_eight() {
        let pair = pair_from(YImage::from_fn(16, 16, |r, c| ((r * c) % 17) as f64 * 9.0));
        let ds = extract_samples(&pair, 4, true);
        let aug = ds.augment(DEFAULT_VARIANCE_THRESHOLD);
        assert!(aug.augmented);
        assert_eq!(aug.len(), 8 * ds.len());
        for (i, s) in aug.samples.iter().enumerate() {
            let base = &ds.samples[i / 8];
            assert_eq!(s.center(), base.center());
            assert_eq!(s.residual, base.residual);
        }
    }

    #[test]
    fn position_map_matches_image_transform() {
        let img = YImage::from_fn(4, 6, |r, c| (r * 6 + c) as f64);
        for mode in 0..8 {
            let t = dihedral_image(&img, mode);
            for r in 0..4 {
                for c in 0..6 {
                    let (tr, tc) = dihedral_position(r, c, 4, 6, mode);
                    assert_eq!(t.get(tr, tc), img.get(r, c), "mode {mode}");
                }
            }
        }
    }

    #[test]
    fn cache_round_trip() {
        let pair = pair_from(YImage::from_fn(12, 12, |r, c| ((r * 7 + c * 13) % 50) as f64 * 5.0));
        let ds = extract_samples(&pair, 3, true);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.lsrd");
        write_sample_cache(&path, &ds.samples).unwrap();
        let bytes = std::fs::metadata(&path).unwrap().len() as usize;
        assert_eq!(bytes, 16 + ds.len() * CACHE_RECORD);
        let back = read_sample_cache(&path).unwrap();
        assert_eq!(back.len(), ds.len());
        for (a, b) in ds.samples.iter().zip(&back) {
            assert_eq!(a.position, b.position);
            assert_eq!(a.hardness, b.hardness);
            assert_eq!(a.residual.unwrap() as f32 as f64, b.residual.unwrap());
            assert_eq!(b.patch15[0], a.patch15[0] as f32 as f64);
        }
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(read_sample_cache(&path).is_err());
    }

    proptest! {
        #[test]
        fn dihedral_preserves_variance_and_class(
            vals in proptest::collection::vec(0.0f64..255.0, PATCH_AREA),
            mode in 0u8..8,
        ) {
            let t = dihedral(&vals, PATCH_SIDE, mode).unwrap();
            let mut a = vals.clone();
            let mut b = t.clone();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(a, b);
            prop_assert_eq!(t[PATCH_AREA / 2], vals[PATCH_AREA / 2]);
            let (v0, v1) = (patch_variance(&vals), patch_variance(&t));
            prop_assert_eq!(v0, v1);
            prop_assert_eq!(classify_hardness(v0), classify_hardness(v1));
        }
    }
}
