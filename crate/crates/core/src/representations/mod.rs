//! The representation pool: five families of local features computed from
//! a 15x15 ILR patch.
//!
//! | type | content                                              | width |
//! |------|------------------------------------------------------|-------|
//! | 1    | raw pixels                                           | 225   |
//! | 2    | Saab on the centered 5x5 and 7x7 windows             | 74    |
//! | 3    | 3x3 Saab: 9 stride-1 blocks over the central 5x5 and 24 stride-3 blocks on the outer ring | 297 |
//! | 4    | 2x2 Haar at 49 stride-2 positions, raw + channel PCA | 392   |
//! | 5    | 3x3 Laws at 25 stride-3 positions, raw + channel PCA | 450   |
//!
//! A pool concatenates the enabled types in ascending type order. Feature
//! ids are global indices into that concatenation; [`RepresentationSpec::feature_id`]
//! maps them back to `(type, index within type)`.
//!
//! Transforms are learned once per branch and then applied either per patch
//! ([`build_pool`]) or convolutionally over a whole padded image
//! ([`RepresentationMaps`]). Both routes evaluate every window with the same
//! arithmetic in the same order, so they agree bit for bit.

mod pca;
mod saab;

pub use pca::{fit_channel_pca, orthonormality_error, ChannelPcaSet};
pub use saab::{fit_saab, SaabKernelSet};

use crate::error::{LsrError, Result};
use crate::imaging::YImage;
use crate::patches::{patch15_at, PATCH_AREA, PATCH_RADIUS, PATCH_SIDE};

/// Pooled feature values for one patch.
pub type RepresentationVector = Vec<f32>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ReprType {
    Spatial = 1,
    CentralSaab = 2,
    RingSaab = 3,
    HaarPca = 4,
    LawsPca = 5,
}

impl ReprType {
    pub const ALL: [ReprType; 5] =
        [ReprType::Spatial, ReprType::CentralSaab, ReprType::RingSaab, ReprType::HaarPca, ReprType::LawsPca];

    pub fn from_index(i: u8) -> Option<ReprType> {
        ReprType::ALL.get((i as usize).wrapping_sub(1)).copied()
    }

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn width(self) -> usize {
        match self {
            ReprType::Spatial => PATCH_AREA,
            ReprType::CentralSaab => 25 + 49,
            ReprType::RingSaab => RING_BLOCKS.len() * 9,
            ReprType::HaarPca => HAAR_POSITIONS * HAAR_POSITIONS * 8,
            ReprType::LawsPca => LAWS_POSITIONS * LAWS_POSITIONS * 18,
        }
    }
}

/// Top-left corners (within the patch) of the Type 3 blocks: the stride-1
/// blocks covering the central 5x5 first, then the stride-3 outer ring.
pub const RING_BLOCKS: [(usize, usize); 33] = ring_blocks();

const fn ring_blocks() -> [(usize, usize); 33] {
    let mut out = [(0, 0); 33];
    let mut k = 0;
    let mut r = 5;
    while r <= 7 {
        let mut c = 5;
        while c <= 7 {
            out[k] = (r, c);
            k += 1;
            c += 1;
        }
        r += 1;
    }
    let mut r = 0;
    while r <= 12 {
        let mut c = 0;
        while c <= 12 {
            if !(r == 6 && c == 6) {
                out[k] = (r, c);
                k += 1;
            }
            c += 3;
        }
        r += 3;
    }
    out
}

/// Haar positions per axis (stride 2 over the top-left 14x14).
const HAAR_POSITIONS: usize = 7;
const HAAR_STRIDE: usize = 2;
/// Laws positions per axis (stride 3, corners 0..=12).
const LAWS_POSITIONS: usize = 5;
const LAWS_STRIDE: usize = 3;

/// 2x2 Haar filterbank: LL, LH, HL, HH.
pub const HAAR: [[f64; 4]; 4] =
    [[0.5, 0.5, 0.5, 0.5], [0.5, 0.5, -0.5, -0.5], [0.5, -0.5, 0.5, -0.5], [0.5, -0.5, -0.5, 0.5]];

const LAWS_VECTORS: [[f64; 3]; 3] = [[1.0, 2.0, 1.0], [-1.0, 0.0, 1.0], [-1.0, 2.0, -1.0]];

/// The nine 3x3 Laws masks (L3, E3, S3 outer products), each scaled to
/// unit L2 norm. Row vector first: mask `3 * a + b` is `v[a]^T v[b]`.
pub fn laws_filters() -> [[f64; 9]; 9] {
    let mut out = [[0.0; 9]; 9];
    for a in 0..3 {
        for b in 0..3 {
            let norm = laws_norm(a, b);
            for i in 0..9 {
                out[a * 3 + b][i] = LAWS_VECTORS[a][i / 3] * LAWS_VECTORS[b][i % 3] / norm;
            }
        }
    }
    out
}

fn laws_norm(a: usize, b: usize) -> f64 {
    let sq = |v: &[f64; 3]| v.iter().map(|x| x * x).sum::<f64>();
    (sq(&LAWS_VECTORS[a]) * sq(&LAWS_VECTORS[b])).sqrt()
}

/// Responses of the nine [`laws_filters`] on a row-major 3x3 window,
/// evaluated separably. Every zero-sum mask gives exactly 0 on a constant
/// window.
#[inline]
pub fn laws_responses(w: &[f64]) -> [f64; 9] {
    let mut rows = [[0.0; 3]; 3];
    for (i, row) in rows.iter_mut().enumerate() {
        for (b, v) in LAWS_VECTORS.iter().enumerate() {
            row[b] = v[0] * w[i * 3] + v[1] * w[i * 3 + 1] + v[2] * w[i * 3 + 2];
        }
    }
    let mut out = [0.0; 9];
    for a in 0..3 {
        let v = &LAWS_VECTORS[a];
        for b in 0..3 {
            out[a * 3 + b] = (v[0] * rows[0][b] + v[1] * rows[1][b] + v[2] * rows[2][b]) / laws_norm(a, b);
        }
    }
    out
}

/// Enabled representation types, kept sorted and unique.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepresentationSpec {
    types: Vec<ReprType>,
}

/// Where a pooled feature came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureId {
    pub repr: ReprType,
    pub index: usize,
}

impl RepresentationSpec {
    pub fn new(types: &[ReprType]) -> Result<Self> {
        let mut types = types.to_vec();
        types.sort();
        types.dedup();
        if types.is_empty() {
            return Err(LsrError::Configuration("no representation types enabled".into()));
        }
        Ok(Self { types })
    }

    pub fn from_indices(indices: &[u8]) -> Result<Self> {
        let types = indices
            .iter()
            .map(|&i| {
                ReprType::from_index(i)
                    .ok_or_else(|| LsrError::Configuration(format!("unknown representation type {i}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(&types)
    }

    pub fn types(&self) -> &[ReprType] {
        &self.types
    }

    pub fn indices(&self) -> Vec<u8> {
        self.types.iter().map(|t| t.index()).collect()
    }

    pub fn contains(&self, t: ReprType) -> bool {
        self.types.contains(&t)
    }

    pub fn width(&self) -> usize {
        self.types.iter().map(|t| t.width()).sum()
    }

    /// Offset of each enabled type inside the pool.
    pub fn offsets(&self) -> Vec<(ReprType, usize)> {
        let mut off = 0;
        self.types
            .iter()
            .map(|&t| {
                let o = off;
                off += t.width();
                (t, o)
            })
            .collect()
    }

    pub fn feature_id(&self, global: usize) -> Option<FeatureId> {
        let mut off = 0;
        for &t in &self.types {
            if global < off + t.width() {
                return Some(FeatureId { repr: t, index: global - off });
            }
            off += t.width();
        }
        None
    }
}

/// Learned transforms for one branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchTransforms {
    pub spec: RepresentationSpec,
    pub saab5: Option<SaabKernelSet>,
    pub saab7: Option<SaabKernelSet>,
    pub saab3: Option<SaabKernelSet>,
    pub pca4: Option<ChannelPcaSet>,
    pub pca9: Option<ChannelPcaSet>,
}

fn require<'a, T>(t: &'a Option<T>, what: &str) -> Result<&'a T> {
    t.as_ref().ok_or_else(|| LsrError::Configuration(format!("{what} transform is not fitted")))
}

impl BranchTransforms {
    /// Fail unless every transform the spec needs is present with the
    /// expected geometry.
    pub fn validate(&self) -> Result<()> {
        let check_saab = |k: &Option<SaabKernelSet>, n: usize, what: &str| -> Result<()> {
            let k = require(k, what)?;
            if k.window != n || k.kernels.len() != n * n * n * n {
                return Err(LsrError::Configuration(format!("{what} kernels have the wrong shape")));
            }
            Ok(())
        };
        let check_pca = |p: &Option<ChannelPcaSet>, c: usize, what: &str| -> Result<()> {
            let p = require(p, what)?;
            if p.channels != c || p.matrix.len() != c * c || p.mean.len() != c {
                return Err(LsrError::Configuration(format!("{what} has the wrong shape")));
            }
            Ok(())
        };
        if self.spec.contains(ReprType::CentralSaab) {
            check_saab(&self.saab5, 5, "5x5 Saab")?;
            check_saab(&self.saab7, 7, "7x7 Saab")?;
        }
        if self.spec.contains(ReprType::RingSaab) {
            check_saab(&self.saab3, 3, "3x3 Saab")?;
        }
        if self.spec.contains(ReprType::HaarPca) {
            check_pca(&self.pca4, 4, "Haar channel PCA")?;
        }
        if self.spec.contains(ReprType::LawsPca) {
            check_pca(&self.pca9, 9, "Laws channel PCA")?;
        }
        Ok(())
    }
}

fn window(patch: &[f64], top: usize, left: usize, n: usize, out: &mut [f64]) {
    for i in 0..n {
        let src = (top + i) * PATCH_SIDE + left;
        out[i * n..(i + 1) * n].copy_from_slice(&patch[src..src + n]);
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// Type 2: 25 Saab coefficients of the centered 5x5 window followed by 49
/// of the centered 7x7 window.
pub fn apply_central_saab(patch15: &[f64], k5: &SaabKernelSet, k7: &SaabKernelSet) -> Vec<f64> {
    let mut out = vec![0.0; 74];
    let mut w = [0.0; 49];
    window(patch15, PATCH_RADIUS - 2, PATCH_RADIUS - 2, 5, &mut w[..25]);
    k5.transform_into(&w[..25], &mut out[..25]);
    window(patch15, PATCH_RADIUS - 3, PATCH_RADIUS - 3, 7, &mut w);
    k7.transform_into(&w, &mut out[25..]);
    out
}

/// Type 3: nine 3x3 Saab coefficients at each of [`RING_BLOCKS`].
pub fn apply_ringwise_saab(patch15: &[f64], k3: &SaabKernelSet) -> Vec<f64> {
    let mut out = vec![0.0; RING_BLOCKS.len() * 9];
    let mut w = [0.0; 9];
    for (b, &(r, c)) in RING_BLOCKS.iter().enumerate() {
        window(patch15, r, c, 3, &mut w);
        k3.transform_into(&w, &mut out[b * 9..(b + 1) * 9]);
    }
    out
}

#[inline]
fn haar_block(w: &[f64; 4], pca4: &ChannelPcaSet, out: &mut [f64]) {
    for (k, f) in HAAR.iter().enumerate() {
        out[k] = dot(f, w);
    }
    let (raw, proj) = out.split_at_mut(4);
    pca4.project_into(raw, &mut proj[..4]);
}

#[inline]
fn laws_block(w: &[f64; 9], pca9: &ChannelPcaSet, out: &mut [f64]) {
    out[..9].copy_from_slice(&laws_responses(w));
    let (raw, proj) = out.split_at_mut(9);
    pca9.project_into(raw, &mut proj[..9]);
}

/// Type 4: at each stride-2 position, the four Haar responses and their
/// four channel-PCA coefficients.
pub fn apply_type4(patch15: &[f64], pca4: &ChannelPcaSet) -> Vec<f64> {
    let mut out = vec![0.0; ReprType::HaarPca.width()];
    let mut w = [0.0; 4];
    for (k, chunk) in out.chunks_exact_mut(8).enumerate() {
        let (r, c) = (HAAR_STRIDE * (k / HAAR_POSITIONS), HAAR_STRIDE * (k % HAAR_POSITIONS));
        window(patch15, r, c, 2, &mut w);
        haar_block(&w, pca4, chunk);
    }
    out
}

/// Type 5: at each stride-3 position, the nine Laws responses and their
/// nine channel-PCA coefficients.
pub fn apply_type5(patch15: &[f64], pca9: &ChannelPcaSet) -> Vec<f64> {
    let mut out = vec![0.0; ReprType::LawsPca.width()];
    let mut w = [0.0; 9];
    for (k, chunk) in out.chunks_exact_mut(18).enumerate() {
        let (r, c) = (LAWS_STRIDE * (k / LAWS_POSITIONS), LAWS_STRIDE * (k % LAWS_POSITIONS));
        window(patch15, r, c, 3, &mut w);
        laws_block(&w, pca9, chunk);
    }
    out
}

/// Pool of every enabled representation for one 15x15 patch.
pub fn build_pool(patch15: &[f64], transforms: &BranchTransforms) -> Result<RepresentationVector> {
    transforms.validate()?;
    let mut out = Vec::with_capacity(transforms.spec.width());
    pool_into(patch15, transforms, &mut out);
    Ok(out)
}

/// [`build_pool`] without validation, appending to `out`.
pub(crate) fn pool_into(patch15: &[f64], t: &BranchTransforms, out: &mut Vec<f32>) {
    for &ty in t.spec.types() {
        match ty {
            ReprType::Spatial => out.extend(patch15.iter().map(|&v| v as f32)),
            ReprType::CentralSaab => out.extend(
                apply_central_saab(patch15, t.saab5.as_ref().unwrap(), t.saab7.as_ref().unwrap())
                    .into_iter()
                    .map(|v| v as f32),
            ),
            ReprType::RingSaab => {
                out.extend(apply_ringwise_saab(patch15, t.saab3.as_ref().unwrap()).into_iter().map(|v| v as f32))
            }
            ReprType::HaarPca => {
                out.extend(apply_type4(patch15, t.pca4.as_ref().unwrap()).into_iter().map(|v| v as f32))
            }
            ReprType::LawsPca => {
                out.extend(apply_type5(patch15, t.pca9.as_ref().unwrap()).into_iter().map(|v| v as f32))
            }
        }
    }
}

/// Per-pixel response maps of the shared-window types (3, 4, 5) over a
/// padded image; pools are then gathered at each patch position.
pub struct RepresentationMaps<'a> {
    transforms: &'a BranchTransforms,
    padded: &'a YImage,
    /// Maps are indexed by window top-left in padded coordinates.
    map_w: usize,
    saab3: Vec<f32>,
    haar: Vec<f32>,
    laws: Vec<f32>,
}

impl<'a> RepresentationMaps<'a> {
    /// `padded` must be the ILR image padded by [`PATCH_RADIUS`].
    pub fn compute(padded: &'a YImage, transforms: &'a BranchTransforms) -> Result<Self> {
        transforms.validate()?;
        let (h, w) = padded.dims();
        if h < PATCH_SIDE || w < PATCH_SIDE {
            return Err(LsrError::dim("padded image smaller than a patch"));
        }
        let spec = &transforms.spec;
        let mut maps =
            RepresentationMaps { transforms, padded, map_w: w, saab3: Vec::new(), haar: Vec::new(), laws: Vec::new() };
        let mut win = [0.0f64; 9];
        let mut buf = [0.0f64; 18];
        let fill = |y: usize, x: usize, n: usize, win: &mut [f64]| {
            for i in 0..n {
                win[i * n..(i + 1) * n].copy_from_slice(&padded.row(y + i)[x..x + n]);
            }
        };
        if spec.contains(ReprType::RingSaab) {
            let k3 = transforms.saab3.as_ref().unwrap();
            maps.saab3 = vec![0.0; h * w * 9];
            for y in 0..=h - 3 {
                for x in 0..=w - 3 {
                    fill(y, x, 3, &mut win);
                    k3.transform_into(&win, &mut buf[..9]);
                    let dst = &mut maps.saab3[(y * w + x) * 9..(y * w + x + 1) * 9];
                    dst.iter_mut().zip(&buf[..9]).for_each(|(d, s)| *d = *s as f32);
                }
            }
        }
        if spec.contains(ReprType::HaarPca) {
            let pca4 = transforms.pca4.as_ref().unwrap();
            maps.haar = vec![0.0; h * w * 8];
            let mut w4 = [0.0; 4];
            for y in 0..=h - 2 {
                for x in 0..=w - 2 {
                    fill(y, x, 2, &mut w4);
                    haar_block(&w4, pca4, &mut buf[..8]);
                    let dst = &mut maps.haar[(y * w + x) * 8..(y * w + x + 1) * 8];
                    dst.iter_mut().zip(&buf[..8]).for_each(|(d, s)| *d = *s as f32);
                }
            }
        }
        if spec.contains(ReprType::LawsPca) {
            let pca9 = transforms.pca9.as_ref().unwrap();
            maps.laws = vec![0.0; h * w * 18];
            for y in 0..=h - 3 {
                for x in 0..=w - 3 {
                    fill(y, x, 3, &mut win);
                    laws_block(&win, pca9, &mut buf);
                    let dst = &mut maps.laws[(y * w + x) * 18..(y * w + x + 1) * 18];
                    dst.iter_mut().zip(&buf).for_each(|(d, s)| *d = *s as f32);
                }
            }
        }
        Ok(maps)
    }

    /// Pool for the patch centered at `(row, col)` of the unpadded image.
    pub fn gather_into(&self, row: usize, col: usize, out: &mut Vec<f32>) {
        let t = self.transforms;
        let mut patch: Option<Vec<f64>> = None;
        let mut patch = || patch.get_or_insert_with(|| patch15_at(self.padded, row, col)).clone();
        for &ty in t.spec.types() {
            match ty {
                ReprType::Spatial => out.extend(patch().iter().map(|&v| v as f32)),
                ReprType::CentralSaab => out.extend(
                    apply_central_saab(&patch(), t.saab5.as_ref().unwrap(), t.saab7.as_ref().unwrap())
                        .into_iter()
                        .map(|v| v as f32),
                ),
                ReprType::RingSaab => {
                    for &(br, bc) in RING_BLOCKS.iter() {
                        let at = ((row + br) * self.map_w + col + bc) * 9;
                        out.extend_from_slice(&self.saab3[at..at + 9]);
                    }
                }
                ReprType::HaarPca => {
                    for k in 0..HAAR_POSITIONS * HAAR_POSITIONS {
                        let (br, bc) = (HAAR_STRIDE * (k / HAAR_POSITIONS), HAAR_STRIDE * (k % HAAR_POSITIONS));
                        let at = ((row + br) * self.map_w + col + bc) * 8;
                        out.extend_from_slice(&self.haar[at..at + 8]);
                    }
                }
                ReprType::LawsPca => {
                    for k in 0..LAWS_POSITIONS * LAWS_POSITIONS {
                        let (br, bc) = (LAWS_STRIDE * (k / LAWS_POSITIONS), LAWS_STRIDE * (k % LAWS_POSITIONS));
                        let at = ((row + br) * self.map_w + col + bc) * 18;
                        out.extend_from_slice(&self.laws[at..at + 18]);
                    }
                }
            }
        }
    }
}

/// Upper bound on patches used to estimate each transform.
pub const DEFAULT_FIT_PATCHES: usize = 20_000;

/// Learn every transform `spec` needs from a set of training patches.
/// At most `max_patches` evenly spaced patches are used.
pub fn fit_transforms(patches: &[&[f64]], spec: &RepresentationSpec, max_patches: usize) -> Result<BranchTransforms> {
    let step = patches.len().div_ceil(max_patches.max(1)).max(1);
    let chosen: Vec<&[f64]> = patches.iter().step_by(step).copied().collect();
    let mut t = BranchTransforms { spec: spec.clone(), saab5: None, saab7: None, saab3: None, pca4: None, pca9: None };
    if spec.contains(ReprType::CentralSaab) {
        for n in [5, 7] {
            let mut buf = vec![0.0; n * n];
            let mut windows = Vec::with_capacity(chosen.len() * n * n);
            let off = PATCH_RADIUS - n / 2;
            for p in &chosen {
                window(p, off, off, n, &mut buf);
                windows.extend_from_slice(&buf);
            }
            let k = fit_saab(&windows, n)?;
            if n == 5 {
                t.saab5 = Some(k);
            } else {
                t.saab7 = Some(k);
            }
        }
    }
    if spec.contains(ReprType::RingSaab) {
        let mut buf = [0.0; 9];
        let mut windows = Vec::with_capacity(chosen.len() * RING_BLOCKS.len() * 9);
        for p in &chosen {
            for &(r, c) in RING_BLOCKS.iter() {
                window(p, r, c, 3, &mut buf);
                windows.extend_from_slice(&buf);
            }
        }
        t.saab3 = Some(fit_saab(&windows, 3)?);
    }
    if spec.contains(ReprType::HaarPca) {
        let mut w = [0.0; 4];
        let mut responses = Vec::with_capacity(chosen.len() * 49 * 4);
        for p in &chosen {
            for k in 0..HAAR_POSITIONS * HAAR_POSITIONS {
                window(p, HAAR_STRIDE * (k / HAAR_POSITIONS), HAAR_STRIDE * (k % HAAR_POSITIONS), 2, &mut w);
                responses.extend(HAAR.iter().map(|f| dot(f, &w)));
            }
        }
        t.pca4 = Some(fit_channel_pca(&responses, 4)?);
    }
    if spec.contains(ReprType::LawsPca) {
        let mut w = [0.0; 9];
        let mut responses = Vec::with_capacity(chosen.len() * 25 * 9);
        for p in &chosen {
            for k in 0..LAWS_POSITIONS * LAWS_POSITIONS {
                window(p, LAWS_STRIDE * (k / LAWS_POSITIONS), LAWS_STRIDE * (k % LAWS_POSITIONS), 3, &mut w);
                responses.extend(laws_responses(&w));
            }
        }
        t.pca9 = Some(fit_channel_pca(&responses, 9)?);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_patches(count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let base = rng.gen_range(0.0..200.0);
                (0..PATCH_AREA)
                    .map(|i| base + (i % 15) as f64 * rng.gen_range(0.0..3.0) + rng.gen_range(-10.0..10.0))
                    .collect()
            })
            .collect()
    }

    fn fitted_all(seed: u64) -> BranchTransforms {
        let patches = random_patches(120, seed);
        let refs: Vec<&[f64]> = patches.iter().map(|p| p.as_slice()).collect();
        let spec = RepresentationSpec::new(&ReprType::ALL).unwrap();
        fit_transforms(&refs, &spec, DEFAULT_FIT_PATCHES).unwrap()
    }

    #[test]
    fn pool_widths() {
        let w = |t: &[u8]| RepresentationSpec::from_indices(t).unwrap().width();
        assert_eq!(w(&[1, 2, 3, 4, 5]), 1438);
        assert_eq!(w(&[1, 3]), 522);
        assert_eq!(w(&[5]), 450);
        assert_eq!(w(&[1]), 225);
        assert_eq!([225, 74, 297, 392, 450], ReprType::ALL.map(|t| t.width()));
        assert!(RepresentationSpec::from_indices(&[6]).is_err());
        assert!(RepresentationSpec::from_indices(&[]).is_err());
    }

    #[test]
    fn ring_blocks_tile_as_described() {
        let mut cover = [0u8; PATCH_AREA];
        for &(r, c) in RING_BLOCKS[9..].iter() {
            for i in 0..3 {
                for j in 0..3 {
                    cover[(r + i) * 15 + c + j] += 1;
                }
            }
        }
        // The stride-3 blocks cover everything except the central 3x3 block
        // exactly once.
        for r in 0..15 {
            for c in 0..15 {
                let center = (6..9).contains(&r) && (6..9).contains(&c);
                assert_eq!(cover[r * 15 + c], if center { 0 } else { 1 });
            }
        }
        assert!(RING_BLOCKS[..9].iter().all(|&(r, c)| (5..=7).contains(&r) && (5..=7).contains(&c)));
    }

    #[test]
    fn feature_ids_round_trip() {
        let spec = RepresentationSpec::from_indices(&[1, 3]).unwrap();
        assert_eq!(spec.feature_id(0), Some(FeatureId { repr: ReprType::Spatial, index: 0 }));
        assert_eq!(spec.feature_id(225), Some(FeatureId { repr: ReprType::RingSaab, index: 0 }));
        assert_eq!(spec.feature_id(521), Some(FeatureId { repr: ReprType::RingSaab, index: 296 }));
        assert_eq!(spec.feature_id(522), None);
    }

    #[test]
    fn constant_patch_responses() {
        let t = fitted_all(5);
        let v = 37.5;
        let patch = vec![v; PATCH_AREA];
        let c2 = apply_central_saab(&patch, t.saab5.as_ref().unwrap(), t.saab7.as_ref().unwrap());
        assert!((c2[0] - 5.0 * v).abs() < 1e-9 && (c2[25] - 7.0 * v).abs() < 1e-9);
        assert!(c2[1..25].iter().chain(&c2[26..]).all(|c| c.abs() < 1e-9));

        let c3 = apply_ringwise_saab(&patch, t.saab3.as_ref().unwrap());
        for block in c3.chunks(9) {
            assert!((block[0] - 3.0 * v).abs() < 1e-9);
            assert!(block[1..].iter().all(|c| c.abs() < 1e-9));
        }

        let c4 = apply_type4(&patch, t.pca4.as_ref().unwrap());
        for block in c4.chunks(8) {
            assert_eq!(block[0], 2.0 * v);
            assert_eq!(&block[1..4], &[0.0, 0.0, 0.0]);
        }
        let c5 = apply_type5(&patch, t.pca9.as_ref().unwrap());
        for block in c5.chunks(18) {
            assert!(block[0] > 0.0);
            assert!(block[1..9].iter().all(|&c| c == 0.0));
        }
    }

    #[test]
    fn zero_patch_gives_zero_saab() {
        let t = fitted_all(6);
        let z = vec![0.0; PATCH_AREA];
        assert!(apply_central_saab(&z, t.saab5.as_ref().unwrap(), t.saab7.as_ref().unwrap()).iter().all(|&c| c == 0.0));
        assert!(apply_ringwise_saab(&z, t.saab3.as_ref().unwrap()).iter().all(|&c| c == 0.0));
        // Raw responses vanish; PCA coefficients are the negated mean projected.
        let pca4 = t.pca4.as_ref().unwrap();
        let neg = pca4.project(&[0.0; 4]);
        for block in apply_type4(&z, pca4).chunks(8) {
            assert_eq!(&block[..4], &[0.0; 4]);
            assert_eq!(&block[4..], neg.as_slice());
        }
        assert!(apply_type5(&z, t.pca9.as_ref().unwrap()).chunks(18).all(|b| b[..9].iter().all(|&c| c == 0.0)));
    }

    #[test]
    fn coefficients_match_direct_matmul() {
        let t = fitted_all(7);
        let patch = &random_patches(1, 77)[0];
        let at = |r: usize, c: usize| patch[r * 15 + c];

        let k5 = t.saab5.as_ref().unwrap();
        let got = apply_central_saab(patch, k5, t.saab7.as_ref().unwrap());
        for (k, g) in got[..25].iter().enumerate() {
            let mut want = 0.0;
            for i in 0..5 {
                for j in 0..5 {
                    want += k5.kernels[k * 25 + i * 5 + j] * at(5 + i, 5 + j);
                }
            }
            assert!((g - want).abs() < 1e-9);
        }

        let k3 = t.saab3.as_ref().unwrap();
        let got = apply_ringwise_saab(patch, k3);
        for (b, &(r, c)) in RING_BLOCKS.iter().enumerate() {
            for k in 0..9 {
                let want: f64 = (0..9).map(|i| k3.kernels[k * 9 + i] * at(r + i / 3, c + i % 3)).sum();
                assert!((got[b * 9 + k] - want).abs() < 1e-9);
            }
        }

        let pca4 = t.pca4.as_ref().unwrap();
        let got = apply_type4(patch, pca4);
        let (r, c) = (4, 10); // position index 2*7+5
        let px = [at(r, c), at(r, c + 1), at(r + 1, c), at(r + 1, c + 1)];
        let raw: Vec<f64> = HAAR.iter().map(|f| f.iter().zip(&px).map(|(a, b)| a * b).sum()).collect();
        let block = &got[(2 * 7 + 5) * 8..(2 * 7 + 6) * 8];
        for k in 0..4 {
            assert!((block[k] - raw[k]).abs() < 1e-9);
            let proj: f64 = (0..4).map(|j| pca4.matrix[k * 4 + j] * (raw[j] - pca4.mean[j])).sum();
            assert!((block[4 + k] - proj).abs() < 1e-9);
        }

        let pca9 = t.pca9.as_ref().unwrap();
        let laws = laws_filters();
        let got = apply_type5(patch, pca9);
        let (r, c) = (9, 3); // position index 3*5+1
        let raw: Vec<f64> = laws.iter().map(|f| (0..9).map(|i| f[i] * at(r + i / 3, c + i % 3)).sum()).collect();
        let block = &got[16 * 18..17 * 18];
        for k in 0..9 {
            assert!((block[k] - raw[k]).abs() < 1e-9);
            let proj: f64 = (0..9).map(|j| pca9.matrix[k * 9 + j] * (raw[j] - pca9.mean[j])).sum();
            assert!((block[9 + k] - proj).abs() < 1e-9);
        }
    }

    #[test]
    fn laws_masks_are_unit_norm_and_only_level_sees_dc() {
        for (k, m) in laws_filters().iter().enumerate() {
            assert!((m.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
            let s: f64 = m.iter().sum();
            if k == 0 {
                assert!(s > 0.0);
            } else {
                assert!(s.abs() < 1e-15);
            }
            let w: Vec<f64> = (0..9).map(|i| ((i * 7) % 5) as f64 - 1.5).collect();
            let direct: f64 = m.iter().zip(&w).map(|(a, b)| a * b).sum();
            assert!((laws_responses(&w)[k] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn build_pool_layout() {
        let t = fitted_all(8);
        let patch = &random_patches(1, 3)[0];
        let pool = build_pool(patch, &t).unwrap();
        assert_eq!(pool.len(), 1438);
        assert!(pool[..225].iter().zip(patch).all(|(a, b)| *a == *b as f32));

        let mut only1 = t.clone();
        only1.spec = RepresentationSpec::from_indices(&[1]).unwrap();
        assert_eq!(build_pool(patch, &only1).unwrap(), pool[..225].to_vec());

        let mut easy = t.clone();
        easy.spec = RepresentationSpec::from_indices(&[1, 3]).unwrap();
        assert_eq!(build_pool(patch, &easy).unwrap().len(), 522);

        let mut missing = t.clone();
        missing.saab3 = None;
        assert!(matches!(build_pool(patch, &missing), Err(LsrError::Configuration(_))));
    }

    #[test]
    fn maps_match_per_patch_pools_exactly() {
        let t = fitted_all(9);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let img = YImage::from_fn(9, 12, |r, c| (r * 11 + c * 7) as f64 + rng.gen_range(0.0..40.0));
        let padded = img.replicate_pad(PATCH_RADIUS);
        let maps = RepresentationMaps::compute(&padded, &t).unwrap();
        for r in 0..9 {
            for c in 0..12 {
                let mut gathered = Vec::new();
                maps.gather_into(r, c, &mut gathered);
                let direct = build_pool(&patch15_at(&padded, r, c), &t).unwrap();
                assert_eq!(gathered, direct, "({r},{c})");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn saab_conserves_window_energy(vals in proptest::collection::vec(-50.0f64..300.0, 49), seed in 0u64..4) {
            let t = fitted_all(seed);
            for k in [t.saab3.as_ref().unwrap(), t.saab5.as_ref().unwrap(), t.saab7.as_ref().unwrap()] {
                let w = &vals[..k.dim()];
                let c = k.transform(w);
                let e_in: f64 = w.iter().map(|v| v * v).sum();
                let e_out: f64 = c.iter().map(|v| v * v).sum();
                prop_assert!((e_in - e_out).abs() <= 1e-6 * e_in.max(1.0));
            }
        }
    }
}
