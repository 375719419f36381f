use super::gbt::gbt_train;
use super::hog::{hog, HOG_LEN};
use super::kmeans::{kmeans_fit, DEFAULT_TOL};
use super::model::{BranchModel, LsrModel};
use crate::config::RunConfig;
use crate::error::{LsrError, Result};
use crate::imaging::{lanczos_upscale, ImagePair, YImage};
use crate::patches::{
    classify_with, dihedral, dihedral_image, dihedral_position, grid_positions, hog_companion, patch15_at,
    patch_variance, Hardness, PartitionStats, PatchSample, DIHEDRAL_MODES, PATCH_AREA, PATCH_RADIUS, PATCH_SIDE,
};
use crate::representations::{fit_transforms, pool_into, RepresentationMaps, RepresentationSpec};
use crate::rft::{select_features, FeatureSelection, SelectionMode};
use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Dihedral modes whose predictions are averaged for a fusion factor.
pub fn fusion_modes(f: usize) -> &'static [u8] {
    match f {
        1 => &[0],
        2 => &[0, 4],
        4 => &[0, 4, 2, 6],
        _ => panic!("unsupported fusion factor {f}"),
    }
}

/// Counts and diagnostics gathered while training.
#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub images: usize,
    pub easy_positions: usize,
    pub hard_positions: usize,
    pub easy_samples: usize,
    pub hard_samples: usize,
    pub stats: PartitionStats,
    pub easy_selection: Option<FeatureSelection>,
    pub hard_selection: Option<FeatureSelection>,
    pub warnings: Vec<String>,
}

impl TrainReport {
    fn warn(&mut self, msg: String) {
        warn!("{msg}");
        self.warnings.push(msg);
    }
}

struct Position {
    image: u32,
    row: u32,
    col: u32,
}

/// Train a model from full-resolution luma images.
pub fn train_lsr(hr_images: &[YImage], config: &RunConfig) -> Result<(LsrModel, TrainReport)> {
    config.validate()?;
    if hr_images.is_empty() {
        return Err(LsrError::Training("no training images".into()));
    }
    let mut report = TrainReport { images: hr_images.len(), ..Default::default() };
    let pairs: Vec<ImagePair> =
        hr_images.par_iter().map(|hr| ImagePair::from_hr(hr, config.scale)).collect::<Result<_>>()?;
    let padded: Vec<YImage> = pairs.iter().map(|p| p.ilr.replicate_pad(PATCH_RADIUS)).collect();

    let mut easy = Vec::new();
    let mut hard = Vec::new();
    for (k, (pair, pad)) in pairs.iter().zip(&padded).enumerate() {
        let (h, w) = pair.ilr.dims();
        let classified: Vec<(usize, usize, Hardness)> = grid_positions(h, w, config.stride)
            .into_par_iter()
            .map(|(r, c)| (r, c, classify_with(patch_variance(&patch15_at(pad, r, c)), config.variance_threshold)))
            .collect();
        for (r, c, hardness) in classified {
            report.stats.add(hardness, pair.hr.get(r, c) - pair.ilr.get(r, c));
            let p = Position { image: k as u32, row: r as u32, col: c as u32 };
            match hardness {
                Hardness::Easy => easy.push(p),
                Hardness::Hard => hard.push(p),
            }
        }
    }
    report.easy_positions = easy.len();
    report.hard_positions = hard.len();
    info!(
        "{} positions: {} easy, {} hard ({:.1}% easy)",
        easy.len() + hard.len(),
        easy.len(),
        hard.len(),
        100.0 * report.stats.easy_fraction()
    );

    let modes = if config.augment { DIHEDRAL_MODES as usize } else { 1 };
    let materialize = |positions: &[Position], salt: u64| -> (Vec<f64>, Vec<f64>) {
        let total = positions.len() * modes;
        let cap = config.max_samples_per_branch;
        let picks: Vec<usize> = if cap > 0 && total > cap {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ salt);
            let mut v = rand::seq::index::sample(&mut rng, total, cap).into_vec();
            v.sort_unstable();
            v
        } else {
            (0..total).collect()
        };
        let rows: Vec<(Vec<f64>, f64)> = picks
            .par_iter()
            .map(|&v| {
                let p = &positions[v / modes];
                let (r, c) = (p.row as usize, p.col as usize);
                let pair = &pairs[p.image as usize];
                let patch = patch15_at(&padded[p.image as usize], r, c);
                let patch = dihedral(&patch, PATCH_SIDE, (v % modes) as u8).expect("square patch");
                (patch, pair.hr.get(r, c) - pair.ilr.get(r, c))
            })
            .collect();
        let mut flat = Vec::with_capacity(rows.len() * PATCH_AREA);
        let mut targets = Vec::with_capacity(rows.len());
        for (p, t) in rows {
            flat.extend(p);
            targets.push(t);
        }
        (flat, targets)
    };

    let easy_model = if easy.is_empty() {
        report.warn("no easy samples; easy pixels will get a zero residual".into());
        None
    } else {
        let (patches, targets) = materialize(&easy, 0x5eed_ea5e);
        drop(easy);
        report.easy_samples = targets.len();
        let (m, sel) =
            train_branch("easy", &patches, &targets, &config.easy_spec(), config.easy_selection(), None, config)?;
        report.easy_selection = Some(sel);
        Some(m)
    };
    let hard_model = if hard.is_empty() {
        report.warn("no hard samples; hard pixels will get a zero residual".into());
        None
    } else {
        let (patches, targets) = materialize(&hard, 0x5eed_4a4d);
        drop(hard);
        report.hard_samples = targets.len();
        let (m, sel) = train_branch(
            "hard",
            &patches,
            &targets,
            &config.hard_spec(),
            config.hard_selection(),
            Some(config.clusters),
            config,
        )?;
        report.hard_selection = Some(sel);
        Some(m)
    };
    if report.stats.easy_sq_residual + report.stats.hard_sq_residual == 0.0 {
        report.warn("all training residuals are zero; the model is degenerate".into());
    }
    let model = LsrModel { config: config.clone(), easy: easy_model, hard: hard_model };
    model.validate()?;
    Ok((model, report))
}

fn train_branch(
    name: &str,
    patches: &[f64],
    targets: &[f64],
    spec: &RepresentationSpec,
    selection: SelectionMode,
    clusters: Option<usize>,
    config: &RunConfig,
) -> Result<(BranchModel, FeatureSelection)> {
    let n = targets.len();
    let ctx = |e: LsrError| LsrError::Training(format!("{name} branch ({n} samples): {e}"));
    if n < 2 {
        return Err(LsrError::Training(format!("{name} branch has {n} sample(s); add training data")));
    }
    let refs: Vec<&[f64]> = patches.chunks_exact(PATCH_AREA).collect();
    let transforms = fit_transforms(&refs, spec, config.fit_patches).map_err(ctx)?;
    let width = spec.width();
    let mut pool = vec![0f32; n * width];
    pool.par_chunks_mut(width).zip(refs.par_iter()).for_each(|(row, p)| {
        let mut v = Vec::with_capacity(width);
        pool_into(p, &transforms, &mut v);
        row.copy_from_slice(&v);
    });
    let selection = select_features(&pool, width, targets, selection, config.bins).map_err(ctx)?;
    let selected = selection.selected_ids.clone();
    let k = selected.len();
    let mut x = vec![0f32; n * k];
    x.par_chunks_mut(k).zip(pool.par_chunks(width)).for_each(|(dst, src)| {
        for (d, &s) in dst.iter_mut().zip(&selected) {
            *d = src[s];
        }
    });
    drop(pool);
    info!("{name}: {n} samples, kept {k} of {width} features");

    let (kmeans, regressors) = match clusters {
        None => (None, vec![gbt_train(&x, k, targets, &config.easy_gbt()).map_err(ctx)?]),
        Some(c) => {
            let descriptors: Vec<f64> = refs.par_iter().flat_map_iter(|p| hog(&hog_companion(p))).collect();
            let km =
                kmeans_fit(&descriptors, HOG_LEN, c, config.seed, config.kmeans_iters, DEFAULT_TOL).map_err(ctx)?;
            let labels: Vec<usize> = descriptors.par_chunks(HOG_LEN).map(|d| km.assign(d)).collect();
            let regs = (0..c)
                .into_par_iter()
                .map(|j| {
                    let rows: Vec<usize> = (0..n).filter(|&i| labels[i] == j).collect();
                    if rows.len() < 2 {
                        return Err(LsrError::Training(format!(
                            "{name} branch: cluster {j} has {} sample(s); add training data or reduce clusters",
                            rows.len()
                        )));
                    }
                    let xs: Vec<f32> = rows.iter().flat_map(|&i| x[i * k..(i + 1) * k].iter().copied()).collect();
                    let ys: Vec<f64> = rows.iter().map(|&i| targets[i]).collect();
                    info!("{name}: cluster {j} has {} samples", rows.len());
                    gbt_train(&xs, k, &ys, &config.hard_gbt()).map_err(ctx)
                })
                .collect::<Result<Vec<_>>>()?;
            (Some(km), regs)
        }
    };
    Ok((BranchModel { transforms, selected, kmeans, regressors }, selection))
}

fn select_into(pool: &[f32], selected: &[usize], out: &mut Vec<f32>) {
    out.clear();
    out.extend(selected.iter().map(|&s| pool[s]));
}

fn branch_predict(b: &BranchModel, x: &[f32], patch15: &[f64]) -> f64 {
    let cluster = match &b.kmeans {
        Some(k) => k.assign(&hog(&hog_companion(patch15))),
        None => 0,
    };
    b.regressors[cluster].predict(x)
}

/// Residual prediction for one patch, computed patch by patch.
pub fn predict_residual(model: &LsrModel, sample: &PatchSample) -> Result<f64> {
    predict_patch(model, &sample.patch15)
}

/// Residual prediction for a raw 15x15 ILR patch.
pub fn predict_patch(model: &LsrModel, patch15: &[f64]) -> Result<f64> {
    if patch15.len() != PATCH_AREA {
        return Err(LsrError::dim("expected a 15x15 patch"));
    }
    let hardness = classify_with(patch_variance(patch15), model.config.variance_threshold);
    let mut pool = Vec::new();
    let mut x = Vec::new();
    if hardness == Hardness::Easy {
        let Some(b) = &model.easy else { return Ok(0.0) };
        pool_into(patch15, &b.transforms, &mut pool);
        select_into(&pool, &b.selected, &mut x);
        return Ok(b.regressors[0].predict(&x));
    }
    let Some(b) = &model.hard else { return Ok(0.0) };
    let modes = fusion_modes(model.config.fusion);
    let mut sum = 0.0;
    for &m in modes {
        let p = dihedral(patch15, PATCH_SIDE, m)?;
        pool.clear();
        pool_into(&p, &b.transforms, &mut pool);
        select_into(&pool, &b.selected, &mut x);
        sum += branch_predict(b, &x, &p);
    }
    Ok(sum / modes.len() as f64)
}

/// The ILR image and the predicted residual map; the unclamped output is
/// their sum.
pub fn superresolve_parts(model: &LsrModel, lr: &YImage) -> Result<(YImage, YImage)> {
    model.validate()?;
    let ilr = lanczos_upscale(lr, model.config.scale)?;
    let (h, w) = ilr.dims();
    let padded = ilr.replicate_pad(PATCH_RADIUS);
    let hard: Vec<bool> = (0..h * w)
        .into_par_iter()
        .map(|i| {
            let v = patch_variance(&patch15_at(&padded, i / w, i % w));
            classify_with(v, model.config.variance_threshold) == Hardness::Hard
        })
        .collect();
    let mut residual = vec![0.0; h * w];

    if let Some(b) = &model.easy {
        let maps = RepresentationMaps::compute(&padded, &b.transforms)?;
        residual.par_chunks_mut(w).enumerate().for_each(|(r, row)| {
            let (mut pool, mut x) = (Vec::new(), Vec::new());
            for (c, out) in row.iter_mut().enumerate() {
                if hard[r * w + c] {
                    continue;
                }
                pool.clear();
                maps.gather_into(r, c, &mut pool);
                select_into(&pool, &b.selected, &mut x);
                *out = b.regressors[0].predict(&x);
            }
        });
    }

    if let Some(b) = &model.hard {
        if hard.iter().any(|&v| v) {
            let modes = fusion_modes(model.config.fusion);
            let (ph, pw) = padded.dims();
            let mut sums = vec![0.0; h * w];
            for &m in modes {
                let turned = dihedral_image(&padded, m);
                let maps = RepresentationMaps::compute(&turned, &b.transforms)?;
                sums.par_chunks_mut(w).enumerate().for_each(|(r, row)| {
                    let (mut pool, mut x) = (Vec::new(), Vec::new());
                    for (c, out) in row.iter_mut().enumerate() {
                        if !hard[r * w + c] {
                            continue;
                        }
                        let (tr, tc) = dihedral_position(r + PATCH_RADIUS, c + PATCH_RADIUS, ph, pw, m);
                        let (tr, tc) = (tr - PATCH_RADIUS, tc - PATCH_RADIUS);
                        pool.clear();
                        maps.gather_into(tr, tc, &mut pool);
                        select_into(&pool, &b.selected, &mut x);
                        *out += branch_predict(b, &x, &patch15_at(&turned, tr, tc));
                    }
                });
            }
            for i in 0..h * w {
                if hard[i] {
                    residual[i] = sums[i] / modes.len() as f64;
                }
            }
        }
    }
    Ok((ilr, YImage::new(h, w, residual)?))
}

/// Upscale a luma image by the model's scale: ILR plus predicted residual,
/// clamped to [0, 255].
pub fn superresolve(model: &LsrModel, lr: &YImage) -> Result<YImage> {
    let (ilr, residual) = superresolve_parts(model, lr)?;
    let sum: Vec<f64> = ilr.data().iter().zip(residual.data()).map(|(a, b)| a + b).collect();
    Ok(YImage::new(ilr.height(), ilr.width(), sum)?.clamped())
}
