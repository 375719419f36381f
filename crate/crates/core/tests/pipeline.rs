mod common;

use lsr_core::decision::{predict_patch, superresolve, superresolve_parts, train_lsr, LsrModel};
use lsr_core::imaging::{lanczos_upscale, read_luma, ImagePair, YImage};
use lsr_core::patches::{
    dihedral, dihedral_image, extract_samples, patch15_at, patch_variance, PATCH_AREA, PATCH_RADIUS, PATCH_SIDE,
};
use lsr_core::LsrError;
use proptest::prelude::*;
use std::sync::OnceLock;

fn model() -> &'static LsrModel {
    static MODEL: OnceLock<LsrModel> = OnceLock::new();
    MODEL.get_or_init(|| common::tiny_model(5).0)
}

fn heldout() -> &'static [YImage] {
    static IMGS: OnceLock<Vec<YImage>> = OnceLock::new();
    IMGS.get_or_init(|| common::load_all(&common::heldout_files()))
}

fn with_fusion(f: usize) -> LsrModel {
    let mut m = model().clone();
    m.config.fusion = f;
    m
}

/// 15x15 patch whose value depends only on (row, |col - 7|).
fn mirror_symmetric(vals: &[f64]) -> Vec<f64> {
    (0..PATCH_AREA)
        .map(|i| {
            let (r, c) = (i / PATCH_SIDE, i % PATCH_SIDE);
            vals[r * 8 + c.abs_diff(PATCH_RADIUS)]
        })
        .collect()
}

/// 15x15 patch invariant under all eight symmetries of the square.
fn fully_symmetric(vals: &[f64]) -> Vec<f64> {
    (0..PATCH_AREA)
        .map(|i| {
            let a = (i / PATCH_SIDE).abs_diff(PATCH_RADIUS);
            let b = (i % PATCH_SIDE).abs_diff(PATCH_RADIUS);
            vals[a.min(b) * 8 + a.max(b)]
        })
        .collect()
}

#[test]
fn symmetric_patch_constructions_are_invariant() {
    let vals: Vec<f64> = (0..120).map(|i| ((i * 37) % 255) as f64).collect();
    let p = fully_symmetric(&vals);
    for m in 0..8 {
        assert_eq!(dihedral(&p, PATCH_SIDE, m).unwrap(), p);
    }
    let q = mirror_symmetric(&vals);
    assert_eq!(dihedral(&q, PATCH_SIDE, 4).unwrap(), q);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn residual_decomposition(img in 0usize..3, top in 0usize..60, left in 0usize..90, h in 12usize..28, w in 12usize..28) {
        let model = model();
        let hr = heldout()[img].crop(top, left, 2 * h, 2 * w).unwrap();
        let pair = ImagePair::from_hr(&hr, 2).unwrap();

        let (ilr, res) = superresolve_parts(model, &pair.lr).unwrap();
        prop_assert_eq!(&ilr, &lanczos_upscale(&pair.lr, 2).unwrap());
        let sr = superresolve(model, &pair.lr).unwrap();
        for i in 0..sr.data().len() {
            prop_assert_eq!(sr.data()[i], (ilr.data()[i] + res.data()[i]).clamp(0.0, 255.0));
        }

        let padded = ilr.replicate_pad(PATCH_RADIUS);
        for r in 0..ilr.height() {
            for c in 0..ilr.width() {
                let want = predict_patch(model, &patch15_at(&padded, r, c)).unwrap();
                prop_assert!((res.get(r, c) - want).abs() <= 1e-9, "({r},{c}) map {} patch {want}", res.get(r, c));
            }
        }

        for s in extract_samples(&pair, 3, true).samples {
            let (r, c) = s.position;
            prop_assert!((s.center() + s.residual.unwrap() - pair.hr.get(r, c)).abs() < 1e-9);
        }
    }

    #[test]
    fn fusion_on_mirror_symmetric_patch(vals in proptest::collection::vec(0.0f64..255.0, 15 * 8)) {
        let p = mirror_symmetric(&vals);
        prop_assume!(patch_variance(&p) >= 180.0);
        let one = predict_patch(&with_fusion(1), &p).unwrap();
        prop_assert_eq!(predict_patch(&with_fusion(2), &p).unwrap(), one);
    }

    #[test]
    fn fusion_on_fully_symmetric_patch(vals in proptest::collection::vec(0.0f64..255.0, 8 * 8)) {
        let p = fully_symmetric(&vals);
        prop_assume!(patch_variance(&p) >= 180.0);
        let one = predict_patch(&with_fusion(1), &p).unwrap();
        prop_assert_eq!(predict_patch(&with_fusion(2), &p).unwrap(), one);
        prop_assert_eq!(predict_patch(&with_fusion(4), &p).unwrap(), one);
    }

    #[test]
    fn dihedral_preserves_variance(p in proptest::collection::vec(0.0f64..255.0, PATCH_AREA)) {
        let v = patch_variance(&p);
        for m in 0..8 {
            prop_assert_eq!(patch_variance(&dihedral(&p, PATCH_SIDE, m).unwrap()), v);
        }
    }

    #[test]
    fn dihedral_image_is_a_permutation(h in 1usize..20, w in 1usize..20, seed in any::<u64>(), m in 0u8..8) {
        let img = YImage::from_fn(h, w, |r, c| ((seed ^ (r * 131 + c * 7) as u64) % 256) as f64);
        let t = dihedral_image(&img, m);
        let mut a = img.data().to_vec();
        let mut b = t.data().to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a, b);
        if m % 2 == 1 {
            prop_assert_eq!(t.dims(), (w, h));
        }
    }

    #[test]
    fn serialization_round_trip(vals in proptest::collection::vec(0.0f64..255.0, PATCH_AREA)) {
        let model = model();
        let bytes = model.to_bytes();
        let back = LsrModel::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, model);
        prop_assert_eq!(back.to_bytes(), bytes);
        prop_assert_eq!(predict_patch(&back, &vals).unwrap().to_bits(), predict_patch(model, &vals).unwrap().to_bits());
    }

    #[test]
    fn corrupted_model_bytes_are_rejected(cut in 0usize..4096, flip in 0usize..64) {
        let bytes = model().to_bytes();
        let cut = cut.min(bytes.len() - 1);
        prop_assert!(matches!(LsrModel::from_bytes(&bytes[..cut]), Err(LsrError::Format(_))));
        let mut bad = bytes.clone();
        bad[flip % 4] ^= 0x20;
        prop_assert!(matches!(LsrModel::from_bytes(&bad), Err(LsrError::Format(_))));
    }
}

#[test]
fn training_is_deterministic_for_a_seed() {
    let imgs = common::tiny_images();
    let cfg = common::tiny_config(11);
    let a = train_lsr(&imgs, &cfg).unwrap().0.to_bytes();
    let b = train_lsr(&imgs, &cfg).unwrap().0.to_bytes();
    assert_eq!(a, b);
    let lr = read_luma(&common::heldout_files()[1]).unwrap().crop(0, 0, 30, 30).unwrap();
    let m = LsrModel::from_bytes(&a).unwrap();
    assert_eq!(superresolve(&m, &lr).unwrap(), superresolve(&m, &lr).unwrap());
}

#[test]
fn tiny_model_beats_lanczos_on_training_distribution() {
    let model = model();
    let mut gain = 0.0;
    for img in common::tiny_images() {
        let pair = ImagePair::from_hr(&img, 2).unwrap();
        let sr = superresolve(model, &pair.lr).unwrap();
        gain += lsr_core::imaging::psnr(&pair.hr, &sr, 2).unwrap()
            - lsr_core::imaging::psnr(&pair.hr, &pair.ilr, 2).unwrap();
    }
    assert!(gain > 0.0, "summed PSNR gain {gain}");
}
