//! Run configuration as flat `key = value` text.

use crate::decision::{GbtParams, Variant};
use crate::error::{LsrError, Result};
use crate::representations::RepresentationSpec;
use crate::rft::SelectionMode;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub variant: Variant,
    pub scale: usize,
    pub variance_threshold: f64,
    pub easy_types: Vec<u8>,
    pub hard_types: Vec<u8>,
    pub easy_features: usize,
    pub hard_features: usize,
    pub elbow: bool,
    pub bins: usize,
    pub easy_trees: usize,
    pub hard_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub clusters: usize,
    pub fusion: usize,
    pub kmeans_iters: usize,
    pub seed: u64,
    pub stride: usize,
    pub augment: bool,
    /// Cap on augmented training samples per branch; 0 keeps all.
    pub max_samples_per_branch: usize,
    /// Cap on patches used to fit each branch's transforms.
    pub fit_patches: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::for_variant(Variant::V1)
    }
}

const KEYS: &[&str] = &[
    "variant",
    "scale",
    "variance_threshold",
    "easy_types",
    "hard_types",
    "easy_features",
    "hard_features",
    "selection",
    "bins",
    "easy_trees",
    "hard_trees",
    "max_depth",
    "learning_rate",
    "lambda",
    "clusters",
    "fusion",
    "kmeans_iters",
    "seed",
    "stride",
    "augment",
    "max_samples_per_branch",
    "fit_patches",
];

fn bad(key: &str, value: &str) -> LsrError {
    LsrError::Configuration(format!("invalid value {value:?} for {key}"))
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value))
}

fn parse_types(key: &str, value: &str) -> Result<Vec<u8>> {
    let types: Vec<u8> =
        value.split(',').map(|t| t.trim().parse::<u8>().map_err(|_| bad(key, value))).collect::<Result<_>>()?;
    RepresentationSpec::from_indices(&types)?;
    Ok(types)
}

fn join(types: &[u8]) -> String {
    types.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn for_variant(variant: Variant) -> Self {
        let (hard_types, hard_features) = match variant {
            Variant::V1 => (vec![1, 2, 3, 4, 5], 374),
            Variant::V2 => (vec![5], 135),
        };
        RunConfig {
            variant,
            scale: 2,
            variance_threshold: 180.0,
            easy_types: vec![1, 3],
            hard_types,
            easy_features: 105,
            hard_features,
            elbow: false,
            bins: 32,
            easy_trees: 50,
            hard_trees: 500,
            max_depth: 6,
            learning_rate: 0.1,
            lambda: 1.0,
            clusters: 8,
            fusion: 2,
            kmeans_iters: 100,
            seed: 0,
            stride: 1,
            augment: true,
            max_samples_per_branch: 0,
            fit_patches: 20_000,
        }
    }

    /// Set one key. Setting `variant` resets the hard-branch types and
    /// feature count to that variant's defaults.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "variant" => {
                let v: Variant = value.parse()?;
                let d = RunConfig::for_variant(v);
                self.variant = v;
                self.hard_types = d.hard_types;
                self.hard_features = d.hard_features;
            }
            "scale" => {
                if value != "2" {
                    return Err(LsrError::Configuration("only scale 2 is supported".into()));
                }
            }
            "variance_threshold" => self.variance_threshold = parse_num(key, value)?,
            "easy_types" => self.easy_types = parse_types(key, value)?,
            "hard_types" => self.hard_types = parse_types(key, value)?,
            "easy_features" => self.easy_features = parse_num(key, value)?,
            "hard_features" => self.hard_features = parse_num(key, value)?,
            "selection" => {
                self.elbow = match value {
                    "fixed" => false,
                    "elbow" => true,
                    _ => return Err(bad(key, value)),
                }
            }
            "bins" => self.bins = parse_num(key, value)?,
            "easy_trees" => self.easy_trees = parse_num(key, value)?,
            "hard_trees" => self.hard_trees = parse_num(key, value)?,
            "max_depth" => self.max_depth = parse_num(key, value)?,
            "learning_rate" => self.learning_rate = parse_num(key, value)?,
            "lambda" => self.lambda = parse_num(key, value)?,
            "clusters" => self.clusters = parse_num(key, value)?,
            "fusion" => self.fusion = parse_num(key, value)?,
            "kmeans_iters" => self.kmeans_iters = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "stride" => self.stride = parse_num(key, value)?,
            "augment" => self.augment = parse_num(key, value)?,
            "max_samples_per_branch" => self.max_samples_per_branch = parse_num(key, value)?,
            "fit_patches" => self.fit_patches = parse_num(key, value)?,
            _ => return Err(LsrError::Configuration(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Parse `key = value` lines on top of the defaults. Blank lines and
    /// `#` comments are ignored; `variant` is applied before other keys.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| LsrError::Configuration(format!("line {}: expected key = value", no + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut cfg = RunConfig::default();
        pairs.sort_by_key(|(k, _)| k != "variant");
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        RunConfig::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let value = match *key {
                "variant" => self.variant.to_string(),
                "scale" => self.scale.to_string(),
                "variance_threshold" => self.variance_threshold.to_string(),
                "easy_types" => join(&self.easy_types),
                "hard_types" => join(&self.hard_types),
                "easy_features" => self.easy_features.to_string(),
                "hard_features" => self.hard_features.to_string(),
                "selection" => if self.elbow { "elbow" } else { "fixed" }.to_string(),
                "bins" => self.bins.to_string(),
                "easy_trees" => self.easy_trees.to_string(),
                "hard_trees" => self.hard_trees.to_string(),
                "max_depth" => self.max_depth.to_string(),
                "learning_rate" => self.learning_rate.to_string(),
                "lambda" => self.lambda.to_string(),
                "clusters" => self.clusters.to_string(),
                "fusion" => self.fusion.to_string(),
                "kmeans_iters" => self.kmeans_iters.to_string(),
                "seed" => self.seed.to_string(),
                "stride" => self.stride.to_string(),
                "augment" => self.augment.to_string(),
                "max_samples_per_branch" => self.max_samples_per_branch.to_string(),
                "fit_patches" => self.fit_patches.to_string(),
                _ => unreachable!(),
            };
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(LsrError::Configuration(m.to_string()));
        if ![1, 2, 4].contains(&self.fusion) {
            return fail("fusion must be 1, 2 or 4");
        }
        if self.clusters == 0 {
            return fail("clusters must be at least 1");
        }
        if self.bins < 2 {
            return fail("bins must be at least 2");
        }
        if self.stride == 0 {
            return fail("stride must be at least 1");
        }
        if self.max_depth == 0 || self.max_depth > 16 {
            return fail("max_depth must be in 1..=16");
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 || self.lambda.is_nan() || self.lambda < 0.0 {
            return fail("learning_rate must be positive and lambda non-negative");
        }
        if self.variance_threshold.is_nan() || self.variance_threshold < 0.0 {
            return fail("variance_threshold must be non-negative");
        }
        if !self.elbow && (self.easy_features == 0 || self.hard_features == 0) {
            return fail("feature counts must be positive");
        }
        let easy = RepresentationSpec::from_indices(&self.easy_types)?;
        let hard = RepresentationSpec::from_indices(&self.hard_types)?;
        if !self.elbow && (self.easy_features > easy.width() || self.hard_features > hard.width()) {
            return fail("selected feature count exceeds the pool width");
        }
        Ok(())
    }

    pub fn easy_spec(&self) -> RepresentationSpec {
        RepresentationSpec::from_indices(&self.easy_types).expect("validated easy types")
    }

    pub fn hard_spec(&self) -> RepresentationSpec {
        RepresentationSpec::from_indices(&self.hard_types).expect("validated hard types")
    }

    pub fn easy_selection(&self) -> SelectionMode {
        if self.elbow {
            SelectionMode::Elbow
        } else {
            SelectionMode::FixedCount(self.easy_features)
        }
    }

    pub fn hard_selection(&self) -> SelectionMode {
        if self.elbow {
            SelectionMode::Elbow
        } else {
            SelectionMode::FixedCount(self.hard_features)
        }
    }

    pub fn easy_gbt(&self) -> GbtParams {
        GbtParams {
            n_trees: self.easy_trees,
            max_depth: self.max_depth,
            learning_rate: self.learning_rate,
            lambda: self.lambda,
        }
    }

    pub fn hard_gbt(&self) -> GbtParams {
        GbtParams { n_trees: self.hard_trees, ..self.easy_gbt() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_reference_settings() {
        let c = RunConfig::default();
        assert_eq!((c.easy_features, c.hard_features), (105, 374));
        assert_eq!((c.easy_trees, c.hard_trees, c.max_depth), (50, 500, 6));
        assert_eq!((c.clusters, c.fusion, c.bins), (8, 2, 32));
        assert_eq!(c.variance_threshold, 180.0);
        assert_eq!(c.hard_types, vec![1, 2, 3, 4, 5]);
        let v2 = RunConfig::for_variant(Variant::V2);
        assert_eq!((v2.hard_types.clone(), v2.hard_features), (vec![5], 135));
    }

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::for_variant(Variant::V2);
        c.seed = 17;
        c.learning_rate = 0.05;
        c.elbow = true;
        c.max_samples_per_branch = 1234;
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn variant_applies_before_overrides() {
        let c = RunConfig::parse("hard_features = 50\n# comment\nvariant = v2\n").unwrap();
        assert_eq!(c.variant, Variant::V2);
        assert_eq!(c.hard_features, 50);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::parse("nonsense = 1").is_err());
        assert!(RunConfig::parse("fusion = 3").is_err());
        assert!(RunConfig::parse("hard_types = 1,9").is_err());
        assert!(RunConfig::parse("scale = 3").is_err());
        assert!(RunConfig::parse("no equals sign").is_err());
        assert!(RunConfig::parse("variant = v2\nhard_features = 451").is_err());
    }
}
