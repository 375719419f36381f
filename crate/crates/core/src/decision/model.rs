use super::gbt::{GbtRegressor, Tree, TreeNode};
use super::hog::HOG_LEN;
use super::kmeans::KMeansModel;
use crate::config::RunConfig;
use crate::error::{LsrError, Result};
use crate::representations::{BranchTransforms, ChannelPcaSet, RepresentationSpec, SaabKernelSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

pub const MODEL_MAGIC: &[u8; 4] = b"LSR1";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    V1,
    V2,
}

impl Variant {
    fn tag(self) -> u8 {
        match self {
            Variant::V1 => 1,
            Variant::V2 => 2,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::V1 => "v1",
            Variant::V2 => "v2",
        })
    }
}

impl FromStr for Variant {
    type Err = LsrError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "v1" | "1" => Ok(Variant::V1),
            "v2" | "2" => Ok(Variant::V2),
            _ => Err(LsrError::Configuration(format!("unknown variant {s:?}"))),
        }
    }
}

/// Everything needed to predict residuals for one partition.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchModel {
    pub transforms: BranchTransforms,
    /// Pool indices fed to the regressors, in ascending RFT loss.
    pub selected: Vec<usize>,
    /// HOG clustering; `None` means a single regressor.
    pub kmeans: Option<KMeansModel>,
    pub regressors: Vec<GbtRegressor>,
}

impl BranchModel {
    pub fn clusters(&self) -> usize {
        self.regressors.len()
    }

    fn validate(&self, name: &str) -> Result<()> {
        let bad = |m: String| Err(LsrError::format(format!("{name} branch: {m}")));
        self.transforms.validate()?;
        let width = self.transforms.spec.width();
        if self.selected.is_empty() || self.selected.iter().any(|&s| s >= width) {
            return bad(format!("selected ids must be non-empty and below the pool width {width}"));
        }
        let expected = self.kmeans.as_ref().map_or(1, |k| k.k);
        if self.regressors.len() != expected {
            return bad(format!("{} regressors for {expected} clusters", self.regressors.len()));
        }
        if let Some(k) = &self.kmeans {
            if k.dim != HOG_LEN || k.centroids.len() != k.k * k.dim {
                return bad("centroids have the wrong shape".into());
            }
        }
        for r in &self.regressors {
            for t in &r.trees {
                if t.max_feature().is_some_and(|f| f as usize >= self.selected.len()) {
                    return bad("tree feature index beyond the selected features".into());
                }
                check_tree(t).or_else(&bad)?;
            }
        }
        Ok(())
    }
}

fn check_tree(t: &Tree) -> std::result::Result<(), String> {
    fn walk(t: &Tree, i: usize, depth: usize) -> std::result::Result<usize, String> {
        if depth > 64 {
            return Err("tree too deep".into());
        }
        match t.nodes.get(i) {
            None => Err("tree node index out of range".into()),
            Some(TreeNode::Leaf { .. }) => Ok(i + 1),
            Some(TreeNode::Split { right, .. }) => {
                let end_left = walk(t, i + 1, depth + 1)?;
                if *right as usize != end_left {
                    return Err("tree is not in pre-order".into());
                }
                walk(t, end_left, depth + 1)
            }
        }
    }
    if walk(t, 0, 0)? != t.nodes.len() {
        return Err("tree has unreachable nodes".into());
    }
    Ok(())
}

/// A trained model. The configuration doubles as the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct LsrModel {
    pub config: RunConfig,
    pub easy: Option<BranchModel>,
    pub hard: Option<BranchModel>,
}

struct Enc(Vec<u8>);

impl Enc {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn i32(&mut self, v: i32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u64).to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len());
        v.iter().for_each(|&x| self.f64(x));
    }
    fn saab(&mut self, k: &Option<SaabKernelSet>) {
        let Some(k) = k else { return self.u8(0) };
        self.u8(1);
        self.u32(k.window);
        self.u8(k.rank_deficient as u8);
        self.f64s(&k.kernels);
        self.f64s(&k.ac_energies);
    }
    fn pca(&mut self, p: &Option<ChannelPcaSet>) {
        let Some(p) = p else { return self.u8(0) };
        self.u8(1);
        self.u32(p.channels);
        self.u8(p.rank_deficient as u8);
        self.f64s(&p.matrix);
        self.f64s(&p.mean);
        self.f64s(&p.eigenvalues);
    }
    fn branch(&mut self, b: &BranchModel) {
        let types = b.transforms.spec.indices();
        self.u32(types.len());
        types.iter().for_each(|&t| self.u8(t));
        let t = &b.transforms;
        self.saab(&t.saab5);
        self.saab(&t.saab7);
        self.saab(&t.saab3);
        self.pca(&t.pca4);
        self.pca(&t.pca9);
        self.u64(b.selected.len());
        b.selected.iter().for_each(|&s| self.u32(s));
        match &b.kmeans {
            None => self.u8(0),
            Some(k) => {
                self.u8(1);
                self.u32(k.k);
                self.u32(k.dim);
                self.f64s(&k.centroids);
            }
        }
        self.u32(b.regressors.len());
        for r in &b.regressors {
            self.f64(r.base_score);
            self.f64(r.learning_rate);
            self.u32(r.trees.len());
            for t in &r.trees {
                self.u32(t.nodes.len());
                for n in &t.nodes {
                    match *n {
                        TreeNode::Leaf { weight } => {
                            self.i32(-1);
                            self.f64(weight);
                            self.u32(0);
                        }
                        TreeNode::Split { feature, threshold, right } => {
                            self.i32(feature as i32);
                            self.f64(threshold);
                            self.u32(right as usize);
                        }
                    }
                }
            }
        }
    }
    fn section(&mut self, tag: &[u8; 4], payload: &[u8]) {
        self.0.extend_from_slice(tag);
        self.u64(payload.len());
        self.0.extend_from_slice(payload);
    }
}

struct Dec<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Dec<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.at < n {
            return Err(LsrError::format("model file is truncated"));
        }
        let s = &self.buf[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn flag(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(LsrError::format(format!("bad flag byte {v}"))),
        }
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| LsrError::format("length overflows"))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()?;
        if n > (self.buf.len() - self.at) / 8 {
            return Err(LsrError::format("model file is truncated"));
        }
        (0..n).map(|_| self.f64()).collect()
    }
    fn saab(&mut self) -> Result<Option<SaabKernelSet>> {
        if !self.flag()? {
            return Ok(None);
        }
        let window = self.u32()?;
        let rank_deficient = self.flag()?;
        let kernels = self.f64s()?;
        let ac_energies = self.f64s()?;
        Ok(Some(SaabKernelSet { window, kernels, ac_energies, rank_deficient }))
    }
    fn pca(&mut self) -> Result<Option<ChannelPcaSet>> {
        if !self.flag()? {
            return Ok(None);
        }
        let channels = self.u32()?;
        let rank_deficient = self.flag()?;
        let matrix = self.f64s()?;
        let mean = self.f64s()?;
        let eigenvalues = self.f64s()?;
        Ok(Some(ChannelPcaSet { channels, matrix, mean, eigenvalues, rank_deficient }))
    }
    fn branch(&mut self) -> Result<BranchModel> {
        let n_types = self.u32()?;
        let types = (0..n_types).map(|_| self.u8()).collect::<Result<Vec<_>>>()?;
        let spec = RepresentationSpec::from_indices(&types)?;
        let transforms = BranchTransforms {
            spec,
            saab5: self.saab()?,
            saab7: self.saab()?,
            saab3: self.saab()?,
            pca4: self.pca()?,
            pca9: self.pca()?,
        };
        let n_sel = self.u64()?;
        if n_sel > self.buf.len() / 4 {
            return Err(LsrError::format("model file is truncated"));
        }
        let selected = (0..n_sel).map(|_| self.u32()).collect::<Result<Vec<_>>>()?;
        let kmeans = if self.flag()? {
            let k = self.u32()?;
            let dim = self.u32()?;
            Some(KMeansModel { k, dim, centroids: self.f64s()? })
        } else {
            None
        };
        let n_reg = self.u32()?;
        let mut regressors = Vec::new();
        for _ in 0..n_reg {
            let base_score = self.f64()?;
            let learning_rate = self.f64()?;
            let n_trees = self.u32()?;
            let mut trees = Vec::new();
            for _ in 0..n_trees {
                let n_nodes = self.u32()?;
                let mut nodes = Vec::new();
                for _ in 0..n_nodes {
                    let feature = self.i32()?;
                    let value = self.f64()?;
                    let right = self.u32()? as u32;
                    nodes.push(if feature < 0 {
                        TreeNode::Leaf { weight: value }
                    } else {
                        TreeNode::Split { feature: feature as u32, threshold: value, right }
                    });
                }
                trees.push(Tree { nodes });
            }
            regressors.push(GbtRegressor { base_score, learning_rate, trees });
        }
        Ok(BranchModel { transforms, selected, kmeans, regressors })
    }
}

impl LsrModel {
    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Enc(Vec::new());
        out.0.extend_from_slice(MODEL_MAGIC);
        out.u32(MODEL_VERSION as usize);
        out.u8(self.variant().tag());
        out.section(b"MANI", self.config.to_text().as_bytes());
        for (tag, branch) in [(b"EASY", &self.easy), (b"HARD", &self.hard)] {
            if let Some(b) = branch {
                let mut payload = Enc(Vec::new());
                payload.branch(b);
                out.section(tag, &payload.0);
            }
        }
        out.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<LsrModel> {
        let mut d = Dec { buf: bytes, at: 0 };
        if d.take(4).ok() != Some(&MODEL_MAGIC[..]) {
            return Err(LsrError::format("not a model file (bad magic)"));
        }
        let version = d.u32()?;
        if version != MODEL_VERSION as usize {
            return Err(LsrError::format(format!("unsupported model version {version}")));
        }
        let tag = d.u8()?;
        let mut config = None;
        let (mut easy, mut hard) = (None, None);
        while d.at < bytes.len() {
            let name: [u8; 4] = d.take(4)?.try_into().unwrap();
            let len = d.u64()?;
            let payload = d.take(len)?;
            let mut p = Dec { buf: payload, at: 0 };
            match &name {
                b"MANI" => {
                    let text = std::str::from_utf8(payload).map_err(|_| LsrError::format("manifest is not UTF-8"))?;
                    config = Some(RunConfig::parse(text)?);
                }
                b"EASY" => easy = Some(p.branch()?),
                b"HARD" => hard = Some(p.branch()?),
                _ => continue,
            }
            if name != *b"MANI" && p.at != payload.len() {
                return Err(LsrError::format("trailing bytes in model section"));
            }
        }
        let config = config.ok_or_else(|| LsrError::format("model has no manifest"))?;
        if config.variant.tag() != tag {
            return Err(LsrError::format("variant tag disagrees with the manifest"));
        }
        let model = LsrModel { config, easy, hard };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(e) = &self.easy {
            e.validate("easy")?;
        }
        if let Some(h) = &self.hard {
            h.validate("hard")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<LsrModel> {
        LsrModel::from_bytes(&std::fs::read(path)?)
    }

    /// Human-readable summary.
    pub fn describe(&self) -> String {
        let mut s = format!("variant {}\n", self.variant());
        for (name, b) in [("easy", &self.easy), ("hard", &self.hard)] {
            match b {
                None => s.push_str(&format!("{name}: untrained (predicts zero residual)\n")),
                Some(b) => {
                    let trees: Vec<usize> = b.regressors.iter().map(|r| r.trees.len()).collect();
                    let depth = b.regressors.iter().map(|r| r.max_depth()).max().unwrap_or(0);
                    s.push_str(&format!(
                        "{name}: types {:?}, pool width {}, {} selected features, {} cluster(s), trees {:?}, max depth {}\n",
                        b.transforms.spec.indices(),
                        b.transforms.spec.width(),
                        b.selected.len(),
                        b.clusters(),
                        trees,
                        depth
                    ));
                }
            }
        }
        s.push_str("manifest:\n");
        for line in self.config.to_text().lines() {
            s.push_str("  ");
            s.push_str(line);
            s.push('\n');
        }
        s
    }
}
