//! Inference cost accounting: FLOPs (F), FLOPs per output pixel (F_p) and
//! parameter counts (M) for a method described as a list of operations.

use crate::decision::{LsrModel, HOG_LEN};
use crate::error::{LsrError, Result};
use std::fmt::Write as _;
use std::io::Write;

/// Whether a convolution's bias is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiasMode {
    None,
    Full,
    /// Bias additions counted in F but bias terms left out of M.
    FlopsOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpDescriptor {
    /// One operation per element of an `h x w x c` block, `n` times.
    Pixelwise {
        h: u64,
        w: u64,
        c: u64,
        n: u64,
    },
    /// `n` products of a `th x tw` matrix with a vector. `banks` copies of
    /// the matrix are stored but only one is used per product.
    Matmul {
        th: u64,
        tw: u64,
        n: u64,
        banks: u64,
    },
    Conv3d {
        ci: u64,
        kh: u64,
        kw: u64,
        ho: u64,
        wo: u64,
        co: u64,
        bias: BiasMode,
        layers: u64,
    },
    /// Per-pixel channel-wise 2D filtering over `n_type` filter groups,
    /// repeated for `f` fusion siblings.
    Channelwise {
        ci: u64,
        kh: u64,
        kw: u64,
        co: u64,
        n_type: u64,
        f: u64,
    },
    ClusterPred {
        n_fc: u64,
        n_c: u64,
        f: u64,
    },
    GbtPred {
        n_tree: u64,
        d_m: u64,
        f: u64,
        n_c: u64,
    },
    Fusion {
        f: u64,
    },
    FeatureSelect {
        n_fr: u64,
    },
    /// One addition per output pixel.
    PostProcess,
}

/// Cost of one operation. `flops` is whole-image; `fp` is per output pixel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Cost {
    pub flops: f64,
    pub fp: f64,
    pub params: u64,
}

impl OpDescriptor {
    pub fn eval(&self, pixels: u64) -> Cost {
        let px = pixels as f64;
        let whole = |flops: u64, params: u64| Cost { flops: flops as f64, fp: flops as f64 / px, params };
        let per_pixel = |fp: u64, params: u64| Cost { flops: fp as f64 * px, fp: fp as f64, params };
        match *self {
            OpDescriptor::Pixelwise { h, w, c, n } => whole(h * w * c * n, 0),
            OpDescriptor::Matmul { th, tw, n, banks } => whole((2 * tw).saturating_sub(1) * th * n, th * tw * banks),
            OpDescriptor::Conv3d { ci, kh, kw, ho, wo, co, bias, layers } => {
                let taps = ci * kh * kw;
                let per_out = match bias {
                    BiasMode::None => (2 * taps).saturating_sub(1),
                    BiasMode::Full | BiasMode::FlopsOnly => 2 * taps,
                };
                let params = match bias {
                    BiasMode::Full => (taps + 1) * co,
                    BiasMode::None | BiasMode::FlopsOnly => taps * co,
                };
                whole(per_out * ho * wo * co * layers, params * layers)
            }
            OpDescriptor::Channelwise { ci, kh, kw, co, n_type, f } => {
                per_pixel(ci * (2 * kh * kw).saturating_sub(1) * co * n_type * f, ci * kh * kw * co * n_type)
            }
            OpDescriptor::ClusterPred { n_fc, n_c, f } => per_pixel((3 * n_fc).saturating_sub(1) * n_c * f, n_fc * n_c),
            OpDescriptor::GbtPred { n_tree, d_m, f, n_c } => {
                let leaves = 1u64 << d_m;
                let parents = leaves - 1;
                per_pixel(d_m * n_tree * f, (2 * parents + leaves) * n_tree * n_c)
            }
            OpDescriptor::Fusion { f } => per_pixel(if f > 1 { f } else { 0 }, 0),
            OpDescriptor::FeatureSelect { n_fr } => per_pixel(0, n_fr),
            OpDescriptor::PostProcess => per_pixel(1, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub label: String,
    pub op: OpDescriptor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Procedure {
    pub label: String,
    pub steps: Vec<Step>,
}

/// A data partition with its own procedures; `weight` scales its F_p in
/// the total.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub label: String,
    pub weight: f64,
    pub procedures: Vec<Procedure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodDescriptor {
    pub name: String,
    /// Output height and width; F_p = F / (height * width).
    pub pixel_basis: (u64, u64),
    pub branches: Vec<Branch>,
    /// Weighted F_p totals are rounded to an integer.
    pub round_weighted_total: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub branch: String,
    pub procedure: String,
    pub label: String,
    pub cost: Cost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subtotal {
    pub branch: String,
    pub procedure: Option<String>,
    pub cost: Cost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityReport {
    pub method: String,
    pub pixel_basis: (u64, u64),
    pub rows: Vec<ReportRow>,
    /// Per procedure, then one per branch with `procedure: None`.
    pub subtotals: Vec<Subtotal>,
    pub total: Cost,
    pub notes: Vec<String>,
}

fn add(a: &mut Cost, b: &Cost) {
    a.flops += b.flops;
    a.fp += b.fp;
    a.params += b.params;
}

pub fn eval_method(method: &MethodDescriptor) -> Result<ComplexityReport> {
    let (h, w) = method.pixel_basis;
    if h == 0 || w == 0 {
        return Err(LsrError::param("pixel basis must be positive"));
    }
    let pixels = h * w;
    let mut rows = Vec::new();
    let mut subtotals = Vec::new();
    let mut branch_totals = Vec::new();
    for b in &method.branches {
        let mut bt = Cost::default();
        for p in &b.procedures {
            let mut pt = Cost::default();
            for s in &p.steps {
                let cost = s.op.eval(pixels);
                add(&mut pt, &cost);
                rows.push(ReportRow {
                    branch: b.label.clone(),
                    procedure: p.label.clone(),
                    label: s.label.clone(),
                    cost,
                });
            }
            add(&mut bt, &pt);
            subtotals.push(Subtotal { branch: b.label.clone(), procedure: Some(p.label.clone()), cost: pt });
        }
        branch_totals.push((b.weight, bt));
    }
    let mut total = Cost::default();
    for (b, (weight, bt)) in method.branches.iter().zip(&branch_totals) {
        total.flops += weight * bt.flops;
        total.fp += weight * bt.fp;
        total.params += bt.params;
        if method.branches.len() > 1 {
            subtotals.push(Subtotal { branch: b.label.clone(), procedure: None, cost: *bt });
        }
    }
    if method.round_weighted_total {
        total.fp = total.fp.round();
        total.flops = total.fp * pixels as f64;
    }
    Ok(ComplexityReport {
        method: method.name.clone(),
        pixel_basis: method.pixel_basis,
        rows,
        subtotals,
        total,
        notes: method.notes.clone(),
    })
}

pub const DEFAULT_BASIS: (u64, u64) = (344, 228);

fn step(label: &str, op: OpDescriptor) -> Step {
    Step { label: label.to_string(), op }
}

fn proc_(label: &str, steps: Vec<Step>) -> Procedure {
    Procedure { label: label.to_string(), steps }
}

fn single(name: &str, basis: (u64, u64), procedures: Vec<Procedure>) -> MethodDescriptor {
    MethodDescriptor {
        name: name.to_string(),
        pixel_basis: basis,
        branches: vec![Branch { label: "all".into(), weight: 1.0, procedures }],
        round_weighted_total: false,
        notes: Vec::new(),
    }
}

/// Number of 6x6 patches A+ handles for an `h x w` output:
/// `(h/2 - 4) * (w/2 - 4)`.
pub fn aplus_patch_count(h: u64, w: u64) -> u64 {
    (h / 2).saturating_sub(4) * (w / 2).saturating_sub(4)
}

pub fn aplus(basis: (u64, u64)) -> MethodDescriptor {
    let (h, w) = basis;
    let n = aplus_patch_count(h, w);
    let deriv = |kh, kw| OpDescriptor::Conv3d { ci: 1, kh, kw, ho: h, wo: w, co: 1, bias: BiasMode::None, layers: 1 };
    single(
        "aplus",
        basis,
        vec![
            proc_(
                "IFE",
                vec![
                    step("D1 width", deriv(1, 3)),
                    step("D1 height", deriv(3, 1)),
                    step("D2 width", deriv(1, 5)),
                    step("D2 height", deriv(5, 1)),
                ],
            ),
            proc_(
                "RPP",
                vec![
                    step("ILR feature reduction", OpDescriptor::Matmul { th: 28, tw: 144, n, banks: 1 }),
                    step("distance to ILR atoms", OpDescriptor::Matmul { th: 1024, tw: 28, n, banks: 1 }),
                    step("regression prediction", OpDescriptor::Matmul { th: 36, tw: 28, n, banks: 1024 }),
                ],
            ),
            proc_(
                "HIP",
                vec![
                    step("add ILR to residual", OpDescriptor::Pixelwise { h: 6, w: 6, c: 1, n }),
                    step("accumulate pixel values", OpDescriptor::Pixelwise { h: 6, w: 6, c: 1, n }),
                    step("divide by pixel counter", OpDescriptor::Pixelwise { h, w, c: 1, n: 1 }),
                ],
            ),
        ],
    )
}

pub fn srcnn(basis: (u64, u64)) -> MethodDescriptor {
    let (h, w) = basis;
    let conv = |ci, k, co| OpDescriptor::Conv3d { ci, kh: k, kw: k, ho: h, wo: w, co, bias: BiasMode::Full, layers: 1 };
    single(
        "srcnn",
        basis,
        vec![proc_(
            "CNN",
            vec![step("conv1", conv(1, 9, 64)), step("conv2", conv(64, 5, 32)), step("conv3", conv(32, 5, 1))],
        )],
    )
}

pub fn vdsr(basis: (u64, u64)) -> MethodDescriptor {
    let (h, w) = basis;
    let conv =
        |ci, co, layers| OpDescriptor::Conv3d { ci, kh: 3, kw: 3, ho: h, wo: w, co, bias: BiasMode::FlopsOnly, layers };
    let mut m = single(
        "vdsr",
        basis,
        vec![proc_(
            "CNN",
            vec![
                step("conv1", conv(1, 64, 1)),
                step("conv2-19", conv(64, 64, 18)),
                step("conv20", conv(64, 1, 1)),
                step("post-process", OpDescriptor::Pixelwise { h, w, c: 1, n: 1 }),
            ],
        )],
    );
    m.notes.push("bias additions are counted in F but bias terms are not counted in M".into());
    m
}

/// Settings of one LSR partition that determine its cost.
#[derive(Debug, Clone, PartialEq)]
pub struct LsrBranchParams {
    pub types: Vec<u8>,
    pub n_fr: u64,
    pub n_fc: u64,
    pub n_c: u64,
    pub n_tree: u64,
    pub d_m: u64,
    pub f: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsrParams {
    pub name: String,
    pub easy: LsrBranchParams,
    pub hard: LsrBranchParams,
    pub w_easy: f64,
    pub w_hard: f64,
}

pub const EASY_WEIGHT: f64 = 0.56;
pub const HARD_WEIGHT: f64 = 0.44;

impl LsrParams {
    pub fn v1() -> Self {
        LsrParams {
            name: "lsr-v1".into(),
            easy: LsrBranchParams { types: vec![1, 3], n_fr: 105, n_fc: 0, n_c: 1, n_tree: 50, d_m: 6, f: 1 },
            hard: LsrBranchParams {
                types: vec![1, 2, 3, 4, 5],
                n_fr: 374,
                n_fc: 32,
                n_c: 8,
                n_tree: 500,
                d_m: 6,
                f: 2,
            },
            w_easy: EASY_WEIGHT,
            w_hard: HARD_WEIGHT,
        }
    }

    pub fn v2() -> Self {
        let mut p = LsrParams::v1();
        p.name = "lsr-v2".into();
        p.hard.types = vec![5];
        p.hard.n_fr = 135;
        p
    }

    /// Settings read back from a trained model. Branch sizes come from the
    /// stored transforms, selections, clusterings and trees.
    pub fn from_model(model: &LsrModel) -> Result<Self> {
        let branch = |b: &Option<crate::decision::BranchModel>, f: u64, name: &str| -> Result<LsrBranchParams> {
            let b = b.as_ref().ok_or_else(|| LsrError::Configuration(format!("model has no {name} branch")))?;
            let n_tree = b.regressors.iter().map(|r| r.trees.len()).max().unwrap_or(0) as u64;
            let grown = b.regressors.iter().map(|r| r.max_depth()).max().unwrap_or(0);
            if grown > model.config.max_depth {
                return Err(LsrError::format(format!("{name} trees are deeper than max_depth")));
            }
            Ok(LsrBranchParams {
                types: b.transforms.spec.indices(),
                n_fr: b.selected.len() as u64,
                n_fc: if b.kmeans.is_some() { HOG_LEN as u64 } else { 0 },
                n_c: b.clusters() as u64,
                n_tree,
                d_m: model.config.max_depth as u64,
                f,
            })
        };
        Ok(LsrParams {
            name: format!("lsr-{}", model.variant()),
            easy: branch(&model.easy, 1, "easy")?,
            hard: branch(&model.hard, model.config.fusion as u64, "hard")?,
            w_easy: EASY_WEIGHT,
            w_hard: HARD_WEIGHT,
        })
    }
}

fn url_steps(types: &[u8], f: u64) -> Vec<Step> {
    let cw = |kh, kw, co, n_type| OpDescriptor::Channelwise { ci: 1, kh, kw, co, n_type, f };
    let mut out = Vec::new();
    for &t in types {
        match t {
            1 => out.push(step("Type 1, spatial", cw(1, 1, 1, 0))),
            2 => {
                out.push(step("Type 2, central Saab 5x5", cw(5, 5, 25, 1)));
                out.push(step("Type 2, central Saab 7x7", cw(7, 7, 49, 1)));
            }
            3 => out.push(step("Type 3, ringwise Saab", cw(3, 3, 9, 1))),
            4 => out.push(step("Type 4, Haar & PCA", cw(2, 2, 4, 2))),
            5 => out.push(step("Type 5, Laws & PCA", cw(3, 3, 9, 2))),
            _ => {}
        }
    }
    out
}

fn lsr_branch(label: &str, weight: f64, p: &LsrBranchParams) -> Branch {
    Branch {
        label: label.to_string(),
        weight,
        procedures: vec![
            proc_("URL", url_steps(&p.types, p.f)),
            proc_("SFL", vec![step("RFT selection", OpDescriptor::FeatureSelect { n_fr: p.n_fr })]),
            proc_(
                "SDL",
                vec![
                    step("cluster prediction", OpDescriptor::ClusterPred { n_fc: p.n_fc, n_c: p.n_c, f: p.f }),
                    step(
                        "regressor prediction",
                        OpDescriptor::GbtPred { n_tree: p.n_tree, d_m: p.d_m, f: p.f, n_c: p.n_c },
                    ),
                    step("prediction fusion", OpDescriptor::Fusion { f: p.f }),
                ],
            ),
            proc_("Post", vec![step("add residual to ILR", OpDescriptor::PostProcess)]),
        ],
    }
}

pub fn lsr(params: &LsrParams, basis: (u64, u64)) -> MethodDescriptor {
    MethodDescriptor {
        name: params.name.clone(),
        pixel_basis: basis,
        branches: vec![
            lsr_branch("easy", params.w_easy, &params.easy),
            lsr_branch("hard", params.w_hard, &params.hard),
        ],
        round_weighted_total: true,
        notes: Vec::new(),
    }
}

pub const METHOD_NAMES: [&str; 5] = ["aplus", "srcnn", "vdsr", "lsr-v1", "lsr-v2"];

pub fn builtin_methods(basis: (u64, u64)) -> Vec<MethodDescriptor> {
    METHOD_NAMES.iter().map(|n| builtin(n, basis).expect("known name")).collect()
}

pub fn builtin(name: &str, basis: (u64, u64)) -> Result<MethodDescriptor> {
    Ok(match name.to_ascii_lowercase().as_str() {
        "aplus" | "a+" => aplus(basis),
        "srcnn" => srcnn(basis),
        "vdsr" => vdsr(basis),
        "lsr-v1" | "lsr" | "v1" => lsr(&LsrParams::v1(), basis),
        "lsr-v2" | "v2" => lsr(&LsrParams::v2(), basis),
        _ => return Err(LsrError::UnknownMethod(name.to_string())),
    })
}

fn fmt_big(v: f64) -> String {
    let a = v.abs();
    if a >= 1e9 {
        format!("{:.2}B", v / 1e9)
    } else if a >= 1e6 {
        format!("{:.2}M", v / 1e6)
    } else if a >= 1e3 {
        format!("{:.2}k", v / 1e3)
    } else {
        format!("{v:.0}")
    }
}

fn fmt_fp(v: f64) -> String {
    if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v:.2}")
    }
}

impl ComplexityReport {
    pub fn branch_subtotal(&self, branch: &str) -> Option<Cost> {
        self.subtotals.iter().find(|s| s.branch == branch && s.procedure.is_none()).map(|s| s.cost)
    }

    pub fn procedure_subtotal(&self, branch: &str, procedure: &str) -> Option<Cost> {
        self.subtotals.iter().find(|s| s.branch == branch && s.procedure.as_deref() == Some(procedure)).map(|s| s.cost)
    }

    pub fn to_text(&self) -> String {
        let mut lines: Vec<[String; 4]> = vec![["step".into(), "F".into(), "F_p".into(), "M".into()]];
        let multi = self.rows.iter().any(|r| r.branch != "all");
        let mut last: Option<(&str, &str)> = None;
        for r in &self.rows {
            if let Some((b, p)) = last {
                if (b, p) != (r.branch.as_str(), r.procedure.as_str()) {
                    self.push_subtotal(&mut lines, b, p, multi);
                }
            }
            let name = if multi {
                format!("{} / {} / {}", r.branch, r.procedure, r.label)
            } else {
                format!("{} / {}", r.procedure, r.label)
            };
            lines.push([name, fmt_big(r.cost.flops), fmt_fp(r.cost.fp), r.cost.params.to_string()]);
            last = Some((&r.branch, &r.procedure));
        }
        if let Some((b, p)) = last {
            self.push_subtotal(&mut lines, b, p, multi);
        }
        if multi {
            for s in self.subtotals.iter().filter(|s| s.procedure.is_none()) {
                lines.push([
                    format!("{} sub-total", s.branch),
                    fmt_big(s.cost.flops),
                    fmt_fp(s.cost.fp),
                    s.cost.params.to_string(),
                ]);
            }
        }
        lines.push(["Total".into(), fmt_big(self.total.flops), fmt_fp(self.total.fp), self.total.params.to_string()]);

        let widths: Vec<usize> = (0..4).map(|i| lines.iter().map(|l| l[i].len()).max().unwrap_or(0)).collect();
        let mut out = format!("{} ({}x{})\n", self.method, self.pixel_basis.0, self.pixel_basis.1);
        for (i, l) in lines.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:<w0$}  {:>w1$}  {:>w2$}  {:>w3$}",
                l[0],
                l[1],
                l[2],
                l[3],
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2],
                w3 = widths[3]
            );
            if i == 0 || i == lines.len() - 2 {
                let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 6));
            }
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }

    fn push_subtotal(&self, lines: &mut Vec<[String; 4]>, branch: &str, procedure: &str, multi: bool) {
        if let Some(c) = self.procedure_subtotal(branch, procedure) {
            let name =
                if multi { format!("{branch} / {procedure} sub-total") } else { format!("{procedure} sub-total") };
            lines.push([name, fmt_big(c.flops), fmt_fp(c.fp), c.params.to_string()]);
        }
    }

    /// CSV rows `method,step,label,F,F_p,M`; sub-totals and the total use
    /// `step` values `subtotal` and `total`.
    pub fn write_csv<W: Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        let num = |c: &Cost| [format!("{:.0}", c.flops), format!("{:.2}", c.fp), c.params.to_string()];
        for (i, r) in self.rows.iter().enumerate() {
            let [f, fp, m] = num(&r.cost);
            let label = format!("{}/{}/{}", r.branch, r.procedure, r.label);
            w.write_record([self.method.as_str(), &(i + 1).to_string(), &label, &f, &fp, &m])?;
        }
        for s in &self.subtotals {
            let [f, fp, m] = num(&s.cost);
            let label = match &s.procedure {
                Some(p) => format!("{}/{}", s.branch, p),
                None => s.branch.clone(),
            };
            w.write_record([self.method.as_str(), "subtotal", &label, &f, &fp, &m])?;
        }
        let [f, fp, m] = num(&self.total);
        w.write_record([self.method.as_str(), "total", "", &f, &fp, &m])?;
        Ok(())
    }
}

pub fn reports_to_csv(reports: &[ComplexityReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "step", "label", "F", "F_p", "M"])?;
    for r in reports {
        r.write_csv(&mut w)?;
    }
    let bytes = w.into_inner().map_err(|e| LsrError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}
