//! The `lsr` command-line front end.

use crate::complexity::{builtin, eval_method, reports_to_csv, METHOD_NAMES};
use crate::config::RunConfig;
use crate::decision::{superresolve, train_lsr, LsrModel, Variant};
use crate::error::{LsrError, Result};
use crate::imaging::{
    lanczos_upscale, psnr, read_color, read_luma, ssim, write_color_png, write_luma_png, ColorImage, ImagePair, YImage,
};
use crate::patches::{extract_samples_with, write_sample_cache};
use crate::representations::RepresentationSpec;
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "lsr", version, about = "Light-weight single-image super-resolution (x2, luma)")]
pub struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model from a directory of high-resolution images.
    Train(TrainArgs),
    /// Super-resolve one image by a factor of 2.
    Sr(SrArgs),
    /// PSNR/SSIM of the model and the Lanczos baseline over a directory.
    Eval(EvalArgs),
    /// FLOPs and parameter counts of built-in methods.
    Complexity(ComplexityArgs),
    /// Print a model's structure and manifest.
    InspectModel(InspectArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train_dir: PathBuf,
    #[arg(long, short = 'o')]
    pub model_out: PathBuf,
    /// Flat `key = value` config file; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub max_samples: Option<usize>,
    /// Use only the first N images (sorted by name).
    #[arg(long)]
    pub limit: Option<usize>,
    /// Extra `key=value` overrides, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Write the sorted RFT loss curves as CSV.
    #[arg(long)]
    pub rft_curve: Option<PathBuf>,
    /// Write the extracted (unaugmented) training samples to a cache file.
    #[arg(long)]
    pub dump_samples: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SrArgs {
    #[arg(long, short = 'm')]
    pub model: PathBuf,
    #[arg(long, short = 'i')]
    pub input: PathBuf,
    #[arg(long, short = 'o')]
    pub output: PathBuf,
    /// Also write a color result with Lanczos-upscaled chroma.
    #[arg(long)]
    pub color_output: Option<PathBuf>,
    /// Fail unless the model is this variant.
    #[arg(long)]
    pub variant: Option<Variant>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, short = 'm')]
    pub model: PathBuf,
    #[arg(long)]
    pub hr_dir: PathBuf,
    /// Border pixels excluded from the metrics.
    #[arg(long, default_value_t = 2)]
    pub shave: usize,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ComplexityArgs {
    /// Method names or `all`.
    #[arg(default_value = "all")]
    pub methods: Vec<String>,
    #[arg(long, default_value_t = 344)]
    pub height: u64,
    #[arg(long, default_value_t = 228)]
    pub width: u64,
    /// Emit CSV instead of text tables.
    #[arg(long)]
    pub csv: bool,
    /// Account for the settings of a trained model instead of the defaults.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long, short = 'm')]
    pub model: PathBuf,
}

/// Process exit code for an error category.
pub fn exit_code(err: &LsrError) -> i32 {
    match err {
        LsrError::Configuration(_) | LsrError::Parameter(_) | LsrError::UnknownMethod(_) => 2,
        LsrError::Io(_) | LsrError::Image(_) | LsrError::Csv(_) => 3,
        LsrError::Format(_) => 4,
        LsrError::Training(_) => 5,
        LsrError::Dimension(_) => 6,
    }
}

/// Parse arguments, run, and return the text for stdout.
pub fn run(cli: Cli) -> Result<String> {
    if let Some(n) = cli.threads {
        // Only the first global pool initialisation wins; later calls are no-ops.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Sr(a) => cmd_sr(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Complexity(a) => cmd_complexity(a),
        Command::InspectModel(a) => Ok(LsrModel::load(&a.model)?.describe()),
    }
}

/// Image files in `dir` sorted by name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        })
        .collect();
    out.sort();
    Ok(out)
}

/// Read every decodable image in `dir` as luma, warning about the rest.
fn read_dir_luma(dir: &Path, limit: Option<usize>) -> Result<Vec<(PathBuf, YImage)>> {
    let mut out = Vec::new();
    for path in list_images(dir)? {
        if limit.is_some_and(|l| out.len() >= l) {
            break;
        }
        match read_luma(&path) {
            Ok(img) if img.height() >= 2 && img.width() >= 2 => out.push((path, img)),
            Ok(_) => warn!("skipping {}: too small", path.display()),
            Err(e) => warn!("skipping {}: {e}", path.display()),
        }
    }
    if out.is_empty() {
        return Err(LsrError::Configuration(format!("no readable images in {}", dir.display())));
    }
    Ok(out)
}

fn build_config(a: &TrainArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = a.variant {
        cfg.set("variant", &v.to_string())?;
    }
    for o in &a.overrides {
        let (k, v) =
            o.split_once('=').ok_or_else(|| LsrError::Configuration(format!("override {o:?} is not key=value")))?;
        cfg.set(k.trim(), v)?;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(s) = a.stride {
        cfg.stride = s;
    }
    if let Some(m) = a.max_samples {
        cfg.max_samples_per_branch = m;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_train(a: TrainArgs) -> Result<String> {
    let cfg = build_config(&a)?;
    let images = read_dir_luma(&a.train_dir, a.limit)?;
    info!("training on {} images", images.len());
    let hrs: Vec<YImage> = images.into_iter().map(|(_, i)| i).collect();

    if let Some(path) = &a.dump_samples {
        let mut samples = Vec::new();
        for hr in &hrs {
            let pair = ImagePair::from_hr(hr, cfg.scale)?;
            samples.extend(extract_samples_with(&pair, cfg.stride, true, cfg.variance_threshold).samples);
        }
        write_sample_cache(path, &samples)?;
        info!("wrote {} samples to {}", samples.len(), path.display());
    }

    let (model, report) = train_lsr(&hrs, &cfg)?;
    model.save(&a.model_out)?;

    let mut out = String::new();
    let s = &report.stats;
    let _ = writeln!(out, "images: {}", report.images);
    let _ = writeln!(out, "positions: {} easy, {} hard", report.easy_positions, report.hard_positions);
    let _ = writeln!(out, "easy:hard = {:.1}% : {:.1}%", 100.0 * s.easy_fraction(), 100.0 * (1.0 - s.easy_fraction()));
    let _ = writeln!(out, "ILR mean squared residual: easy {:.2}, hard {:.2}", s.easy_mse(), s.hard_mse());
    let _ = writeln!(out, "training samples: {} easy, {} hard", report.easy_samples, report.hard_samples);
    for (name, sel, spec) in
        [("easy", &report.easy_selection, cfg.easy_spec()), ("hard", &report.hard_selection, cfg.hard_spec())]
    {
        if let Some(sel) = sel {
            let kept = &sel.full_curve[..sel.count()];
            let _ = writeln!(
                out,
                "RFT {name}: kept {} of {} features, loss {:.3} .. {:.3}; by type {}",
                sel.count(),
                sel.full_curve.len(),
                kept.first().map_or(0.0, |s| s.loss),
                kept.last().map_or(0.0, |s| s.loss),
                type_breakdown(&spec, &sel.selected_ids)
            );
        }
    }
    for w in &report.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    let _ = writeln!(out, "model written to {}", a.model_out.display());

    if let Some(path) = &a.rft_curve {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["branch", "rank", "feature_id", "type", "loss"])?;
        for (name, sel, spec) in
            [("easy", &report.easy_selection, cfg.easy_spec()), ("hard", &report.hard_selection, cfg.hard_spec())]
        {
            let Some(sel) = sel else { continue };
            for (rank, s) in sel.full_curve.iter().enumerate() {
                let ty = spec.feature_id(s.feature_id).map_or(0, |f| f.repr.index());
                w.write_record([
                    name.to_string(),
                    (rank + 1).to_string(),
                    s.feature_id.to_string(),
                    ty.to_string(),
                    format!("{:.9}", s.loss),
                ])?;
            }
        }
        w.flush()?;
    }
    Ok(out)
}

fn type_breakdown(spec: &RepresentationSpec, ids: &[usize]) -> String {
    spec.types()
        .iter()
        .map(|t| {
            let n = ids.iter().filter(|&&i| spec.feature_id(i).is_some_and(|f| f.repr == *t)).count();
            format!("T{}={n}", t.index())
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn cmd_sr(a: SrArgs) -> Result<String> {
    let model = LsrModel::load(&a.model)?;
    if let Some(v) = a.variant {
        if v != model.variant() {
            return Err(LsrError::Configuration(format!(
                "model {} is variant {}, expected {v}",
                a.model.display(),
                model.variant()
            )));
        }
    }
    let lr = read_luma(&a.input)?;
    let sr = superresolve(&model, &lr)?;
    write_luma_png(&sr, &a.output)?;
    if let Some(path) = &a.color_output {
        let color: ColorImage = read_color(&a.input)?;
        let (cb, cr) = color.chroma()?;
        let up = |p: &YImage| lanczos_upscale(p, model.config.scale);
        write_color_png(&ColorImage::from_ycbcr(&sr, &up(&cb)?, &up(&cr)?)?, path)?;
    }
    Ok(format!("{}x{} -> {}x{} written to {}\n", lr.width(), lr.height(), sr.width(), sr.height(), a.output.display()))
}

/// Metrics for one image under both methods.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub image: String,
    pub lsr_psnr: f64,
    pub lsr_ssim: f64,
    pub lanczos_psnr: f64,
    pub lanczos_ssim: f64,
}

/// Modcrop, bicubic down, then compare the model's and Lanczos' x2 results
/// against the original.
pub fn evaluate_image(model: &LsrModel, name: &str, hr: &YImage, shave: usize) -> Result<EvalRow> {
    let pair = ImagePair::from_hr(hr, model.config.scale)?;
    let sr = superresolve(model, &pair.lr)?;
    Ok(EvalRow {
        image: name.to_string(),
        lsr_psnr: psnr(&pair.hr, &sr, shave)?,
        lsr_ssim: ssim(&pair.hr, &sr, shave)?,
        lanczos_psnr: psnr(&pair.hr, &pair.ilr, shave)?,
        lanczos_ssim: ssim(&pair.hr, &pair.ilr, shave)?,
    })
}

fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

fn cmd_eval(a: EvalArgs) -> Result<String> {
    let model = LsrModel::load(&a.model)?;
    let images = read_dir_luma(&a.hr_dir, None)?;
    let mut rows = Vec::new();
    for (path, hr) in &images {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        rows.push(evaluate_image(&model, &name, hr, a.shave)?);
    }
    let n = rows.len() as f64;
    let mean = EvalRow {
        image: "mean".into(),
        lsr_psnr: rows.iter().map(|r| r.lsr_psnr).sum::<f64>() / n,
        lsr_ssim: rows.iter().map(|r| r.lsr_ssim).sum::<f64>() / n,
        lanczos_psnr: rows.iter().map(|r| r.lanczos_psnr).sum::<f64>() / n,
        lanczos_ssim: rows.iter().map(|r| r.lanczos_ssim).sum::<f64>() / n,
    };
    rows.push(mean);

    if let Some(path) = &a.csv {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["image", "lsr_psnr", "lsr_ssim", "lanczos_psnr", "lanczos_ssim"])?;
        for r in &rows {
            w.write_record([
                r.image.clone(),
                fmt_db(r.lsr_psnr),
                format!("{:.6}", r.lsr_ssim),
                fmt_db(r.lanczos_psnr),
                format!("{:.6}", r.lanczos_ssim),
            ])?;
        }
        w.flush()?;
    }
    let width = rows.iter().map(|r| r.image.len()).max().unwrap_or(5).max(5);
    let mut out = format!(
        "{:<width$}  {:>10}  {:>8}  {:>12}  {:>12}\n",
        "image", "LSR PSNR", "LSR SSIM", "Lanczos PSNR", "Lanczos SSIM"
    );
    for r in &rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>10}  {:>8.4}  {:>12}  {:>12.4}",
            r.image,
            fmt_db(r.lsr_psnr),
            r.lsr_ssim,
            fmt_db(r.lanczos_psnr),
            r.lanczos_ssim
        );
    }
    Ok(out)
}

fn cmd_complexity(a: ComplexityArgs) -> Result<String> {
    let basis = (a.height, a.width);
    let names: Vec<String> = if a.methods.iter().any(|m| m.eq_ignore_ascii_case("all")) {
        METHOD_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        a.methods.clone()
    };
    let mut methods = names.iter().map(|n| builtin(n, basis)).collect::<Result<Vec<_>>>()?;
    if let Some(path) = &a.model {
        let model = LsrModel::load(path)?;
        let params = crate::complexity::LsrParams::from_model(&model)?;
        methods.push(crate::complexity::lsr(
            &crate::complexity::LsrParams { name: format!("{} (model)", params.name), ..params },
            basis,
        ));
    }
    let reports = methods.iter().map(eval_method).collect::<Result<Vec<_>>>()?;
    if a.csv {
        return reports_to_csv(&reports);
    }
    Ok(reports.iter().map(|r| r.to_text()).collect::<Vec<_>>().join("\n"))
}
