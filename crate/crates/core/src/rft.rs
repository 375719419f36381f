//! Relevant feature test: rank features by their best single-threshold
//! regression loss and keep the lowest-loss subset.

use crate::error::{LsrError, Result};
use rayon::prelude::*;
use std::io::Write;

pub const DEFAULT_BINS: usize = 32;

/// Best split of one feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RftScore {
    pub feature_id: usize,
    /// Weighted two-sided MSE, in squared target units.
    pub loss: f64,
    /// `None` for a constant feature.
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMode {
    FixedCount(usize),
    Elbow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSelection {
    /// Ascending loss, ties by feature id.
    pub selected_ids: Vec<usize>,
    /// Every feature's score, same order.
    pub full_curve: Vec<RftScore>,
}

impl FeatureSelection {
    pub fn count(&self) -> usize {
        self.selected_ids.len()
    }
}

/// The `bins - 1` interior edges of a uniform partition of `[lo, hi]`.
pub fn candidate_thresholds(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let step = (hi - lo) / bins as f64;
    (1..bins).map(|j| lo + j as f64 * step).collect()
}

fn check_inputs(values: usize, targets: usize, bins: usize) -> Result<()> {
    if values != targets {
        return Err(LsrError::dim(format!("{values} feature values but {targets} targets")));
    }
    if values < 2 {
        return Err(LsrError::param("RFT needs at least 2 samples"));
    }
    if bins < 2 {
        return Err(LsrError::param("RFT needs at least 2 bins"));
    }
    Ok(())
}

/// Loss of the best split of `values` against `targets` over the interior
/// edges of `bins` uniform bins. Samples with value `<= t` go left.
pub fn rft_loss(values: &[f64], targets: &[f64], bins: usize) -> Result<RftScore> {
    check_inputs(values.len(), targets.len(), bins)?;
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let centered: Vec<f64> = targets.iter().map(|t| t - mean).collect();
    Ok(score_centered(values.iter().copied(), &centered, bins, 0))
}

fn sse(n: f64, s: f64, q: f64) -> f64 {
    if n == 0.0 {
        0.0
    } else {
        (q - s * s / n).max(0.0)
    }
}

fn score_centered(
    values: impl Iterator<Item = f64> + Clone,
    centered: &[f64],
    bins: usize,
    feature_id: usize,
) -> RftScore {
    let n = centered.len();
    let (lo, hi) = values.clone().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let (total_s, total_q) = centered.iter().fold((0.0, 0.0), |(s, q), t| (s + t, q + t * t));
    if lo == hi {
        return RftScore { feature_id, loss: sse(n as f64, total_s, total_q) / n as f64, threshold: None };
    }
    let thresholds = candidate_thresholds(lo, hi, bins);
    // Bin k holds the samples lying strictly above the first k thresholds,
    // so threshold j sends bins 0..=j left.
    let mut count = vec![0usize; bins];
    let mut sum = vec![0.0; bins];
    let mut sq = vec![0.0; bins];
    for (v, &t) in values.zip(centered) {
        let k = thresholds.partition_point(|&th| th < v);
        count[k] += 1;
        sum[k] += t;
        sq[k] += t * t;
    }
    let mut best = RftScore { feature_id, loss: f64::INFINITY, threshold: None };
    let (mut ln, mut ls, mut lq) = (0usize, 0.0, 0.0);
    for (j, &th) in thresholds.iter().enumerate() {
        ln += count[j];
        ls += sum[j];
        lq += sq[j];
        if ln == 0 || ln == n {
            continue;
        }
        let loss = (sse(ln as f64, ls, lq) + sse((n - ln) as f64, total_s - ls, total_q - lq)) / n as f64;
        if loss < best.loss {
            best = RftScore { feature_id, loss, threshold: Some(th) };
        }
    }
    if best.threshold.is_none() {
        best.loss = sse(n as f64, total_s, total_q) / n as f64;
    }
    best
}

/// Score every column of a row-major `targets.len() x features` pool and
/// select a subset.
pub fn select_features(
    pool: &[f32],
    features: usize,
    targets: &[f64],
    mode: SelectionMode,
    bins: usize,
) -> Result<FeatureSelection> {
    let n = targets.len();
    if features == 0 || pool.len() != n * features {
        return Err(LsrError::dim(format!("pool of {} values is not {n} x {features}", pool.len())));
    }
    check_inputs(n, n, bins)?;
    if let SelectionMode::FixedCount(k) = mode {
        if k == 0 || k > features {
            return Err(LsrError::param(format!("cannot select {k} of {features} features")));
        }
    }
    let mean = targets.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = targets.iter().map(|t| t - mean).collect();
    let mut curve: Vec<RftScore> = (0..features)
        .into_par_iter()
        .map(|f| {
            let column = (0..n).map(move |i| pool[i * features + f] as f64);
            score_centered(column, &centered, bins, f)
        })
        .collect();
    curve.sort_by(|a, b| a.loss.total_cmp(&b.loss).then(a.feature_id.cmp(&b.feature_id)));
    let count = match mode {
        SelectionMode::FixedCount(k) => k,
        SelectionMode::Elbow => elbow_count(&curve.iter().map(|s| s.loss).collect::<Vec<_>>()),
    };
    Ok(FeatureSelection { selected_ids: curve[..count].iter().map(|s| s.feature_id).collect(), full_curve: curve })
}

/// Number of features up to and including the point of an ascending loss
/// curve farthest from the chord joining its endpoints. Both axes are
/// rescaled to `[0, 1]` first.
pub fn elbow_count(sorted_losses: &[f64]) -> usize {
    let n = sorted_losses.len();
    if n <= 2 {
        return n;
    }
    let (lo, hi) = (sorted_losses[0], sorted_losses[n - 1]);
    if hi <= lo {
        return n;
    }
    let mut best = (0.0, n - 1);
    for (i, &l) in sorted_losses.iter().enumerate() {
        let x = i as f64 / (n - 1) as f64;
        let y = (l - lo) / (hi - lo);
        let d = (x - y).abs();
        if d > best.0 {
            best = (d, i);
        }
    }
    best.1 + 1
}

/// Sorted loss curve as CSV with header `feature_id,loss`.
pub fn write_loss_curve<W: Write>(out: W, selection: &FeatureSelection) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["feature_id", "loss"])?;
    for s in &selection.full_curve {
        w.write_record([s.feature_id.to_string(), format!("{:.9}", s.loss)])?;
    }
    w.flush()?;
    Ok(())
}
