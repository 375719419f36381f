use super::YImage;
use crate::error::{LsrError, Result};
use std::f64::consts::PI;

/// Keys cubic convolution coefficient.
const CUBIC_A: f64 = -0.5;
/// Lanczos window half-width.
const LANCZOS_LOBES: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Filter {
    /// Keys cubic convolution, a = -0.5.
    Bicubic,
    /// Lanczos with a 3-lobe window.
    Lanczos3,
}

impl Filter {
    pub fn radius(self) -> f64 {
        match self {
            Filter::Bicubic => 2.0,
            Filter::Lanczos3 => LANCZOS_LOBES,
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Filter::Bicubic => cubic_kernel(x),
            Filter::Lanczos3 => lanczos3_kernel(x),
        }
    }
}

pub fn cubic_kernel(x: f64) -> f64 {
    let a = CUBIC_A;
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

pub fn lanczos3_kernel(x: f64) -> f64 {
    let x = x.abs();
    if x == 0.0 {
        1.0
    } else if x >= LANCZOS_LOBES || x.fract() == 0.0 {
        // sin(k*pi) is not exactly zero in floating point.
        0.0
    } else {
        let px = PI * x;
        LANCZOS_LOBES * px.sin() * (px / LANCZOS_LOBES).sin() / (px * px)
    }
}

/// Normalized taps for one output sample: (clamped source index, weight).
pub(crate) type Taps = Vec<(usize, f64)>;

/// Per-output-index taps along one axis. Output index `i` sits at source
/// coordinate `(i + 0.5) * in / out - 0.5`; when shrinking, the kernel is
/// stretched by the shrink ratio so it low-passes before decimation.
pub(crate) fn axis_taps(len_in: usize, len_out: usize, filter: Filter) -> Vec<Taps> {
    let ratio = len_in as f64 / len_out as f64;
    let stretch = ratio.max(1.0);
    let radius = filter.radius() * stretch;
    let last = len_in as isize - 1;
    (0..len_out)
        .map(|i| {
            let center = (i as f64 + 0.5) * ratio - 0.5;
            let lo = (center - radius).ceil() as isize;
            let hi = (center + radius).floor() as isize;
            let mut taps: Taps = Vec::with_capacity((hi - lo + 1) as usize);
            let mut total = 0.0;
            for j in lo..=hi {
                let w = filter.eval((center - j as f64) / stretch);
                if w != 0.0 {
                    taps.push((j.clamp(0, last) as usize, w));
                    total += w;
                }
            }
            for t in &mut taps {
                t.1 /= total;
            }
            taps
        })
        .collect()
}

/// Separable resize to `out_h x out_w` with clamp-to-edge borders.
/// Rows are filtered first, then columns, in a fixed tap order.
pub fn resize(img: &YImage, out_h: usize, out_w: usize, filter: Filter) -> Result<YImage> {
    if out_h == 0 || out_w == 0 {
        return Err(LsrError::dim("resize target is empty"));
    }
    let (h, w) = img.dims();
    let col_taps = axis_taps(w, out_w, filter);
    let row_taps = axis_taps(h, out_h, filter);

    let mut horiz = vec![0.0; h * out_w];
    for r in 0..h {
        let src = img.row(r);
        let dst = &mut horiz[r * out_w..(r + 1) * out_w];
        for (d, taps) in dst.iter_mut().zip(&col_taps) {
            *d = taps.iter().map(|&(j, wt)| src[j] * wt).sum();
        }
    }

    let mut out = vec![0.0; out_h * out_w];
    for (r, taps) in row_taps.iter().enumerate() {
        let dst = &mut out[r * out_w..(r + 1) * out_w];
        for (c, d) in dst.iter_mut().enumerate() {
            *d = taps.iter().map(|&(j, wt)| horiz[j * out_w + c] * wt).sum();
        }
    }
    YImage::new(out_h, out_w, out)
}

/// Bicubic decimation by an integer factor. The caller must modcrop first.
pub fn bicubic_downsample(img: &YImage, scale: usize) -> Result<YImage> {
    if scale == 0 {
        return Err(LsrError::param("scale must be >= 1"));
    }
    let (h, w) = img.dims();
    if h % scale != 0 || w % scale != 0 {
        return Err(LsrError::dim(format!("{h}x{w} is not divisible by {scale}")));
    }
    if scale == 1 {
        return Ok(img.clone());
    }
    resize(img, h / scale, w / scale, Filter::Bicubic)
}

/// Lanczos-3 interpolation by an integer factor.
pub fn lanczos_upscale(img: &YImage, scale: usize) -> Result<YImage> {
    if scale == 0 {
        return Err(LsrError::param("scale must be >= 1"));
    }
    if scale == 1 {
        return Ok(img.clone());
    }
    resize(img, img.height() * scale, img.width() * scale, Filter::Lanczos3)
}
