use super::YImage;
use crate::error::{LsrError, Result};

/// Side length of the Gaussian SSIM window.
pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const PEAK: f64 = 255.0;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

fn shaved(reference: &YImage, test: &YImage, shave: usize) -> Result<(YImage, YImage)> {
    if reference.dims() != test.dims() {
        return Err(LsrError::dim(format!("metric inputs differ: {:?} vs {:?}", reference.dims(), test.dims())));
    }
    let (h, w) = reference.dims();
    if h <= 2 * shave || w <= 2 * shave {
        return Err(LsrError::dim(format!("{h}x{w} is too small to shave {shave} pixels")));
    }
    Ok((
        reference.crop(shave, shave, h - 2 * shave, w - 2 * shave)?,
        test.crop(shave, shave, h - 2 * shave, w - 2 * shave)?,
    ))
}

/// Peak signal-to-noise ratio in dB over the image with a `shave`-pixel
/// border removed. Identical inputs give `f64::INFINITY`.
pub fn psnr(reference: &YImage, test: &YImage, shave: usize) -> Result<f64> {
    let (a, b) = shaved(reference, test, shave)?;
    let sse: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    let mse = sse / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (PEAK * PEAK / mse).log10())
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut g = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, v) in g.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let total: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= total);
    g
}

/// Separable "valid" Gaussian filtering; output shrinks by `SSIM_WINDOW - 1`.
fn filter_valid(data: &[f64], h: usize, w: usize, g: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut horiz = vec![0.0; h * ow];
    for r in 0..h {
        let row = &data[r * w..(r + 1) * w];
        for c in 0..ow {
            horiz[r * ow + c] = g.iter().zip(&row[c..c + SSIM_WINDOW]).map(|(k, v)| k * v).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = g.iter().enumerate().map(|(i, k)| k * horiz[(r + i) * ow + c]).sum();
        }
    }
    out
}

/// Mean structural similarity with an 11x11 Gaussian window (sigma 1.5),
/// evaluated over the valid region of the shaved images.
pub fn ssim(reference: &YImage, test: &YImage, shave: usize) -> Result<f64> {
    let (a, b) = shaved(reference, test, shave)?;
    let (h, w) = a.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(LsrError::dim(format!(
            "{h}x{w} after shaving is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )));
    }
    let g = gaussian_window();
    let x = a.data();
    let y = b.data();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(p, q)| p * q).collect();

    let mu_x = filter_valid(x, h, w, &g);
    let mu_y = filter_valid(y, h, w, &g);
    let e_xx = filter_valid(&xx, h, w, &g);
    let e_yy = filter_valid(&yy, h, w, &g);
    let e_xy = filter_valid(&xy, h, w, &g);

    let c1 = (K1 * PEAK).powi(2);
    let c2 = (K2 * PEAK).powi(2);
    let n = mu_x.len();
    let mut total = 0.0;
    for i in 0..n {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let mxy = mx * my;
        let var_x = e_xx[i] - mx * mx;
        let var_y = e_yy[i] - my * my;
        let cov = e_xy[i] - mxy;
        total += ((2.0 * mxy + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (var_x + var_y + c2));
    }
    Ok(total / n as f64)
}
