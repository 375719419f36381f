//! Luma rasters, resampling, and full-reference quality metrics.
//!
//! All super-resolution work happens on the luminance channel. Pixels are
//! `f64` with a nominal range of `[0, 255]`; intermediate results may leave
//! that range and are clamped only before metrics or file output.

mod io;
mod metrics;
mod resample;

pub use io::{read_color, read_luma, write_color_png, write_luma_png, ColorImage};
pub use metrics::{psnr, ssim, SSIM_WINDOW};
pub use resample::{bicubic_downsample, cubic_kernel, lanczos3_kernel, lanczos_upscale, resize, Filter};

use crate::error::{LsrError, Result};

/// Single-channel luminance image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct YImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl YImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(LsrError::dim(format!("empty image {height}x{width}")));
        }
        if data.len() != height * width {
            return Err(LsrError::dim(format!("data length {} does not match {height}x{width}", data.len())));
        }
        Ok(Self { height, width, data })
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "empty image");
        Self { height, width, data: vec![value; height * width] }
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0, "empty image");
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    /// Value at `(row, col)` with coordinates clamped to the nearest edge pixel.
    #[inline]
    pub fn get_clamped(&self, row: isize, col: isize) -> f64 {
        let r = row.clamp(0, self.height as isize - 1) as usize;
        let c = col.clamp(0, self.width as isize - 1) as usize;
        self.get(r, c)
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.width..(row + 1) * self.width]
    }

    pub fn clamped(&self) -> YImage {
        let data = self.data.iter().map(|v| v.clamp(0.0, 255.0)).collect();
        YImage { height: self.height, width: self.width, data }
    }

    /// Crop the rectangle starting at `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<YImage> {
        if height == 0 || width == 0 || top + height > self.height || left + width > self.width {
            return Err(LsrError::dim(format!(
                "crop {height}x{width}@({top},{left}) outside {}x{}",
                self.height, self.width
            )));
        }
        Ok(YImage::from_fn(height, width, |r, c| self.get(top + r, left + c)))
    }

    /// Pad every side by `pad` pixels, replicating the nearest edge pixel.
    pub fn replicate_pad(&self, pad: usize) -> YImage {
        let p = pad as isize;
        YImage::from_fn(self.height + 2 * pad, self.width + 2 * pad, |r, c| {
            self.get_clamped(r as isize - p, c as isize - p)
        })
    }

    /// 8-bit quantization: round half away from zero, then clamp to `[0, 255]`.
    pub fn to_gray8(&self) -> Vec<u8> {
        self.data.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect()
    }

    pub fn from_gray8(height: usize, width: usize, pixels: &[u8]) -> Result<YImage> {
        YImage::new(height, width, pixels.iter().map(|&p| p as f64).collect())
    }
}

/// Aligned HR / interpolated-LR / LR triple for one image.
#[derive(Debug, Clone)]
pub struct ImagePair {
    pub hr: YImage,
    pub ilr: YImage,
    pub lr: YImage,
}

impl ImagePair {
    /// Modcrop `hr`, bicubic-downsample by `scale`, and Lanczos-upscale back.
    pub fn from_hr(hr: &YImage, scale: usize) -> Result<ImagePair> {
        let hr = modcrop(hr, scale)?;
        let lr = bicubic_downsample(&hr, scale)?;
        let ilr = lanczos_upscale(&lr, scale)?;
        Ok(ImagePair { hr, ilr, lr })
    }

    pub fn scale(&self) -> usize {
        self.hr.height() / self.lr.height()
    }
}

/// Full-range BT.601 luma from interleaved-free channel planes.
pub fn rgb_to_luma(r: &[u8], g: &[u8], b: &[u8], height: usize, width: usize) -> Result<YImage> {
    let n = height * width;
    if r.len() != n || g.len() != n || b.len() != n {
        return Err(LsrError::dim(format!(
            "channel lengths {}/{}/{} do not match {height}x{width}",
            r.len(),
            g.len(),
            b.len()
        )));
    }
    let data =
        r.iter().zip(g).zip(b).map(|((&r, &g), &b)| 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64).collect();
    YImage::new(height, width, data)
}

/// Drop bottom rows and right columns until both dimensions divide by `scale`.
pub fn modcrop(img: &YImage, scale: usize) -> Result<YImage> {
    if scale == 0 {
        return Err(LsrError::param("scale must be >= 1"));
    }
    let h = img.height() - img.height() % scale;
    let w = img.width() - img.width() % scale;
    if h == 0 || w == 0 {
        return Err(LsrError::dim(format!(
            "{}x{} cannot be cropped to a multiple of {scale}",
            img.height(),
            img.width()
        )));
    }
    img.crop(0, 0, h, w)
}
