use super::{rgb_to_luma, YImage};
use crate::error::{LsrError, Result};
use image::{DynamicImage, GrayImage, RgbImage};
use std::path::Path;

/// 8-bit RGB planes as decoded from disk.
#[derive(Debug, Clone)]
pub struct ColorImage {
    pub height: usize,
    pub width: usize,
    pub r: Vec<u8>,
    pub g: Vec<u8>,
    pub b: Vec<u8>,
}

impl ColorImage {
    pub fn luma(&self) -> Result<YImage> {
        rgb_to_luma(&self.r, &self.g, &self.b, self.height, self.width)
    }

    /// Full-range BT.601 chroma planes (Cb, Cr), centered on 128.
    pub fn chroma(&self) -> Result<(YImage, YImage)> {
        let (cb, cr): (Vec<f64>, Vec<f64>) = self
            .r
            .iter()
            .zip(&self.g)
            .zip(&self.b)
            .map(|((&r, &g), &b)| {
                let (r, g, b) = (r as f64, g as f64, b as f64);
                (128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b, 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b)
            })
            .unzip();
        Ok((YImage::new(self.height, self.width, cb)?, YImage::new(self.height, self.width, cr)?))
    }

    /// Recombine luma and chroma planes into 8-bit RGB.
    pub fn from_ycbcr(y: &YImage, cb: &YImage, cr: &YImage) -> Result<ColorImage> {
        if y.dims() != cb.dims() || y.dims() != cr.dims() {
            return Err(LsrError::dim("luma and chroma planes differ in size"));
        }
        let q = |v: f64| v.round().clamp(0.0, 255.0) as u8;
        let n = y.data().len();
        let (mut r, mut g, mut b) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for i in 0..n {
            let (yy, u, v) = (y.data()[i], cb.data()[i] - 128.0, cr.data()[i] - 128.0);
            r.push(q(yy + 1.402 * v));
            g.push(q(yy - 0.344136 * u - 0.714136 * v));
            b.push(q(yy + 1.772 * u));
        }
        Ok(ColorImage { height: y.height(), width: y.width(), r, g, b })
    }
}

fn decode(path: &Path) -> Result<DynamicImage> {
    Ok(image::ImageReader::open(path)?.with_guessed_format()?.decode()?)
}

/// Read any supported image as luma. Color inputs go through BT.601.
pub fn read_luma(path: impl AsRef<Path>) -> Result<YImage> {
    let img = decode(path.as_ref())?;
    if img.color().has_color() {
        read_color_from(img).luma()
    } else {
        let gray = img.to_luma8();
        YImage::from_gray8(gray.height() as usize, gray.width() as usize, gray.as_raw())
    }
}

pub fn read_color(path: impl AsRef<Path>) -> Result<ColorImage> {
    Ok(read_color_from(decode(path.as_ref())?))
}

fn read_color_from(img: DynamicImage) -> ColorImage {
    let rgb = img.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let mut out = ColorImage {
        height: h,
        width: w,
        r: Vec::with_capacity(w * h),
        g: Vec::with_capacity(w * h),
        b: Vec::with_capacity(w * h),
    };
    for px in rgb.pixels() {
        out.r.push(px[0]);
        out.g.push(px[1]);
        out.b.push(px[2]);
    }
    out
}

/// Write as 8-bit grayscale PNG (round half away from zero, clamp).
pub fn write_luma_png(img: &YImage, path: impl AsRef<Path>) -> Result<()> {
    let buf = GrayImage::from_raw(img.width() as u32, img.height() as u32, img.to_gray8())
        .ok_or_else(|| LsrError::dim("gray buffer size mismatch"))?;
    buf.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

pub fn write_color_png(img: &ColorImage, path: impl AsRef<Path>) -> Result<()> {
    let mut raw = Vec::with_capacity(img.r.len() * 3);
    for i in 0..img.r.len() {
        raw.extend_from_slice(&[img.r[i], img.g[i], img.b[i]]);
    }
    let buf = RgbImage::from_raw(img.width as u32, img.height as u32, raw)
        .ok_or_else(|| LsrError::dim("rgb buffer size mismatch"))?;
    buf.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}
