//! Pixel-domain corrections. All arithmetic is done in `f64` per channel
//! and rounded once when writing the output; borders replicate the edge
//! pixel.

use super::Image;
use crate::error::{Error, Result};
use crate::mot::BoundingBox;

/// Discrete Gaussian weights for offsets `-radius..=radius`, normalised to
/// sum to one.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let raw: Vec<f64> = (-(radius as i64)..=radius as i64)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Kernel radius used by [`unsharp_mask`]: three standard deviations.
pub fn unsharp_radius(sigma: f64) -> usize {
    ((3.0 * sigma).ceil() as usize).max(1)
}

fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Separable Gaussian blur without quantisation.
fn blur_f64(img: &Image, sigma: f64, radius: usize) -> Vec<f64> {
    let kernel = gaussian_kernel(sigma, radius);
    let (w, h) = (img.width() as usize, img.height() as usize);
    let r = radius as i64;
    let src = img.pixels();
    let clamp = |v: i64, hi: usize| v.clamp(0, hi as i64 - 1) as usize;

    let mut horiz = vec![0.0f64; src.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut acc = 0.0;
                for (k, wgt) in kernel.iter().enumerate() {
                    let sx = clamp(x as i64 + k as i64 - r, w);
                    acc += wgt * f64::from(src[(y * w + sx) * 3 + c]);
                }
                horiz[(y * w + x) * 3 + c] = acc;
            }
        }
    }
    let mut out = vec![0.0f64; src.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut acc = 0.0;
                for (k, wgt) in kernel.iter().enumerate() {
                    let sy = clamp(y as i64 + k as i64 - r, h);
                    acc += wgt * horiz[(sy * w + x) * 3 + c];
                }
                out[(y * w + x) * 3 + c] = acc;
            }
        }
    }
    out
}

pub fn gaussian_denoise(img: &Image, sigma: f64, kernel_radius: usize) -> Image {
    if img.pixels().is_empty() {
        return img.clone();
    }
    let blurred = blur_f64(img, sigma, kernel_radius);
    let pixels = blurred.into_iter().map(quantize).collect();
    Image::new(img.width(), img.height(), pixels).expect("dimensions preserved")
}

pub fn horizontal_flip(img: &Image) -> Image {
    let w = img.width() as usize;
    let src = img.pixels();
    let mut pixels = Vec::with_capacity(src.len());
    for row in src.chunks_exact((w * 3).max(1)) {
        for px in row.chunks_exact(3).rev() {
            pixels.extend_from_slice(px);
        }
    }
    Image::new(img.width(), img.height(), pixels).expect("dimensions preserved")
}

/// `original + amount * (original - blur(original))`, saturated to `[0, 255]`.
pub fn unsharp_mask(img: &Image, sigma: f64, amount: f64) -> Image {
    if amount == 0.0 || img.pixels().is_empty() {
        return img.clone();
    }
    let blurred = blur_f64(img, sigma, unsharp_radius(sigma));
    let pixels = img
        .pixels()
        .iter()
        .zip(blurred)
        .map(|(&o, b)| {
            let o = f64::from(o);
            quantize(o + amount * (o - b))
        })
        .collect();
    Image::new(img.width(), img.height(), pixels).expect("dimensions preserved")
}

/// 256-entry power-law table `round(255 * (v / 255)^gamma)`.
pub fn gamma_lut(gamma: f64) -> [u8; 256] {
    let mut lut = [0u8; 256];
    for (v, slot) in lut.iter_mut().enumerate() {
        *slot = quantize(255.0 * (v as f64 / 255.0).powf(gamma));
    }
    lut
}

pub fn gamma_correction(img: &Image, gamma: f64) -> Image {
    let lut = gamma_lut(gamma);
    let pixels = img.pixels().iter().map(|&v| lut[v as usize]).collect();
    Image::new(img.width(), img.height(), pixels).expect("dimensions preserved")
}

/// Reflects a box across the vertical centre line of an image `image_width`
/// pixels wide. The box must lie within `[0, image_width]` horizontally.
pub fn mirror_box(bbox: &BoundingBox, image_width: f64) -> Result<BoundingBox> {
    if bbox.left() < 0.0 || bbox.right() > image_width {
        return Err(Error::Contract(format!(
            "{bbox} extends outside an image {image_width} px wide"
        )));
    }
    Ok(BoundingBox::new(
        image_width - bbox.left() - bbox.width(),
        bbox.top(),
        bbox.width(),
        bbox.height(),
    )?)
}
