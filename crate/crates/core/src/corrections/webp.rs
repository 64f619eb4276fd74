//! Lossy WebP round trips through the system libwebp simple API.

use std::ffi::{c_float, c_int, c_void};

use super::Image;
use crate::error::{Error, Result};

extern "C" {
    fn WebPEncodeRGB(
        rgb: *const u8,
        width: c_int,
        height: c_int,
        stride: c_int,
        quality_factor: c_float,
        output: *mut *mut u8,
    ) -> usize;
    fn WebPDecodeRGB(data: *const u8, data_size: usize, width: *mut c_int, height: *mut c_int) -> *mut u8;
    fn WebPFree(ptr: *mut c_void);
}

/// Buffer allocated by libwebp, released with `WebPFree`.
struct WebpBuf(*mut u8);

impl Drop for WebpBuf {
    fn drop(&mut self) {
        if !self.0.is_null() {
            // SAFETY: pointer came from a libwebp allocation and is freed once.
            unsafe { WebPFree(self.0.cast()) }
        }
    }
}

/// Largest side libwebp accepts.
const MAX_DIMENSION: u32 = 16383;

/// Lossy WebP encode at `quality` (1..=100).
pub fn webp_encode(img: &Image, quality: u8) -> Result<Vec<u8>> {
    if !(1..=100).contains(&quality) {
        return Err(Error::Input(format!("webp quality {quality} outside 1..=100")));
    }
    let (w, h) = (img.width(), img.height());
    if w == 0 || h == 0 || w > MAX_DIMENSION || h > MAX_DIMENSION {
        return Err(Error::Codec(format!("webp cannot encode a {w}x{h} image")));
    }
    let mut out: *mut u8 = std::ptr::null_mut();
    // SAFETY: pixels hold w*h*3 bytes (Image invariant); stride is 3*w.
    let len = unsafe {
        WebPEncodeRGB(
            img.pixels().as_ptr(),
            w as c_int,
            h as c_int,
            (w * 3) as c_int,
            c_float::from(quality),
            &mut out,
        )
    };
    let buf = WebpBuf(out);
    if len == 0 || buf.0.is_null() {
        return Err(Error::Codec("webp encode failed".into()));
    }
    // SAFETY: libwebp reports `len` valid bytes at `out`.
    Ok(unsafe { std::slice::from_raw_parts(buf.0, len) }.to_vec())
}

pub fn webp_decode(bytes: &[u8]) -> Result<Image> {
    let (mut w, mut h): (c_int, c_int) = (0, 0);
    // SAFETY: libwebp reads at most `bytes.len()` bytes and writes the two ints.
    let buf = WebpBuf(unsafe { WebPDecodeRGB(bytes.as_ptr(), bytes.len(), &mut w, &mut h) });
    if buf.0.is_null() || w <= 0 || h <= 0 {
        return Err(Error::Codec("webp decode failed: bitstream rejected".into()));
    }
    let len = w as usize * h as usize * 3;
    // SAFETY: a successful RGB decode returns w*h*3 packed bytes.
    let pixels = unsafe { std::slice::from_raw_parts(buf.0, len) }.to_vec();
    Image::new(w as u32, h as u32, pixels)
}

/// Encodes then decodes, replacing the pixels with the lossy round trip.
pub fn webp_compress(img: &Image, quality: u8) -> Result<Image> {
    let decoded = webp_decode(&webp_encode(img, quality)?)?;
    if (decoded.width(), decoded.height()) != (img.width(), img.height()) {
        return Err(Error::Codec("webp round trip changed the image size".into()));
    }
    Ok(decoded)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(w: u32, h: u32) -> Image {
        Image::from_fn(w, h, |x, y| {
            let v = ((x * 7 + y * 13) % 256) as u8;
            [v, v.wrapping_mul(3), 255 - v]
        })
    }

    #[test]
    fn round_trip_keeps_size() {
        let img = textured(33, 17);
        let out = webp_compress(&img, 50).unwrap();
        assert_eq!((out.width(), out.height()), (33, 17));
        assert!(crate::corrections::psnr(&img, &out).unwrap() > 15.0);
    }

    #[test]
    fn encoding_is_deterministic() {
        let img = textured(64, 48);
        assert_eq!(webp_encode(&img, 30).unwrap(), webp_encode(&img, 30).unwrap());
    }

    #[test]
    fn bitstream_starts_with_riff() {
        let bytes = webp_encode(&textured(8, 8), 80).unwrap();
        assert_eq!(&bytes[..4], b"RIFF");
        assert_eq!(&bytes[8..12], b"WEBP");
    }

    #[test]
    fn rejects_bad_quality_and_garbage() {
        assert!(matches!(webp_encode(&textured(4, 4), 0), Err(Error::Input(_))));
        assert!(matches!(webp_encode(&textured(4, 4), 101), Err(Error::Input(_))));
        assert!(matches!(webp_decode(b"not a webp"), Err(Error::Codec(_))));
    }
}
