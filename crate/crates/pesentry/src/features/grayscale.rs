//! Render a binary as a grayscale image: bytes become row-major pixel
//! intensities at a size-dependent width, then the image is box-filter
//! resized to 64x64.

use thiserror::Error;

use crate::pe::RawBinary;

pub const IMAGE_SIDE: usize = 64;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;

#[derive(Debug, Error, PartialEq)]
pub enum GrayscaleError {
    #[error("cannot image an empty file")]
    EmptyInput,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrayscaleImage {
    /// Row-major 64x64 intensities.
    pub pixels: Vec<u8>,
    pub source_sha256: [u8; 32],
}

impl GrayscaleImage {
    pub fn flattened_f64(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| p as f64).collect()
    }
}

/// Image width as a function of file size, per the usual binary
/// visualization size table.
pub fn width_for_size(len: usize) -> usize {
    const KB: usize = 1024;
    match len {
        0..=10240 => 32,
        l if l <= 30 * KB => 64,
        l if l <= 60 * KB => 128,
        l if l <= 100 * KB => 256,
        l if l <= 200 * KB => 384,
        l if l <= 500 * KB => 512,
        l if l <= 1000 * KB => 768,
        _ => 1024,
    }
}

/// Area-average (box filter) resize of an arbitrary grayscale image to
/// 64x64, rounding half-up.
///
/// Each destination pixel averages the exact fractional source rectangle it
/// covers, so constant images stay constant and the result is identical
/// across platforms.
pub fn box_resize(src: &[u8], src_w: usize, src_h: usize) -> Vec<u8> {
    assert!(src_w > 0 && src_h > 0 && src.len() == src_w * src_h);
    let mut out = vec![0u8; IMAGE_PIXELS];
    let sy = src_h as f64 / IMAGE_SIDE as f64;
    let sx = src_w as f64 / IMAGE_SIDE as f64;
    for dy in 0..IMAGE_SIDE {
        let y0 = dy as f64 * sy;
        let y1 = (dy + 1) as f64 * sy;
        for dx in 0..IMAGE_SIDE {
            let x0 = dx as f64 * sx;
            let x1 = (dx + 1) as f64 * sx;
            let mut acc = 0.0;
            let mut area = 0.0;
            let iy_end = (y1.ceil() as usize).min(src_h);
            let ix_end = (x1.ceil() as usize).min(src_w);
            for iy in (y0.floor() as usize)..iy_end {
                let wy = (y1.min((iy + 1) as f64) - y0.max(iy as f64)).max(0.0);
                for ix in (x0.floor() as usize)..ix_end {
                    let wx = (x1.min((ix + 1) as f64) - x0.max(ix as f64)).max(0.0);
                    let w = wy * wx;
                    acc += w * src[iy * src_w + ix] as f64;
                    area += w;
                }
            }
            let v = if area > 0.0 { acc / area } else { 0.0 };
            out[dy * IMAGE_SIDE + dx] = (v + 0.5).floor().min(255.0) as u8;
        }
    }
    out
}

/// Convert a binary into its 64x64 grayscale representation.
pub fn extract_grayscale(raw: &RawBinary) -> Result<GrayscaleImage, GrayscaleError> {
    if raw.bytes.is_empty() {
        return Err(GrayscaleError::EmptyInput);
    }
    let width = width_for_size(raw.bytes.len());
    let height = raw.bytes.len().div_ceil(width);
    let mut src = vec![0u8; width * height];
    src[..raw.bytes.len()].copy_from_slice(&raw.bytes);
    Ok(GrayscaleImage {
        pixels: box_resize(&src, width, height),
        source_sha256: raw.sha256,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(bytes: Vec<u8>) -> RawBinary {
        RawBinary::new(bytes, "test")
    }

    /// Independent oracle: scatter form of the box filter. Each source
    /// pixel distributes its intensity into the destination cells it
    /// overlaps; the implementation gathers per destination cell instead.
    fn scatter_resize(src: &[u8], src_w: usize, src_h: usize) -> Vec<u8> {
        let mut acc = vec![0.0f64; IMAGE_PIXELS];
        let mut area = vec![0.0f64; IMAGE_PIXELS];
        let sy = IMAGE_SIDE as f64 / src_h as f64;
        let sx = IMAGE_SIDE as f64 / src_w as f64;
        for iy in 0..src_h {
            for ix in 0..src_w {
                let (y0, y1) = (iy as f64 * sy, (iy + 1) as f64 * sy);
                let (x0, x1) = (ix as f64 * sx, (ix + 1) as f64 * sx);
                for dy in (y0.floor() as usize)..(y1.ceil() as usize).min(IMAGE_SIDE) {
                    let wy = (y1.min((dy + 1) as f64) - y0.max(dy as f64)).max(0.0);
                    for dx in (x0.floor() as usize)..(x1.ceil() as usize).min(IMAGE_SIDE) {
                        let wx = (x1.min((dx + 1) as f64) - x0.max(dx as f64)).max(0.0);
                        acc[dy * IMAGE_SIDE + dx] += wy * wx * src[iy * src_w + ix] as f64;
                        area[dy * IMAGE_SIDE + dx] += wy * wx;
                    }
                }
            }
        }
        acc.iter()
            .zip(&area)
            .map(|(&a, &w)| if w > 0.0 { (a / w + 0.5).floor().min(255.0) as u8 } else { 0 })
            .collect()
    }

    #[test]
    fn constant_bytes_constant_image() {
        let img = extract_grayscale(&raw(vec![0x80; 4096])).unwrap();
        assert_eq!(img.pixels.len(), IMAGE_PIXELS);
        assert!(img.pixels.iter().all(|&p| p == 128));
    }

    #[test]
    fn zeros_stay_zero() {
        let img = extract_grayscale(&raw(vec![0; 1024])).unwrap();
        assert_eq!(width_for_size(1024), 32);
        assert!(img.pixels.iter().all(|&p| p == 0));
    }

    #[test]
    fn empty_input_errors() {
        assert_eq!(
            extract_grayscale(&raw(vec![])).unwrap_err(),
            GrayscaleError::EmptyInput
        );
    }

    #[test]
    fn checkerboard_matches_scatter_oracle() {
        // 96x96 checkerboard downsampled to 64x64, compared against the
        // independently implemented scatter-form filter, pixel-exact.
        let (w, h) = (96, 96);
        let src: Vec<u8> = (0..w * h)
            .map(|i| if (i / w + i % w) % 2 == 0 { 0 } else { 255 })
            .collect();
        assert_eq!(box_resize(&src, w, h), scatter_resize(&src, w, h));
    }

    #[test]
    fn ragged_tail_matches_scatter_oracle() {
        let bytes: Vec<u8> = (0..5000).map(|i| (i * 31 % 256) as u8) .collect();
        let width = width_for_size(bytes.len());
        let height = bytes.len().div_ceil(width);
        let mut src = vec![0u8; width * height];
        src[..bytes.len()].copy_from_slice(&bytes);
        let img = extract_grayscale(&raw(bytes)).unwrap();
        assert_eq!(img.pixels, scatter_resize(&src, width, height));
    }

    #[test]
    fn width_table_thresholds() {
        assert_eq!(width_for_size(1), 32);
        assert_eq!(width_for_size(10 * 1024), 32);
        assert_eq!(width_for_size(10 * 1024 + 1), 64);
        assert_eq!(width_for_size(200 * 1024), 384);
        assert_eq!(width_for_size(2_000_000), 1024);
    }
}
