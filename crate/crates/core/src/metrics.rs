//! Compression rate and windowed SSIM.

use std::time::Instant;

use crate::bitstream::{deserialize, serialize};
use crate::codec::{encode_image, CodecParams};
use crate::color::{ColorMode, ImageBuffer};
use crate::dictionary::DictionaryBank;
use crate::error::{invalid, Result};
use crate::plane::Plane;

/// Side of the square SSIM window.
pub const SSIM_WINDOW: usize = 7;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
/// Dynamic range of normalized pixels.
pub const SSIM_L: f64 = 1.0;

/// Outcome of coding one image with one parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub compression_rate: f64,
    pub ssim: f64,
    pub compressed_bytes: usize,
    pub encode_seconds: f64,
    pub decode_seconds: f64,
}

/// `original_bytes / compressed_bytes`.
pub fn compression_rate(original_bytes: usize, compressed_bytes: usize) -> Result<f64> {
    if original_bytes == 0 || compressed_bytes == 0 {
        return invalid(format!("compression rate needs non-zero sizes, got {original_bytes} / {compressed_bytes}"));
    }
    Ok(original_bytes as f64 / compressed_bytes as f64)
}

/// Mean SSIM over every 7x7 window position of two planes in `[0, 1]`.
///
/// Window statistics use the unbiased (n - 1) normalization for variances
/// and covariance.
pub fn ssim(x: &Plane, y: &Plane) -> Result<f64> {
    let (w, h) = (x.width(), x.height());
    if (w, h) != (y.width(), y.height()) {
        return invalid(format!("ssim of {w}x{h} and {}x{} planes", y.width(), y.height()));
    }
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return invalid(format!("ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {w}x{h}"));
    }
    let (xd, yd) = (x.data(), y.data());
    let xx: Vec<f64> = xd.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = yd.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = xd.iter().zip(yd).map(|(a, b)| a * b).collect();

    let sx = box_sums(xd, w, h);
    let sy = box_sums(yd, w, h);
    let sxx = box_sums(&xx, w, h);
    let syy = box_sums(&yy, w, h);
    let sxy = box_sums(&xy, w, h);

    let n = (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let mut total = 0.0;
    for i in 0..sx.len() {
        let (mx, my) = (sx[i] / n, sy[i] / n);
        let vx = (sxx[i] - n * mx * mx) / (n - 1.0);
        let vy = (syy[i] - n * my * my) / (n - 1.0);
        let cov = (sxy[i] - n * mx * my) / (n - 1.0);
        total += ssim_window(mx, my, vx, vy, cov);
    }
    Ok(total / sx.len() as f64)
}

pub(crate) fn ssim_window(mx: f64, my: f64, vx: f64, vy: f64, cov: f64) -> f64 {
    let c1 = (SSIM_K1 * SSIM_L).powi(2);
    let c2 = (SSIM_K2 * SSIM_L).powi(2);
    ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

/// Sums over every 7x7 window, row-major over window origins. Each sum is
/// formed directly (rows of 7, then columns of 7), so identical inputs give
/// identical sums.
fn box_sums(a: &[f64], w: usize, h: usize) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; ow * h];
    for r in 0..h {
        let line = &a[r * w..(r + 1) * w];
        for c in 0..ow {
            rows[r * ow + c] = line[c..c + SSIM_WINDOW].iter().sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..SSIM_WINDOW).map(|k| rows[(r + k) * ow + c]).sum();
        }
    }
    out
}

/// SSIM of two images on their luma; gray and color images may be mixed.
pub fn ssim_images(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return invalid(format!(
            "image dimensions differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        ));
    }
    ssim(&a.luma(), &b.luma())
}

/// Encodes `img`, writes the container, reads it back and decodes it.
/// Compression rate is `original_bytes` over the container length.
pub fn evaluate(
    img: &ImageBuffer,
    mode: ColorMode,
    params: &CodecParams,
    bank: &DictionaryBank,
    original_bytes: usize,
) -> Result<(Evaluation, Vec<u8>, ImageBuffer)> {
    let t = Instant::now();
    let channels = encode_image(img, mode, params, bank)?;
    let bytes = serialize(&channels, params, mode)?;
    let encode_seconds = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let decoded = deserialize(&bytes)?.decode(bank)?;
    let decode_seconds = t.elapsed().as_secs_f64();

    let eval = Evaluation {
        compression_rate: compression_rate(original_bytes, bytes.len())?,
        ssim: ssim_images(img, &decoded)?,
        compressed_bytes: bytes.len(),
        encode_seconds,
        decode_seconds,
    };
    Ok((eval, bytes, decoded))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::PixelFormat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct evaluation of the formula at each window position.
    fn oracle(x: &Plane, y: &Plane) -> f64 {
        let (w, h) = (x.width(), x.height());
        let m = 7usize;
        let n = (m * m) as f64;
        let mut acc = 0.0;
        let mut count = 0;
        for oy in 0..=h - m {
            for ox in 0..=w - m {
                let px: Vec<f64> = (0..m * m).map(|i| x.get(ox + i % m, oy + i / m)).collect();
                let py: Vec<f64> = (0..m * m).map(|i| y.get(ox + i % m, oy + i / m)).collect();
                let mx = px.iter().sum::<f64>() / n;
                let my = py.iter().sum::<f64>() / n;
                let vx = px.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / (n - 1.0);
                let vy = py.iter().map(|v| (v - my).powi(2)).sum::<f64>() / (n - 1.0);
                let cov = px.iter().zip(&py).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1.0);
                let (c1, c2) = (1e-4, 9e-4);
                acc += (2.0 * mx * my + c1) * (2.0 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
        acc / count as f64
    }

    fn random_plane(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Plane {
        Plane::from_fn(w, h, |_, _| rng.random())
    }

    #[test]
    fn compression_rate_examples() {
        assert_eq!(compression_rate(1000, 250).unwrap(), 4.0);
        assert_eq!(compression_rate(77, 77).unwrap(), 1.0);
        assert!(compression_rate(0, 5).is_err());
        assert!(compression_rate(5, 0).is_err());
    }

    #[test]
    fn identical_planes_score_exactly_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (w, h) in [(7, 7), (8, 8), (16, 16), (31, 9)] {
            let x = random_plane(&mut rng, w, h);
            assert_eq!(ssim(&x, &x).unwrap(), 1.0);
        }
        let flat = Plane::filled(10, 10, 0.3);
        assert_eq!(ssim(&flat, &flat).unwrap(), 1.0);
    }

    #[test]
    fn matches_direct_oracle_on_8x8() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let x = random_plane(&mut rng, 8, 8);
            let y = random_plane(&mut rng, 8, 8);
            assert!((ssim(&x, &y).unwrap() - oracle(&x, &y)).abs() < 1e-12);
        }
    }

    #[test]
    fn inverted_binary_image_scores_low() {
        let x = Plane::from_fn(16, 16, |c, _| if c < 8 { 0.0 } else { 1.0 });
        let y = Plane::from_fn(16, 16, |c, r| 1.0 - x.get(c, r));
        let s = ssim(&x, &y).unwrap();
        assert!(s < 0.1, "{s}");
        assert!((s - oracle(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn symmetric_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let x = random_plane(&mut rng, 12, 9);
            let y = Plane::from_fn(12, 9, |c, r| (x.get(c, r) * rng.random::<f64>()).clamp(0.0, 1.0));
            let (a, b) = (ssim(&x, &y).unwrap(), ssim(&y, &x).unwrap());
            assert!((a - b).abs() < 1e-12);
            assert!(a.abs() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        let a = Plane::filled(8, 8, 0.0);
        assert!(ssim(&a, &Plane::filled(8, 9, 0.0)).is_err());
        assert!(ssim(&Plane::filled(6, 8, 0.0), &Plane::filled(6, 8, 0.0)).is_err());
    }

    #[test]
    fn gray_and_color_compare_on_luma() {
        let rgb: Vec<u8> = (0..100).flat_map(|i| [i as u8 * 2, i as u8, 255 - i as u8]).collect();
        let color = ImageBuffer::new(10, 10, PixelFormat::Rgb8, rgb).unwrap();
        let gray_samples = color.luma().data().iter().map(|v| (v * 255.0).round() as u8).collect();
        let gray = ImageBuffer::new(10, 10, PixelFormat::Gray8, gray_samples).unwrap();
        assert!(ssim_images(&color, &gray).unwrap() > 0.999);
        let small = ImageBuffer::new(9, 10, PixelFormat::Gray8, vec![0; 90]).unwrap();
        assert!(ssim_images(&color, &small).is_err());
    }

    #[test]
    fn evaluate_reports_container_size() {
        let samples: Vec<u8> = (0..32 * 32).map(|i| ((i % 32) * 8) as u8).collect();
        let img = ImageBuffer::new(32, 32, PixelFormat::Gray8, samples).unwrap();
        let params = CodecParams::new(0.01, 0.25, 4, 16, 16).unwrap();
        let bank = DictionaryBank::new(4, 16, 16).unwrap();
        let (eval, bytes, decoded) = evaluate(&img, ColorMode::Gray, &params, &bank, img.raw_len()).unwrap();
        assert_eq!(eval.compressed_bytes, bytes.len());
        assert_eq!(eval.compression_rate, 1024.0 / bytes.len() as f64);
        assert_eq!((decoded.width(), decoded.height()), (32, 32));
        assert!(eval.ssim > 0.9);
    }
}
