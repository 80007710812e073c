use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Frame;

/// PSNR reported for identical frames.
pub const PSNR_CAP_DB: f64 = 100.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const SSIM_L: f64 = 255.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityPair {
    pub psnr: f64,
    pub ssim: f64,
}

impl QualityPair {
    pub fn measure(a: &Frame, b: &Frame) -> Result<Self> {
        Ok(Self {
            psnr: psnr(a, b)?,
            ssim: ssim(a, b)?,
        })
    }
}

/// Mean squared error over all channels jointly.
pub fn mse(a: &Frame, b: &Frame) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let sum: u64 = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    Ok(sum as f64 / a.pixels.len() as f64)
}

/// `10 log10(255^2 / MSE)`, capped at 100 dB.
pub fn psnr(a: &Frame, b: &Frame) -> Result<f64> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (255.0f64 * 255.0 / m).log10()).min(PSNR_CAP_DB))
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-(d * d) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    for v in &mut k {
        *v /= s;
    }
    k
}

/// Normalized 11x11 Gaussian weights, row-major.
pub fn gaussian_window() -> Vec<f64> {
    let k = gaussian_kernel();
    let mut w = Vec::with_capacity(SSIM_WINDOW * SSIM_WINDOW);
    for a in k {
        for b in k {
            w.push(a * b);
        }
    }
    w
}

/// Single-scale SSIM, averaged over valid window positions per channel and
/// then over the three channels.
pub fn ssim(a: &Frame, b: &Frame) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let (w, h) = a.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "frame {w}x{h} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    let k = gaussian_kernel();
    let c1 = (SSIM_K1 * SSIM_L).powi(2);
    let c2 = (SSIM_K2 * SSIM_L).powi(2);
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;

    let mut total = 0.0;
    for ch in 0..3 {
        // horizontal pass: five moments per (row, output column)
        let mut horiz = vec![[0.0f64; 5]; h * ow];
        for y in 0..h {
            for ox in 0..ow {
                let mut acc = [0.0f64; 5];
                for (j, &kw) in k.iter().enumerate() {
                    let i = (y * w + ox + j) * 3 + ch;
                    let x = a.pixels[i] as f64;
                    let z = b.pixels[i] as f64;
                    acc[0] += kw * x;
                    acc[1] += kw * z;
                    acc[2] += kw * x * x;
                    acc[3] += kw * z * z;
                    acc[4] += kw * x * z;
                }
                horiz[y * ow + ox] = acc;
            }
        }
        let mut sum = 0.0;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut m = [0.0f64; 5];
                for (j, &kw) in k.iter().enumerate() {
                    let hv = &horiz[(oy + j) * ow + ox];
                    for q in 0..5 {
                        m[q] += kw * hv[q];
                    }
                }
                sum += ssim_from_moments(m, c1, c2);
            }
        }
        total += sum / (ow * oh) as f64;
    }
    Ok(total / 3.0)
}

/// SSIM of one window from its weighted moments
/// `[E x, E y, E x^2, E y^2, E xy]`.
pub fn ssim_from_moments(m: [f64; 5], c1: f64, c2: f64) -> f64 {
    let (mx, my) = (m[0], m[1]);
    let vx = m[2] - mx * mx;
    let vy = m[3] - my * my;
    let cxy = m[4] - mx * my;
    ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_frames() {
        let f = Frame::filled(16, 16, [12, 200, 7], 0);
        assert_eq!(psnr(&f, &f).unwrap(), PSNR_CAP_DB);
        assert!((ssim(&f, &f).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_error_psnr() {
        let a = Frame::filled(16, 16, [10, 10, 10], 0);
        let b = Frame::filled(16, 16, [11, 9, 11], 0);
        assert!((psnr(&a, &b).unwrap() - 48.1308).abs() < 1e-3);
    }

    #[test]
    fn constant_frames_reduce_to_luminance_term() {
        let a = Frame::filled(12, 12, [100, 100, 100], 0);
        let b = Frame::filled(12, 12, [150, 150, 150], 0);
        let c1 = (0.01f64 * 255.0).powi(2);
        let expect = (2.0 * 100.0 * 150.0 + c1) / (100.0f64.powi(2) + 150.0f64.powi(2) + c1);
        assert!((ssim(&a, &b).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn small_frames_rejected() {
        let a = Frame::filled(10, 20, [0, 0, 0], 0);
        assert!(ssim(&a, &a).is_err());
        let b = Frame::filled(20, 10, [0, 0, 0], 0);
        assert!(psnr(&a, &b).is_err());
    }

    #[test]
    fn window_sums_to_one() {
        let s: f64 = gaussian_window().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}
