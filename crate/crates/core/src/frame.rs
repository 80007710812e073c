//! Raster types shared by every stage of the pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Edge length of a motion-vector block.
pub const BLOCK_SIZE: usize = 16;

/// Number of quarter-slots per base frame.
pub const SLOTS_PER_FRAME: u32 = 4;

/// An 8-bit RGB raster stamped with the quarter-slot it depicts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB triples.
    pub pixels: Vec<u8>,
    /// Quarter-slot index; base frames sit on multiples of 4.
    pub timestamp: u32,
}

impl Frame {
    pub fn new(width: usize, height: usize, timestamp: u32) -> Self {
        Self {
            width,
            height,
            pixels: vec![0; width * height * 3],
            timestamp,
        }
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3], timestamp: u32) -> Self {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            pixels.extend_from_slice(&rgb);
        }
        Self {
            width,
            height,
            pixels,
            timestamp,
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u8>, timestamp: u32) -> Result<Self> {
        if pixels.len() != width * height * 3 {
            return Err(Error::InvalidArgument(format!(
                "pixel buffer of {} bytes does not match {width}x{height} RGB",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
            timestamp,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    #[inline]
    pub fn pixel(&self, idx: usize) -> [u8; 3] {
        [self.pixels[idx * 3], self.pixels[idx * 3 + 1], self.pixels[idx * 3 + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, idx: usize, rgb: [u8; 3]) {
        self.pixels[idx * 3..idx * 3 + 3].copy_from_slice(&rgb);
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn ensure_same_dims(&self, other: &Frame) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::dims(self.dims(), other.dims()));
        }
        Ok(())
    }

    /// Bilinear sample of one channel at a continuous position, clamped to the border.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> [f64; 3] {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        let x = x.clamp(0.0, max_x);
        let y = y.clamp(0.0, max_y);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let mut out = [0.0; 3];
        let (a, b, c, d) = (self.get(x0, y0), self.get(x1, y0), self.get(x0, y1), self.get(x1, y1));
        for ch in 0..3 {
            let top = a[ch] as f64 * (1.0 - fx) + b[ch] as f64 * fx;
            let bottom = c[ch] as f64 * (1.0 - fx) + d[ch] as f64 * fx;
            out[ch] = top * (1.0 - fy) + bottom * fy;
        }
        out
    }
}

/// Per-frame auxiliary rasters emitted by the renderer for a base frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GBufferSet {
    pub width: usize,
    pub height: usize,
    /// Displacement per quarter-slot. Pixel `p` sat at `p - 4 * motion_dense[p]`
    /// in the previous base frame.
    pub motion_dense: Vec<[f32; 2]>,
    /// Tile means of `motion_dense` over 16x16 blocks, row-major.
    pub motion_blocks: Vec<[f32; 2]>,
    /// Object id per pixel; 0 is the static background.
    pub stencil: Vec<u8>,
    pub world_normal: Vec<[f32; 3]>,
    /// (x, y, depth) in scene units.
    pub world_position: Vec<[f32; 3]>,
    pub timestamp: u32,
}

impl GBufferSet {
    pub fn blocks_wide(&self) -> usize {
        self.width / BLOCK_SIZE
    }

    pub fn blocks_high(&self) -> usize {
        self.height / BLOCK_SIZE
    }

    pub fn depth(&self) -> Vec<f32> {
        self.world_position.iter().map(|p| p[2]).collect()
    }
}

/// Averages a dense motion field over 16x16 tiles.
pub fn block_means(motion: &[[f32; 2]], width: usize, height: usize) -> Vec<[f32; 2]> {
    let bw = width / BLOCK_SIZE;
    let bh = height / BLOCK_SIZE;
    let mut out = Vec::with_capacity(bw * bh);
    let n = (BLOCK_SIZE * BLOCK_SIZE) as f64;
    for by in 0..bh {
        for bx in 0..bw {
            let (mut sx, mut sy) = (0.0f64, 0.0f64);
            for y in by * BLOCK_SIZE..(by + 1) * BLOCK_SIZE {
                for x in bx * BLOCK_SIZE..(bx + 1) * BLOCK_SIZE {
                    let m = motion[y * width + x];
                    sx += m[0] as f64;
                    sy += m[1] as f64;
                }
            }
            out.push([(sx / n) as f32, (sy / n) as f32]);
        }
    }
    out
}

/// A frame together with the per-pixel data needed to reproject it again:
/// motion, depth and a validity mask. Rendered frames are valid everywhere;
/// synthesized frames mark filled holes as invalid so later stages do not
/// treat guessed pixels as observed content.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionFrame {
    pub frame: Frame,
    pub motion: Vec<[f32; 2]>,
    pub depth: Vec<f32>,
    pub valid: Vec<bool>,
}

impl MotionFrame {
    pub fn from_rendered(frame: &Frame, gbuf: &GBufferSet) -> Result<Self> {
        if frame.dims() != (gbuf.width, gbuf.height) {
            return Err(Error::dims(frame.dims(), (gbuf.width, gbuf.height)));
        }
        Ok(Self {
            frame: frame.clone(),
            motion: gbuf.motion_dense.clone(),
            depth: gbuf.depth(),
            valid: vec![true; frame.len()],
        })
    }

    /// Wraps a frame with an explicit motion field and uniform depth.
    pub fn with_motion(frame: Frame, motion: Vec<[f32; 2]>) -> Result<Self> {
        if motion.len() != frame.len() {
            return Err(Error::InvalidArgument(format!(
                "motion field has {} entries for a {}x{} frame",
                motion.len(),
                frame.width,
                frame.height
            )));
        }
        let n = frame.len();
        Ok(Self {
            frame,
            motion,
            depth: vec![0.0; n],
            valid: vec![true; n],
        })
    }

    pub fn timestamp(&self) -> u32 {
        self.frame.timestamp
    }

    pub fn width(&self) -> usize {
        self.frame.width
    }

    pub fn height(&self) -> usize {
        self.frame.height
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_means_of_constant_field() {
        let m = vec![[1.5f32, -2.0]; 32 * 16];
        let b = block_means(&m, 32, 16);
        assert_eq!(b, vec![[1.5, -2.0], [1.5, -2.0]]);
    }

    #[test]
    fn bilinear_midpoint() {
        let mut f = Frame::new(2, 1, 0);
        f.set(0, 0, [0, 0, 0]);
        f.set(1, 0, [100, 50, 10]);
        let s = f.sample_bilinear(0.5, 0.0);
        assert_eq!(s, [50.0, 25.0, 5.0]);
    }

    #[test]
    fn from_pixels_rejects_wrong_length() {
        assert!(Frame::from_pixels(4, 4, vec![0; 10], 0).is_err());
    }
}
