//! Forward warping along motion vectors with hole marking.
//!
//! Each valid source pixel is splatted to `p + steps * motion[p]`, rounded to
//! the nearest integer. When several pixels land on one target the nearer
//! one (smaller depth) wins; equal depths favor the larger displacement, then
//! scan order. Targets nobody lands on are holes. For display, holes take the
//! value of the nearest covered pixel (4-neighborhood BFS), but the mask keeps
//! the pre-fill coverage.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::frame::{Frame, MotionFrame};
use crate::scenegen::BACKGROUND_DEPTH;

#[derive(Debug, Clone, PartialEq)]
pub struct WarpedFrame {
    /// Displayable pixels; the timestamp is the target quarter-slot.
    pub frame: Frame,
    /// `true` where no source pixel landed.
    pub hole_mask: Vec<bool>,
    pub hole_fraction: f64,
    pub source_timestamp: u32,
    /// Motion carried along with the splatted pixels (nearest-filled in holes).
    pub motion: Vec<[f32; 2]>,
    /// Depth carried along with the splatted pixels (nearest-filled in holes).
    pub depth: Vec<f32>,
}

impl WarpedFrame {
    pub fn hole_count(&self) -> usize {
        self.hole_mask.iter().filter(|&&h| h).count()
    }

    /// Reprojectable view where hole pixels are marked invalid.
    pub fn to_motion_frame(&self) -> MotionFrame {
        MotionFrame {
            frame: self.frame.clone(),
            motion: self.motion.clone(),
            depth: self.depth.clone(),
            valid: self.hole_mask.iter().map(|h| !h).collect(),
        }
    }

    pub fn into_motion_frame(self) -> MotionFrame {
        let valid = self.hole_mask.iter().map(|h| !h).collect();
        MotionFrame {
            frame: self.frame,
            motion: self.motion,
            depth: self.depth,
            valid,
        }
    }
}

/// Warps `source` by `steps` quarter-slots using a dense motion field.
///
/// Without depth information all pixels are treated as equally near.
pub fn warp_frame(source: &Frame, motion: &[[f32; 2]], steps: u32) -> Result<WarpedFrame> {
    if motion.len() != source.len() {
        return Err(Error::InvalidArgument(format!(
            "motion field has {} entries for a {}x{} frame",
            motion.len(),
            source.width,
            source.height
        )));
    }
    check_steps(steps)?;
    let src = MotionFrame::with_motion(source.clone(), motion.to_vec())?;
    Ok(reproject(&src, steps))
}

/// Warps a frame that carries its own motion, depth and validity.
pub fn warp_motion_frame(source: &MotionFrame, steps: u32) -> Result<WarpedFrame> {
    check_steps(steps)?;
    let n = source.frame.len();
    if source.motion.len() != n || source.depth.len() != n || source.valid.len() != n {
        return Err(Error::InvalidArgument("motion frame rasters have inconsistent sizes".into()));
    }
    Ok(reproject(source, steps))
}

fn check_steps(steps: u32) -> Result<()> {
    if !(1..=3).contains(&steps) {
        return Err(Error::InvalidArgument(format!("warp steps must be 1, 2 or 3, got {steps}")));
    }
    Ok(())
}

/// Splat target of source pixel `(x, y)`, or `None` if it leaves the frame.
#[inline]
pub fn splat_target(x: usize, y: usize, m: [f32; 2], steps: u32, width: usize, height: usize) -> Option<usize> {
    let tx = (x as f64 + steps as f64 * m[0] as f64).round();
    let ty = (y as f64 + steps as f64 * m[1] as f64).round();
    if tx < 0.0 || ty < 0.0 || tx >= width as f64 || ty >= height as f64 {
        return None;
    }
    Some(ty as usize * width + tx as usize)
}

/// Forward splat for any positive number of quarter-slots. Extrapolation uses
/// this to bring older frames forward by more than three slots.
pub fn reproject(src: &MotionFrame, steps: u32) -> WarpedFrame {
    let (w, h) = (src.width(), src.height());
    let n = w * h;
    let mut owner: Vec<u32> = vec![u32::MAX; n];
    let mut best_depth = vec![f32::INFINITY; n];
    let mut best_mag = vec![f32::NEG_INFINITY; n];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !src.valid[i] {
                continue;
            }
            let m = src.motion[i];
            let Some(t) = splat_target(x, y, m, steps, w, h) else {
                continue;
            };
            let d = src.depth[i];
            let mag = m[0] * m[0] + m[1] * m[1];
            let wins = owner[t] == u32::MAX || d < best_depth[t] || (d == best_depth[t] && mag > best_mag[t]);
            if wins {
                owner[t] = i as u32;
                best_depth[t] = d;
                best_mag[t] = mag;
            }
        }
    }

    let hole_mask: Vec<bool> = owner.iter().map(|&o| o == u32::MAX).collect();
    let holes = hole_mask.iter().filter(|&&b| b).count();
    let target_ts = src.timestamp() + steps;
    let mut frame = Frame::new(w, h, target_ts);
    let mut motion = vec![[0.0f32; 2]; n];
    let mut depth = vec![BACKGROUND_DEPTH; n];

    if holes == n {
        frame.pixels.fill(128);
    } else {
        let filled = nearest_fill(&owner, w, h);
        for (t, &o) in filled.iter().enumerate() {
            let o = o as usize;
            frame.set_pixel(t, src.frame.pixel(o));
            motion[t] = src.motion[o];
            depth[t] = src.depth[o];
        }
    }

    WarpedFrame {
        frame,
        hole_fraction: holes as f64 / n as f64,
        hole_mask,
        source_timestamp: src.timestamp(),
        motion,
        depth,
    }
}

/// Multi-source BFS: every target gets the source index of its nearest
/// covered neighbor in 4-connectivity. Requires at least one covered target.
fn nearest_fill(owner: &[u32], w: usize, h: usize) -> Vec<u32> {
    let mut out = owner.to_vec();
    let mut queue: VecDeque<usize> = (0..out.len()).filter(|&i| out[i] != u32::MAX).collect();
    while let Some(i) = queue.pop_front() {
        let (x, y) = (i % w, i / w);
        let v = out[i];
        let mut visit = |j: usize| {
            if out[j] == u32::MAX {
                out[j] = v;
                queue.push_back(j);
            }
        };
        if x > 0 {
            visit(i - 1);
        }
        if x + 1 < w {
            visit(i + 1);
        }
        if y > 0 {
            visit(i - w);
        }
        if y + 1 < h {
            visit(i + w);
        }
    }
    out
}

/// Counts frames per hole-fraction bucket. With thresholds `[a, b]` the
/// buckets are `[0, a)`, `[a, b)` and `[b, 1]`.
pub fn hole_histogram(warped: &[WarpedFrame], thresholds: &[f64]) -> Result<Vec<usize>> {
    histogram_of_fractions(warped.iter().map(|w| w.hole_fraction), thresholds)
}

pub fn histogram_of_fractions(fractions: impl IntoIterator<Item = f64>, thresholds: &[f64]) -> Result<Vec<usize>> {
    for (i, t) in thresholds.iter().enumerate() {
        if !(0.0..=1.0).contains(t) {
            return Err(Error::InvalidArgument(format!("threshold {t} outside [0, 1]")));
        }
        if i > 0 && *t <= thresholds[i - 1] {
            return Err(Error::InvalidArgument("thresholds must be strictly increasing".into()));
        }
    }
    let mut counts = vec![0usize; thresholds.len() + 1];
    for f in fractions {
        let bucket = thresholds.iter().position(|&t| f < t).unwrap_or(thresholds.len());
        counts[bucket] += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(w: usize, h: usize) -> Frame {
        let mut f = Frame::new(w, h, 0);
        for y in 0..h {
            for x in 0..w {
                f.set(x, y, [(x * 7 % 256) as u8, (y * 13 % 256) as u8, ((x + y) * 3 % 256) as u8]);
            }
        }
        f
    }

    #[test]
    fn zero_motion_is_identity() {
        let f = textured(32, 32);
        for steps in 1..=3 {
            let w = warp_frame(&f, &vec![[0.0, 0.0]; 32 * 32], steps).unwrap();
            assert_eq!(w.frame.pixels, f.pixels);
            assert_eq!(w.hole_fraction, 0.0);
            assert_eq!(w.frame.timestamp, steps);
        }
    }

    /// 16x16 square at x in [16, 32), y in [16, 32) moving (+4, 0) per slot.
    fn square_scene() -> MotionFrame {
        let (w, h) = (64, 48);
        let mut f = Frame::filled(w, h, [40, 40, 40], 0);
        let mut motion = vec![[0.0f32; 2]; w * h];
        let mut depth = vec![BACKGROUND_DEPTH; w * h];
        for y in 16..32 {
            for x in 16..32 {
                f.set(x, y, [250, 10, 10]);
                motion[y * w + x] = [4.0, 0.0];
                depth[y * w + x] = 5.0;
            }
        }
        MotionFrame {
            frame: f,
            motion,
            depth,
            valid: vec![true; w * h],
        }
    }

    #[test]
    fn translating_square_leaves_trailing_strip() {
        let src = square_scene();
        let out = warp_motion_frame(&src, 1).unwrap();
        for y in 0..48 {
            for x in 0..64 {
                let expect = (16..32).contains(&y) && (16..20).contains(&x);
                assert_eq!(out.hole_mask[y * 64 + x], expect, "({x},{y})");
            }
        }
        assert_eq!(out.hole_fraction, 64.0 / (64.0 * 48.0));
        // square landed at x in [20, 36)
        assert_eq!(out.frame.get(35, 20), [250, 10, 10]);
        assert_eq!(out.frame.get(36, 20), [40, 40, 40]);
    }

    #[test]
    fn camera_pan_opens_edge_column() {
        let f = textured(64, 32);
        let out = warp_frame(&f, &vec![[8.0, 0.0]; 64 * 32], 1).unwrap();
        assert_eq!(out.hole_fraction, 8.0 / 64.0);
        for y in 0..32 {
            for x in 0..64 {
                assert_eq!(out.hole_mask[y * 64 + x], x < 8);
            }
        }
        // filled from the nearest covered column
        assert_eq!(out.frame.get(3, 5), f.get(0, 5));
    }

    #[test]
    fn steps_out_of_range_rejected() {
        let f = textured(16, 16);
        let m = vec![[0.0, 0.0]; 256];
        assert!(warp_frame(&f, &m, 0).is_err());
        assert!(warp_frame(&f, &m, 4).is_err());
        assert!(warp_frame(&f, &m[..10], 1).is_err());
    }

    #[test]
    fn invalid_pixels_do_not_splat() {
        let mut src = square_scene();
        src.valid[0] = false;
        let out = warp_motion_frame(&src, 1).unwrap();
        assert!(out.hole_mask[0]);
    }

    #[test]
    fn histogram_buckets() {
        let c = histogram_of_fractions([0.05, 0.15, 0.25], &[0.1, 0.2]).unwrap();
        assert_eq!(c, vec![1, 1, 1]);
        let c = histogram_of_fractions(std::iter::empty(), &[0.1, 0.2]).unwrap();
        assert_eq!(c, vec![0, 0, 0]);
        assert!(histogram_of_fractions([0.1], &[0.2, 0.1]).is_err());
        assert!(histogram_of_fractions([0.1], &[0.2, 1.5]).is_err());
    }

    #[test]
    fn static_warps_fill_lowest_bucket() {
        let f = textured(16, 16);
        let ws: Vec<_> = (0..10)
            .map(|_| warp_frame(&f, &vec![[0.0, 0.0]; 256], 1).unwrap())
            .collect();
        assert_eq!(hole_histogram(&ws, &[0.1, 0.2]).unwrap(), vec![10, 0, 0]);
    }
}
