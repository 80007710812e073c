//! Multi-frame hole-filling extrapolator and the latency model that decides
//! when its output can be shown.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{Frame, MotionFrame};
use crate::scenegen::BACKGROUND_DEPTH;
use crate::warp::reproject;

/// Diffusion passes before giving up and painting mid-gray.
pub const MAX_DIFFUSION_ITERS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ResolutionClass {
    #[serde(rename = "480p")]
    P480,
    #[serde(rename = "720p")]
    P720,
    #[serde(rename = "1080p")]
    P1080,
}

impl ResolutionClass {
    pub const ALL: [ResolutionClass; 3] = [ResolutionClass::P480, ResolutionClass::P720, ResolutionClass::P1080];

    /// Smallest class whose nominal height covers `height`.
    pub fn for_height(height: usize) -> Self {
        match height {
            0..=480 => ResolutionClass::P480,
            481..=720 => ResolutionClass::P720,
            _ => ResolutionClass::P1080,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ResolutionClass::P480 => "480p",
            ResolutionClass::P720 => "720p",
            ResolutionClass::P1080 => "1080p",
        }
    }
}

impl fmt::Display for ResolutionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ResolutionClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "480p" => Ok(ResolutionClass::P480),
            "720p" => Ok(ResolutionClass::P720),
            "1080p" => Ok(ResolutionClass::P1080),
            other => Err(Error::UnknownResolution(other.to_string())),
        }
    }
}

/// Per-stage cost of one extrapolation, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageLatency {
    pub gbuffer_ms: f64,
    pub warp_ms: f64,
    pub hole_mark_ms: f64,
    pub inference_ms: f64,
}

impl StageLatency {
    pub const fn new(gbuffer_ms: f64, warp_ms: f64, hole_mark_ms: f64, inference_ms: f64) -> Self {
        Self {
            gbuffer_ms,
            warp_ms,
            hole_mark_ms,
            inference_ms,
        }
    }

    fn check(&self, class: ResolutionClass) -> Result<()> {
        let fields = [
            ("gbuffer_ms", self.gbuffer_ms),
            ("warp_ms", self.warp_ms),
            ("hole_mark_ms", self.hole_mark_ms),
            ("inference_ms", self.inference_ms),
        ];
        let bad: Vec<String> = fields
            .iter()
            .filter(|(_, v)| !(v.is_finite() && *v > 0.0))
            .map(|(k, v)| format!("latency.{class}.{k} = {v} must be > 0"))
            .collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidLatency(bad.join("; ")))
        }
    }

    /// Cost charged to an extrapolation request. G-buffer generation belongs
    /// to the renderer.
    pub fn request_ms(&self) -> f64 {
        self.warp_ms + self.hole_mark_ms + self.inference_ms
    }
}

/// Measured stage costs per benchmark application (ms).
pub const RUNTIME_TABLE: [(&str, ResolutionClass, StageLatency); 9] = [
    ("LB", ResolutionClass::P480, StageLatency::new(0.17, 0.95, 1.94, 3.67)),
    ("TR", ResolutionClass::P480, StageLatency::new(0.36, 0.89, 1.89, 3.78)),
    ("VL", ResolutionClass::P480, StageLatency::new(0.48, 0.83, 1.81, 3.45)),
    ("TN", ResolutionClass::P480, StageLatency::new(0.34, 0.96, 1.89, 3.61)),
    ("TN2", ResolutionClass::P720, StageLatency::new(1.01, 1.58, 2.49, 7.04)),
    ("TN3", ResolutionClass::P1080, StageLatency::new(1.02, 2.89, 4.57, 13.54)),
    ("SL", ResolutionClass::P480, StageLatency::new(0.24, 0.95, 1.93, 3.55)),
    ("SL2", ResolutionClass::P720, StageLatency::new(1.24, 1.67, 2.59, 7.09)),
    ("SL3", ResolutionClass::P1080, StageLatency::new(2.1, 2.91, 4.63, 13.78)),
];

pub fn runtime_row(app: &str) -> Option<StageLatency> {
    RUNTIME_TABLE.iter().find(|(a, _, _)| *a == app).map(|(_, _, s)| *s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    entries: BTreeMap<ResolutionClass, StageLatency>,
}

impl Default for LatencyModel {
    /// LB at 480p, SL2 at 720p, SL3 at 1080p.
    fn default() -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(ResolutionClass::P480, runtime_row("LB").unwrap());
        entries.insert(ResolutionClass::P720, runtime_row("SL2").unwrap());
        entries.insert(ResolutionClass::P1080, runtime_row("SL3").unwrap());
        Self { entries }
    }
}

impl LatencyModel {
    pub fn new(entries: BTreeMap<ResolutionClass, StageLatency>) -> Result<Self> {
        for (class, s) in &entries {
            s.check(*class)?;
        }
        Ok(Self { entries })
    }

    pub fn set(&mut self, class: ResolutionClass, stages: StageLatency) -> Result<()> {
        stages.check(class)?;
        self.entries.insert(class, stages);
        Ok(())
    }

    pub fn stages(&self, class: ResolutionClass) -> Result<StageLatency> {
        self.entries
            .get(&class)
            .copied()
            .ok_or_else(|| Error::UnknownResolution(class.to_string()))
    }

    pub fn classes(&self) -> impl Iterator<Item = ResolutionClass> + '_ {
        self.entries.keys().copied()
    }
}

/// Milliseconds from issuing an extrapolation to its output being ready.
pub fn total_latency(model: &LatencyModel, class: ResolutionClass) -> Result<f64> {
    Ok(model.stages(class)?.request_ms())
}

pub fn quarter_slot_ms(base_fps: f64) -> f64 {
    1000.0 / (4.0 * base_fps)
}

/// Whole quarter-slots until a job of `latency_ms` completes.
pub fn slots_to_complete(latency_ms: f64, base_fps: f64) -> u32 {
    (latency_ms / quarter_slot_ms(base_fps)).ceil().max(1.0) as u32
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtrapolationTiming {
    pub issue_slot: u32,
    pub latency_ms: f64,
    pub base_fps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolatedFrame {
    /// Output pixels; the timestamp is the target quarter-slot.
    pub frame: Frame,
    pub issue_slot: u32,
    pub available_at: u32,
    pub source_timestamp: u32,
    /// Pixels that came from a reprojection rather than diffusion.
    pub valid: Vec<bool>,
    pub motion: Vec<[f32; 2]>,
    pub depth: Vec<f32>,
}

impl ExtrapolatedFrame {
    pub fn to_motion_frame(&self) -> MotionFrame {
        MotionFrame {
            frame: self.frame.clone(),
            motion: self.motion.clone(),
            depth: self.depth.clone(),
            valid: self.valid.clone(),
        }
    }
}

/// Extrapolates `steps` quarter-slots past the newest of three history frames
/// (oldest first). Holes in the warped newest frame are filled from the older
/// frames reprojected to the same target slot, then by diffusion.
pub fn extrapolate_frame(history: &[MotionFrame], steps: u32, timing: &ExtrapolationTiming) -> Result<ExtrapolatedFrame> {
    if history.len() < 3 {
        return Err(Error::InsufficientHistory(history.len()));
    }
    if history.len() > 3 {
        return Err(Error::InvalidArgument(format!(
            "extrapolation takes exactly 3 history frames, got {}",
            history.len()
        )));
    }
    if !(1..=3).contains(&steps) {
        return Err(Error::InvalidArgument(format!("extrapolation steps must be 1, 2 or 3, got {steps}")));
    }
    let newest = &history[2];
    for h in &history[..2] {
        if h.frame.dims() != newest.frame.dims() {
            return Err(Error::dims(newest.frame.dims(), h.frame.dims()));
        }
        if h.timestamp() >= newest.timestamp() {
            return Err(Error::InvalidArgument("history must be ordered oldest first".into()));
        }
    }
    let target = newest.timestamp() + steps;
    let (w, h) = newest.frame.dims();
    let n = w * h;

    let primary = reproject(newest, steps);
    let older: Vec<_> = history[..2]
        .iter()
        .rev()
        .map(|f| reproject(f, target - f.timestamp()))
        .collect();

    let mut frame = primary.frame;
    frame.timestamp = target;
    let mut motion = primary.motion;
    let mut depth = primary.depth;
    let mut defined: Vec<bool> = primary.hole_mask.iter().map(|hole| !hole).collect();
    for i in 0..n {
        if defined[i] {
            continue;
        }
        if let Some(cand) = older.iter().find(|c| !c.hole_mask[i]) {
            frame.set_pixel(i, cand.frame.pixel(i));
            motion[i] = cand.motion[i];
            depth[i] = cand.depth[i];
            defined[i] = true;
        }
    }

    let valid = defined.clone();
    if valid.iter().any(|v| !v) {
        diffuse(&mut frame, &mut defined);
        for i in 0..n {
            if !valid[i] {
                motion[i] = [0.0, 0.0];
                depth[i] = BACKGROUND_DEPTH;
            }
        }
    }

    let available_at = timing.issue_slot + slots_to_complete(timing.latency_ms, timing.base_fps);
    Ok(ExtrapolatedFrame {
        frame,
        issue_slot: timing.issue_slot,
        available_at,
        source_timestamp: newest.timestamp(),
        valid,
        motion,
        depth,
    })
}

/// Fills undefined pixels with the mean of their defined 8-neighbors, one
/// ring per pass, until nothing changes. Leftovers become mid-gray.
fn diffuse(frame: &mut Frame, defined: &mut [bool]) {
    let (w, h) = frame.dims();
    for _ in 0..MAX_DIFFUSION_ITERS {
        let mut updates: Vec<(usize, [u8; 3])> = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if defined[i] {
                    continue;
                }
                let mut sum = [0u32; 3];
                let mut count = 0u32;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let j = ny as usize * w + nx as usize;
                        if defined[j] {
                            let p = frame.pixel(j);
                            for c in 0..3 {
                                sum[c] += p[c] as u32;
                            }
                            count += 1;
                        }
                    }
                }
                if count > 0 {
                    let mean = [
                        ((sum[0] as f64) / count as f64).round() as u8,
                        ((sum[1] as f64) / count as f64).round() as u8,
                        ((sum[2] as f64) / count as f64).round() as u8,
                    ];
                    updates.push((i, mean));
                }
            }
        }
        if updates.is_empty() {
            break;
        }
        for (i, rgb) in updates {
            frame.set_pixel(i, rgb);
            defined[i] = true;
        }
    }
    for i in 0..defined.len() {
        if !defined[i] {
            frame.set_pixel(i, [128, 128, 128]);
            defined[i] = true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn timing() -> ExtrapolationTiming {
        ExtrapolationTiming {
            issue_slot: 8,
            latency_ms: 6.56,
            base_fps: 30.0,
        }
    }

    fn textured(w: usize, h: usize, ts: u32) -> Frame {
        let mut f = Frame::new(w, h, ts);
        for y in 0..h {
            for x in 0..w {
                f.set(x, y, [(x * 9 % 256) as u8, (y * 5 % 256) as u8, ((x * y) % 256) as u8]);
            }
        }
        f
    }

    fn still(ts: u32) -> MotionFrame {
        MotionFrame::with_motion(textured(32, 32, ts), vec![[0.0, 0.0]; 1024]).unwrap()
    }

    #[test]
    fn totals_follow_runtime_table() {
        let m = LatencyModel::default();
        assert!((total_latency(&m, ResolutionClass::P480).unwrap() - 6.56).abs() < 1e-9);
        assert!((total_latency(&m, ResolutionClass::P1080).unwrap() - 21.32).abs() < 1e-9);
    }

    #[test]
    fn zero_latency_rejected() {
        let mut m = LatencyModel::default();
        assert!(m.set(ResolutionClass::P480, StageLatency::new(0.0, 0.0, 0.0, 0.0)).is_err());
        let mut e = BTreeMap::new();
        e.insert(ResolutionClass::P720, StageLatency::new(1.0, 1.0, -1.0, 1.0));
        assert!(LatencyModel::new(e).is_err());
    }

    #[test]
    fn unknown_class_rejected() {
        let m = LatencyModel::new(BTreeMap::new()).unwrap();
        assert!(matches!(total_latency(&m, ResolutionClass::P720), Err(Error::UnknownResolution(_))));
        assert!("4k".parse::<ResolutionClass>().is_err());
    }

    #[test]
    fn static_history_returns_newest() {
        let hist = [still(0), still(4), still(8)];
        for steps in 1..=3 {
            let e = extrapolate_frame(&hist, steps, &timing()).unwrap();
            assert_eq!(e.frame.pixels, hist[2].frame.pixels);
            assert!(e.valid.iter().all(|&v| v));
            assert_eq!(e.frame.timestamp, 8 + steps);
        }
    }

    #[test]
    fn availability_respects_latency() {
        let hist = [still(0), still(4), still(8)];
        let e = extrapolate_frame(&hist, 2, &timing()).unwrap();
        assert_eq!(e.available_at, 9);
        let slow = ExtrapolationTiming {
            latency_ms: 21.32,
            ..timing()
        };
        assert_eq!(extrapolate_frame(&hist, 2, &slow).unwrap().available_at, 11);
    }

    #[test]
    fn needs_three_frames() {
        let hist = [still(4), still(8)];
        assert!(matches!(
            extrapolate_frame(&hist, 1, &timing()),
            Err(Error::InsufficientHistory(2))
        ));
    }

    #[test]
    fn degenerate_history_uses_same_values() {
        let mk = |ts| {
            let mut mf = MotionFrame::with_motion(textured(32, 32, ts), vec![[2.0, 0.0]; 1024]).unwrap();
            mf.frame.timestamp = ts;
            mf
        };
        let mut hist = [mk(8), mk(8), mk(8)];
        hist[0].frame.timestamp = 0;
        hist[1].frame.timestamp = 4;
        let e = extrapolate_frame(&hist, 1, &timing()).unwrap();
        let warped = reproject(&hist[2], 1);
        let older = reproject(&hist[1], 5);
        for i in 0..1024 {
            if !warped.hole_mask[i] {
                assert_eq!(e.frame.pixel(i), warped.frame.pixel(i));
            } else if !older.hole_mask[i] {
                assert_eq!(e.frame.pixel(i), older.frame.pixel(i));
            }
        }
    }

    #[test]
    fn full_hole_frame_goes_gray() {
        let mut f = Frame::filled(4, 4, [10, 10, 10], 0);
        f.timestamp = 0;
        let mut defined = vec![false; 16];
        diffuse(&mut f, &mut defined);
        assert!(f.pixels.iter().all(|&p| p == 128));
    }

    #[test]
    fn diffusion_averages_neighbors() {
        let mut f = Frame::filled(3, 1, [0, 0, 0], 0);
        f.set(0, 0, [100, 0, 0]);
        f.set(2, 0, [200, 0, 0]);
        let mut defined = vec![true, false, true];
        diffuse(&mut f, &mut defined);
        assert_eq!(f.get(1, 0), [150, 0, 0]);
    }
}
