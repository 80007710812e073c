//! Per-frame environment features and the 44-element predictor input.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::GBufferSet;
use crate::scenegen::BACKGROUND_DEPTH;
use crate::scheduler::NodeId;

pub const EMD_BINS: usize = 64;
pub const MIN_OBJECT_AREA: usize = 4;
pub const ENV_LEN: usize = 6;
pub const TEMPORAL_LEN: usize = 5;
pub const STEP_LEN: usize = ENV_LEN + TEMPORAL_LEN;
pub const HISTORY_LEN: usize = 4;
pub const STATE_LEN: usize = STEP_LEN * HISTORY_LEN;

const Q16_ONE: f64 = 65536.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnvVector {
    pub n_d: u32,
    pub emd_wn: f64,
    pub emd_wp: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub r: f64,
}

/// One-hot over d1..d5. The all-zero vector stands for "no decision", used
/// for history entries before the first decision of an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
pub struct TemporalVector(pub [u8; TEMPORAL_LEN]);

impl TemporalVector {
    pub fn node(node: NodeId) -> Self {
        let mut v = [0; TEMPORAL_LEN];
        v[node.index()] = 1;
        Self(v)
    }

    pub fn none() -> Self {
        Self([0; TEMPORAL_LEN])
    }

    pub fn active(&self) -> Option<NodeId> {
        self.0.iter().position(|&b| b == 1).map(|i| NodeId::ALL[i])
    }
}

/// Q16.16 encoded predictor input, newest state first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateVector(pub Vec<i32>);

impl StateVector {
    pub fn zeros() -> Self {
        Self(vec![0; STATE_LEN])
    }

    pub fn encode(values: &[f64]) -> Result<Self> {
        if values.len() != STATE_LEN {
            return Err(Error::InvalidArgument(format!(
                "state needs {STATE_LEN} values, got {}",
                values.len()
            )));
        }
        Ok(Self(values.iter().map(|&v| to_q16(v)).collect()))
    }

    pub fn decode(&self) -> Vec<f64> {
        self.0.iter().map(|&q| q as f64 / Q16_ONE).collect()
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.0.iter().map(|&q| (q as f64 / Q16_ONE) as f32).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn to_q16(v: f64) -> i32 {
    let scaled = (v * Q16_ONE).round();
    scaled.clamp(i32::MIN as f64, i32::MAX as f64) as i32
}

/// Scale factors applied before fixed-point encoding. Each normalized value
/// is clamped to `[0, clamp_max]`. Motion is measured per quarter-slot, so
/// the variance and EMD divisors are small.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureScaling {
    pub var_scale: f64,
    pub emd_wn_range: f64,
    pub emd_wp_range: f64,
    pub resolution_scale: f64,
    pub n_d_scale: f64,
    pub clamp_max: f64,
}

impl Default for FeatureScaling {
    fn default() -> Self {
        Self {
            var_scale: 0.0625,
            emd_wn_range: 0.005,
            emd_wp_range: 0.25,
            resolution_scale: 1920.0 * 1080.0,
            n_d_scale: 16.0,
            clamp_max: 4.0,
        }
    }
}

impl FeatureScaling {
    pub fn normalize(&self, env: &EnvVector) -> [f64; ENV_LEN] {
        let c = |v: f64| v.clamp(0.0, self.clamp_max);
        [
            c(env.n_d as f64 / self.n_d_scale),
            c(env.emd_wn / self.emd_wn_range),
            c(env.emd_wp / self.emd_wp_range),
            c(env.var_x / self.var_scale),
            c(env.var_y / self.var_scale),
            c(env.r / self.resolution_scale),
        ]
    }

    pub fn check(&self) -> Result<()> {
        let all = [
            ("var_scale", self.var_scale),
            ("emd_wn_range", self.emd_wn_range),
            ("emd_wp_range", self.emd_wp_range),
            ("resolution_scale", self.resolution_scale),
            ("n_d_scale", self.n_d_scale),
            ("clamp_max", self.clamp_max),
        ];
        for (k, v) in all {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("features.{k} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Population variance of each component over all blocks.
pub fn motion_variance(blocks: &[[f32; 2]]) -> (f64, f64) {
    if blocks.is_empty() {
        return (0.0, 0.0);
    }
    let n = blocks.len() as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for b in blocks {
        sx += b[0] as f64;
        sy += b[1] as f64;
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut vx, mut vy) = (0.0, 0.0);
    for b in blocks {
        vx += (b[0] as f64 - mx).powi(2);
        vy += (b[1] as f64 - my).powi(2);
    }
    (vx / n, vy / n)
}

/// Value range of one raster channel for histogramming. Values outside are
/// clamped into the end bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRange {
    pub lo: f64,
    pub hi: f64,
}

impl ChannelRange {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / EMD_BINS as f64
    }

    pub fn bin(&self, v: f64) -> usize {
        if !v.is_finite() {
            return if v > 0.0 { EMD_BINS - 1 } else { 0 };
        }
        let t = ((v - self.lo) / (self.hi - self.lo) * EMD_BINS as f64).floor();
        t.clamp(0.0, (EMD_BINS - 1) as f64) as usize
    }
}

pub const NORMAL_RANGES: [ChannelRange; 3] = [
    ChannelRange::new(-1.0, 1.0),
    ChannelRange::new(-1.0, 1.0),
    ChannelRange::new(-1.0, 1.0),
];

/// World-position ranges for a `width x height` scene: one frame of margin on
/// each side in x and y to absorb camera pan, and the full depth range.
pub fn position_ranges(width: usize, height: usize) -> [ChannelRange; 3] {
    let (w, h) = (width as f64, height as f64);
    [
        ChannelRange::new(-w, 2.0 * w),
        ChannelRange::new(-h, 2.0 * h),
        ChannelRange::new(0.0, BACKGROUND_DEPTH as f64),
    ]
}

fn histogram<const C: usize>(raster: &[[f32; C]], ch: usize, range: ChannelRange) -> [f64; EMD_BINS] {
    let mut hist = [0.0; EMD_BINS];
    for v in raster {
        hist[range.bin(v[ch] as f64)] += 1.0;
    }
    let n = raster.len().max(1) as f64;
    for h in &mut hist {
        *h /= n;
    }
    hist
}

/// 1-D EMD between two normalized histograms over a common range.
pub fn histogram_emd(a: &[f64; EMD_BINS], b: &[f64; EMD_BINS], bin_width: f64) -> f64 {
    let (mut ca, mut cb, mut acc) = (0.0, 0.0, 0.0);
    for k in 0..EMD_BINS {
        ca += a[k];
        cb += b[k];
        acc += (ca - cb).abs();
    }
    acc * bin_width
}

/// Mean over channels of the 1-D histogram EMD between two rasters.
pub fn buffer_emd<const C: usize>(current: &[[f32; C]], previous: &[[f32; C]], ranges: &[ChannelRange; C]) -> Result<f64> {
    if current.len() != previous.len() {
        return Err(Error::InvalidArgument(format!(
            "buffer sizes differ: {} vs {}",
            current.len(),
            previous.len()
        )));
    }
    if C == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (ch, range) in ranges.iter().enumerate() {
        let a = histogram(current, ch, *range);
        let b = histogram(previous, ch, *range);
        total += histogram_emd(&a, &b, range.bin_width());
    }
    Ok(total / C as f64)
}

/// Number of 4-connected components of nonzero stencil pixels with at least
/// [`MIN_OBJECT_AREA`] pixels.
pub fn count_dynamic_objects(stencil: &[u8], width: usize, height: usize) -> Result<u32> {
    if stencil.len() != width * height {
        return Err(Error::dims((width, height), (stencil.len(), 1)));
    }
    let mut seen = vec![false; stencil.len()];
    let mut stack = Vec::new();
    let mut count = 0;
    for start in 0..stencil.len() {
        if stencil[start] == 0 || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut area = 0usize;
        while let Some(i) = stack.pop() {
            area += 1;
            let (x, y) = (i % width, i / width);
            let mut push = |j: usize| {
                if stencil[j] != 0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                push(i - 1);
            }
            if x + 1 < width {
                push(i + 1);
            }
            if y > 0 {
                push(i - width);
            }
            if y + 1 < height {
                push(i + width);
            }
        }
        if area >= MIN_OBJECT_AREA {
            count += 1;
        }
    }
    Ok(count)
}

/// Environment vector of `current`, with EMD taken against `previous` (zero
/// when there is no previous frame).
pub fn env_vector(current: &GBufferSet, previous: Option<&GBufferSet>) -> Result<EnvVector> {
    let (var_x, var_y) = motion_variance(&current.motion_blocks);
    let n_d = count_dynamic_objects(&current.stencil, current.width, current.height)?;
    let (emd_wn, emd_wp) = match previous {
        Some(p) => {
            if (p.width, p.height) != (current.width, current.height) {
                return Err(Error::dims((current.width, current.height), (p.width, p.height)));
            }
            (
                buffer_emd(&current.world_normal, &p.world_normal, &NORMAL_RANGES)?,
                buffer_emd(
                    &current.world_position,
                    &p.world_position,
                    &position_ranges(current.width, current.height),
                )?,
            )
        }
        None => (0.0, 0.0),
    };
    Ok(EnvVector {
        n_d,
        emd_wn,
        emd_wp,
        var_x,
        var_y,
        r: (current.width * current.height) as f64,
    })
}

/// Environment vectors for every base frame of an episode.
pub fn episode_env(gbuffers: &[GBufferSet]) -> Result<Vec<EnvVector>> {
    (0..gbuffers.len())
        .map(|t| env_vector(&gbuffers[t], t.checked_sub(1).map(|p| &gbuffers[p])))
        .collect()
}

/// Layout: four blocks of `[n_d, emd_wn, emd_wp, var_x, var_y, r, T0..T4]`,
/// newest first, each normalized then Q16.16 encoded.
pub fn assemble_state(history: &[(EnvVector, TemporalVector); HISTORY_LEN], scaling: &FeatureScaling) -> StateVector {
    let mut values = Vec::with_capacity(STATE_LEN);
    for (env, tv) in history {
        values.extend_from_slice(&scaling.normalize(env));
        values.extend(tv.0.iter().map(|&b| b as f64));
    }
    StateVector(values.iter().map(|&v| to_q16(v)).collect())
}

/// Rolling window of the most recent `(EnvVector, TemporalVector)` entries.
#[derive(Debug, Clone, Default)]
pub struct StateHistory {
    past: VecDeque<(EnvVector, TemporalVector)>,
}

impl StateHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a completed step; only the newest three are kept.
    pub fn push(&mut self, env: EnvVector, tv: TemporalVector) {
        self.past.push_front((env, tv));
        self.past.truncate(HISTORY_LEN - 1);
    }

    /// History tuple with `current` in front and zero-filled gaps.
    pub fn with_current(&self, current: (EnvVector, TemporalVector)) -> [(EnvVector, TemporalVector); HISTORY_LEN] {
        let mut out = [(EnvVector::default(), TemporalVector::none()); HISTORY_LEN];
        out[0] = current;
        for (slot, entry) in out[1..].iter_mut().zip(&self.past) {
            *slot = *entry;
        }
        out
    }
}

pub fn feature_csv(envs: &[EnvVector]) -> String {
    let mut s = String::from("frame,n_d,emd_wn,emd_wp,var_x,var_y,r\n");
    for (i, e) in envs.iter().enumerate() {
        let _ = writeln!(s, "{i},{},{},{},{},{},{}", e.n_d, e.emd_wn, e.emd_wp, e.var_x, e.var_y, e.r);
    }
    s
}
