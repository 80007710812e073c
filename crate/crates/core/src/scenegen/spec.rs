use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::BLOCK_SIZE;

/// Depth assigned to the static background. Objects must be nearer.
pub const BACKGROUND_DEPTH: f32 = 100.0;

/// Parametric description of one synthetic episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    #[serde(default = "default_fps")]
    pub base_fps: f64,
    /// Number of rendered base frames.
    pub episode_len: usize,
    pub background: Background,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub camera: CameraSpec,
    pub rng_seed: u64,
}

fn default_fps() -> f64 {
    30.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackgroundKind {
    Flat,
    Gradient,
    TexturedNoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Background {
    pub kind: BackgroundKind,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Rect,
    Circle,
    TexturedSprite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalProfile {
    Flat,
    Spherical,
}

/// Object path in pixels, parameterized by time in base frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Trajectory {
    /// Constant velocity in pixels per base frame.
    Linear { start: [f64; 2], velocity: [f64; 2] },
    /// Constant speed, reflecting off the box `[min, max]` on each axis.
    Bounce {
        start: [f64; 2],
        velocity: [f64; 2],
        min: [f64; 2],
        max: [f64; 2],
    },
    Sinusoidal {
        center: [f64; 2],
        amplitude: [f64; 2],
        /// Period in base frames.
        period: f64,
        phase: f64,
    },
}

impl Trajectory {
    pub fn stationary(at: [f64; 2]) -> Self {
        Trajectory::Linear {
            start: at,
            velocity: [0.0, 0.0],
        }
    }

    /// Object center at time `t` (base frames).
    pub fn position(&self, t: f64) -> [f64; 2] {
        match self {
            Trajectory::Linear { start, velocity } => {
                [start[0] + velocity[0] * t, start[1] + velocity[1] * t]
            }
            Trajectory::Bounce {
                start,
                velocity,
                min,
                max,
            } => {
                let mut out = [0.0; 2];
                for a in 0..2 {
                    out[a] = reflect(start[a] + velocity[a] * t, min[a], max[a]);
                }
                out
            }
            Trajectory::Sinusoidal {
                center,
                amplitude,
                period,
                phase,
            } => {
                let arg = 2.0 * std::f64::consts::PI * t / period + phase;
                [center[0] + amplitude[0] * arg.sin(), center[1] + amplitude[1] * arg.sin()]
            }
        }
    }

    fn check(&self, errs: &mut Vec<String>, label: &str) {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            Trajectory::Linear { start, velocity } => {
                if !finite(start) || !finite(velocity) {
                    errs.push(format!("{label}: linear trajectory has non-finite values"));
                }
            }
            Trajectory::Bounce {
                start,
                velocity,
                min,
                max,
            } => {
                if !finite(start) || !finite(velocity) || !finite(min) || !finite(max) {
                    errs.push(format!("{label}: bounce trajectory has non-finite values"));
                } else if (0..2).any(|a| max[a] <= min[a]) {
                    errs.push(format!("{label}: bounce box must have max > min on both axes"));
                }
            }
            Trajectory::Sinusoidal {
                center,
                amplitude,
                period,
                phase,
            } => {
                if !finite(center) || !finite(amplitude) || !phase.is_finite() {
                    errs.push(format!("{label}: sinusoidal trajectory has non-finite values"));
                }
                if !(period.is_finite() && *period > 0.0) {
                    errs.push(format!("{label}: sinusoidal period must be positive"));
                }
            }
        }
    }
}

/// Triangle-wave fold of `v` into `[lo, hi]`.
fn reflect(v: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    let m = (v - lo).rem_euclid(2.0 * span);
    if m <= span {
        lo + m
    } else {
        hi - (m - span)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub shape: Shape,
    /// Edge length (rect, sprite) or diameter (circle) in pixels.
    pub size: f64,
    pub trajectory: Trajectory,
    /// Smaller is nearer.
    pub depth: f32,
    pub object_id: u8,
    #[serde(default = "default_profile")]
    pub normal_profile: NormalProfile,
    /// Base color; derived from the scene seed when absent.
    #[serde(default)]
    pub color: Option<[u8; 3]>,
}

fn default_profile() -> NormalProfile {
    NormalProfile::Flat
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    /// Camera translation in pixels per base frame; screen content moves by the negation.
    pub pan_velocity: [f64; 2],
    /// Scale factor per base frame.
    pub zoom_rate: f64,
}

impl Default for CameraSpec {
    fn default() -> Self {
        Self {
            pan_velocity: [0.0, 0.0],
            zoom_rate: 1.0,
        }
    }
}

impl CameraSpec {
    /// Upper bound on the fraction of the frame that pan and zoom can expose
    /// within one quarter-slot.
    pub fn disocclusion_bound(&self, width: usize, height: usize) -> f64 {
        let fx = (self.pan_velocity[0].abs() / 4.0 / width as f64).min(1.0);
        let fy = (self.pan_velocity[1].abs() / 4.0 / height as f64).min(1.0);
        let zq = self.zoom_rate.powf(0.25);
        let area = (zq * zq).min(1.0 / (zq * zq));
        1.0 - (1.0 - fx) * (1.0 - fy) * area
    }
}

impl SceneSpec {
    /// Collects every violated invariant instead of stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.width == 0 || self.width % BLOCK_SIZE != 0 {
            errs.push(format!("width {} must be a positive multiple of {BLOCK_SIZE}", self.width));
        }
        if self.height == 0 || self.height % BLOCK_SIZE != 0 {
            errs.push(format!("height {} must be a positive multiple of {BLOCK_SIZE}", self.height));
        }
        if !(self.base_fps.is_finite() && self.base_fps > 0.0) {
            errs.push(format!("base_fps {} must be positive", self.base_fps));
        }
        if self.episode_len < 4 {
            errs.push(format!("episode_len {} must be at least 4", self.episode_len));
        }
        let mut seen = [false; 256];
        for (i, o) in self.objects.iter().enumerate() {
            let label = format!("objects[{i}]");
            if o.object_id == 0 {
                errs.push(format!("{label}: object_id 0 is reserved for the background"));
            } else if seen[o.object_id as usize] {
                errs.push(format!("{label}: duplicate object_id {}", o.object_id));
            }
            seen[o.object_id as usize] = true;
            if !(o.size.is_finite() && o.size > 0.0) {
                errs.push(format!("{label}: size must be positive"));
            }
            if !(o.depth.is_finite() && o.depth > 0.0 && o.depth < BACKGROUND_DEPTH) {
                errs.push(format!("{label}: depth must lie in (0, {BACKGROUND_DEPTH})"));
            }
            o.trajectory.check(&mut errs, &label);
        }
        let cam = &self.camera;
        if !(cam.pan_velocity.iter().all(|v| v.is_finite()) && cam.zoom_rate.is_finite() && cam.zoom_rate > 0.0) {
            errs.push("camera: pan and zoom must be finite with zoom_rate > 0".into());
        } else if self.width > 0 && self.height > 0 {
            let bound = cam.disocclusion_bound(self.width, self.height);
            if bound > 0.5 {
                errs.push(format!(
                    "camera: motion exposes up to {:.1}% of the frame per quarter-slot (limit 50%)",
                    bound * 100.0
                ));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidScene(errs))
        }
    }

    /// Number of ground-truth frames (one per quarter-slot).
    pub fn frame_count(&self) -> usize {
        4 * self.episode_len - 3
    }
}
