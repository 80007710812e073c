//! Seeded scene families spanning static to high-motion content, and an
//! object-speed sweep.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::episode_env;
use crate::scheduler::{run_episode, FixedPolicy, Scenario, SchedulerConfig};
use crate::scenegen::{
    render_scene, Background, BackgroundKind, CameraSpec, Episode, NormalProfile, ObjectSpec, SceneSpec, Shape,
    Trajectory,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Static,
    LowMotion,
    MediumMotion,
    HighMotion,
    CameraPan,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Static,
        Family::LowMotion,
        Family::MediumMotion,
        Family::HighMotion,
        Family::CameraPan,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Static => "static",
            Family::LowMotion => "low-motion",
            Family::MediumMotion => "medium-motion",
            Family::HighMotion => "high-motion",
            Family::CameraPan => "camera-pan",
        }
    }

    fn salt(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scene family {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub width: usize,
    pub height: usize,
    pub base_fps: f64,
    pub episode_len: usize,
    pub episodes_per_family: usize,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            width: 128,
            height: 96,
            base_fps: 30.0,
            episode_len: 32,
            episodes_per_family: 12,
            seed: 7,
        }
    }
}

fn episode_rng(seed: u64, salt: u64, index: usize) -> ChaCha8Rng {
    let mut s = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    s = s.rotate_left(23) ^ (index as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    ChaCha8Rng::seed_from_u64(s)
}

fn random_dir<R: Rng>(rng: &mut R) -> [f64; 2] {
    let a = rng.random_range(0.0..std::f64::consts::TAU);
    [a.cos(), a.sin()]
}

fn pick_shape<R: Rng>(rng: &mut R) -> Shape {
    [Shape::Rect, Shape::Circle, Shape::TexturedSprite][rng.random_range(0..3)]
}

struct ObjectPlan {
    count: (usize, usize),
    size: (f64, f64),
    speed: (f64, f64),
}

fn objects<R: Rng>(rng: &mut R, cfg: &SuiteConfig, plan: &ObjectPlan) -> Vec<ObjectSpec> {
    let n = rng.random_range(plan.count.0..=plan.count.1);
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    (0..n)
        .map(|k| {
            let size = rng
                .random_range(plan.size.0..=plan.size.1)
                .round()
                .min((w.min(h) - 2.0).max(1.0));
            let half = size / 2.0;
            let start = [rng.random_range(half..w - half), rng.random_range(half..h - half)];
            let speed = if plan.speed.1 > 0.0 {
                rng.random_range(plan.speed.0..=plan.speed.1)
            } else {
                0.0
            };
            let d = random_dir(rng);
            let trajectory = if speed == 0.0 {
                Trajectory::stationary(start)
            } else {
                Trajectory::Bounce {
                    start,
                    velocity: [d[0] * speed, d[1] * speed],
                    min: [half, half],
                    max: [w - half, h - half],
                }
            };
            ObjectSpec {
                shape: pick_shape(rng),
                size,
                trajectory,
                depth: rng.random_range(5.0..90.0f32),
                object_id: k as u8 + 1,
                normal_profile: if rng.random_bool(0.5) {
                    NormalProfile::Spherical
                } else {
                    NormalProfile::Flat
                },
                color: None,
            }
        })
        .collect()
}

/// Scene description for episode `index` of `family`.
pub fn family_spec(family: Family, index: usize, cfg: &SuiteConfig) -> SceneSpec {
    let mut rng = episode_rng(cfg.seed, family.salt(), index);
    let background = Background {
        kind: BackgroundKind::TexturedNoise,
        seed: rng.random(),
    };
    let mut camera = CameraSpec::default();
    let objects = match family {
        Family::Static => objects(
            &mut rng,
            cfg,
            &ObjectPlan {
                count: (2, 5),
                size: (12.0, 28.0),
                speed: (0.0, 0.0),
            },
        ),
        Family::LowMotion => objects(
            &mut rng,
            cfg,
            &ObjectPlan {
                count: (2, 5),
                size: (12.0, 28.0),
                speed: (0.25, 1.0),
            },
        ),
        Family::MediumMotion => objects(
            &mut rng,
            cfg,
            &ObjectPlan {
                count: (3, 6),
                size: (12.0, 24.0),
                speed: (4.0, 10.0),
            },
        ),
        Family::HighMotion => objects(
            &mut rng,
            cfg,
            &ObjectPlan {
                count: (7, 10),
                size: (22.0, 34.0),
                speed: (24.0, 40.0),
            },
        ),
        Family::CameraPan => {
            let d = random_dir(&mut rng);
            let s = rng.random_range(4.0..12.0);
            camera.pan_velocity = [d[0] * s, d[1] * s];
            objects(
                &mut rng,
                cfg,
                &ObjectPlan {
                    count: (1, 3),
                    size: (12.0, 24.0),
                    speed: (1.0, 4.0),
                },
            )
        }
    };
    SceneSpec {
        width: cfg.width,
        height: cfg.height,
        base_fps: cfg.base_fps,
        episode_len: cfg.episode_len,
        background,
        objects,
        camera,
        rng_seed: rng.random(),
    }
}

/// Renders `cfg.episodes_per_family` episodes of `family`.
pub fn render_family(family: Family, cfg: &SuiteConfig) -> Result<Vec<Episode>> {
    (0..cfg.episodes_per_family)
        .into_par_iter()
        .map(|i| render_scene(&family_spec(family, i, cfg), Some(family.as_str())))
        .collect()
}

/// Same layout at every speed: objects keep their start, size, depth and
/// horizontal direction; only the speed (px per base frame) changes.
pub fn speed_sweep_spec(speed: f64, index: usize, cfg: &SuiteConfig) -> SceneSpec {
    let mut rng = episode_rng(cfg.seed, 0x5eed, index);
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let n = 4;
    let objects = (0..n)
        .map(|k| {
            let size: f64 = rng.random_range(16.0..=24.0f64).round();
            let half = size / 2.0;
            let start = [rng.random_range(half..w - half), rng.random_range(half..h - half)];
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let trajectory = if speed == 0.0 {
                Trajectory::stationary(start)
            } else {
                Trajectory::Bounce {
                    start,
                    velocity: [sign * speed, 0.0],
                    min: [half, half],
                    max: [w - half, h - half],
                }
            };
            ObjectSpec {
                shape: Shape::TexturedSprite,
                size,
                trajectory,
                depth: 10.0 + 10.0 * k as f32,
                object_id: k as u8 + 1,
                normal_profile: NormalProfile::Flat,
                color: None,
            }
        })
        .collect();
    SceneSpec {
        width: cfg.width,
        height: cfg.height,
        base_fps: cfg.base_fps,
        episode_len: cfg.episode_len,
        background: Background {
            kind: BackgroundKind::TexturedNoise,
            seed: rng.random(),
        },
        objects,
        camera: CameraSpec::default(),
        rng_seed: rng.random(),
    }
}

/// Pre-fill hole fractions of every warped frame shown by the all-warp
/// path.
pub fn warped_hole_fractions(episodes: &[Episode], sched: &SchedulerConfig) -> Result<Vec<f64>> {
    let per: Vec<Vec<f64>> = episodes
        .par_iter()
        .map(|e| {
            let run = run_episode(e, &mut FixedPolicy(Scenario::S6), sched)?;
            Ok(run
                .traces
                .iter()
                .flat_map(|t| t.displayed.iter().filter_map(|d| d.hole_fraction))
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub speed: f64,
    pub mean_var_x: f64,
    pub mean_warped_psnr: f64,
}

/// Mean horizontal motion variance and mean all-warp PSNR per speed.
pub fn speed_sweep(speeds: &[f64], episodes: usize, cfg: &SuiteConfig, sched: &SchedulerConfig) -> Result<Vec<SweepPoint>> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("speed sweep needs at least one episode".into()));
    }
    speeds
        .iter()
        .map(|&speed| {
            let stats: Vec<(f64, f64)> = (0..episodes)
                .into_par_iter()
                .map(|i| {
                    let ep = render_scene(&speed_sweep_spec(speed, i, cfg), Some("speed-sweep"))?;
                    let env = episode_env(&ep.gbuffers)?;
                    let var_x = env.iter().map(|e| e.var_x).sum::<f64>() / env.len() as f64;
                    let run = run_episode(&ep, &mut FixedPolicy(Scenario::S6), sched)?;
                    Ok((var_x, run.quality.mean_psnr))
                })
                .collect::<Result<_>>()?;
            let n = stats.len() as f64;
            Ok(SweepPoint {
                speed,
                mean_var_x: stats.iter().map(|s| s.0).sum::<f64>() / n,
                mean_warped_psnr: stats.iter().map(|s| s.1).sum::<f64>() / n,
            })
        })
        .collect()
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut s = String::from("speed,mean_var_x,mean_warped_psnr\n");
    for p in points {
        s.push_str(&format!("{},{:.6},{:.6}\n", p.speed, p.mean_var_x, p.mean_warped_psnr));
    }
    s
}

/// Ranks starting at 1; tied values share their average rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (Pearson correlation of the ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "spearman needs two equal series of length >= 2, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InvalidArgument("spearman undefined for a constant series".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}
