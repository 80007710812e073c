use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use exwarp_core::extrapolate::{LatencyModel, ResolutionClass, StageLatency};
use exwarp_core::features::FeatureScaling;
use exwarp_core::predictor::{RewardConfig, TrainConfig};
use exwarp_core::scheduler::{Scenario, SchedulerConfig};
use exwarp_core::suite::{Family, SuiteConfig};
use serde::{Deserialize, Serialize};

/// Which decision policy a command runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicySpec {
    Fixed(Scenario),
    Oracle,
    Trained(PathBuf),
}

impl FromStr for PolicySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "oracle" {
            return Ok(PolicySpec::Oracle);
        }
        if let Some(p) = s.strip_prefix("trained:") {
            if p.is_empty() {
                return Err("trained policy needs a checkpoint path".into());
            }
            return Ok(PolicySpec::Trained(PathBuf::from(p)));
        }
        s.parse::<Scenario>()
            .map(PolicySpec::Fixed)
            .map_err(|_| format!("unknown policy {s:?} (expected S1..S6, oracle or trained:<checkpoint>)"))
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Fixed(s) => write!(f, "{s}"),
            PolicySpec::Oracle => f.write_str("oracle"),
            PolicySpec::Trained(p) => write!(f, "trained:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteSection {
    pub width: usize,
    pub height: usize,
    pub base_fps: f64,
    pub episode_len: usize,
    pub episodes_per_family: usize,
    pub families: Vec<String>,
}

impl Default for SuiteSection {
    fn default() -> Self {
        let s = SuiteConfig::default();
        Self {
            width: s.width,
            height: s.height,
            base_fps: s.base_fps,
            episode_len: s.episode_len,
            episodes_per_family: s.episodes_per_family,
            families: Family::ALL.iter().map(|f| f.as_str().to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Object speeds in px per base frame. Empty disables the sweep report.
    pub speeds: Vec<f64>,
    pub episodes: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerSection {
    /// Forces one latency row ("480p", "720p" or "1080p").
    pub resolution: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    pub policies: Vec<String>,
}

impl Default for CompareSection {
    fn default() -> Self {
        let mut policies: Vec<String> = Scenario::ALL.iter().map(|s| s.to_string()).collect();
        policies.push("oracle".into());
        Self { policies }
    }
}

/// Everything a command needs. Every key has a default, so an empty file is
/// a valid config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Drives scene generation and training; replaces `train.rng_seed`.
    pub seed: u64,
    pub out: PathBuf,
    pub policy: String,
    /// Dataset directories written by `generate`. When empty the suite is
    /// rendered in memory.
    pub datasets: Vec<PathBuf>,
    pub suite: SuiteSection,
    pub sweep: SweepSection,
    pub scheduler: SchedulerSection,
    /// Per-class stage overrides, keyed "480p", "720p" or "1080p".
    pub latency: BTreeMap<String, StageLatency>,
    pub reward: RewardConfig,
    pub features: FeatureScaling,
    pub train: TrainConfig,
    pub compare: CompareSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: SuiteConfig::default().seed,
            out: PathBuf::from("out"),
            policy: "S6".into(),
            datasets: Vec::new(),
            suite: SuiteSection::default(),
            sweep: SweepSection::default(),
            scheduler: SchedulerSection::default(),
            latency: BTreeMap::new(),
            reward: RewardConfig::default(),
            features: FeatureScaling::default(),
            train: TrainConfig::default(),
            compare: CompareSection::default(),
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub policy: Option<String>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, ov: &Overrides) -> anyhow::Result<Self> {
        let mut cfg: RunConfig = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(s) = ov.seed {
            cfg.seed = s;
        }
        if let Some(o) = &ov.out {
            cfg.out = o.clone();
        }
        if let Some(p) = &ov.policy {
            cfg.policy = p.clone();
        }
        cfg.train.rng_seed = cfg.seed;
        Ok(cfg)
    }

    /// Every violated key with a reason. Empty means valid.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        match self.policy.parse::<PolicySpec>() {
            Ok(PolicySpec::Trained(p)) if !p.is_file() => {
                v.push(format!("policy: checkpoint {} does not exist", p.display()))
            }
            Ok(_) => {}
            Err(e) => v.push(format!("policy: {e}")),
        }
        for (i, d) in self.datasets.iter().enumerate() {
            if !d.join("manifest.json").is_file() {
                v.push(format!("datasets[{i}]: {} is not a dataset directory", d.display()));
            }
        }
        let s = &self.suite;
        if s.width < 16 || s.height < 16 {
            v.push(format!("suite.width/suite.height: {}x{} is below 16x16", s.width, s.height));
        }
        if !(s.base_fps.is_finite() && s.base_fps > 0.0) {
            v.push(format!("suite.base_fps: must be positive, got {}", s.base_fps));
        }
        if s.episode_len < 4 {
            v.push(format!("suite.episode_len: needs at least 4 base frames, got {}", s.episode_len));
        }
        if s.episodes_per_family == 0 {
            v.push("suite.episodes_per_family: must be at least 1".into());
        }
        if s.families.is_empty() {
            v.push("suite.families: at least one family is required".into());
        }
        for f in &s.families {
            if f.parse::<Family>().is_err() {
                v.push(format!("suite.families: unknown family {f:?}"));
            }
        }
        for (i, sp) in self.sweep.speeds.iter().enumerate() {
            if !(sp.is_finite() && *sp >= 0.0) {
                v.push(format!("sweep.speeds[{i}]: must be non-negative, got {sp}"));
            }
        }
        if !self.sweep.speeds.is_empty() && self.sweep.episodes == 0 {
            v.push("sweep.episodes: must be at least 1 when sweep.speeds is set".into());
        }
        if let Some(r) = &self.scheduler.resolution {
            if r.parse::<ResolutionClass>().is_err() {
                v.push(format!("scheduler.resolution: unknown class {r:?}"));
            }
        }
        for (k, st) in &self.latency {
            match k.parse::<ResolutionClass>() {
                Ok(class) => {
                    if let Err(e) = LatencyModel::default().set(class, *st) {
                        v.push(format!("latency.{k}: {e}"));
                    }
                }
                Err(_) => v.push(format!("latency.{k}: unknown resolution class")),
            }
        }
        v.extend(self.reward.violations());
        if let Err(e) = self.features.check() {
            v.push(format!("features: {e}"));
        }
        v.extend(self.train.violations());
        for (i, p) in self.compare.policies.iter().enumerate() {
            match p.parse::<PolicySpec>() {
                Ok(PolicySpec::Trained(c)) if !c.is_file() => {
                    v.push(format!("compare.policies[{i}]: checkpoint {} does not exist", c.display()))
                }
                Ok(_) => {}
                Err(e) => v.push(format!("compare.policies[{i}]: {e}")),
            }
        }
        v
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let v = self.violations();
        if v.is_empty() {
            return Ok(());
        }
        bail!("invalid config:\n  {}", v.join("\n  "))
    }

    pub fn policy_spec(&self) -> anyhow::Result<PolicySpec> {
        self.policy.parse::<PolicySpec>().map_err(anyhow::Error::msg)
    }

    pub fn families(&self) -> Vec<Family> {
        self.suite.families.iter().filter_map(|f| f.parse().ok()).collect()
    }

    pub fn suite_config(&self) -> SuiteConfig {
        SuiteConfig {
            width: self.suite.width,
            height: self.suite.height,
            base_fps: self.suite.base_fps,
            episode_len: self.suite.episode_len,
            episodes_per_family: self.suite.episodes_per_family,
            seed: self.seed,
        }
    }

    pub fn scheduler_config(&self) -> anyhow::Result<SchedulerConfig> {
        let mut latency = LatencyModel::default();
        for (k, st) in &self.latency {
            latency.set(k.parse()?, *st)?;
        }
        Ok(SchedulerConfig {
            latency,
            resolution: self.scheduler.resolution.as_deref().map(str::parse).transpose()?,
            reward: self.reward,
            scaling: self.features,
            keep_frames: false,
        })
    }

    /// Stable text form used for the config hash.
    pub fn canonical(&self) -> anyhow::Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        let c: RunConfig = toml::from_str("").unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn dotted_keys_override_sections() {
        let c: RunConfig = toml::from_str(
            "seed = 3\ntrain.learning_rate = 0.01\nreward.drop_penalty = -0.2\nlatency.1080p = { gbuffer_ms = 1.0, warp_ms = 1.0, hole_mark_ms = 1.0, inference_ms = 1.0 }\n",
        )
        .unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.train.learning_rate, 0.01);
        assert_eq!(c.reward.drop_penalty, -0.2);
        let s = c.scheduler_config().unwrap();
        assert_eq!(s.latency.stages(ResolutionClass::P1080).unwrap().request_ms(), 3.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("train.learning_rat = 0.1").is_err());
    }

    #[test]
    fn every_violation_is_listed() {
        let mut c = RunConfig {
            policy: "S9".into(),
            datasets: vec![PathBuf::from("/nonexistent/ds")],
            ..RunConfig::default()
        };
        c.train.gamma = 1.5;
        c.suite.episode_len = 2;
        c.scheduler.resolution = Some("4k".into());
        let v = c.violations();
        for key in ["policy:", "datasets[0]:", "train.gamma", "suite.episode_len:", "scheduler.resolution:"] {
            assert!(v.iter().any(|m| m.starts_with(key)), "{key} missing from {v:?}");
        }
    }

    #[test]
    fn policy_names_parse() {
        assert_eq!("S3".parse::<PolicySpec>().unwrap(), PolicySpec::Fixed(Scenario::S3));
        assert_eq!("oracle".parse::<PolicySpec>().unwrap(), PolicySpec::Oracle);
        assert_eq!(
            "trained:m.exwq".parse::<PolicySpec>().unwrap(),
            PolicySpec::Trained(PathBuf::from("m.exwq"))
        );
        assert!("trained:".parse::<PolicySpec>().is_err());
    }

    #[test]
    fn seed_override_reaches_training() {
        let c = RunConfig::load(None, &Overrides { seed: Some(99), ..Default::default() }).unwrap();
        assert_eq!(c.seed, 99);
        assert_eq!(c.train.rng_seed, 99);
        assert_eq!(c.suite_config().seed, 99);
    }
}
