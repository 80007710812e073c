use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::metrics::{psnr, ssim, QualityPair, PSNR_CAP_DB};

/// PSNR of an 8-bit image pair at MSE = 1.
pub const PSNR_AT_UNIT_MSE: f64 = 48.13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Multiplier on the PSNR difference (dB).
    pub psnr_scale: f64,
    /// Added when the chosen option repeats the previous frame.
    pub drop_penalty: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            psnr_scale: 1.0 / PSNR_AT_UNIT_MSE,
            drop_penalty: -0.1,
        }
    }
}

impl RewardConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.psnr_scale.is_finite() && self.psnr_scale >= 0.0) {
            v.push(format!("reward.psnr_scale must be non-negative, got {}", self.psnr_scale));
        }
        if !self.drop_penalty.is_finite() {
            v.push(format!("reward.drop_penalty must be finite, got {}", self.drop_penalty));
        }
        v
    }
}

/// Reward from already measured qualities.
pub fn reward_from_quality(chosen: QualityPair, alternative: QualityPair, dropped: bool, cfg: &RewardConfig) -> f64 {
    let dp = chosen.psnr.min(PSNR_CAP_DB) - alternative.psnr.min(PSNR_CAP_DB);
    let ds = chosen.ssim - alternative.ssim;
    let alpha = if dropped { cfg.drop_penalty } else { 0.0 };
    dp * cfg.psnr_scale + ds + alpha
}

/// `scale * (PSNR(chosen) - PSNR(alt)) + SSIM(chosen) - SSIM(alt) + alpha`.
pub fn compute_reward(
    chosen: &Frame,
    alternative: &Frame,
    ground_truth: &Frame,
    dropped: bool,
    cfg: &RewardConfig,
) -> Result<f64> {
    for f in [chosen, alternative] {
        if f.dims() != ground_truth.dims() {
            return Err(Error::dims(ground_truth.dims(), f.dims()));
        }
    }
    let q = |f: &Frame| -> Result<QualityPair> {
        Ok(QualityPair {
            psnr: psnr(f, ground_truth)?,
            ssim: ssim(f, ground_truth)?,
        })
    };
    Ok(reward_from_quality(q(chosen)?, q(alternative)?, dropped, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames() -> (Frame, Frame) {
        let gt = Frame::filled(16, 16, [100, 100, 100], 0);
        let mut other = gt.clone();
        other.set(3, 3, [0, 0, 0]);
        (gt, other)
    }

    #[test]
    fn equal_options() {
        let (gt, other) = frames();
        let c = RewardConfig::default();
        assert_eq!(compute_reward(&other, &other, &gt, false, &c).unwrap(), 0.0);
        assert!((compute_reward(&other, &other, &gt, true, &c).unwrap() + 0.1).abs() < 1e-15);
    }

    #[test]
    fn exact_choice_wins() {
        let (gt, other) = frames();
        let c = RewardConfig::default();
        assert!(compute_reward(&gt, &other, &gt, false, &c).unwrap() > 0.0);
    }

    #[test]
    fn size_mismatch() {
        let (gt, _) = frames();
        let small = Frame::filled(12, 12, [0, 0, 0], 0);
        assert!(compute_reward(&small, &gt, &gt, false, &RewardConfig::default()).is_err());
    }
}
