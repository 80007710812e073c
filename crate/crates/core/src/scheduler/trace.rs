use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::node::{Action, NodeId, Scenario};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::metrics::QualityPair;

/// Where a displayed frame came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    RenderedRepeat,
    Warped,
    Extrapolated,
}

impl Provenance {
    pub fn is_repeat(self) -> bool {
        self == Provenance::RenderedRepeat
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::RenderedRepeat => "rendered-repeat",
            Provenance::Warped => "warped",
            Provenance::Extrapolated => "extrapolated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub node: NodeId,
    pub action: Action,
    /// Reward of the chosen action against the alternative, when ground
    /// truth was available.
    pub reward: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplayedSlot {
    /// Quarter-slot offset within the interval (1, 2 or 3).
    pub offset: u32,
    pub timestamp: u32,
    pub provenance: Provenance,
    /// An extrapolation was chosen but could not arrive in time.
    pub downgraded: bool,
    /// Pre-fill hole fraction for warped frames.
    pub hole_fraction: Option<f64>,
    pub quality: Option<QualityPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTrace {
    /// Index of the rendered frame that opens the interval.
    pub interval_index: usize,
    pub decisions: Vec<Decision>,
    pub displayed: Vec<DisplayedSlot>,
    pub dropped_slots: u32,
    pub scenario: Scenario,
    pub downgrades: u32,
    /// Speculative extrapolations that finished but were never shown.
    pub discarded_extrapolations: u32,
    /// Some slot lacked ground truth, so its quality is absent.
    pub annotation_missing: bool,
    #[serde(skip)]
    pub frames: Option<Vec<Frame>>,
}

impl DecisionTrace {
    /// Genuinely new frames shown in this interval.
    pub fn inserted_frames(&self) -> u32 {
        self.displayed.len() as u32 - self.dropped_slots
    }

    /// Quality of the inserted slots; repeats of the rendered frame are skipped.
    pub fn inserted_quality(&self) -> impl Iterator<Item = QualityPair> + '_ {
        self.displayed
            .iter()
            .filter(|d| !d.provenance.is_repeat())
            .filter_map(|d| d.quality)
    }

    pub fn warp_decisions(&self) -> usize {
        self.decisions.iter().filter(|d| d.action == Action::Warp).count()
    }

    pub fn last_node(&self) -> NodeId {
        self.decisions.last().map(|d| d.node).unwrap_or(NodeId::D1)
    }

    pub fn path(&self) -> Vec<(NodeId, Action)> {
        self.decisions.iter().map(|d| (d.node, d.action)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpsReport {
    pub base_fps: f64,
    /// Base-frame intervals accounted.
    pub intervals: usize,
    pub inserted_frames: u64,
    pub effective_fps: f64,
    pub scenario_counts: BTreeMap<Scenario, usize>,
    pub downgrades: u64,
    pub discarded_extrapolations: u64,
}

impl FpsReport {
    pub fn from_traces(traces: &[DecisionTrace], base_fps: f64) -> Self {
        let mut scenario_counts: BTreeMap<Scenario, usize> = Scenario::ALL.iter().map(|s| (*s, 0)).collect();
        let mut inserted = 0u64;
        let mut downgrades = 0u64;
        let mut discarded = 0u64;
        for t in traces {
            *scenario_counts.entry(t.scenario).or_default() += 1;
            inserted += t.inserted_frames() as u64;
            downgrades += t.downgrades as u64;
            discarded += t.discarded_extrapolations as u64;
        }
        Self {
            base_fps,
            intervals: traces.len(),
            inserted_frames: inserted,
            effective_fps: effective_fps(base_fps, inserted, traces.len()),
            scenario_counts,
            downgrades,
            discarded_extrapolations: discarded,
        }
    }

    pub fn upsampling(&self) -> f64 {
        self.effective_fps / self.base_fps
    }
}

/// `base * (1 + inserted / intervals)`; `base` when nothing was accounted.
pub fn effective_fps(base_fps: f64, inserted: u64, intervals: usize) -> f64 {
    if intervals == 0 {
        return base_fps;
    }
    base_fps * (1.0 + inserted as f64 / intervals as f64)
}

pub fn traces_to_jsonl(traces: &[DecisionTrace]) -> Result<String> {
    let mut s = String::new();
    for t in traces {
        s.push_str(&serde_json::to_string(t).map_err(|e| Error::Format(e.to_string()))?);
        s.push('\n');
    }
    Ok(s)
}

pub fn traces_from_jsonl(text: &str) -> Result<Vec<DecisionTrace>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::Format(e.to_string())))
        .collect()
}

/// Columns: interval, scenario, psnr_p1..p3, ssim_p1..p3, dropped. Missing
/// qualities are left empty.
pub fn interval_quality_csv(traces: &[DecisionTrace]) -> String {
    let mut s = String::from("interval,scenario,psnr_p1,psnr_p2,psnr_p3,ssim_p1,ssim_p2,ssim_p3,dropped\n");
    for t in traces {
        let field = |f: &dyn Fn(&QualityPair) -> f64| -> Vec<String> {
            t.displayed
                .iter()
                .map(|d| d.quality.as_ref().map(|q| format!("{:.6}", f(q))).unwrap_or_default())
                .collect()
        };
        let p = field(&|q| q.psnr);
        let q = field(&|q| q.ssim);
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            t.interval_index,
            t.scenario,
            p.join(","),
            q.join(","),
            t.dropped_slots
        );
    }
    s
}
