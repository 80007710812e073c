use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scheduler::{effective_fps, Action, DecisionTrace, Scenario};

/// Additive sums over a set of decision traces. Means are derived, so two
/// aggregates merge exactly like their concatenated trace lists would.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub intervals: usize,
    /// Inserted (non-repeat) slots that carry a quality measurement.
    pub slots: usize,
    pub psnr_sum: f64,
    pub ssim_sum: f64,
    pub decisions: usize,
    pub warps: usize,
    pub inserted: u64,
    pub scenario_counts: BTreeMap<Scenario, usize>,
}

impl Aggregate {
    pub fn add(&mut self, t: &DecisionTrace) {
        self.intervals += 1;
        for q in t.inserted_quality() {
            self.slots += 1;
            self.psnr_sum += q.psnr;
            self.ssim_sum += q.ssim;
        }
        self.decisions += t.decisions.len();
        self.warps += t.decisions.iter().filter(|d| d.action == Action::Warp).count();
        self.inserted += t.inserted_frames() as u64;
        *self.scenario_counts.entry(t.scenario).or_default() += 1;
    }

    pub fn from_traces<'a>(traces: impl IntoIterator<Item = &'a DecisionTrace>) -> Self {
        let mut a = Self::default();
        for t in traces {
            a.add(t);
        }
        a
    }

    pub fn merge(&mut self, other: &Aggregate) {
        self.intervals += other.intervals;
        self.slots += other.slots;
        self.psnr_sum += other.psnr_sum;
        self.ssim_sum += other.ssim_sum;
        self.decisions += other.decisions;
        self.warps += other.warps;
        self.inserted += other.inserted;
        for (s, n) in &other.scenario_counts {
            *self.scenario_counts.entry(*s).or_default() += n;
        }
    }

    pub fn mean_psnr(&self) -> Option<f64> {
        (self.slots > 0).then(|| self.psnr_sum / self.slots as f64)
    }

    pub fn mean_ssim(&self) -> Option<f64> {
        (self.slots > 0).then(|| self.ssim_sum / self.slots as f64)
    }

    pub fn warp_ratio(&self) -> Option<f64> {
        (self.decisions > 0).then(|| self.warps as f64 / self.decisions as f64)
    }

    pub fn effective_fps(&self, base_fps: f64) -> f64 {
        effective_fps(base_fps, self.inserted, self.intervals)
    }
}

/// Traces produced by one policy.
#[derive(Debug, Clone)]
pub struct PolicyRun {
    pub policy: String,
    pub base_fps: f64,
    pub traces: Vec<DecisionTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub policy: String,
    /// A scenario name, or `all` for the policy total.
    pub scenario: String,
    pub count: usize,
    pub mean_psnr: Option<f64>,
    pub mean_ssim: Option<f64>,
    pub warp_ratio: Option<f64>,
    pub effective_fps: f64,
}

impl ReportRow {
    fn new(policy: &str, scenario: String, a: &Aggregate, base_fps: f64) -> Self {
        Self {
            policy: policy.to_string(),
            scenario,
            count: a.intervals,
            mean_psnr: a.mean_psnr(),
            mean_ssim: a.mean_ssim(),
            warp_ratio: a.warp_ratio(),
            effective_fps: a.effective_fps(base_fps),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn row(&self, policy: &str, scenario: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.policy == policy && r.scenario == scenario)
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        let mut s = String::from("policy,scenario,count,mean_psnr,mean_ssim,warp_ratio,effective_fps\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{:.6}",
                r.policy,
                r.scenario,
                r.count,
                opt(r.mean_psnr),
                opt(r.mean_ssim),
                opt(r.warp_ratio),
                r.effective_fps
            );
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }
}

/// One `all` row per policy followed by a row for every scenario the policy
/// actually took.
pub fn aggregate_report(runs: &[PolicyRun]) -> Result<Report> {
    if runs.is_empty() || runs.iter().all(|r| r.traces.is_empty()) {
        return Err(Error::InvalidArgument("report needs at least one trace".into()));
    }
    let mut rows = Vec::new();
    for run in runs {
        let total = Aggregate::from_traces(&run.traces);
        rows.push(ReportRow::new(&run.policy, "all".into(), &total, run.base_fps));
        for s in Scenario::ALL {
            let a = Aggregate::from_traces(run.traces.iter().filter(|t| t.scenario == s));
            if a.intervals > 0 {
                rows.push(ReportRow::new(&run.policy, s.to_string(), &a, run.base_fps));
            }
        }
    }
    Ok(Report { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::QualityPair;
    use crate::scheduler::{Decision, DisplayedSlot, NodeId, Provenance};

    fn trace(scenario: Scenario, psnr: [f64; 3]) -> DecisionTrace {
        let dropped = scenario.nominal_dropped();
        DecisionTrace {
            interval_index: 2,
            decisions: scenario
                .path()
                .iter()
                .map(|&(node, action)| Decision { node, action, reward: None })
                .collect(),
            displayed: (0..3)
                .map(|i| DisplayedSlot {
                    offset: i as u32 + 1,
                    timestamp: 9 + i as u32,
                    provenance: if (i as u32) < dropped { Provenance::RenderedRepeat } else { Provenance::Warped },
                    downgraded: false,
                    hole_fraction: None,
                    quality: Some(QualityPair { psnr: psnr[i], ssim: 0.9 }),
                })
                .collect(),
            dropped_slots: dropped,
            scenario,
            downgrades: 0,
            discarded_extrapolations: 0,
            annotation_missing: false,
            frames: None,
        }
    }

    #[test]
    fn single_trace_summary_is_its_means() {
        let t = trace(Scenario::S6, [30.0, 33.0, 36.0]);
        let r = aggregate_report(&[PolicyRun { policy: "S6".into(), base_fps: 30.0, traces: vec![t] }]).unwrap();
        let all = r.row("S6", "all").unwrap();
        assert_eq!(all.count, 1);
        assert!((all.mean_psnr.unwrap() - 33.0).abs() < 1e-12);
        assert!((all.mean_ssim.unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(all.warp_ratio, Some(1.0));
        assert_eq!(all.effective_fps, 120.0);
        assert!(r.row("S6", "S6").is_some());
        assert!(r.row("S6", "S1").is_none());
    }

    #[test]
    fn csv_header_and_rows() {
        let t = trace(Scenario::S1, [20.0, 20.0, 20.0]);
        let r = aggregate_report(&[PolicyRun { policy: "S1".into(), base_fps: 30.0, traces: vec![t] }]).unwrap();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "policy,scenario,count,mean_psnr,mean_ssim,warp_ratio,effective_fps");
        assert_eq!(lines[1], "S1,all,1,20.000000,0.900000,0.000000,60.000000");
        assert_eq!(lines.len(), 3);
        assert!(r.to_json().unwrap().contains("\"scenario\": \"S1\""));
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(aggregate_report(&[]).is_err());
    }

    #[test]
    fn node_ids_are_counted_as_decisions() {
        let t = trace(Scenario::S3, [25.0; 3]);
        let a = Aggregate::from_traces([&t]);
        assert_eq!(a.decisions, Scenario::S3.path().len());
        assert!(t.decisions.iter().any(|d| d.node == NodeId::D2));
    }
}
