use serde::{Deserialize, Serialize};

use super::node::{classify_scenario, Action, NodeId};
use super::policy::{NodeOption, NodeView, Policy};
use super::trace::{Decision, DecisionTrace, DisplayedSlot, FpsReport, Provenance};
use crate::error::{Error, Result};
use crate::extrapolate::{
    extrapolate_frame, slots_to_complete, total_latency, ExtrapolationTiming, LatencyModel, ResolutionClass,
};
use crate::features::{assemble_state, episode_env, EnvVector, FeatureScaling, StateHistory, TemporalVector};
use crate::frame::{Frame, MotionFrame, SLOTS_PER_FRAME};
use crate::metrics::QualityPair;
use crate::predictor::RewardConfig;
use crate::scenegen::Episode;
use crate::warp::warp_motion_frame;

/// Quarter-slots an extrapolation may take between issue and display.
pub const EXTRAPOLATION_BUDGET_SLOTS: u32 = 2;

/// Newest rendered frames needed before extrapolation is possible.
pub const HISTORY_FRAMES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerConfig {
    pub latency: LatencyModel,
    /// Latency row to use; derived from the frame height when `None`.
    pub resolution: Option<ResolutionClass>,
    pub reward: RewardConfig,
    pub scaling: FeatureScaling,
    /// Keep displayed frames in the traces.
    pub keep_frames: bool,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            latency: LatencyModel::default(),
            resolution: None,
            reward: RewardConfig::default(),
            scaling: FeatureScaling::default(),
            keep_frames: false,
        }
    }
}

impl SchedulerConfig {
    pub fn class_for(&self, height: usize) -> ResolutionClass {
        self.resolution.unwrap_or_else(|| ResolutionClass::for_height(height))
    }

    /// Whether an extrapolation of this class arrives within the budget.
    pub fn extrapolation_feasible(&self, class: ResolutionClass, base_fps: f64) -> Result<bool> {
        let lat = total_latency(&self.latency, class)?;
        Ok(slots_to_complete(lat, base_fps) <= EXTRAPOLATION_BUDGET_SLOTS)
    }
}

/// Inputs for one interval between rendered frames `t` and `t + 1`.
pub struct IntervalInput<'a> {
    pub index: usize,
    /// `F_{t-2}, F_{t-1}, F_t`.
    pub history: [&'a MotionFrame; HISTORY_FRAMES],
    /// Ground truth at offsets 1, 2 and 3.
    pub ground_truth: [Option<&'a Frame>; 3],
    pub env: EnvVector,
    pub base_fps: f64,
}

/// Frame chosen for one slot, kept reprojectable for later nodes.
struct Shown {
    mf: MotionFrame,
    provenance: Provenance,
    downgraded: bool,
    hole_fraction: Option<f64>,
    quality: Option<QualityPair>,
}

fn shown_of(view: &NodeView<'_>, a: Action, mf: MotionFrame) -> Result<Shown> {
    let o = view.option(a);
    Ok(Shown {
        mf,
        provenance: o.provenance,
        downgraded: o.downgraded,
        hole_fraction: o.hole_fraction,
        quality: view.quality(a)?,
    })
}

fn warp_to(src: &MotionFrame, target: u32) -> Result<(MotionFrame, f64)> {
    let w = warp_motion_frame(src, target - src.timestamp())?;
    let frac = w.hole_fraction;
    Ok((w.into_motion_frame(), frac))
}

fn repeat_of(src: &MotionFrame) -> MotionFrame {
    src.clone()
}

/// Walks the decision tree of one interval.
pub fn run_interval(
    input: &IntervalInput<'_>,
    history: &StateHistory,
    policy: &mut dyn Policy,
    cfg: &SchedulerConfig,
) -> Result<DecisionTrace> {
    let ft = input.history[2];
    let (w, h) = ft.frame.dims();
    for f in input.history.iter().map(|m| &m.frame).chain(input.ground_truth.iter().flatten().copied()) {
        if f.dims() != (w, h) {
            return Err(Error::dims((w, h), f.dims()));
        }
    }
    let base = ft.timestamp();
    let class = cfg.class_for(h);
    let latency_ms = total_latency(&cfg.latency, class)?;
    let feasible = cfg.extrapolation_feasible(class, input.base_fps)?;
    let timing = |issue_slot| ExtrapolationTiming {
        issue_slot,
        latency_ms,
        base_fps: input.base_fps,
    };
    let state_at = |node| {
        assemble_state(
            &history.with_current((input.env, TemporalVector::node(node))),
            &cfg.scaling,
        )
    };
    let mut decisions: Vec<Decision> = Vec::with_capacity(3);
    let mut discarded = 0u32;

    let mut decide = |view: &NodeView<'_>, decisions: &mut Vec<Decision>| -> Result<Action> {
        let a = policy.decide(view)?;
        let prior: Vec<(NodeId, Action)> = decisions.iter().map(|d| (d.node, d.action)).collect();
        if !view.node.legal_after(&prior) {
            return Err(Error::IllegalPath(format!("node {} after {:?}", view.node, prior)));
        }
        decisions.push(Decision {
            node: view.node,
            action: a,
            reward: view.reward(a, &cfg.reward)?,
        });
        Ok(a)
    };

    // E(F_t) is issued at t whenever it can arrive by offset 2.
    let e_ft = if feasible {
        Some(
            extrapolate_frame(
                &[input.history[0].clone(), input.history[1].clone(), ft.clone()],
                2,
                &timing(base),
            )?
            .to_motion_frame(),
        )
    } else {
        None
    };

    // d1
    let (w1, w1_holes) = warp_to(ft, base + 1)?;
    let view = NodeView::new(
        input.index,
        NodeId::D1,
        state_at(NodeId::D1),
        [
            NodeOption {
                frame: &w1.frame,
                provenance: Provenance::Warped,
                downgraded: false,
                hole_fraction: Some(w1_holes),
            },
            NodeOption {
                frame: &ft.frame,
                provenance: Provenance::RenderedRepeat,
                downgraded: false,
                hole_fraction: None,
            },
        ],
        input.ground_truth[0],
    );
    let a1 = decide(&view, &mut decisions)?;
    let p1 = match a1 {
        Action::Warp => shown_of(&view, a1, w1.clone())?,
        Action::Extrapolate => shown_of(&view, a1, repeat_of(ft))?,
    };
    drop(view);

    let (p2, p3) = match a1 {
        Action::Extrapolate => {
            // P2 is E(F_t) when it arrives, otherwise another repeat
            let (mf, prov, down) = match &e_ft {
                Some(e) => (e.clone(), Provenance::Extrapolated, false),
                None => (repeat_of(&p1.mf), Provenance::RenderedRepeat, true),
            };
            let q2 = match input.ground_truth[1] {
                Some(gt) => Some(QualityPair::measure(&mf.frame, gt)?),
                None => None,
            };
            let p2 = Shown {
                mf,
                provenance: prov,
                downgraded: down,
                hole_fraction: None,
                quality: q2,
            };
            // d3: Warp, or Extrapolate meaning no new frame
            let (w3, w3_holes) = warp_to(&p2.mf, base + 3)?;
            let view = NodeView::new(
                input.index,
                NodeId::D3,
                state_at(NodeId::D3),
                [
                    NodeOption {
                        frame: &w3.frame,
                        provenance: Provenance::Warped,
                        downgraded: false,
                        hole_fraction: Some(w3_holes),
                    },
                    NodeOption {
                        frame: &p2.mf.frame,
                        provenance: Provenance::RenderedRepeat,
                        downgraded: false,
                        hole_fraction: None,
                    },
                ],
                input.ground_truth[2],
            );
            let a3 = decide(&view, &mut decisions)?;
            let p3 = match a3 {
                Action::Warp => shown_of(&view, a3, w3.clone())?,
                Action::Extrapolate => shown_of(&view, a3, repeat_of(&p2.mf))?,
            };
            (p2, p3)
        }
        Action::Warp => {
            // d2
            let (w2, w2_holes) = warp_to(&p1.mf, base + 2)?;
            let e_opt = match &e_ft {
                Some(e) => NodeOption {
                    frame: &e.frame,
                    provenance: Provenance::Extrapolated,
                    downgraded: false,
                    hole_fraction: None,
                },
                None => NodeOption {
                    frame: &p1.mf.frame,
                    provenance: Provenance::RenderedRepeat,
                    downgraded: true,
                    hole_fraction: None,
                },
            };
            let view = NodeView::new(
                input.index,
                NodeId::D2,
                state_at(NodeId::D2),
                [
                    NodeOption {
                        frame: &w2.frame,
                        provenance: Provenance::Warped,
                        downgraded: false,
                        hole_fraction: Some(w2_holes),
                    },
                    e_opt,
                ],
                input.ground_truth[1],
            );
            let a2 = decide(&view, &mut decisions)?;
            let p2 = match (a2, &e_ft) {
                (Action::Warp, _) => {
                    if e_ft.is_some() {
                        discarded += 1;
                    }
                    shown_of(&view, a2, w2.clone())?
                }
                (Action::Extrapolate, Some(e)) => shown_of(&view, a2, e.clone())?,
                (Action::Extrapolate, None) => shown_of(&view, a2, repeat_of(&p1.mf))?,
            };
            drop(view);

            // d4 / d5: E(P1) issued at offset 1 from F_{t-1}, F_t, P1
            let node = if a2 == Action::Extrapolate { NodeId::D4 } else { NodeId::D5 };
            let (w3, w3_holes) = warp_to(&p2.mf, base + 3)?;
            let e_p1 = if feasible {
                Some(
                    extrapolate_frame(
                        &[input.history[1].clone(), ft.clone(), p1.mf.clone()],
                        2,
                        &timing(base + 1),
                    )?
                    .to_motion_frame(),
                )
            } else {
                None
            };
            let e_opt = match &e_p1 {
                Some(e) => NodeOption {
                    frame: &e.frame,
                    provenance: Provenance::Extrapolated,
                    downgraded: false,
                    hole_fraction: None,
                },
                None => NodeOption {
                    frame: &p2.mf.frame,
                    provenance: Provenance::RenderedRepeat,
                    downgraded: true,
                    hole_fraction: None,
                },
            };
            let view = NodeView::new(
                input.index,
                node,
                state_at(node),
                [
                    NodeOption {
                        frame: &w3.frame,
                        provenance: Provenance::Warped,
                        downgraded: false,
                        hole_fraction: Some(w3_holes),
                    },
                    e_opt,
                ],
                input.ground_truth[2],
            );
            let a3 = decide(&view, &mut decisions)?;
            let p3 = match (a3, &e_p1) {
                (Action::Warp, _) => {
                    if e_p1.is_some() {
                        discarded += 1;
                    }
                    shown_of(&view, a3, w3.clone())?
                }
                (Action::Extrapolate, Some(e)) => shown_of(&view, a3, e.clone())?,
                (Action::Extrapolate, None) => shown_of(&view, a3, repeat_of(&p2.mf))?,
            };
            (p2, p3)
        }
    };

    let path: Vec<(NodeId, Action)> = decisions.iter().map(|d| (d.node, d.action)).collect();
    let scenario = classify_scenario(&path)?;
    let shown = [p1, p2, p3];
    let displayed: Vec<DisplayedSlot> = shown
        .iter()
        .enumerate()
        .map(|(k, s)| DisplayedSlot {
            offset: k as u32 + 1,
            timestamp: base + k as u32 + 1,
            provenance: s.provenance,
            downgraded: s.downgraded,
            hole_fraction: s.hole_fraction,
            quality: s.quality,
        })
        .collect();
    let dropped_slots = displayed.iter().filter(|d| d.provenance.is_repeat()).count() as u32;
    let downgrades = displayed.iter().filter(|d| d.downgraded).count() as u32;
    Ok(DecisionTrace {
        interval_index: input.index,
        decisions,
        dropped_slots,
        scenario,
        downgrades,
        discarded_extrapolations: discarded,
        annotation_missing: input.ground_truth.iter().any(Option::is_none),
        frames: cfg.keep_frames.then(|| {
            shown
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    let mut f = s.mf.frame.clone();
                    f.timestamp = base + k as u32 + 1;
                    f
                })
                .collect()
        }),
        displayed,
    })
}

/// Mean quality over every displayed slot that has ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QualitySummary {
    pub slots: usize,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

impl QualitySummary {
    pub fn from_traces<'a>(traces: impl IntoIterator<Item = &'a DecisionTrace>) -> Self {
        let (mut n, mut p, mut s) = (0usize, 0.0, 0.0);
        for t in traces {
            for q in t.inserted_quality() {
                n += 1;
                p += q.psnr;
                s += q.ssim;
            }
        }
        if n == 0 {
            return Self::default();
        }
        Self {
            slots: n,
            mean_psnr: p / n as f64,
            mean_ssim: s / n as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRun {
    pub traces: Vec<DecisionTrace>,
    pub fps: FpsReport,
    pub quality: QualitySummary,
}

/// Runs every interval that has a full extrapolation history, in order.
pub fn run_episode(episode: &Episode, policy: &mut dyn Policy, cfg: &SchedulerConfig) -> Result<EpisodeRun> {
    let len = episode.episode_len();
    if len < 4 {
        return Err(Error::EpisodeTooShort(len));
    }
    let motion: Vec<MotionFrame> = (0..len)
        .map(|t| MotionFrame::from_rendered(episode.base_frame(t), &episode.gbuffers[t]))
        .collect::<Result<_>>()?;
    let envs = episode_env(&episode.gbuffers)?;
    let mut history = StateHistory::new();
    for env in envs.iter().take(HISTORY_FRAMES - 1) {
        history.push(*env, TemporalVector::none());
    }
    let mut traces = Vec::with_capacity(len - HISTORY_FRAMES);
    for t in (HISTORY_FRAMES - 1)..(len - 1) {
        let base = t as u32 * SLOTS_PER_FRAME;
        let input = IntervalInput {
            index: t,
            history: [&motion[t - 2], &motion[t - 1], &motion[t]],
            ground_truth: [
                episode.ground_truth(base + 1),
                episode.ground_truth(base + 2),
                episode.ground_truth(base + 3),
            ],
            env: envs[t],
            base_fps: episode.base_fps,
        };
        let trace = run_interval(&input, &history, policy, cfg)?;
        history.push(envs[t], TemporalVector::node(trace.last_node()));
        traces.push(trace);
    }
    policy.finish_episode()?;
    let fps = FpsReport::from_traces(&traces, episode.base_fps);
    let quality = QualitySummary::from_traces(&traces);
    Ok(EpisodeRun { traces, fps, quality })
}

/// Intervals `run_episode` processes for an episode of `len` base frames.
pub fn interval_count(len: usize) -> usize {
    len.saturating_sub(HISTORY_FRAMES)
}
