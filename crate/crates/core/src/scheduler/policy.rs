use std::cell::OnceCell;

use super::node::{Action, NodeId, Scenario};
use super::trace::Provenance;
use crate::error::{Error, Result};
use crate::features::StateVector;
use crate::frame::Frame;
use crate::metrics::QualityPair;
use crate::predictor::{greedy_action, reward_from_quality, QNetwork, RewardConfig};

/// One of the two frames a node can display.
#[derive(Debug, Clone, Copy)]
pub struct NodeOption<'a> {
    pub frame: &'a Frame,
    pub provenance: Provenance,
    pub downgraded: bool,
    pub hole_fraction: Option<f64>,
}

/// Everything a policy may look at when deciding a node.
pub struct NodeView<'a> {
    pub interval: usize,
    pub node: NodeId,
    pub state: StateVector,
    /// Indexed by [`Action::index`].
    pub options: [NodeOption<'a>; 2],
    pub ground_truth: Option<&'a Frame>,
    quality: [OnceCell<QualityPair>; 2],
}

impl<'a> NodeView<'a> {
    pub fn new(
        interval: usize,
        node: NodeId,
        state: StateVector,
        options: [NodeOption<'a>; 2],
        ground_truth: Option<&'a Frame>,
    ) -> Self {
        Self {
            interval,
            node,
            state,
            options,
            ground_truth,
            quality: [OnceCell::new(), OnceCell::new()],
        }
    }

    pub fn option(&self, a: Action) -> &NodeOption<'a> {
        &self.options[a.index()]
    }

    /// Choosing `a` repeats the previously displayed frame.
    pub fn dropped(&self, a: Action) -> bool {
        self.option(a).provenance.is_repeat()
    }

    /// Quality of option `a` against ground truth, computed once.
    pub fn quality(&self, a: Action) -> Result<Option<QualityPair>> {
        let Some(gt) = self.ground_truth else {
            return Ok(None);
        };
        if let Some(q) = self.quality[a.index()].get() {
            return Ok(Some(*q));
        }
        let q = QualityPair::measure(self.option(a).frame, gt)?;
        Ok(Some(*self.quality[a.index()].get_or_init(|| q)))
    }

    /// Reward of choosing `a` over the other option.
    pub fn reward(&self, a: Action, cfg: &RewardConfig) -> Result<Option<f64>> {
        match (self.quality(a)?, self.quality(a.other())?) {
            (Some(c), Some(o)) => Ok(Some(reward_from_quality(c, o, self.dropped(a), cfg))),
            _ => Ok(None),
        }
    }
}

pub trait Policy {
    fn name(&self) -> String;

    fn decide(&mut self, view: &NodeView<'_>) -> Result<Action>;

    /// Called after the last interval of an episode.
    fn finish_episode(&mut self) -> Result<()> {
        Ok(())
    }
}

/// Follows one scenario's decision path.
#[derive(Debug, Clone, Copy)]
pub struct FixedPolicy(pub Scenario);

impl Policy for FixedPolicy {
    fn name(&self) -> String {
        self.0.to_string()
    }

    fn decide(&mut self, view: &NodeView<'_>) -> Result<Action> {
        self.0.action_at(view.node).ok_or_else(|| {
            Error::IllegalPath(format!("{} does not visit node {}", self.0, view.node))
        })
    }
}

/// Greedy per-node choice of the option with higher PSNR against ground
/// truth; ties go to Warp.
#[derive(Debug, Clone, Copy, Default)]
pub struct OraclePolicy;

impl Policy for OraclePolicy {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn decide(&mut self, view: &NodeView<'_>) -> Result<Action> {
        let w = view.quality(Action::Warp)?;
        let e = view.quality(Action::Extrapolate)?;
        match (w, e) {
            (Some(w), Some(e)) => Ok(if e.psnr > w.psnr { Action::Extrapolate } else { Action::Warp }),
            _ => Err(Error::InvalidArgument(format!(
                "oracle policy needs ground truth at interval {} node {}",
                view.interval, view.node
            ))),
        }
    }
}

/// Greedy Q-network policy used for evaluation.
#[derive(Debug, Clone)]
pub struct QPolicy {
    pub name: String,
    pub net: QNetwork,
    pub tie_margin: f64,
}

impl QPolicy {
    pub fn new(name: impl Into<String>, net: QNetwork, tie_margin: f64) -> Self {
        Self {
            name: name.into(),
            net,
            tie_margin,
        }
    }
}

impl Policy for QPolicy {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn decide(&mut self, view: &NodeView<'_>) -> Result<Action> {
        let q = self.net.forward(&view.state.to_f32())?;
        Ok(greedy_action(q, self.tie_margin))
    }
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn decide(&mut self, view: &NodeView<'_>) -> Result<Action> {
        (**self).decide(view)
    }

    fn finish_episode(&mut self) -> Result<()> {
        (**self).finish_episode()
    }
}
