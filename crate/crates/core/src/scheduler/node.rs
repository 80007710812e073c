use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    #[serde(rename = "W")]
    Warp = 0,
    #[serde(rename = "E")]
    Extrapolate = 1,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Warp, Action::Extrapolate];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(Action::Warp),
            1 => Ok(Action::Extrapolate),
            _ => Err(Error::InvalidArgument(format!("action index {i} is not 0 or 1"))),
        }
    }

    pub fn other(self) -> Self {
        match self {
            Action::Warp => Action::Extrapolate,
            Action::Extrapolate => Action::Warp,
        }
    }
}

/// Decision nodes of one inter-frame interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeId {
    D1,
    D2,
    D3,
    D4,
    D5,
}

impl NodeId {
    pub const ALL: [NodeId; 5] = [NodeId::D1, NodeId::D2, NodeId::D3, NodeId::D4, NodeId::D5];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Quarter-slot offset at which the decision is taken. The frame it picks
    /// is displayed one slot later.
    pub fn slot(self) -> u32 {
        match self {
            NodeId::D1 => 0,
            NodeId::D2 => 1,
            NodeId::D3 | NodeId::D4 | NodeId::D5 => 2,
        }
    }

    /// Whether `self` may follow the given earlier decisions of its interval.
    pub fn legal_after(self, prior: &[(NodeId, Action)]) -> bool {
        use Action::*;
        use NodeId::*;
        match (self, prior) {
            (D1, []) => true,
            (D2, [(D1, Warp)]) => true,
            (D3, [(D1, Extrapolate)]) => true,
            (D4, [(D1, Warp), (D2, Extrapolate)]) => true,
            (D5, [(D1, Warp), (D2, Warp)]) => true,
            _ => false,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeId::D1 => "d1",
            NodeId::D2 => "d2",
            NodeId::D3 => "d3",
            NodeId::D4 => "d4",
            NodeId::D5 => "d5",
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::S1,
        Scenario::S2,
        Scenario::S3,
        Scenario::S4,
        Scenario::S5,
        Scenario::S6,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// The decision path that produces this scenario.
    pub fn path(self) -> &'static [(NodeId, Action)] {
        use Action::*;
        use NodeId::*;
        match self {
            Scenario::S1 => &[(D1, Extrapolate), (D3, Extrapolate)],
            Scenario::S2 => &[(D1, Extrapolate), (D3, Warp)],
            Scenario::S3 => &[(D1, Warp), (D2, Extrapolate), (D4, Extrapolate)],
            Scenario::S4 => &[(D1, Warp), (D2, Extrapolate), (D4, Warp)],
            Scenario::S5 => &[(D1, Warp), (D2, Warp), (D5, Extrapolate)],
            Scenario::S6 => &[(D1, Warp), (D2, Warp), (D5, Warp)],
        }
    }

    /// Action this scenario's path takes at `node`, if the path visits it.
    pub fn action_at(self, node: NodeId) -> Option<Action> {
        self.path().iter().find(|(n, _)| *n == node).map(|(_, a)| *a)
    }

    /// Repeated slots per interval when every extrapolation arrives in time.
    pub fn nominal_dropped(self) -> u32 {
        match self {
            Scenario::S1 => 2,
            Scenario::S2 => 1,
            _ => 0,
        }
    }

    /// Displayed frames per base interval, counting the rendered one.
    pub fn nominal_upsampling(self) -> u32 {
        4 - self.nominal_dropped()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::S1 => "S1",
            Scenario::S2 => "S2",
            Scenario::S3 => "S3",
            Scenario::S4 => "S4",
            Scenario::S5 => "S5",
            Scenario::S6 => "S6",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scenario {s:?}")))
    }
}

/// Maps a complete decision path to its scenario.
pub fn classify_scenario(decisions: &[(NodeId, Action)]) -> Result<Scenario> {
    Scenario::ALL
        .into_iter()
        .find(|s| s.path() == decisions)
        .ok_or_else(|| Error::IllegalPath(format_path(decisions)))
}

pub fn format_path(decisions: &[(NodeId, Action)]) -> String {
    let parts: Vec<String> = decisions
        .iter()
        .map(|(n, a)| {
            let a = match a {
                Action::Warp => "W",
                Action::Extrapolate => "E",
            };
            format!("{n}={a}")
        })
        .collect();
    format!("({})", parts.join(", "))
}
