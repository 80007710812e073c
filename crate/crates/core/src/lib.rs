//! Warp/extrapolate temporal supersampling simulator.
//!
//! Synthetic scenes are rendered at four times the base frame rate so every
//! inserted frame has a ground truth. Between two rendered frames a policy
//! picks, at each decision node, whether to warp the latest frame or to use a
//! multi-frame extrapolation whose arrival is governed by a latency model.

pub mod error;
pub mod extrapolate;
pub mod features;
pub mod frame;
pub mod metrics;
pub mod predictor;
pub mod scenegen;
pub mod scheduler;
pub mod suite;
pub mod warp;

pub use error::{Error, Result};
pub use frame::{Frame, GBufferSet, MotionFrame};
