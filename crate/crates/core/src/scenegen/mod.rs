//! Synthetic scene generation: analytic 2.5D scenes rendered at every
//! quarter-slot, with exact motion vectors and G-buffers.

mod dataset;
mod render;
mod spec;

pub use dataset::{load_dataset, save_dataset, write_png, DatasetMeta, Episode, Manifest, FORMAT_VERSION};
pub use render::{render_episode, Renderer};
pub use spec::{
    Background, BackgroundKind, CameraSpec, NormalProfile, ObjectSpec, SceneSpec, Shape, Trajectory,
    BACKGROUND_DEPTH,
};

use crate::error::Result;

/// Renders `spec` and packages the result with its metadata.
pub fn render_scene(spec: &SceneSpec, family: Option<&str>) -> Result<Episode> {
    let (frames, gbuffers) = render_episode(spec)?;
    Ok(Episode {
        width: spec.width,
        height: spec.height,
        base_fps: spec.base_fps,
        rng_seed: spec.rng_seed,
        family: family.map(str::to_string),
        frames,
        gbuffers,
    })
}
