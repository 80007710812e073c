//! On-disk dataset layout.
//!
//! ```text
//! manifest.json
//! frames/q000000.png          RGB8, one per quarter-slot
//! gbuf/000000.mvd             "MVD1", u32 w, u32 h, f32 (x, y) pairs
//! gbuf/000000.mvb             same header, block dimensions
//! gbuf/000000.stencil.png     8-bit grayscale
//! gbuf/000000.normal.bin      "NRM1", u32 w, u32 h, f32 triples
//! gbuf/000000.wpos.bin        "WPS1", u32 w, u32 h, f32 triples
//! ```
//!
//! All binary values are little-endian. The manifest records a SHA-256
//! checksum for every file, verified on load.

use std::collections::BTreeMap;
use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::frame::{Frame, GBufferSet, BLOCK_SIZE, SLOTS_PER_FRAME};

pub const FORMAT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub width: usize,
    pub height: usize,
    pub base_fps: f64,
    pub episode_len: usize,
    pub rng_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    pub checksums: BTreeMap<String, String>,
}

/// A rendered episode: ground truth at every quarter-slot and G-buffers per base frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub width: usize,
    pub height: usize,
    pub base_fps: f64,
    pub rng_seed: u64,
    pub family: Option<String>,
    pub frames: Vec<Frame>,
    pub gbuffers: Vec<GBufferSet>,
}

impl Episode {
    pub fn episode_len(&self) -> usize {
        self.gbuffers.len()
    }

    /// Ground-truth frame at quarter-slot `q`, if rendered.
    pub fn ground_truth(&self, q: u32) -> Option<&Frame> {
        self.frames.get(q as usize)
    }

    pub fn base_frame(&self, t: usize) -> &Frame {
        &self.frames[t * SLOTS_PER_FRAME as usize]
    }
}

fn sha_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn encode_png_rgb(f: &Frame) -> Result<Vec<u8>> {
    let img = RgbImage::from_raw(f.width as u32, f.height as u32, f.pixels.clone())
        .ok_or_else(|| Error::Format("frame buffer size mismatch".into()))?;
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::Format(format!("png encode: {e}")))?;
    Ok(out.into_inner())
}

fn encode_png_gray(data: &[u8], w: usize, h: usize) -> Result<Vec<u8>> {
    let img = image::GrayImage::from_raw(w as u32, h as u32, data.to_vec())
        .ok_or_else(|| Error::Format("stencil buffer size mismatch".into()))?;
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::Format(format!("png encode: {e}")))?;
    Ok(out.into_inner())
}

fn encode_vec_raster<const N: usize>(magic: &[u8; 4], w: usize, h: usize, data: &[[f32; N]]) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + data.len() * N * 4);
    out.extend_from_slice(magic);
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out.extend_from_slice(&(h as u32).to_le_bytes());
    for v in data {
        for c in v {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out
}

fn decode_vec_raster<const N: usize>(
    name: &str,
    magic: &[u8; 4],
    expected: (usize, usize),
    bytes: &[u8],
) -> Result<Vec<[f32; N]>> {
    if bytes.len() < 12 || &bytes[0..4] != magic {
        return Err(Error::Format(format!(
            "{name}: bad magic, expected {}",
            String::from_utf8_lossy(magic)
        )));
    }
    let w = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if (w, h) != expected {
        return Err(Error::dims(expected, (w, h)));
    }
    let body = &bytes[12..];
    if body.len() != w * h * N * 4 {
        return Err(Error::Format(format!("{name}: truncated payload")));
    }
    Ok(body
        .chunks_exact(N * 4)
        .map(|chunk| {
            let mut v = [0f32; N];
            for (i, c) in chunk.chunks_exact(4).enumerate() {
                v[i] = f32::from_le_bytes(c.try_into().unwrap());
            }
            v
        })
        .collect())
}

fn write_file(root: &Path, rel: &str, bytes: &[u8], sums: &mut BTreeMap<String, String>) -> Result<()> {
    let path = root.join(rel);
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    sums.insert(rel.to_string(), sha_hex(bytes));
    Ok(())
}

/// Writes an episode under `path`, creating the directory tree.
pub fn save_dataset(path: &Path, frames: &[Frame], gbuffers: &[GBufferSet], meta: &DatasetMeta) -> Result<()> {
    let (w, h) = (meta.width, meta.height);
    if frames.len() != 4 * gbuffers.len() - 3 {
        return Err(Error::Format(format!(
            "{} frames do not match {} base frames",
            frames.len(),
            gbuffers.len()
        )));
    }
    for d in [path.to_path_buf(), path.join("frames"), path.join("gbuf")] {
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let mut sums = BTreeMap::new();
    for (q, f) in frames.iter().enumerate() {
        if f.dims() != (w, h) {
            return Err(Error::dims((w, h), f.dims()));
        }
        write_file(path, &format!("frames/q{q:06}.png"), &encode_png_rgb(f)?, &mut sums)?;
    }
    for (t, g) in gbuffers.iter().enumerate() {
        if (g.width, g.height) != (w, h) {
            return Err(Error::dims((w, h), (g.width, g.height)));
        }
        let (bw, bh) = (w / BLOCK_SIZE, h / BLOCK_SIZE);
        write_file(path, &format!("gbuf/{t:06}.mvd"), &encode_vec_raster(b"MVD1", w, h, &g.motion_dense), &mut sums)?;
        write_file(path, &format!("gbuf/{t:06}.mvb"), &encode_vec_raster(b"MVD1", bw, bh, &g.motion_blocks), &mut sums)?;
        write_file(path, &format!("gbuf/{t:06}.stencil.png"), &encode_png_gray(&g.stencil, w, h)?, &mut sums)?;
        write_file(path, &format!("gbuf/{t:06}.normal.bin"), &encode_vec_raster(b"NRM1", w, h, &g.world_normal), &mut sums)?;
        write_file(path, &format!("gbuf/{t:06}.wpos.bin"), &encode_vec_raster(b"WPS1", w, h, &g.world_position), &mut sums)?;
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        width: w,
        height: h,
        base_fps: meta.base_fps,
        episode_len: gbuffers.len(),
        rng_seed: meta.rng_seed,
        family: meta.family.clone(),
        checksums: sums,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    let mp = path.join(MANIFEST);
    fs::write(&mp, text).map_err(|e| Error::io(&mp, e))?;
    Ok(())
}

/// Metadata recorded alongside the rasters.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub width: usize,
    pub height: usize,
    pub base_fps: f64,
    pub rng_seed: u64,
    pub family: Option<String>,
}

impl Episode {
    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            width: self.width,
            height: self.height,
            base_fps: self.base_fps,
            rng_seed: self.rng_seed,
            family: self.family.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_dataset(path, &self.frames, &self.gbuffers, &self.meta())
    }
}

fn read_checked(root: &Path, rel: &str, manifest: &Manifest) -> Result<Vec<u8>> {
    let path = root.join(rel);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let expected = manifest
        .checksums
        .get(rel)
        .ok_or_else(|| Error::Format(format!("manifest has no checksum for {rel}")))?;
    if &sha_hex(&bytes) != expected {
        return Err(Error::ChecksumMismatch { file: rel.to_string() });
    }
    Ok(bytes)
}

fn decode_png(rel: &str, bytes: &[u8]) -> Result<image::DynamicImage> {
    image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| Error::Format(format!("{rel}: {e}")))
}

/// Loads and verifies an episode written by [`save_dataset`].
pub fn load_dataset(path: &Path) -> Result<Episode> {
    let mp = path.join(MANIFEST);
    if !mp.is_file() {
        return Err(Error::Format(format!("missing {}", mp.display())));
    }
    let text = fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Format(format!("manifest: {e}")))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: manifest.format_version,
            expected: FORMAT_VERSION,
        });
    }
    let (w, h) = (manifest.width, manifest.height);
    if w == 0 || h == 0 || w % BLOCK_SIZE != 0 || h % BLOCK_SIZE != 0 || manifest.episode_len < 1 {
        return Err(Error::Format(format!("manifest declares unusable geometry {w}x{h}")));
    }
    let n_frames = 4 * manifest.episode_len - 3;
    let mut frames = Vec::with_capacity(n_frames);
    for q in 0..n_frames {
        let rel = format!("frames/q{q:06}.png");
        let img = decode_png(&rel, &read_checked(path, &rel, &manifest)?)?.into_rgb8();
        let dims = (img.width() as usize, img.height() as usize);
        if dims != (w, h) {
            return Err(Error::dims((w, h), dims));
        }
        frames.push(Frame::from_pixels(w, h, img.into_raw(), q as u32)?);
    }
    let (bw, bh) = (w / BLOCK_SIZE, h / BLOCK_SIZE);
    let mut gbuffers = Vec::with_capacity(manifest.episode_len);
    for t in 0..manifest.episode_len {
        let rel = format!("gbuf/{t:06}.mvd");
        let motion_dense = decode_vec_raster::<2>(&rel, b"MVD1", (w, h), &read_checked(path, &rel, &manifest)?)?;
        let rel = format!("gbuf/{t:06}.mvb");
        let motion_blocks = decode_vec_raster::<2>(&rel, b"MVD1", (bw, bh), &read_checked(path, &rel, &manifest)?)?;
        let rel = format!("gbuf/{t:06}.stencil.png");
        let st = decode_png(&rel, &read_checked(path, &rel, &manifest)?)?.into_luma8();
        let dims = (st.width() as usize, st.height() as usize);
        if dims != (w, h) {
            return Err(Error::dims((w, h), dims));
        }
        let rel = format!("gbuf/{t:06}.normal.bin");
        let world_normal = decode_vec_raster::<3>(&rel, b"NRM1", (w, h), &read_checked(path, &rel, &manifest)?)?;
        let rel = format!("gbuf/{t:06}.wpos.bin");
        let world_position = decode_vec_raster::<3>(&rel, b"WPS1", (w, h), &read_checked(path, &rel, &manifest)?)?;
        gbuffers.push(GBufferSet {
            width: w,
            height: h,
            motion_dense,
            motion_blocks,
            stencil: st.into_raw(),
            world_normal,
            world_position,
            timestamp: t as u32 * SLOTS_PER_FRAME,
        });
    }
    Ok(Episode {
        width: w,
        height: h,
        base_fps: manifest.base_fps,
        rng_seed: manifest.rng_seed,
        family: manifest.family,
        frames,
        gbuffers,
    })
}

/// Writes a frame as an RGB PNG (used for debugging dumps of synthesized frames).
pub fn write_png(path: &Path, frame: &Frame) -> Result<()> {
    let bytes = encode_png_rgb(frame)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
