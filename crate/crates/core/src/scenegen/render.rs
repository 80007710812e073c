use crate::error::Result;
use crate::frame::{block_means, Frame, GBufferSet, SLOTS_PER_FRAME};

use super::spec::{BackgroundKind, NormalProfile, ObjectSpec, SceneSpec, Shape, BACKGROUND_DEPTH};

/// Renders every quarter-slot of the episode plus one G-buffer set per base frame.
pub fn render_episode(spec: &SceneSpec) -> Result<(Vec<Frame>, Vec<GBufferSet>)> {
    spec.validate()?;
    let renderer = Renderer::new(spec);
    let frames = (0..spec.frame_count() as u32).map(|q| renderer.frame(q)).collect();
    let gbuffers = (0..spec.episode_len as u32)
        .map(|t| renderer.gbuffer(t * SLOTS_PER_FRAME))
        .collect();
    Ok((frames, gbuffers))
}

/// Stateless evaluator of the analytic scene at arbitrary times.
pub struct Renderer<'a> {
    spec: &'a SceneSpec,
    /// Object indices sorted front to back (depth, then id).
    order: Vec<usize>,
    colors: Vec<[u8; 3]>,
    palette: [[f64; 3]; 2],
}

struct Hit {
    /// Index into `spec.objects`, or `None` for background.
    object: Option<usize>,
    world: [f64; 2],
    local: [f64; 2],
}

impl<'a> Renderer<'a> {
    pub fn new(spec: &'a SceneSpec) -> Self {
        let mut order: Vec<usize> = (0..spec.objects.len()).collect();
        order.sort_by(|&a, &b| {
            let (oa, ob) = (&spec.objects[a], &spec.objects[b]);
            oa.depth.total_cmp(&ob.depth).then(oa.object_id.cmp(&ob.object_id))
        });
        let colors = spec
            .objects
            .iter()
            .map(|o| o.color.unwrap_or_else(|| object_color(spec.rng_seed, o.object_id)))
            .collect();
        let s = spec.background.seed ^ spec.rng_seed.rotate_left(17);
        let palette = [
            [
                60.0 + 100.0 * unit(hash3(s, 1, 0, 0)),
                60.0 + 100.0 * unit(hash3(s, 2, 0, 0)),
                60.0 + 100.0 * unit(hash3(s, 3, 0, 0)),
            ],
            [
                60.0 + 100.0 * unit(hash3(s, 4, 0, 0)),
                60.0 + 100.0 * unit(hash3(s, 5, 0, 0)),
                60.0 + 100.0 * unit(hash3(s, 6, 0, 0)),
            ],
        ];
        Self {
            spec,
            order,
            colors,
            palette,
        }
    }

    fn zoom(&self, tau: f64) -> f64 {
        self.spec.camera.zoom_rate.powf(tau)
    }

    fn center(&self) -> [f64; 2] {
        [self.spec.width as f64 / 2.0, self.spec.height as f64 / 2.0]
    }

    fn screen_to_world(&self, s: [f64; 2], tau: f64) -> [f64; 2] {
        let c = self.center();
        let z = self.zoom(tau);
        let pan = self.spec.camera.pan_velocity;
        [
            c[0] + pan[0] * tau + (s[0] - c[0]) / z,
            c[1] + pan[1] * tau + (s[1] - c[1]) / z,
        ]
    }

    fn world_to_screen(&self, w: [f64; 2], tau: f64) -> [f64; 2] {
        let c = self.center();
        let z = self.zoom(tau);
        let pan = self.spec.camera.pan_velocity;
        [
            c[0] + z * (w[0] - c[0] - pan[0] * tau),
            c[1] + z * (w[1] - c[1] - pan[1] * tau),
        ]
    }

    fn hit(&self, x: usize, y: usize, tau: f64) -> Hit {
        let world = self.screen_to_world([x as f64, y as f64], tau);
        for &i in &self.order {
            let o = &self.spec.objects[i];
            let c = o.trajectory.position(tau);
            let local = [world[0] - c[0], world[1] - c[1]];
            if inside(o, local) {
                return Hit {
                    object: Some(i),
                    world,
                    local,
                };
            }
        }
        Hit {
            object: None,
            world,
            local: world,
        }
    }

    fn shade(&self, hit: &Hit) -> [u8; 3] {
        let rgb = match hit.object {
            Some(i) => {
                let o = &self.spec.objects[i];
                let base = self.colors[i];
                match o.shape {
                    Shape::TexturedSprite => {
                        let seed = self.spec.rng_seed ^ ((o.object_id as u64) << 40);
                        let mut out = [0.0; 3];
                        for ch in 0..3 {
                            let n = value_noise(seed.wrapping_add(ch as u64), hit.local[0], hit.local[1], 5.0);
                            out[ch] = base[ch] as f64 + 70.0 * (n - 0.5);
                        }
                        out
                    }
                    _ => [base[0] as f64, base[1] as f64, base[2] as f64],
                }
            }
            None => self.background(hit.world),
        };
        [quantize(rgb[0]), quantize(rgb[1]), quantize(rgb[2])]
    }

    fn background(&self, w: [f64; 2]) -> [f64; 3] {
        let bg = self.spec.background;
        match bg.kind {
            BackgroundKind::Flat => self.palette[0],
            BackgroundKind::Gradient => {
                let tx = (w[0] / self.spec.width as f64).clamp(-1.0, 2.0);
                let ty = (w[1] / self.spec.height as f64).clamp(-1.0, 2.0);
                let t = (0.5 * (tx + ty)).clamp(0.0, 1.0);
                let mut out = [0.0; 3];
                for ch in 0..3 {
                    out[ch] = self.palette[0][ch] * (1.0 - t) + self.palette[1][ch] * t;
                }
                out
            }
            BackgroundKind::TexturedNoise => {
                let mut out = [0.0; 3];
                for ch in 0..3 {
                    let s = bg.seed.wrapping_mul(31).wrapping_add(ch as u64);
                    let coarse = value_noise(s, w[0], w[1], 11.0);
                    let fine = value_noise(s ^ 0x9e37_79b9, w[0], w[1], 7.0);
                    out[ch] = self.palette[0][ch] + 90.0 * (coarse - 0.5) + 50.0 * (fine - 0.5);
                }
                out
            }
        }
    }

    /// Ground-truth frame at quarter-slot `q`.
    pub fn frame(&self, q: u32) -> Frame {
        let tau = q as f64 / SLOTS_PER_FRAME as f64;
        let (w, h) = (self.spec.width, self.spec.height);
        let mut f = Frame::new(w, h, q);
        for y in 0..h {
            for x in 0..w {
                let hit = self.hit(x, y, tau);
                f.set(x, y, self.shade(&hit));
            }
        }
        f
    }

    /// G-buffers at quarter-slot `q` (normally a base frame).
    pub fn gbuffer(&self, q: u32) -> GBufferSet {
        let tau = q as f64 / SLOTS_PER_FRAME as f64;
        let prev = tau - 1.0;
        let (w, h) = (self.spec.width, self.spec.height);
        let n = w * h;
        let mut motion = Vec::with_capacity(n);
        let mut stencil = Vec::with_capacity(n);
        let mut normal = Vec::with_capacity(n);
        let mut wpos = Vec::with_capacity(n);
        for y in 0..h {
            for x in 0..w {
                let hit = self.hit(x, y, tau);
                let (prev_world, id, depth, nrm) = match hit.object {
                    Some(i) => {
                        let o = &self.spec.objects[i];
                        let c = o.trajectory.position(prev);
                        let pw = [c[0] + hit.local[0], c[1] + hit.local[1]];
                        (pw, o.object_id, o.depth, surface_normal(o, hit.local))
                    }
                    None => (hit.world, 0u8, BACKGROUND_DEPTH, [0.0, 0.0, 1.0]),
                };
                let ps = self.world_to_screen(prev_world, prev);
                motion.push([
                    ((x as f64 - ps[0]) / SLOTS_PER_FRAME as f64) as f32,
                    ((y as f64 - ps[1]) / SLOTS_PER_FRAME as f64) as f32,
                ]);
                stencil.push(id);
                normal.push(nrm);
                wpos.push([hit.world[0] as f32, hit.world[1] as f32, depth]);
            }
        }
        let blocks = block_means(&motion, w, h);
        GBufferSet {
            width: w,
            height: h,
            motion_dense: motion,
            motion_blocks: blocks,
            stencil,
            world_normal: normal,
            world_position: wpos,
            timestamp: q,
        }
    }
}

fn inside(o: &ObjectSpec, local: [f64; 2]) -> bool {
    let half = o.size / 2.0;
    match o.shape {
        Shape::Rect | Shape::TexturedSprite => {
            local[0] >= -half && local[0] < half && local[1] >= -half && local[1] < half
        }
        Shape::Circle => local[0] * local[0] + local[1] * local[1] <= half * half,
    }
}

fn surface_normal(o: &ObjectSpec, local: [f64; 2]) -> [f32; 3] {
    match o.normal_profile {
        NormalProfile::Flat => [0.0, 0.0, 1.0],
        NormalProfile::Spherical => {
            let half = o.size / 2.0;
            let dx = local[0] / half;
            let dy = local[1] / half;
            let dz = (1.0 - dx * dx - dy * dy).max(0.0).sqrt();
            let len = (dx * dx + dy * dy + dz * dz).sqrt();
            [(dx / len) as f32, (dy / len) as f32, (dz / len) as f32]
        }
    }
}

fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn object_color(seed: u64, id: u8) -> [u8; 3] {
    let s = seed ^ 0xa5a5_5a5a_0f0f_f0f0;
    [
        (30.0 + 200.0 * unit(hash3(s, id as i64, 1, 11))) as u8,
        (30.0 + 200.0 * unit(hash3(s, id as i64, 2, 13))) as u8,
        (30.0 + 200.0 * unit(hash3(s, id as i64, 3, 17))) as u8,
    ]
}

fn hash3(seed: u64, a: i64, b: i64, c: i64) -> u64 {
    // splitmix64 over the combined lattice coordinates
    let mut z = seed
        ^ (a as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (b as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ (c as u64).wrapping_mul(0x1656_67B1_9E37_79F9);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn unit(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Smooth lattice noise in [0, 1] with the given cell size.
fn value_noise(seed: u64, x: f64, y: f64, cell: f64) -> f64 {
    let gx = x / cell;
    let gy = y / cell;
    let x0 = gx.floor();
    let y0 = gy.floor();
    let fx = smooth(gx - x0);
    let fy = smooth(gy - y0);
    let (ix, iy) = (x0 as i64, y0 as i64);
    let v = |dx: i64, dy: i64| unit(hash3(seed, ix + dx, iy + dy, 0));
    let top = v(0, 0) * (1.0 - fx) + v(1, 0) * fx;
    let bottom = v(0, 1) * (1.0 - fx) + v(1, 1) * fx;
    top * (1.0 - fy) + bottom * fy
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}
