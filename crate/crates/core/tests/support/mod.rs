//! Independent reference implementations shared by the oracle and
//! acceptance tests.
#![allow(dead_code)]

use exwarp_core::features::StateVector;
use exwarp_core::predictor::{td_loss_and_grad, td_target, Experience, QNetwork};
use exwarp_core::scheduler::Action;
use exwarp_core::Frame;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_pair(rng: &mut ChaCha8Rng) -> (Frame, Frame) {
    let w = rng.random_range(11..40);
    let h = rng.random_range(11..32);
    let a: Vec<u8> = (0..w * h * 3).map(|_| rng.random()).collect();
    let amp: i32 = rng.random_range(0..80);
    let b: Vec<u8> = a
        .iter()
        .map(|&v| (v as i32 + rng.random_range(-amp..=amp)).clamp(0, 255) as u8)
        .collect();
    (
        Frame::from_pixels(w, h, a, 0).unwrap(),
        Frame::from_pixels(w, h, b, 0).unwrap(),
    )
}

pub fn psnr_loop(a: &Frame, b: &Frame) -> f64 {
    let mut se = 0.0f64;
    let mut n = 0usize;
    for y in 0..a.height {
        for x in 0..a.width {
            let (p, q) = (a.get(x, y), b.get(x, y));
            for c in 0..3 {
                let d = p[c] as f64 - q[c] as f64;
                se += d * d;
                n += 1;
            }
        }
    }
    let mse = se / n as f64;
    if mse == 0.0 {
        100.0
    } else {
        (10.0 * (255.0f64 * 255.0 / mse).log10()).min(100.0)
    }
}

/// Direct 2D windowed SSIM with the Gaussian built from scratch.
pub fn ssim_loop(a: &Frame, b: &Frame) -> f64 {
    let sigma = 1.5f64;
    let mut g = [0.0f64; 11];
    for (i, v) in g.iter_mut().enumerate() {
        let d = i as f64 - 5.0;
        *v = (-d * d / (2.0 * sigma * sigma)).exp();
    }
    let s: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= s);
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let mut total = 0.0;
    for c in 0..3 {
        let mut acc = 0.0;
        let mut count = 0;
        for oy in 0..=a.height - 11 {
            for ox in 0..=a.width - 11 {
                let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for j in 0..11 {
                    for i in 0..11 {
                        let wgt = g[j] * g[i];
                        let x = a.get(ox + i, oy + j)[c] as f64;
                        let y = b.get(ox + i, oy + j)[c] as f64;
                        mx += wgt * x;
                        my += wgt * y;
                        xx += wgt * x * x;
                        yy += wgt * y * y;
                        xy += wgt * x * y;
                    }
                }
                let vx = xx - mx * mx;
                let vy = yy - my * my;
                let cov = xy - mx * my;
                acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
        total += acc / count as f64;
    }
    total / 3.0
}

pub fn dense_forward(net: &QNetwork, input: &[f32]) -> [f64; 2] {
    let mut x: Vec<f64> = input.iter().map(|&v| v as f64).collect();
    let last = net.layers.len() - 1;
    for (k, l) in net.layers.iter().enumerate() {
        let mut y = vec![0.0f64; l.cols];
        for (o, yo) in y.iter_mut().enumerate() {
            let mut s = l.bias[o] as f64;
            for (i, xi) in x.iter().enumerate() {
                s += xi * l.weights[i * l.cols + o] as f64;
            }
            *yo = if k < last { s.max(0.0) } else { s };
        }
        x = y;
    }
    [x[0], x[1]]
}

pub fn experiences(rng: &mut ChaCha8Rng, n: usize) -> Vec<Experience> {
    (0..n)
        .map(|i| {
            let s: Vec<f64> = (0..44).map(|_| rng.random_range(0.0..2.0)).collect();
            let t: Vec<f64> = (0..44).map(|_| rng.random_range(0.0..2.0)).collect();
            Experience {
                state: StateVector::encode(&s).unwrap(),
                action: if rng.random_bool(0.5) { Action::Warp } else { Action::Extrapolate },
                reward: rng.random_range(-0.5..0.5),
                next_state: StateVector::encode(&t).unwrap(),
                terminal: i == n - 1,
            }
        })
        .collect()
}

/// Forward state for one experience: pre-activations per layer and the
/// post-activation inputs to each layer.
pub struct Cache {
    pub inputs: Vec<Vec<f64>>,
    pub pre: Vec<Vec<f64>>,
    pub y: f64,
    pub action: usize,
}

pub fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

pub fn cache(net: &QNetwork<f64>, input: Vec<f64>, y: f64, action: usize) -> Cache {
    let mut inputs = vec![input];
    let mut pre = Vec::new();
    for (k, l) in net.layers.iter().enumerate() {
        let x = &inputs[k];
        let z: Vec<f64> = (0..l.cols)
            .map(|o| l.bias[o] + (0..l.rows).map(|i| x[i] * l.weights[i * l.cols + o]).sum::<f64>())
            .collect();
        if k + 1 < net.layers.len() {
            inputs.push(z.iter().map(|&v| relu(v)).collect());
        }
        pre.push(z);
    }
    Cache { inputs, pre, y, action }
}

/// Squared error after adding `dz` to unit `j` of layer `k`'s
/// pre-activation. Returns `None` when some ReLU changes state, i.e. the
/// perturbation straddles a kink.
pub fn perturbed_error(net: &QNetwork<f64>, c: &Cache, k: usize, j: usize, dz: f64) -> Option<f64> {
    let last = net.layers.len() - 1;
    let mut z = c.pre[k].clone();
    z[j] += dz;
    let mut layer = k;
    if layer < last && (z[j] > 0.0) != (c.pre[k][j] > 0.0) {
        return None;
    }
    // rank-one update into the next layer, then full passes
    if layer < last {
        let diff = relu(z[j]) - relu(c.pre[k][j]);
        let next = &net.layers[layer + 1];
        let mut zn = c.pre[layer + 1].clone();
        for (o, v) in zn.iter_mut().enumerate() {
            *v += diff * next.weights[j * next.cols + o];
        }
        layer += 1;
        z = zn;
        while layer < last {
            for (v, orig) in z.iter().zip(&c.pre[layer]) {
                if (*v > 0.0) != (*orig > 0.0) {
                    return None;
                }
            }
            let x: Vec<f64> = z.iter().map(|&v| relu(v)).collect();
            let l = &net.layers[layer + 1];
            z = (0..l.cols)
                .map(|o| l.bias[o] + (0..l.rows).map(|i| x[i] * l.weights[i * l.cols + o]).sum::<f64>())
                .collect();
            layer += 1;
        }
    }
    let d = c.y - z[c.action];
    Some(d * d)
}

pub fn gradient_check(seed: u64) -> Option<(usize, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = QNetwork::<f32>::init(&mut rng).cast::<f64>();
    let target = QNetwork::<f32>::init(&mut rng).cast::<f64>();
    let exps = experiences(&mut rng, 5);
    let batch: Vec<&Experience> = exps.iter().collect();
    let gamma = 0.95;
    let (_, grads, _) = td_loss_and_grad(&net, &target, &batch, gamma).unwrap();
    let caches: Vec<Cache> = exps
        .iter()
        .map(|e| {
            let y = td_target(&target, e, gamma).unwrap();
            cache(&net, e.state.decode(), y, e.action.index())
        })
        .collect();
    let n = exps.len() as f64;
    let h = 1e-4;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (k, l) in net.layers.iter().enumerate() {
        for j in 0..l.cols {
            // rows 0..l.rows are weights into unit j; row l.rows is its bias
            for i in 0..=l.rows {
                let analytic = if i < l.rows {
                    grads.layers[k].weights[i * l.cols + j]
                } else {
                    grads.layers[k].bias[j]
                };
                let mut plus = 0.0;
                let mut minus = 0.0;
                for c in &caches {
                    let x = if i < l.rows { c.inputs[k][i] } else { 1.0 };
                    plus += perturbed_error(&net, c, k, j, h * x)?;
                    minus += perturbed_error(&net, c, k, j, -h * x)?;
                }
                let numeric = (plus - minus) / (2.0 * h * n);
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7);
                worst = worst.max(rel);
                checked += 1;
            }
        }
    }
    Some((checked, worst))
}
