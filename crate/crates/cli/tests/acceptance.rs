//! One PASS/FAIL line per acceptance criterion. Exits nonzero if any fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use exwarp_core::extrapolate::{total_latency, ResolutionClass};
use exwarp_core::metrics::{psnr, ssim, Aggregate};
use exwarp_core::predictor::{train_on_episodes, QNetwork, TrainConfig};
use exwarp_core::scenegen::Episode;
use exwarp_core::scheduler::{
    run_episode, DecisionTrace, FixedPolicy, OraclePolicy, Policy, QPolicy, Scenario, SchedulerConfig,
};
use exwarp_core::suite::{render_family, spearman, speed_sweep, warped_hole_fractions, Family, SuiteConfig};
use exwarp_core::Frame;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn suite(seed: u64, per_family: usize) -> Vec<(Family, Vec<Episode>)> {
    let cfg = SuiteConfig {
        seed,
        episodes_per_family: per_family,
        ..SuiteConfig::default()
    };
    Family::ALL
        .into_iter()
        .map(|f| (f, render_family(f, &cfg).unwrap()))
        .collect()
}

fn scenario_table() -> Outcome {
    let factors = [2u32, 3, 4, 4, 4, 4];
    let drops = [2u32, 1, 0, 0, 0, 0];
    let sched = SchedulerConfig::default();
    let cfg = SuiteConfig {
        episode_len: 8,
        episodes_per_family: 1,
        ..SuiteConfig::default()
    };
    let mut intervals = 0;
    for f in Family::ALL {
        let ep = render_family(f, &cfg).unwrap().remove(0);
        for (i, s) in Scenario::ALL.into_iter().enumerate() {
            let run = run_episode(&ep, &mut FixedPolicy(s), &sched).unwrap();
            for t in &run.traces {
                intervals += 1;
                if t.inserted_frames() + 1 != factors[i] || t.dropped_slots != drops[i] {
                    return Err(format!("{s} on {f}: {}x with {} dropped", t.inserted_frames() + 1, t.dropped_slots));
                }
            }
        }
    }
    Ok(format!("factors (2,3,4,4,4,4), drops (2,1,0,0,0,0) over {intervals} intervals"))
}

fn latency_budget() -> Outcome {
    let base = SchedulerConfig::default();
    let lb = total_latency(&base.latency, ResolutionClass::P480).unwrap();
    let sl3 = total_latency(&base.latency, ResolutionClass::P1080).unwrap();
    if (lb - 6.56).abs() > 1e-9 || (sl3 - 21.32).abs() > 1e-9 {
        return Err(format!("totals {lb} / {sl3} ms"));
    }
    let cfg = SuiteConfig {
        episode_len: 8,
        episodes_per_family: 1,
        ..SuiteConfig::default()
    };
    let ep = render_family(Family::MediumMotion, &cfg).unwrap().remove(0);
    let (mut low_down, mut high_down, mut chosen) = (0, 0, 0);
    for s in [Scenario::S1, Scenario::S2, Scenario::S3, Scenario::S4, Scenario::S5] {
        for (class, down) in [(ResolutionClass::P480, &mut low_down), (ResolutionClass::P1080, &mut high_down)] {
            let sched = SchedulerConfig {
                resolution: Some(class),
                ..SchedulerConfig::default()
            };
            let run = run_episode(&ep, &mut FixedPolicy(s), &sched).unwrap();
            *down += run.traces.iter().map(|t| t.downgrades).sum::<u32>();
            if class == ResolutionClass::P480 {
                chosen += run
                    .traces
                    .iter()
                    .flat_map(|t| &t.displayed)
                    .filter(|d| d.provenance.as_str() == "extrapolated")
                    .count() as u32;
            }
        }
    }
    check(
        low_down == 0 && chosen > 0 && high_down == chosen,
        format!("480p {lb:.2} ms: {low_down} downgrades; 1080p {sl3:.2} ms: {high_down}/{chosen} downgraded"),
    )
}

fn quality_formulas() -> Outcome {
    let a = Frame::from_pixels(16, 16, vec![100; 16 * 16 * 3], 0).unwrap();
    let b = Frame::from_pixels(16, 16, vec![101; 16 * 16 * 3], 0).unwrap();
    let p = psnr(&a, &b).unwrap();
    if (p - 48.1308).abs() > 1e-3 {
        return Err(format!("MSE=1 gives {p:.4} dB"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let (mut dp, mut ds) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let (x, y) = support::random_pair(&mut rng);
        dp = dp.max((psnr(&x, &y).unwrap() - support::psnr_loop(&x, &y)).abs());
        ds = ds.max((ssim(&x, &y).unwrap() - support::ssim_loop(&x, &y)).abs());
    }
    check(
        dp <= 1e-9 && ds <= 1e-6,
        format!("MSE=1 -> {p:.4} dB; max |dPSNR| {dp:.1e}, max |dSSIM| {ds:.1e} over 50 pairs"),
    )
}

fn gradients() -> Outcome {
    let expected = QNetwork::<f32>::zeros().param_count();
    for seed in 0..20u64 {
        if let Some((checked, worst)) = support::gradient_check(seed) {
            return check(
                checked == expected && worst <= 1e-3,
                format!("{checked}/{expected} parameters, worst relative error {worst:.2e}"),
            );
        }
    }
    Err("every seed straddled a ReLU kink".into())
}

struct Trained {
    runs: BTreeMap<String, Vec<(Family, Vec<DecisionTrace>)>>,
}

impl Trained {
    fn all(&self, policy: &str) -> Aggregate {
        let mut a = Aggregate::default();
        for (_, t) in &self.runs[policy] {
            a.merge(&Aggregate::from_traces(t));
        }
        a
    }

    fn family(&self, policy: &str, f: Family) -> Aggregate {
        let t = &self.runs[policy].iter().find(|(g, _)| *g == f).unwrap().1;
        Aggregate::from_traces(t)
    }
}

fn run_all(test: &[(Family, Vec<Episode>)], make: &(dyn Fn() -> Box<dyn Policy + Send> + Sync)) -> Vec<(Family, Vec<DecisionTrace>)> {
    let sched = SchedulerConfig::default();
    test.iter()
        .map(|(f, eps)| {
            let traces: Vec<Vec<DecisionTrace>> = eps
                .par_iter()
                .map(|e| run_episode(e, make().as_mut(), &sched).unwrap().traces)
                .collect();
            (*f, traces.into_iter().flatten().collect())
        })
        .collect()
}

fn train_and_evaluate() -> Trained {
    let train = suite(7, 6);
    let refs: Vec<&Episode> = train.iter().flat_map(|(_, e)| e).collect();
    let cfg = TrainConfig::default();
    let agent = train_on_episodes(&refs, &cfg, &SchedulerConfig::default()).unwrap();
    let net = agent.trainer.net.clone();
    let test = suite(1234, 4);
    let mut runs = BTreeMap::new();
    runs.insert(
        "trained".to_string(),
        run_all(&test, &|| Box::new(QPolicy::new("trained", net.clone(), cfg.tie_margin))),
    );
    runs.insert("S1".into(), run_all(&test, &|| Box::new(FixedPolicy(Scenario::S1))));
    runs.insert("S6".into(), run_all(&test, &|| Box::new(FixedPolicy(Scenario::S6))));
    runs.insert("oracle".into(), run_all(&test, &|| Box::new(OraclePolicy)));
    Trained { runs }
}

fn training_sanity(t: &Trained) -> Outcome {
    let q = |p: &str| t.all(p).mean_psnr().unwrap();
    let (tr, s1, s6, or) = (q("trained"), q("S1"), q("S6"), q("oracle"));
    check(
        tr >= s1 + 0.2 && tr >= s6 + 0.2 && or - tr <= 1.0,
        format!("trained {tr:.3} dB, S1 {s1:.3}, S6 {s6:.3}, oracle {or:.3} (inserted frames)"),
    )
}

fn action_ratio(t: &Trained) -> Outcome {
    let stat = t.family("trained", Family::Static).warp_ratio().unwrap();
    let high = t.family("trained", Family::HighMotion).warp_ratio().unwrap();
    check(
        stat >= 0.9 && 1.0 - high > 1.0 - stat,
        format!("warp ratio static {stat:.3}, high-motion {high:.3}"),
    )
}

fn frame_rate(t: &Trained) -> Outcome {
    let fps = t.all("trained").effective_fps(30.0);
    check(fps >= 99.0, format!("effective fps {fps:.2} at base 30"))
}

fn hole_statistics() -> Outcome {
    let test = suite(1234, 4);
    let sched = SchedulerConfig::default();
    let frac = |f: Family, pred: &dyn Fn(f64) -> bool| {
        let eps = &test.iter().find(|(g, _)| *g == f).unwrap().1;
        let h = warped_hole_fractions(eps, &sched).unwrap();
        h.iter().filter(|v| pred(**v)).count() as f64 / h.len() as f64
    };
    let low = frac(Family::LowMotion, &|v| v < 0.1);
    let high = frac(Family::HighMotion, &|v| v > 0.2);
    check(
        low >= 0.9 && high >= 0.4,
        format!("low-motion {:.1}% under 10% holes, high-motion {:.1}% over 20%", low * 100.0, high * 100.0),
    )
}

fn feature_correlation() -> Outcome {
    let speeds = [2.0, 6.0, 12.0, 20.0, 28.0, 36.0];
    let pts = speed_sweep(&speeds, 4, &SuiteConfig::default(), &SchedulerConfig::default()).unwrap();
    let x: Vec<f64> = pts.iter().map(|p| p.mean_var_x).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.mean_warped_psnr).collect();
    let rho = spearman(&x, &y).unwrap();
    check(rho <= -0.9, format!("Spearman {rho:.3} over {} speeds", speeds.len()))
}

fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.toml");
    fs::write(
        &cfg,
        "seed = 3\n[suite]\nwidth = 48\nheight = 32\nepisode_len = 8\nepisodes_per_family = 1\n\
         families = [\"static\", \"medium-motion\", \"high-motion\"]\n\
         [train]\ntrain_points = 64\ntest_points = 4\nbatch_size = 16\n\
         [sweep]\nspeeds = [2.0, 8.0]\nepisodes = 1\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let trained = format!("trained:{}", out.join("model.exwq").display());
    let cfg = cfg.to_str().unwrap();
    let out_s = out.to_str().unwrap();
    let commands: [&[&str]; 5] = [
        &["generate", "--config", cfg, "--out", out_s],
        &["train", "--config", cfg, "--out", out_s],
        &["run", "--config", cfg, "--out", out_s, "--policy", &trained],
        &["evaluate", "--config", cfg, "--out", out_s],
        &["compare", "--config", cfg, "--out", out_s],
    ];
    let mut snaps = Vec::new();
    for _ in 0..2 {
        if out.exists() {
            fs::remove_dir_all(&out).unwrap();
        }
        for c in commands {
            let o = Command::new(env!("CARGO_BIN_EXE_exwarp")).args(c).output().unwrap();
            if !o.status.success() {
                return Err(format!("{} failed: {}", c[0], String::from_utf8_lossy(&o.stderr).trim()));
            }
        }
        snaps.push(snapshot(&out));
    }
    let differing: Vec<String> = snaps[0]
        .iter()
        .filter(|(k, v)| snaps[1].get(*k) != Some(*v))
        .map(|(k, _)| k.display().to_string())
        .collect();
    check(
        differing.is_empty() && snaps[0].len() == snaps[1].len(),
        format!("{} files across 5 commands, differing: {differing:?}", snaps[0].len()),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |n: u32, name: &str, start: Instant, r: Outcome| {
        let secs = start.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("PASS {n:>2} {name}: {d} [{secs:.1}s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL {n:>2} {name}: {d} [{secs:.1}s]")
            }
        }
    };
    let s = Instant::now();
    report(1, "scenario table", s, scenario_table());
    let s = Instant::now();
    report(2, "latency budget", s, latency_budget());
    let s = Instant::now();
    report(3, "quality formulas", s, quality_formulas());
    let s = Instant::now();
    report(4, "gradient check", s, gradients());
    let s = Instant::now();
    let trained = train_and_evaluate();
    report(5, "training sanity", s, training_sanity(&trained));
    report(6, "action ratio", s, action_ratio(&trained));
    report(7, "effective frame rate", s, frame_rate(&trained));
    let s = Instant::now();
    report(8, "hole statistics", s, hole_statistics());
    let s = Instant::now();
    report(9, "feature-quality correlation", s, feature_correlation());
    let s = Instant::now();
    report(10, "determinism", s, determinism());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
