use std::collections::BTreeMap;
use std::fs;

use anyhow::Context;
use exwarp_core::metrics::{aggregate_report, PolicyRun};
use exwarp_core::predictor::{
    cross_validate, encode_checkpoint, load_checkpoint, train_on_episodes, training_log_csv, QNetwork,
};
use exwarp_core::scenegen::{load_dataset, Episode};
use exwarp_core::scheduler::{
    interval_quality_csv, run_episode, traces_to_jsonl, DecisionTrace, FixedPolicy, FpsReport, OraclePolicy, Policy,
    QPolicy, SchedulerConfig,
};
use exwarp_core::suite::{render_family, speed_sweep, sweep_csv};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{PolicySpec, RunConfig};
use crate::output::OutputDir;

const UNLABELED: &str = "unlabeled";

/// Episodes named by `datasets`, or the rendered suite when none are given.
pub fn load_episodes(cfg: &RunConfig) -> anyhow::Result<Vec<Episode>> {
    if !cfg.datasets.is_empty() {
        return cfg
            .datasets
            .par_iter()
            .map(|d| load_dataset(d).with_context(|| format!("loading dataset {}", d.display())))
            .collect();
    }
    let suite = cfg.suite_config();
    let mut out = Vec::new();
    for f in cfg.families() {
        out.extend(render_family(f, &suite)?);
    }
    Ok(out)
}

/// Builds one instance of `spec`; trained networks are loaded once by the
/// caller and passed in.
fn instantiate(spec: &PolicySpec, net: Option<&QNetwork>, tie_margin: f64) -> Box<dyn Policy + Send> {
    match (spec, net) {
        (PolicySpec::Fixed(s), _) => Box::new(FixedPolicy(*s)),
        (PolicySpec::Oracle, _) => Box::new(OraclePolicy),
        (PolicySpec::Trained(_), Some(n)) => Box::new(QPolicy::new("trained", n.clone(), tie_margin)),
        (PolicySpec::Trained(_), None) => unreachable!("trained policy without a network"),
    }
}

/// Runs `spec` over every episode. Policies carry no state across episodes,
/// so episodes run in parallel with one instance each.
pub fn run_policy(spec: &PolicySpec, episodes: &[Episode], cfg: &RunConfig) -> anyhow::Result<Vec<DecisionTrace>> {
    let sched = cfg.scheduler_config()?;
    let net = match spec {
        PolicySpec::Trained(p) => Some(load_checkpoint(p).with_context(|| format!("loading {}", p.display()))?),
        _ => None,
    };
    let per: Vec<Vec<DecisionTrace>> = episodes
        .par_iter()
        .map(|e| {
            let mut p = instantiate(spec, net.as_ref(), cfg.train.tie_margin);
            Ok(run_episode(e, p.as_mut(), &sched)?.traces)
        })
        .collect::<anyhow::Result<_>>()?;
    Ok(per.into_iter().flatten().collect())
}

fn base_fps(episodes: &[Episode], cfg: &RunConfig) -> f64 {
    episodes.first().map(|e| e.base_fps).unwrap_or(cfg.suite.base_fps)
}

fn require_episodes(episodes: &[Episode]) -> anyhow::Result<()> {
    if episodes.is_empty() {
        anyhow::bail!("no episodes to process");
    }
    Ok(())
}

pub fn cmd_generate(cfg: &RunConfig) -> anyhow::Result<()> {
    let mut out = OutputDir::new(&cfg.out)?;
    let suite = cfg.suite_config();
    for f in cfg.families() {
        for (i, ep) in render_family(f, &suite)?.iter().enumerate() {
            let rel = format!("datasets/{}/{i:03}", f.as_str());
            let dest = out.root().join(&rel);
            let tmp = out.root().join(format!("{rel}.tmp"));
            if tmp.exists() {
                fs::remove_dir_all(&tmp)?;
            }
            ep.save(&tmp)?;
            if dest.exists() {
                fs::remove_dir_all(&dest)?;
            }
            fs::rename(&tmp, &dest).with_context(|| format!("renaming into {}", dest.display()))?;
            out.record(&format!("{rel}/manifest.json"), &fs::read(dest.join("manifest.json"))?);
        }
    }
    out.finish("generate", cfg.seed, &cfg.canonical()?)
}

pub fn cmd_run(cfg: &RunConfig) -> anyhow::Result<()> {
    let spec = cfg.policy_spec()?;
    let episodes = load_episodes(cfg)?;
    require_episodes(&episodes)?;
    let traces = run_policy(&spec, &episodes, cfg)?;
    let fps = base_fps(&episodes, cfg);
    let mut out = OutputDir::new(&cfg.out)?;
    out.write("traces.jsonl", traces_to_jsonl(&traces)?.as_bytes())?;
    out.write_json("fps.json", &FpsReport::from_traces(&traces, fps))?;
    out.write("quality.csv", interval_quality_csv(&traces).as_bytes())?;
    let report = aggregate_report(&[PolicyRun { policy: spec.to_string(), base_fps: fps, traces }])?;
    out.write("report.csv", report.to_csv().as_bytes())?;
    out.write("report.json", format!("{}\n", report.to_json()?).as_bytes())?;
    out.finish("run", cfg.seed, &cfg.canonical()?)
}

#[derive(Serialize)]
struct TrainSummary {
    decisions: usize,
    gradient_steps: u64,
    episodes: usize,
}

pub fn cmd_train(cfg: &RunConfig) -> anyhow::Result<()> {
    let episodes = load_episodes(cfg)?;
    require_episodes(&episodes)?;
    let refs: Vec<&Episode> = episodes.iter().collect();
    let agent = train_on_episodes(&refs, &cfg.train, &cfg.scheduler_config()?)?;
    let mut out = OutputDir::new(&cfg.out)?;
    out.write("model.exwq", &encode_checkpoint(&agent.trainer.net))?;
    out.write("train_log.csv", training_log_csv(&agent.trainer.log).as_bytes())?;
    out.write_json(
        "train_summary.json",
        &TrainSummary {
            decisions: agent.points,
            gradient_steps: agent.trainer.steps,
            episodes: episodes.len(),
        },
    )?;
    out.finish("train", cfg.seed, &cfg.canonical()?)
}

pub fn cmd_evaluate(cfg: &RunConfig) -> anyhow::Result<()> {
    let episodes = load_episodes(cfg)?;
    require_episodes(&episodes)?;
    let mut groups: BTreeMap<String, Vec<Episode>> = BTreeMap::new();
    for e in episodes {
        let key = e.family.clone().unwrap_or_else(|| UNLABELED.into());
        groups.entry(key).or_default().push(e);
    }
    let families: Vec<(String, Vec<Episode>)> = groups.into_iter().collect();
    let cv = cross_validate(&families, &cfg.train, &cfg.scheduler_config()?)?;
    let mut csv = String::from("held_out,train_decisions,test_decisions,mean_psnr,mean_ssim,warp_ratio,effective_fps\n");
    for f in &cv.folds {
        csv.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6}\n",
            f.held_out,
            f.train_decisions,
            f.test.decisions,
            f.test.mean_psnr,
            f.test.mean_ssim,
            f.test.warp_ratio,
            f.test.effective_fps
        ));
    }
    csv.push_str(&format!(
        "mean,,,{:.6},{:.6},{:.6},\n",
        cv.mean_psnr, cv.mean_ssim, cv.mean_warp_ratio
    ));
    let mut out = OutputDir::new(&cfg.out)?;
    out.write("loocv.csv", csv.as_bytes())?;
    out.write_json("loocv.json", &cv)?;
    out.finish("evaluate", cfg.seed, &cfg.canonical()?)
}

pub fn cmd_compare(cfg: &RunConfig) -> anyhow::Result<()> {
    let episodes = load_episodes(cfg)?;
    require_episodes(&episodes)?;
    let fps = base_fps(&episodes, cfg);
    let mut runs = Vec::new();
    for name in &cfg.compare.policies {
        let spec: PolicySpec = name.parse().map_err(anyhow::Error::msg)?;
        runs.push(PolicyRun {
            policy: spec.to_string(),
            base_fps: fps,
            traces: run_policy(&spec, &episodes, cfg)?,
        });
    }
    let report = aggregate_report(&runs)?;
    let mut out = OutputDir::new(&cfg.out)?;
    out.write("compare.csv", report.to_csv().as_bytes())?;
    out.write("compare.json", format!("{}\n", report.to_json()?).as_bytes())?;
    if !cfg.sweep.speeds.is_empty() {
        let sched: SchedulerConfig = cfg.scheduler_config()?;
        let pts = speed_sweep(&cfg.sweep.speeds, cfg.sweep.episodes, &cfg.suite_config(), &sched)?;
        out.write("sweep.csv", sweep_csv(&pts).as_bytes())?;
    }
    out.finish("compare", cfg.seed, &cfg.canonical()?)
}

/// Sets the global thread pool size from `EXWARP_THREADS` when present.
pub fn configure_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("EXWARP_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .with_context(|| format!("EXWARP_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}
