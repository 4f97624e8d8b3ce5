//! Training/evaluation runs, CSV outputs, summaries and the band comparison.

use super::config::{ExperimentConfig, PolicyKind};
use super::env::{sim_params, Env};
use crate::agent::{Ddpg, Graph, GrantModel, LearnStats, Policy, Quantized, Transition};
use crate::baselines::{MaddpgFcModel, StaticPolicy};
use crate::error::{Error, Result};
use crate::link::BandPreset;
use crate::nn::Checkpoint;
use crate::sim::{simulate_slot, SlotOutcome};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const METRICS_HEADER: [&str; 9] =
    ["step", "U", "U_P", "U_S", "T_avg_ms", "T_max_ms", "reward", "power_W_mean", "subarrays_mean"];
pub const LOSS_HEADER: [&str; 4] = ["step", "critic_loss", "q_value", "actor_lr"];
/// Window (in steps) over which converged values are averaged.
pub const CONVERGENCE_WINDOW: usize = 50;

pub fn make_policy(cfg: &ExperimentConfig, kind: PolicyKind, g: &Graph) -> Result<Box<dyn Policy>> {
    let seed = cfg.train.seed;
    Ok(match kind {
        PolicyKind::Grant => {
            let m = GrantModel::new(&cfg.agent.grant, cfg.link.subbands, seed)?;
            Box::new(Ddpg::new(m, cfg.train.clone())?)
        }
        PolicyKind::MaddpgFc => {
            let m = MaddpgFcModel::new(g, cfg.agent.maddpg_hidden, cfg.agent.grant.head_init, seed)?;
            Box::new(Ddpg::new(m, cfg.train.clone())?)
        }
        PolicyKind::Uniform => Box::new(StaticPolicy::uniform()),
        PolicyKind::Full => Box::new(StaticPolicy::full_resource()),
    })
}

/// One row of the per-step metrics CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct StepMetrics {
    pub step: usize,
    pub u: f64,
    pub u_p: f64,
    pub u_s: f64,
    pub t_avg_ms: f64,
    pub t_max_ms: f64,
    pub reward: f64,
    pub power_w_mean: f64,
    pub subarrays_mean: f64,
}

impl StepMetrics {
    pub fn from_outcome(step: usize, o: &SlotOutcome) -> Self {
        Self {
            step,
            u: o.usage.u,
            u_p: o.usage.u_p,
            u_s: o.usage.u_s,
            t_avg_ms: o.t_avg_s * 1e3,
            t_max_ms: o.t_max_s * 1e3,
            reward: o.reward,
            power_w_mean: o.usage.power_w_mean,
            subarrays_mean: o.usage.subarrays_mean,
        }
    }

    fn fields(&self) -> [String; 9] {
        [
            self.step.to_string(),
            self.u.to_string(),
            self.u_p.to_string(),
            self.u_s.to_string(),
            self.t_avg_ms.to_string(),
            self.t_max_ms.to_string(),
            self.reward.to_string(),
            self.power_w_mean.to_string(),
            self.subarrays_mean.to_string(),
        ]
    }
}

/// In-memory record of a run.
#[derive(Clone, Debug, Default)]
pub struct RunHistory {
    pub metrics: Vec<StepMetrics>,
    pub losses: Vec<(usize, LearnStats)>,
    /// Quantized allocations actually applied, for replay.
    pub applied: Vec<Quantized>,
    pub interference_w: Vec<f64>,
    pub infinite_delay_steps: usize,
    pub wall_s_per_step: f64,
    pub param_count: usize,
}

struct CsvSink {
    w: csv::Writer<File>,
}

impl CsvSink {
    fn create(path: &Path, hash: &str, header: &[&str]) -> Result<Self> {
        let mut f = File::create(path)?;
        writeln!(f, "# config_hash={hash}")?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(f);
        w.write_record(header)?;
        w.flush()?;
        Ok(Self { w })
    }

    fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) -> Result<()> {
        self.w.write_record(fields.into_iter().collect::<Vec<_>>())?;
        self.w.flush()?;
        Ok(())
    }

    fn fail(self, step: usize, err: &Error) -> Result<()> {
        let mut f = self.w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        writeln!(f, "# FAILED at step {step}: {err}")?;
        Ok(())
    }
}

/// Options of a single run.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub steps: usize,
    /// Learn and explore; otherwise deterministic evaluation.
    pub train: bool,
    pub out_dir: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub dump_traffic: bool,
}

pub fn metrics_path(dir: &Path) -> PathBuf {
    dir.join("metrics.csv")
}

pub fn write_traffic_csv(path: &Path, traffic: &[Vec<u32>], hash: &str) -> Result<()> {
    let header: Vec<String> =
        std::iter::once("step".to_string()).chain((0..traffic.len()).map(|k| format!("source{k}"))).collect();
    let mut sink = CsvSink::create(path, hash, &header.iter().map(String::as_str).collect::<Vec<_>>())?;
    let steps = traffic.first().map_or(0, Vec::len);
    for t in 0..steps {
        sink.row(std::iter::once(t.to_string()).chain(traffic.iter().map(|r| r[t].to_string())))?;
    }
    Ok(())
}

/// Runs `policy` for `opts.steps` steps on `env`, streaming CSVs to
/// `opts.out_dir` when given. On error the CSVs end with a failure marker.
pub fn run_policy(cfg: &ExperimentConfig, env: &mut Env, policy: &mut dyn Policy, opts: &RunOptions) -> Result<RunHistory> {
    let hash = cfg.hash();
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir)?;
        if opts.dump_traffic {
            write_traffic_csv(&dir.join("traffic.csv"), &env.traffic, &hash)?;
        }
    }
    if env.steps_available() < opts.steps {
        return Err(Error::State(format!("environment holds {} steps, {} requested", env.steps_available(), opts.steps)));
    }
    if let Some(ck) = &opts.checkpoint {
        policy.load_checkpoint(&Checkpoint::load(ck)?)?;
    }
    let mut metrics_sink = match &opts.out_dir {
        Some(d) => Some(CsvSink::create(&metrics_path(d), &hash, &METRICS_HEADER)?),
        None => None,
    };
    let mut loss_sink = match &opts.out_dir {
        Some(d) if opts.train => Some(CsvSink::create(&d.join("loss.csv"), &hash, &LOSS_HEADER)?),
        _ => None,
    };
    let save_checkpoint = |policy: &dyn Policy, step: usize| -> Result<()> {
        if let (Some(dir), true) = (&opts.out_dir, opts.train) {
            if let Some(ck) = policy.checkpoint(step) {
                ck.save(&dir.join(format!("checkpoint_{step:04}.json")))?;
            }
        }
        Ok(())
    };
    save_checkpoint(&*policy, 0)?;
    let mut hist = RunHistory { param_count: policy.param_count(), ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed ^ 0xe7_9105);
    let started = Instant::now();
    let mut result = Ok(());
    let first = env.bootstrap()?;
    let mut obs = env.observe(0, &first)?;
    for step in 0..opts.steps {
        let res = (|| -> Result<()> {
            let graph = env.graph().clone();
            let action = policy.act(&obs, &graph, opts.train, &mut rng)?;
            let r = env.apply(step, &action)?;
            let next_obs = env.observe(step + 1, &r.outcome)?;
            let m = StepMetrics::from_outcome(step, &r.outcome);
            if let Some(s) = metrics_sink.as_mut() {
                s.row(m.fields())?;
            }
            if opts.train {
                let tr = Transition { obs: obs.clone(), action, reward: r.outcome.reward, next_obs: next_obs.clone() };
                if let Some(stats) = policy.learn(&tr, &graph)? {
                    if let Some(s) = loss_sink.as_mut() {
                        s.row([
                            step.to_string(),
                            stats.critic_loss.to_string(),
                            stats.q_value.to_string(),
                            stats.actor_lr.to_string(),
                        ])?;
                    }
                    hist.losses.push((step, stats));
                }
                if (step + 1) % cfg.train.checkpoint_every == 0 {
                    save_checkpoint(&*policy, step + 1)?;
                }
            }
            hist.infinite_delay_steps += usize::from(r.outcome.infinite_delay);
            hist.metrics.push(m);
            hist.applied.push(r.quantized);
            hist.interference_w.push(r.interference_w);
            obs = next_obs;
            Ok(())
        })();
        if let Err(e) = res {
            if let Some(s) = metrics_sink.take() {
                s.fail(step, &e)?;
            }
            if let Some(s) = loss_sink.take() {
                s.fail(step, &e)?;
            }
            result = Err(e);
            break;
        }
    }
    hist.wall_s_per_step = started.elapsed().as_secs_f64() / opts.steps.max(1) as f64;
    result.map(|_| hist)
}

/// Converged values read back from a metrics CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub policy: String,
    pub seed: u64,
    pub steps: usize,
    pub config_hash: String,
    pub metrics_csv: String,
    pub converged_u: f64,
    pub converged_t_avg_ms: f64,
    pub converged_t_max_ms: f64,
    pub initial_u: f64,
    pub wall_s_per_step: f64,
    pub param_count: usize,
    pub infinite_delay_steps: usize,
}

/// Parses a metrics CSV written by `run_policy`.
pub fn read_metrics(path: &Path) -> Result<Vec<StepMetrics>> {
    let f = File::open(path).map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.starts_with('#') || line.starts_with("step") || line.is_empty() {
            continue;
        }
        let v: Vec<&str> = line.split(',').collect();
        let num = |k: usize| -> Result<f64> {
            v.get(k)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Input(format!("{}: bad field {k} on line {}", path.display(), i + 1)))
        };
        rows.push(StepMetrics {
            step: num(0)? as usize,
            u: num(1)?,
            u_p: num(2)?,
            u_s: num(3)?,
            t_avg_ms: num(4)?,
            t_max_ms: num(5)?,
            reward: num(6)?,
            power_w_mean: num(7)?,
            subarrays_mean: num(8)?,
        });
    }
    Ok(rows)
}

/// Means over the last `CONVERGENCE_WINDOW` rows: (U, T_avg ms, T_max ms).
pub fn converged(rows: &[StepMetrics]) -> (f64, f64, f64) {
    let tail = &rows[rows.len().saturating_sub(CONVERGENCE_WINDOW)..];
    let n = tail.len().max(1) as f64;
    (
        tail.iter().map(|r| r.u).sum::<f64>() / n,
        tail.iter().map(|r| r.t_avg_ms).sum::<f64>() / n,
        tail.iter().map(|r| r.t_max_ms).sum::<f64>() / n,
    )
}

/// Full run for one seed into `opts.out_dir`, returning the summary derived
/// from the written metrics CSV (also saved as `summary.json`).
pub fn run_seed(base: &ExperimentConfig, seed: u64, opts: &RunOptions) -> Result<(RunSummary, RunHistory)> {
    let dir = opts
        .out_dir
        .clone()
        .ok_or_else(|| Error::Input("a run needs an output directory".into()))?;
    let cfg = base.clone().with_seed(seed);
    cfg.validate()?;
    let mut env = Env::new(&cfg, opts.steps)?;
    let mut policy = make_policy(&cfg, cfg.policy, env.graph())?;
    let hist = run_policy(&cfg, &mut env, policy.as_mut(), opts)?;
    let rows = read_metrics(&metrics_path(&dir))?;
    let (u, t_avg, t_max) = converged(&rows);
    let summary = RunSummary {
        policy: cfg.policy.name().to_string(),
        seed,
        steps: opts.steps,
        config_hash: cfg.hash(),
        metrics_csv: metrics_path(&dir).display().to_string(),
        converged_u: u,
        converged_t_avg_ms: t_avg,
        converged_t_max_ms: t_max,
        initial_u: rows.first().map_or(f64::NAN, |r| r.u),
        wall_s_per_step: hist.wall_s_per_step,
        param_count: hist.param_count,
        infinite_delay_steps: hist.infinite_delay_steps,
    };
    std::fs::write(dir.join("summary.json"), serde_json::to_vec_pretty(&summary)?)?;
    Ok((summary, hist))
}

pub fn seed_dir(out_dir: &Path, policy: PolicyKind, seed: u64) -> PathBuf {
    out_dir.join(format!("{}_seed{seed}", policy.name()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len().max(1) as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub policy: String,
    pub seeds: Vec<u64>,
    pub converged_u: MeanStd,
    pub converged_t_avg_ms: MeanStd,
    pub converged_t_max_ms: MeanStd,
    pub wall_s_per_step: MeanStd,
}

/// Mean and spread of per-seed summaries, written as `aggregate_<policy>.json`.
pub fn aggregate(out_dir: &Path, summaries: &[RunSummary]) -> Result<Aggregate> {
    let first = summaries.first().ok_or_else(|| Error::Input("nothing to aggregate".into()))?;
    let pick = |f: fn(&RunSummary) -> f64| MeanStd::of(&summaries.iter().map(f).collect::<Vec<_>>());
    let agg = Aggregate {
        policy: first.policy.clone(),
        seeds: summaries.iter().map(|s| s.seed).collect(),
        converged_u: pick(|s| s.converged_u),
        converged_t_avg_ms: pick(|s| s.converged_t_avg_ms),
        converged_t_max_ms: pick(|s| s.converged_t_max_ms),
        wall_s_per_step: pick(|s| s.wall_s_per_step),
    };
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join(format!("aggregate_{}.json", agg.policy)), serde_json::to_vec_pretty(&agg)?)?;
    Ok(agg)
}

/// Runs every seed into `out_dir/<policy>_seed<seed>/` and aggregates.
pub fn run_experiment(cfg: &ExperimentConfig, seeds: &[u64], out_dir: &Path, train: bool) -> Result<(Vec<RunSummary>, Aggregate)> {
    let mut summaries = Vec::new();
    for &s in seeds {
        let opts = RunOptions {
            steps: cfg.train.steps,
            train,
            out_dir: Some(seed_dir(out_dir, cfg.policy, s)),
            ..RunOptions::default()
        };
        summaries.push(run_seed(cfg, s, &opts)?.0);
    }
    let agg = aggregate(out_dir, &summaries)?;
    Ok((summaries, agg))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub band: String,
    pub t_avg_ms: f64,
    pub t_max_ms: f64,
    pub u: f64,
}

/// Replays the allocations of `hist` under each band's rate model.
pub fn replay_bands(cfg: &ExperimentConfig, env: &Env, hist: &RunHistory, bands: &[BandPreset]) -> Result<Vec<BandRow>> {
    let mut rows = Vec::new();
    for &band in bands {
        let mut params = sim_params(cfg, band)?;
        let (mut t_avg, mut t_max, mut u) = (0.0, 0.0, 0.0);
        for (step, q) in hist.applied.iter().enumerate() {
            params.interference_w = hist.interference_w[step];
            let o = simulate_slot(&env.scenario.network, &env.arrivals(step)?, &q.assignment, &q.offload, &q.outcome, &params)?;
            t_avg += o.t_avg_s;
            t_max += o.t_max_s;
            u += o.usage.u;
        }
        let n = hist.applied.len().max(1) as f64;
        rows.push(BandRow { band: band.name().to_string(), t_avg_ms: t_avg / n * 1e3, t_max_ms: t_max / n * 1e3, u: u / n });
    }
    Ok(rows)
}

/// Rolls out the configured policy deterministically (parameters from
/// `checkpoint` when given) and replays its allocations on every band.
pub fn compare_bands(cfg: &ExperimentConfig, checkpoint: Option<&Path>, steps: usize, bands: &[BandPreset]) -> Result<Vec<BandRow>> {
    if let Some(p) = checkpoint {
        if !p.exists() {
            return Err(Error::Input(format!("checkpoint {} not found", p.display())));
        }
    }
    let mut thz_cfg = cfg.clone();
    thz_cfg.band = BandPreset::Thz;
    let mut env = Env::new(&thz_cfg, steps)?;
    let mut policy = make_policy(&thz_cfg, thz_cfg.policy, env.graph())?;
    let opts = RunOptions { steps, train: false, out_dir: None, checkpoint: checkpoint.map(Path::to_path_buf), dump_traffic: false };
    let hist = run_policy(&thz_cfg, &mut env, policy.as_mut(), &opts)?;
    replay_bands(&thz_cfg, &env, &hist, bands)
}
