use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use terasat::harness::{
    aggregate, compare_bands, dump_topology, link_budget, run_seed, seed_dir, ExperimentConfig, PolicyKind, RunOptions,
};
use terasat::link::BandPreset;
use terasat::Result;

#[derive(Parser)]
#[command(name = "terasat", version, about = "LEO edge-computing simulator and GCN actor-critic trainer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    policy: Option<PolicyKind>,
    /// One seed or a comma-separated list.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seed: Vec<u64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the per-source task counts as traffic.csv.
    #[arg(long)]
    dump_traffic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train (or run a fixed policy) and write metrics, losses and checkpoints.
    Train(Common),
    /// Deterministic rollout, optionally from a checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Replay one rollout's allocations under the THz, Ka and Ku rate models.
    CompareBands {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        policy: Option<PolicyKind>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the frozen involved topology as JSON.
    DumpTopology {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-band SINR and rate of a single ISL.
    Linkbudget {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1969.9)]
        distance_km: f64,
        #[arg(long, default_value_t = 16)]
        subarrays: usize,
        #[arg(long, default_value_t = 10.0)]
        power_w: f64,
        #[arg(long)]
        band: Option<BandPreset>,
        /// CSV output; JSON goes to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn out_dir(cfg: &ExperimentConfig, out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| cfg.output_dir.clone().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("runs"))
}

fn write_json<T: serde::Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text + "\n")?;
        }
        None => std::io::Write::write_all(&mut std::io::stdout(), (text + "\n").as_bytes())?,
    }
    Ok(())
}

fn run(common: Common, train: bool, checkpoint: Option<PathBuf>) -> Result<()> {
    let mut cfg = load(common.config.as_deref())?;
    if let Some(p) = common.policy {
        cfg.policy = p;
    }
    if let Some(s) = common.steps {
        cfg.train.steps = s;
    }
    let out = out_dir(&cfg, common.out);
    let single = common.seed.len() == 1;
    let mut summaries = Vec::new();
    for &seed in &common.seed {
        let opts = RunOptions {
            steps: cfg.train.steps,
            train,
            out_dir: Some(if single { out.clone() } else { seed_dir(&out, cfg.policy, seed) }),
            checkpoint: checkpoint.clone(),
            dump_traffic: common.dump_traffic,
        };
        let (s, _) = run_seed(&cfg, seed, &opts)?;
        println!(
            "{} seed {}: U {:.3}  T_avg {:.1} ms  T_max {:.1} ms  ({:.1} ms/step, {} params)",
            s.policy,
            seed,
            s.converged_u,
            s.converged_t_avg_ms,
            s.converged_t_max_ms,
            s.wall_s_per_step * 1e3,
            s.param_count
        );
        summaries.push(s);
    }
    if !single {
        let a = aggregate(&out, &summaries)?;
        println!(
            "{} over {} seeds: U {:.3} +- {:.3}  T_avg {:.1} +- {:.1} ms",
            a.policy,
            a.seeds.len(),
            a.converged_u.mean,
            a.converged_u.std,
            a.converged_t_avg_ms.mean,
            a.converged_t_avg_ms.std
        );
    }
    println!("outputs in {}", out.display());
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(common) => run(common, true, None),
        Command::Eval { common, checkpoint } => run(common, false, checkpoint),
        Command::CompareBands { config, policy, checkpoint, seed, steps, out } => {
            let mut cfg = load(config.as_deref())?.with_seed(seed);
            if let Some(p) = policy {
                cfg.policy = p;
            }
            let rows = compare_bands(&cfg, checkpoint.as_deref(), steps, &BandPreset::ALL)?;
            for r in &rows {
                println!("{:<4} T_avg {:>12.3} ms  T_max {:>12.3} ms  U {:.3}", r.band, r.t_avg_ms, r.t_max_ms, r.u);
            }
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                let mut f = std::fs::File::create(dir.join("bands.csv"))?;
                std::io::Write::write_all(&mut f, format!("# config_hash={}\n", cfg.hash()).as_bytes())?;
                let mut w = csv::Writer::from_writer(f);
                for r in &rows {
                    w.serialize(r)?;
                }
                w.flush()?;
                write_json(Some(&dir.join("bands.json")), &rows)?;
            }
            Ok(())
        }
        Command::DumpTopology { config, seed, out } => {
            let cfg = load(config.as_deref())?.with_seed(seed);
            write_json(out.as_deref(), &dump_topology(&cfg)?)
        }
        Command::Linkbudget { config, distance_km, subarrays, power_w, band, out } => {
            let cfg = load(config.as_deref())?;
            let bands = band.map_or(BandPreset::ALL.to_vec(), |b| vec![b]);
            let rows = link_budget(&cfg, &bands, distance_km, subarrays, power_w)?;
            match out {
                Some(p) => {
                    let mut w = csv::Writer::from_path(&p)?;
                    for r in &rows {
                        w.serialize(r)?;
                    }
                    w.flush()?;
                    Ok(())
                }
                None => write_json(None, &rows),
            }
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(1))
        }
    }
}

