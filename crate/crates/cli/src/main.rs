use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hgrl_cli::config::{load_config, RunConfig};
use hgrl_cli::plot::{render_rewards, render_trajectories};
use hgrl_cli::records::{read_csv, LogRow, TrajectoryRecord, LOG_HEADER, TRAJECTORY_HEADER};
use hgrl_cli::run::{inspect_graph, run_eval, run_train};

#[derive(Parser)]
#[command(name = "hgrl", about = "Hierarchical graph RL for highway lane changing and car following")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (defaults to `out_dir` from the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key=value` override; keys are dotted config paths or
    /// graph_mode / network_kind / head_agg.
    #[arg(long = "toggle", value_name = "KEY=VALUE")]
    toggles: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<(RunConfig, u64, PathBuf)> {
        let cfg = load_config(self.config.as_deref(), &self.toggles)?;
        let seed = self.seed.unwrap_or(cfg.seed);
        let out = self.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
        Ok((cfg, seed, out))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train both agents; writes train_log.csv and checkpoints.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Greedy evaluation of a checkpoint directory.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Directory holding lane_q.params, actor.params and critic.params;
        /// random-init networks when omitted.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Print the multilevel graph snapshot after some ticks of lane keeping.
    InspectGraph {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        ticks: u64,
    },
    /// Render rewards.svg and trajectories.svg from a run directory.
    Plot {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        window: usize,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Train { common, episodes } => {
            let (mut cfg, seed, out) = common.load()?;
            if let Some(n) = episodes {
                cfg.train.episodes = n;
            }
            let run = run_train(&cfg, seed, &out)?;
            println!("trained {} episodes; log {}", run.logs.len(), run.log_path.display());
        }
        Command::Eval { common, checkpoint, episodes } => {
            let (cfg, seed, out) = common.load()?;
            let n = episodes.unwrap_or(cfg.eval_episodes);
            let report = run_eval(&cfg, seed, checkpoint.as_deref(), n, &out)?;
            print!("{}", toml::to_string(&report.summary)?);
        }
        Command::InspectGraph { common, ticks } => {
            let (cfg, seed, out) = common.load()?;
            let text = toml::to_string(&inspect_graph(&cfg, seed, ticks)?)?;
            if common.out.is_some() {
                fs::create_dir_all(&out)?;
                fs::write(out.join("graph.toml"), &text)?;
            }
            print!("{text}");
        }
        Command::Plot { out, window } => {
            let log = out.join("train_log.csv");
            let traj = out.join("eval_trajectories.csv");
            if !log.exists() && !traj.exists() {
                bail!("{} holds neither train_log.csv nor eval_trajectories.csv", out.display());
            }
            if log.exists() {
                let rows: Vec<LogRow> = read_csv(fs::File::open(&log)?, LOG_HEADER).context("train log")?;
                if rows.is_empty() {
                    bail!("training log is empty");
                }
                fs::write(out.join("rewards.svg"), render_rewards(&rows, window))?;
            }
            if traj.exists() {
                let rows: Vec<TrajectoryRecord> = read_csv(fs::File::open(&traj)?, TRAJECTORY_HEADER).context("trajectories")?;
                fs::write(out.join("trajectories.svg"), render_trajectories(&rows, 3))?;
            }
        }
    }
    Ok(())
}
