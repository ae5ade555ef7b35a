//! `frma` command line: analytic sweeps, simulations, pre-training,
//! fairness traces, and the gradient self-check.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use frma_harness::config::{ExperimentConfig, Scheme, CONFIG_ENV_VAR};
use frma_harness::experiment::{
    self, fairness_timeseries, gradient_check_suite, pretrain, run_experiment, run_frma_single,
    sweep_stations, write_fairness_csv, write_result_csv, write_round_csv,
    write_sweep_stations_csv, write_trace_csv, write_train_log_csv, TrialArtifacts,
};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "frma",
    version,
    about = "Slotted single-cell WLAN MAC simulator: DCF baselines, federated learned access, and the saturation-throughput model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    Basic,
    RtsCts,
    Frma,
    Analytic,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Basic => Scheme::Basic,
            SchemeArg::RtsCts => Scheme::RtsCts,
            SchemeArg::Frma => Scheme::Frma,
            SchemeArg::Analytic => Scheme::Analytic,
        }
    }
}

#[derive(Args, Debug)]
struct CommonOpts {
    /// Config file (TOML); falls back to $FRMA_CONFIG, then defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form saturation throughput for both DCF schemes over a range
    /// of station counts.
    AnalyticSweep {
        #[command(flatten)]
        common: CommonOpts,
        /// Smallest station count.
        #[arg(long, default_value_t = 1)]
        n_min: u32,
        /// Largest station count.
        #[arg(long, default_value_t = 30)]
        n_max: u32,
    },
    /// Monte-Carlo simulation of one scheme (or a scheme-by-station sweep
    /// with --n-list).
    Simulate {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        scheme: Option<SchemeArg>,
        #[arg(long)]
        trials: Option<u32>,
        #[arg(long)]
        duration_s: Option<f64>,
        /// Station count override.
        #[arg(long)]
        n: Option<usize>,
        /// Disable federated averaging for learned-access runs.
        #[arg(long)]
        no_fl: bool,
        /// Pretrained checkpoint: a .global.ckpt file or a pretrain output
        /// prefix with per-station files.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Comma-separated station counts; emits the full per-scheme sweep
        /// table instead of a single-scheme run.
        #[arg(long)]
        n_list: Option<String>,
        /// Per-slot trace CSV (single-trial runs only).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Federation round log CSV (single-trial frma runs only).
        #[arg(long)]
        fl_log: Option<PathBuf>,
        /// Per-station training log CSV prefix (single-trial frma runs
        /// only; writes <prefix>.station<i>.csv).
        #[arg(long)]
        train_log: Option<PathBuf>,
    },
    /// Train fresh learned-access stations and write checkpoints.
    Pretrain {
        #[command(flatten)]
        common: CommonOpts,
        /// Decision epochs to train for (reference schedule: 80000).
        #[arg(long, default_value_t = 80_000)]
        steps: u64,
        /// Checkpoint prefix; writes <prefix>.global.ckpt and
        /// <prefix>.station<i>.ckpt.
        #[arg(long)]
        out_prefix: PathBuf,
    },
    /// Windowed per-station throughput of one learned-access run.
    Fairness {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        duration_s: Option<f64>,
        #[arg(long)]
        no_fl: bool,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Window length in slots.
        #[arg(long, default_value_t = 1000)]
        window_slots: u64,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Compare backprop gradients against central finite differences.
    Gradcheck {
        /// Number of seeded networks.
        #[arg(long, default_value_t = 10)]
        seeds: u32,
        /// Probe states per network.
        #[arg(long, default_value_t = 10)]
        states: u32,
        /// Central-difference step.
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
        /// Check every <stride>-th parameter (1 = every parameter).
        #[arg(long, default_value_t = 10)]
        stride: usize,
    },
}

fn load_config(common: &CommonOpts) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::load(common.config.as_deref()).with_context(|| {
        format!(
            "loading config (flag: {:?}, ${CONFIG_ENV_VAR}: {:?})",
            common.config,
            std::env::var(CONFIG_ENV_VAR).ok()
        )
    })?;
    Ok(cfg)
}

fn write_output(out: &Option<PathBuf>, emit: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match out {
        Some(path) => {
            let mut file = std::fs::File::create(path)
                .with_context(|| format!("creating {}", path.display()))?;
            emit(&mut file)?;
            Ok(())
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            emit(&mut lock)
        }
    }
}

fn parse_n_list(text: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        out.push(part.parse::<usize>().with_context(|| format!("bad station count `{part}`"))?);
    }
    if out.is_empty() {
        bail!("--n-list needs at least one station count");
    }
    Ok(out)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::AnalyticSweep { common, n_min, n_max } => {
            let mut cfg = load_config(&common)?;
            apply_seed(&mut cfg, &common);
            if n_min == 0 || n_max < n_min {
                bail!("need 1 <= n-min <= n-max");
            }
            let rows = frma_core::analytic::sweep(n_min..=n_max, &cfg.phy, &cfg.backoff)?;
            write_output(&common.out, |w| {
                frma_core::analytic::write_sweep_csv(&rows, w)?;
                Ok(())
            })
        }
        Command::Simulate {
            common,
            scheme,
            trials,
            duration_s,
            n,
            no_fl,
            checkpoint,
            n_list,
            trace,
            fl_log,
            train_log,
        } => {
            let mut cfg = load_config(&common)?;
            apply_seed(&mut cfg, &common);
            if let Some(s) = scheme {
                cfg.scheme = s.into();
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(d) = duration_s {
                cfg.duration_s = d;
            }
            if let Some(n) = n {
                cfg.n_stations = n;
            }
            if no_fl {
                cfg.fl_enabled = false;
            }
            if checkpoint.is_some() {
                cfg.pretrain_checkpoint = checkpoint;
            }

            if let Some(list) = n_list {
                let ns = parse_n_list(&list)?;
                let rows = sweep_stations(&cfg, &ns)?;
                return write_output(&common.out, |w| {
                    write_sweep_stations_csv(&rows, w)?;
                    Ok(())
                });
            }

            let wants_artifacts = trace.is_some() || fl_log.is_some() || train_log.is_some();
            if wants_artifacts {
                if cfg.trials != 1 {
                    bail!("--trace/--fl-log/--train-log need --trials 1");
                }
                if cfg.scheme != Scheme::Frma && (fl_log.is_some() || train_log.is_some()) {
                    bail!("--fl-log/--train-log apply to the frma scheme");
                }
            }

            if wants_artifacts && cfg.scheme == Scheme::Frma {
                let artifacts = TrialArtifacts {
                    window_slots: None,
                    collect_train_log: train_log.is_some(),
                    collect_trace: trace.is_some(),
                };
                let out = run_frma_single(&cfg, 0, artifacts)?;
                if let Some(path) = &trace {
                    write_file(path, |w| write_trace_csv(&out.trace, w))?;
                }
                if let Some(path) = &fl_log {
                    write_file(path, |w| write_round_csv(&out.rounds, w))?;
                }
                if let Some(prefix) = &train_log {
                    for (i, log) in out.train_logs.iter().enumerate() {
                        let mut name = prefix.as_os_str().to_os_string();
                        name.push(format!(".station{i}.csv"));
                        write_file(Path::new(&name), |w| write_train_log_csv(log, w))?;
                    }
                }
                let row = experiment::ResultRow {
                    scheme: cfg.scheme,
                    n: cfg.n_stations,
                    trial: frma_harness::TrialTag::Trial(0),
                    aggregate_mbps: {
                        let (agg, _) = frma_core::channel::throughput(&out.metrics, &cfg.phy)?;
                        agg
                    },
                    per_station_mbps: frma_core::channel::throughput(&out.metrics, &cfg.phy)?.1,
                    jain: frma_core::channel::throughput(&out.metrics, &cfg.phy)
                        .ok()
                        .and_then(|(_, per)| frma_core::channel::jain_index(&per).ok()),
                    successes: Some(out.metrics.success_count as f64),
                    collisions: Some(out.metrics.collision_count as f64),
                    fl_rounds: Some(out.metrics.coordination_rounds as f64),
                };
                return write_output(&common.out, |w| {
                    write_result_csv(std::slice::from_ref(&row), w)?;
                    Ok(())
                });
            }

            if let Some(path) = &trace {
                // DCF trace path: rerun trial 0 with the callback attached.
                let events = trace_dcf_trial(&cfg)?;
                write_file(path, |w| write_trace_csv(&events, w))?;
            }
            let rows = run_experiment(&cfg)?;
            write_output(&common.out, |w| {
                write_result_csv(&rows, w)?;
                Ok(())
            })
        }
        Command::Pretrain { common, steps, out_prefix } => {
            let mut cfg = load_config(&common)?;
            apply_seed(&mut cfg, &common);
            cfg.scheme = Scheme::Frma;
            if steps < 80_000 {
                eprintln!(
                    "warning: {steps} pre-training steps is below the reference 80000-step schedule; expect a weaker model"
                );
            }
            let summary = pretrain(&cfg, steps, &out_prefix)?;
            println!(
                "pretrained {} stations for {} epochs ({:.3} s simulated): {} successes, {} collisions, {} federation rounds",
                cfg.n_stations,
                summary.epochs,
                summary.elapsed_us / 1e6,
                summary.successes,
                summary.collisions,
                summary.fl_rounds,
            );
            println!("global checkpoint: {}", summary.global_path.display());
            for path in &summary.station_paths {
                println!("station checkpoint: {}", path.display());
            }
            Ok(())
        }
        Command::Fairness { common, duration_s, no_fl, checkpoint, window_slots, n } => {
            let mut cfg = load_config(&common)?;
            apply_seed(&mut cfg, &common);
            cfg.scheme = Scheme::Frma;
            if let Some(d) = duration_s {
                cfg.duration_s = d;
            }
            if let Some(n) = n {
                cfg.n_stations = n;
            }
            if no_fl {
                cfg.fl_enabled = false;
            }
            if checkpoint.is_some() {
                cfg.pretrain_checkpoint = checkpoint;
            }
            let out = fairness_timeseries(&cfg, window_slots)?;
            eprintln!(
                "final-decile Jain index: {}",
                out.final_decile_jain.map(|j| format!("{j:.4}")).unwrap_or_else(|| "undefined".into())
            );
            write_output(&common.out, |w| {
                write_fairness_csv(&out.rows, cfg.n_stations, w)?;
                Ok(())
            })
        }
        Command::Gradcheck { seeds, states, eps, stride } => {
            let worst = gradient_check_suite(seeds, states, eps, stride);
            println!(
                "max relative gradient error over {seeds} networks x {states} states (eps {eps:e}, stride {stride}): {worst:.3e}"
            );
            if worst >= 1e-4 {
                bail!("gradient check failed: {worst:.3e} >= 1e-4");
            }
            Ok(())
        }
    }
}

fn apply_seed(cfg: &mut ExperimentConfig, common: &CommonOpts) {
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
}

fn write_file(path: &Path, emit: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let mut file =
        std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    emit(&mut file)?;
    Ok(())
}

fn trace_dcf_trial(cfg: &ExperimentConfig) -> Result<Vec<frma_core::channel::TraceEvent>> {
    use frma_core::channel::{run_stations, ChannelEngine, EngineTimings, StationPolicy};
    let scheme = match cfg.scheme {
        Scheme::Basic => frma_core::analytic::AccessScheme::Basic,
        Scheme::RtsCts => frma_core::analytic::AccessScheme::RtsCts,
        _ => bail!("--trace without --n-list applies to basic, rts-cts, or frma runs"),
    };
    let seed = frma_harness::seeds::trial_seed(cfg.master_seed, 0);
    let mut engine = ChannelEngine::new(EngineTimings::for_scheme(&cfg.phy, scheme), cfg.n_stations);
    let mut agents: Vec<Box<dyn StationPolicy>> = (0..cfg.n_stations)
        .map(|i| {
            Box::new(frma_core::dcf::BebAgent::new(
                cfg.backoff,
                frma_harness::seeds::sub_seed(seed, 200 + i as u64),
            )) as Box<dyn StationPolicy>
        })
        .collect();
    let mut events = Vec::new();
    let mut cb = |e: frma_core::channel::TraceEvent| events.push(e);
    run_stations(&mut engine, &mut agents, cfg.duration_us(), Some(&mut cb))?;
    Ok(events)
}
