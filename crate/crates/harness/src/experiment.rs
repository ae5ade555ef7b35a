//! Experiment orchestration: Monte-Carlo trials, pre-training, station
//! sweeps, fairness time series, and their CSV emission.
//!
//! Every run is deterministic in (config, master seed): trial seeds derive
//! from the master seed, trials execute as independent jobs (possibly in
//! parallel), and results merge in trial order so serial and parallel runs
//! emit identical bytes.

use crate::config::{ExperimentConfig, Scheme};
use crate::seeds::{sub_seed, trial_seed};
use frma_core::analytic::{self, AccessScheme};
use frma_core::channel::{
    jain_index, ps_to_us, throughput, ChannelEngine, EngineTimings, MetricsError, RunMetrics,
    StationPolicy, TraceEvent,
};
use frma_core::dcf::BebAgent;
use frma_core::fed::{FedConfig, FedCoordinator, FedRound};
use frma_core::frma::{
    run_frma, EpsilonSchedule, FrmaAgent, FrmaAgentConfig, FrmaRunError, FrmaRunLimits,
    TrainLogRow, WindowSnapshot,
};
use frma_core::qnn::{self, QnnWeights};
use rayon::prelude::*;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Analytic(#[from] analytic::AnalyticError),
    #[error(transparent)]
    Engine(#[from] frma_core::channel::EngineError),
    #[error(transparent)]
    Run(#[from] FrmaRunError),
    #[error(transparent)]
    Checkpoint(#[from] qnn::CheckpointError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Unsupported(String),
}

/// Floats in CSV cells carry 11 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.10e}")
}

fn fmt_count(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 9e15 {
        format!("{}", v as i64)
    } else {
        fmt_float(v)
    }
}

/// Which kind of row this is in the results table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialTag {
    /// One simulation trial (0-based index).
    Trial(u32),
    /// Mean over all trials of the run.
    Mean,
    /// Closed-form model value; no simulation fields.
    Model,
}

impl TrialTag {
    fn label(&self) -> String {
        match self {
            TrialTag::Trial(i) => i.to_string(),
            TrialTag::Mean => "mean".into(),
            TrialTag::Model => "model".into(),
        }
    }
}

/// One results row; the CSV header is [`RESULT_CSV_HEADER`].
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scheme: Scheme,
    pub n: usize,
    pub trial: TrialTag,
    pub aggregate_mbps: f64,
    pub per_station_mbps: Vec<f64>,
    pub jain: Option<f64>,
    pub successes: Option<f64>,
    pub collisions: Option<f64>,
    pub fl_rounds: Option<f64>,
}

pub const RESULT_CSV_HEADER: &str =
    "scheme,n,trial,aggregate_mbps,jain,successes,collisions,fl_rounds,per_station_mbps";

pub fn write_result_csv(rows: &[ResultRow], out: &mut (impl Write + ?Sized)) -> std::io::Result<()> {
    writeln!(out, "{RESULT_CSV_HEADER}")?;
    for row in rows {
        let opt = |v: &Option<f64>| v.map(fmt_count).unwrap_or_default();
        let per_station =
            row.per_station_mbps.iter().map(|v| fmt_float(*v)).collect::<Vec<_>>().join(";");
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            row.scheme.label(),
            row.n,
            row.trial.label(),
            fmt_float(row.aggregate_mbps),
            row.jain.map(fmt_float).unwrap_or_default(),
            opt(&row.successes),
            opt(&row.collisions),
            opt(&row.fl_rounds),
            per_station,
        )?;
    }
    Ok(())
}

fn row_from_metrics(
    cfg: &ExperimentConfig,
    trial: u32,
    metrics: &RunMetrics,
) -> Result<ResultRow, ExperimentError> {
    let (aggregate, per_station) = throughput(metrics, &cfg.phy)?;
    let jain = jain_index(&per_station).ok();
    Ok(ResultRow {
        scheme: cfg.scheme,
        n: cfg.n_stations,
        trial: TrialTag::Trial(trial),
        aggregate_mbps: aggregate,
        per_station_mbps: per_station,
        jain,
        successes: Some(metrics.success_count as f64),
        collisions: Some(metrics.collision_count as f64),
        fl_rounds: (cfg.scheme == Scheme::Frma).then_some(metrics.coordination_rounds as f64),
    })
}

fn mean_row(cfg: &ExperimentConfig, rows: &[ResultRow]) -> ResultRow {
    let n = rows.len() as f64;
    let mean = |f: fn(&ResultRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let mut per_station = vec![0.0; cfg.n_stations];
    for row in rows {
        for (acc, v) in per_station.iter_mut().zip(&row.per_station_mbps) {
            *acc += v;
        }
    }
    for v in per_station.iter_mut() {
        *v /= n;
    }
    let jain = jain_index(&per_station).ok();
    let opt_mean = |f: fn(&ResultRow) -> Option<f64>| -> Option<f64> {
        rows.iter().map(f).try_fold(0.0, |acc, v| v.map(|v| acc + v)).map(|s| s / n)
    };
    ResultRow {
        scheme: cfg.scheme,
        n: cfg.n_stations,
        trial: TrialTag::Mean,
        aggregate_mbps: mean(|r| r.aggregate_mbps),
        per_station_mbps: per_station,
        jain,
        successes: opt_mean(|r| r.successes),
        collisions: opt_mean(|r| r.collisions),
        fl_rounds: opt_mean(|r| r.fl_rounds),
    }
}

/// Run the configured experiment and return per-trial rows plus a mean row
/// (simulated schemes), or the single model row (analytic scheme).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, ExperimentError> {
    match cfg.scheme {
        Scheme::Analytic => {
            let r = analytic::normalized_throughput(
                cfg.n_stations as u32,
                &cfg.phy,
                &cfg.backoff,
                AccessScheme::Basic,
            )?;
            Ok(vec![ResultRow {
                scheme: cfg.scheme,
                n: cfg.n_stations,
                trial: TrialTag::Model,
                aggregate_mbps: r.throughput_mbps,
                per_station_mbps: vec![r.throughput_mbps / cfg.n_stations as f64; cfg.n_stations],
                jain: Some(1.0),
                successes: None,
                collisions: None,
                fl_rounds: None,
            }])
        }
        Scheme::Basic | Scheme::RtsCts => {
            let mut rows = (0..cfg.trials)
                .into_par_iter()
                .map(|trial| {
                    let metrics = run_dcf_trial(cfg, trial)?;
                    row_from_metrics(cfg, trial, &metrics)
                })
                .collect::<Result<Vec<_>, ExperimentError>>()?;
            rows.push(mean_row(cfg, &rows));
            Ok(rows)
        }
        Scheme::Frma => {
            let source = StationWeights::from_config(cfg)?;
            let mut rows = (0..cfg.trials)
                .into_par_iter()
                .map(|trial| {
                    let out = run_frma_trial(cfg, trial, &source, None)?;
                    row_from_metrics(cfg, trial, &out.metrics)
                })
                .collect::<Result<Vec<_>, ExperimentError>>()?;
            rows.push(mean_row(cfg, &rows));
            Ok(rows)
        }
    }
}

fn access_scheme(scheme: Scheme) -> Option<AccessScheme> {
    match scheme {
        Scheme::Basic => Some(AccessScheme::Basic),
        Scheme::RtsCts => Some(AccessScheme::RtsCts),
        _ => None,
    }
}

fn run_dcf_trial(cfg: &ExperimentConfig, trial: u32) -> Result<RunMetrics, ExperimentError> {
    let scheme = access_scheme(cfg.scheme).expect("dcf trial needs a dcf scheme");
    let seed = trial_seed(cfg.master_seed, u64::from(trial));
    let timings = EngineTimings::for_scheme(&cfg.phy, scheme);
    let mut engine = ChannelEngine::new(timings, cfg.n_stations);
    let mut agents: Vec<Box<dyn StationPolicy>> = (0..cfg.n_stations)
        .map(|i| {
            Box::new(BebAgent::new(cfg.backoff, sub_seed(seed, 200 + i as u64)))
                as Box<dyn StationPolicy>
        })
        .collect();
    Ok(frma_core::channel::run_stations(&mut engine, &mut agents, cfg.duration_us(), None)?)
}

/// Where learned-access stations get their initial weights.
pub enum StationWeights {
    /// Independent random initialization per station and trial.
    Fresh,
    /// One shared model (a `.global.ckpt` file).
    Global(QnnWeights),
    /// One model per station (`<prefix>.station<i>.ckpt` files).
    PerStation(Vec<QnnWeights>),
}

impl StationWeights {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self, ExperimentError> {
        match &cfg.pretrain_checkpoint {
            None => Ok(StationWeights::Fresh),
            Some(path) => Self::load(path, cfg.n_stations),
        }
    }

    /// A plain file is a shared global model; otherwise the path is treated
    /// as a pretrain output prefix with per-station files.
    pub fn load(path: &Path, n_stations: usize) -> Result<Self, ExperimentError> {
        if path.is_file() {
            return Ok(StationWeights::Global(qnn::load_checkpoint(path)?));
        }
        let station_path = |i: usize| station_ckpt_path(path, i);
        if (0..n_stations).all(|i| station_path(i).is_file()) {
            let mut weights = Vec::with_capacity(n_stations);
            for i in 0..n_stations {
                weights.push(qnn::load_checkpoint(&station_path(i))?);
            }
            return Ok(StationWeights::PerStation(weights));
        }
        Err(ExperimentError::Unsupported(format!(
            "checkpoint {} is neither a file nor a prefix with {} per-station files",
            path.display(),
            n_stations
        )))
    }

    fn weights_for(&self, trial_seed_value: u64, station: usize) -> QnnWeights {
        match self {
            StationWeights::Fresh => QnnWeights::init(sub_seed(trial_seed_value, 100 + station as u64)),
            StationWeights::Global(w) => w.clone(),
            StationWeights::PerStation(v) => v[station].clone(),
        }
    }

    fn pretrained(&self) -> bool {
        !matches!(self, StationWeights::Fresh)
    }
}

fn station_ckpt_path(prefix: &Path, station: usize) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(format!(".station{station}.ckpt"));
    PathBuf::from(s)
}

fn global_ckpt_path(prefix: &Path) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(".global.ckpt");
    PathBuf::from(s)
}

fn make_agents(
    cfg: &ExperimentConfig,
    seed: u64,
    source: &StationWeights,
    collect_training_log: bool,
) -> Vec<FrmaAgent> {
    // A converged checkpoint starts at the exploration floor; fresh weights
    // explore from the configured start.
    let epsilon = if source.pretrained() {
        EpsilonSchedule::at_floor(cfg.epsilon.min, cfg.epsilon.decay)
    } else {
        EpsilonSchedule::new(cfg.epsilon.start, cfg.epsilon.min, cfg.epsilon.decay)
    };
    let agent_cfg = FrmaAgentConfig {
        eta: cfg.eta,
        trainer: cfg.trainer,
        replay_capacity: cfg.replay_capacity,
        epsilon,
        collect_training_log,
    };
    (0..cfg.n_stations)
        .map(|i| {
            FrmaAgent::new(source.weights_for(seed, i), &agent_cfg, sub_seed(seed, 200 + i as u64))
        })
        .collect()
}

/// Everything produced by one learned-access trial.
pub struct FrmaTrialOutput {
    pub metrics: RunMetrics,
    pub windows: Vec<WindowSnapshot>,
    pub rounds: Vec<FedRound>,
    pub epochs: u64,
    pub train_logs: Vec<Vec<TrainLogRow>>,
    pub trace: Vec<TraceEvent>,
}

/// Extra artifacts to collect for a trial.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrialArtifacts {
    pub window_slots: Option<u64>,
    pub collect_train_log: bool,
    pub collect_trace: bool,
}

fn run_frma_trial(
    cfg: &ExperimentConfig,
    trial: u32,
    source: &StationWeights,
    artifacts: Option<TrialArtifacts>,
) -> Result<FrmaTrialOutput, ExperimentError> {
    let artifacts = artifacts.unwrap_or_default();
    let seed = trial_seed(cfg.master_seed, u64::from(trial));
    let timings = EngineTimings::for_learned_access(&cfg.phy);
    let mut engine = ChannelEngine::new(timings, cfg.n_stations);
    let mut agents = make_agents(cfg, seed, source, artifacts.collect_train_log);
    let mut coordinator = cfg.fl_enabled.then(|| {
        FedCoordinator::new(FedConfig {
            period: cfg.fed.period,
            trigger: cfg.fed.trigger,
            overhead_us: cfg.fed.overhead_us,
        })
    });

    let limits = FrmaRunLimits { duration_us: Some(cfg.duration_us()), max_epochs: None };
    let mut trace = Vec::new();
    let mut trace_cb = |e: TraceEvent| trace.push(e);
    let out = run_frma(
        &mut engine,
        &mut agents,
        coordinator.as_mut(),
        &limits,
        artifacts.window_slots,
        artifacts.collect_trace.then_some(&mut trace_cb as &mut dyn FnMut(TraceEvent)),
    )?;

    Ok(FrmaTrialOutput {
        metrics: out.metrics,
        windows: out.windows,
        rounds: coordinator.map(|c| c.log().to_vec()).unwrap_or_default(),
        epochs: out.epochs,
        train_logs: agents.iter_mut().map(|a| a.take_train_log()).collect(),
        trace,
    })
}

/// Run one learned-access trial with artifact collection; used by the CLI
/// for traces and logs and by the fairness pipeline.
pub fn run_frma_single(
    cfg: &ExperimentConfig,
    trial: u32,
    artifacts: TrialArtifacts,
) -> Result<FrmaTrialOutput, ExperimentError> {
    let source = StationWeights::from_config(cfg)?;
    run_frma_trial(cfg, trial, &source, Some(artifacts))
}

/// Summary of a pre-training run.
#[derive(Debug, Clone)]
pub struct PretrainSummary {
    pub epochs: u64,
    pub elapsed_us: f64,
    pub successes: u64,
    pub collisions: u64,
    pub fl_rounds: u64,
    pub global_path: PathBuf,
    pub station_paths: Vec<PathBuf>,
}

/// Train `cfg.n_stations` fresh stations for `steps` decision epochs and
/// write per-station checkpoints plus their federated average.
pub fn pretrain(
    cfg: &ExperimentConfig,
    steps: u64,
    out_prefix: &Path,
) -> Result<PretrainSummary, ExperimentError> {
    let seed = trial_seed(cfg.master_seed, 0);
    let timings = EngineTimings::for_learned_access(&cfg.phy);
    let mut engine = ChannelEngine::new(timings, cfg.n_stations);
    let mut agents = make_agents(cfg, seed, &StationWeights::Fresh, false);
    let mut coordinator = cfg.fl_enabled.then(|| FedCoordinator::new(cfg.fed));

    let limits = FrmaRunLimits { duration_us: None, max_epochs: Some(steps) };
    let out = run_frma(&mut engine, &mut agents, coordinator.as_mut(), &limits, None, None)?;

    if let Some(parent) = out_prefix.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let snapshots: Vec<QnnWeights> = agents.iter().map(|a| a.snapshot_weights()).collect();
    let global = frma_core::fed::aggregate(&snapshots)
        .map_err(|e| ExperimentError::Unsupported(e.to_string()))?;
    let global_path = global_ckpt_path(out_prefix);
    qnn::save_checkpoint(&global_path, &global)?;
    let mut station_paths = Vec::with_capacity(agents.len());
    for (i, snapshot) in snapshots.iter().enumerate() {
        let path = station_ckpt_path(out_prefix, i);
        qnn::save_checkpoint(&path, snapshot)?;
        station_paths.push(path);
    }
    Ok(PretrainSummary {
        epochs: out.epochs,
        elapsed_us: out.metrics.elapsed_us(),
        successes: out.metrics.success_count,
        collisions: out.metrics.collision_count,
        fl_rounds: out.metrics.coordination_rounds,
        global_path,
        station_paths,
    })
}

/// One row of the station sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepStationRow {
    pub scheme: String,
    pub n: usize,
    pub aggregate_mbps: f64,
}

pub const SWEEP_STATIONS_CSV_HEADER: &str = "scheme,n,aggregate_mbps";

pub fn write_sweep_stations_csv(
    rows: &[SweepStationRow],
    out: &mut (impl Write + ?Sized),
) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_STATIONS_CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{},{},{}", row.scheme, row.n, fmt_float(row.aggregate_mbps))?;
    }
    Ok(())
}

/// Model and trial-averaged simulated throughput for every scheme at every
/// station count in `n_list`.
pub fn sweep_stations(
    cfg: &ExperimentConfig,
    n_list: &[usize],
) -> Result<Vec<SweepStationRow>, ExperimentError> {
    if n_list.is_empty() {
        return Err(ExperimentError::Unsupported("empty station list".into()));
    }
    let mut rows = Vec::new();
    for &n in n_list {
        for (label, scheme) in
            [("analytic-basic", AccessScheme::Basic), ("analytic-rts-cts", AccessScheme::RtsCts)]
        {
            let r = analytic::normalized_throughput(n as u32, &cfg.phy, &cfg.backoff, scheme)?;
            rows.push(SweepStationRow { scheme: label.into(), n, aggregate_mbps: r.throughput_mbps });
        }
        for (label, scheme) in
            [("sim-basic", Scheme::Basic), ("sim-rts-cts", Scheme::RtsCts), ("frma", Scheme::Frma)]
        {
            let mut sub = cfg.clone();
            sub.scheme = scheme;
            sub.n_stations = n;
            let result_rows = run_experiment(&sub)?;
            let mean = result_rows
                .iter()
                .find(|r| r.trial == TrialTag::Mean)
                .expect("simulated schemes emit a mean row");
            rows.push(SweepStationRow { scheme: label.into(), n, aggregate_mbps: mean.aggregate_mbps });
        }
    }
    Ok(rows)
}

/// One fairness window: per-station throughput inside the window.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessRow {
    pub window: u64,
    pub slot: u64,
    pub window_elapsed_us: f64,
    pub jain: Option<f64>,
    pub per_station_mbps: Vec<f64>,
}

pub struct FairnessOutput {
    pub rows: Vec<FairnessRow>,
    pub final_decile_jain: Option<f64>,
    pub metrics: RunMetrics,
    pub fl_rounds: u64,
}

pub fn fairness_csv_header(n_stations: usize) -> String {
    let stations: Vec<String> = (0..n_stations).map(|i| format!("station_{i}")).collect();
    format!("window,slot,window_elapsed_us,jain,{}", stations.join(","))
}

pub fn write_fairness_csv(
    rows: &[FairnessRow],
    n_stations: usize,
    out: &mut (impl Write + ?Sized),
) -> std::io::Result<()> {
    writeln!(out, "{}", fairness_csv_header(n_stations))?;
    for row in rows {
        let stations =
            row.per_station_mbps.iter().map(|v| fmt_float(*v)).collect::<Vec<_>>().join(",");
        writeln!(
            out,
            "{},{},{},{},{}",
            row.window,
            row.slot,
            fmt_float(row.window_elapsed_us),
            row.jain.map(fmt_float).unwrap_or_default(),
            stations,
        )?;
    }
    Ok(())
}

/// Windowed per-station throughput for one learned-access run, plus the
/// Jain index over the final tenth of the run.
pub fn fairness_timeseries(
    cfg: &ExperimentConfig,
    window_slots: u64,
) -> Result<FairnessOutput, ExperimentError> {
    if cfg.scheme != Scheme::Frma {
        return Err(ExperimentError::Unsupported(
            "fairness time series applies to the frma scheme".into(),
        ));
    }
    if window_slots == 0 {
        return Err(ExperimentError::Unsupported("window must be at least one slot".into()));
    }
    let artifacts = TrialArtifacts { window_slots: Some(window_slots), ..Default::default() };
    let out = run_frma_single(cfg, 0, artifacts)?;

    let rate = cfg.phy.data_rate_mbps;
    let rows: Vec<FairnessRow> = out
        .windows
        .iter()
        .map(|w| {
            let per_station: Vec<f64> = w
                .per_station_delta_ps
                .iter()
                .map(|&p| {
                    if w.elapsed_delta_ps == 0 {
                        0.0
                    } else {
                        p as f64 / w.elapsed_delta_ps as f64 * rate
                    }
                })
                .collect();
            FairnessRow {
                window: w.window,
                slot: w.slot,
                window_elapsed_us: ps_to_us(w.elapsed_delta_ps),
                jain: jain_index(&per_station).ok(),
                per_station_mbps: per_station,
            }
        })
        .collect();

    let duration_slots = frma_core::channel::us_to_ps(cfg.duration_us()) / frma_core::channel::us_to_ps(cfg.phy.slot_us);
    let decile_start = duration_slots - duration_slots / 10;
    let mut decile_payload = vec![0u64; cfg.n_stations];
    for w in out.windows.iter().filter(|w| w.slot > decile_start) {
        for (acc, &p) in decile_payload.iter_mut().zip(&w.per_station_delta_ps) {
            *acc += p;
        }
    }
    let decile_f: Vec<f64> = decile_payload.iter().map(|&p| p as f64).collect();
    let final_decile_jain = jain_index(&decile_f).ok();

    Ok(FairnessOutput {
        rows,
        final_decile_jain,
        metrics: out.metrics,
        fl_rounds: out.rounds.len() as u64,
    })
}

/// Largest relative error between backprop and central finite differences
/// over freshly seeded networks and random probe states.
pub fn gradient_check_suite(seeds: u32, states_per_seed: u32, eps: f64, stride: usize) -> f64 {
    use rand::{Rng, SeedableRng};
    let mut worst = 0.0f64;
    for seed in 0..seeds {
        let mut net = QnnWeights::init(9_000 + u64::from(seed));
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(77_000 + u64::from(seed));
        for state_idx in 0..states_per_seed {
            let mut state = [0.0f64; qnn::STATE_DIM];
            for v in state.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let offset = (seed as usize + state_idx as usize) % stride.max(1);
            for action in 0..qnn::ACTION_COUNT {
                let err =
                    qnn::gradient_check(&mut net, &state, action, eps, stride.max(1), offset);
                worst = worst.max(err);
            }
        }
    }
    worst
}

/// Round log CSV (`round,slot,elapsed_us,participants`).
pub fn write_round_csv(rounds: &[FedRound], out: &mut (impl Write + ?Sized)) -> std::io::Result<()> {
    writeln!(out, "round,slot,elapsed_us,participants")?;
    for r in rounds {
        writeln!(out, "{},{},{},{}", r.round, r.slot, fmt_float(ps_to_us(r.elapsed_ps)), r.participants)?;
    }
    Ok(())
}

/// Per-slot trace CSV (`slot,event,stations,elapsed_us`).
pub fn write_trace_csv(events: &[TraceEvent], out: &mut (impl Write + ?Sized)) -> std::io::Result<()> {
    writeln!(out, "slot,event,stations,elapsed_us")?;
    for e in events {
        let stations =
            e.stations.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(";");
        writeln!(out, "{},{},{},{}", e.slot, e.kind.label(), stations, fmt_float(ps_to_us(e.elapsed_ps)))?;
    }
    Ok(())
}

/// Per-station training log CSV (`step,epsilon,loss,reward_mean`).
pub fn write_train_log_csv(rows: &[TrainLogRow], out: &mut (impl Write + ?Sized)) -> std::io::Result<()> {
    writeln!(out, "step,epsilon,loss,reward_mean")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.step,
            fmt_float(r.epsilon),
            fmt_float(r.loss),
            fmt_float(r.reward_mean)
        )?;
    }
    Ok(())
}
